#include <doctest.h>

#include "clayer/errors.hpp"
#include "clayer/profile1d.hpp"

#include <cmath>

using namespace clayer::profile1d;

namespace {

// p = 2 has the closed form w = 3 sech^2(x/sqrt 2); its linearization is a Poschl-Teller well
// with ground state sech^3(x/sqrt 2) at eigenvalue 5/2.
double sech(double y) { return 1.0 / std::cosh(y); }

double bisect_turning(double p) {
  auto g = [p](double s) { return (1.0 + std::pow(s - 1.0, p + 1.0)) / (p + 1.0) - s; };
  double lo = 1.5, hi = 4.0;
  for (int k = 0; k < 200; ++k) {
    double m = 0.5 * (lo + hi);
    (g(m) < 0.0 ? lo : hi) = m;
  }
  return 0.5 * (lo + hi);
}

const ProfileSet& set_p2() {
  static ProfileSet ps = build_profile(2.0);
  return ps;
}
const ProfileSet& set_p4() {
  static ProfileSet ps = build_profile(4.0);
  return ps;
}

}  // namespace

TEST_CASE("turning point matches bisection of G") {
  for (double p : {1.5, 2.0, 3.0, 4.0, 5.0}) CHECK(turning_point(p) == doctest::Approx(bisect_turning(p)).epsilon(1e-13));
  CHECK(turning_point(2.0) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("G series and closed form agree across the switch") {
  for (double p : {2.0, 3.5}) {
    double s = 0.25;
    double closed = -std::expm1((p + 1.0) * std::log1p(-s)) / (p + 1.0) - s;
    CHECK(G(p, s) == doctest::Approx(closed).epsilon(1e-13));
  }
}

TEST_CASE("p = 2 profile against the sech^2 closed form") {
  const auto& ps = set_p2();
  double err = 0.0;
  for (int i = 0; i < ps.grid.n; ++i) {
    double x = ps.grid.x(i);
    double s = sech(x / std::sqrt(2.0));
    err = std::max(err, std::abs(ps.w[i] - 3.0 * s * s));
  }
  CHECK(err < 1e-10);
  CHECK(ps.w_center == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(ps.alpha_p == doctest::Approx(12.0).epsilon(1e-5));
  CHECK(ps.decay.alpha_int == doctest::Approx(12.0).epsilon(1e-6));
  CHECK(ps.C0 == doctest::Approx(24.0).epsilon(1e-6));
  CHECK(std::abs(ps.decay.alpha_int_plus) < 1e-8);
  CHECK(ps.lambda0 == doctest::Approx(2.5).epsilon(1e-6));
  // Z against normalized sech^3
  double nz = 0.0;
  Eigen::VectorXd zr(ps.grid.n);
  for (int i = 0; i < ps.grid.n; ++i) zr[i] = std::pow(sech(ps.grid.x(i) / std::sqrt(2.0)), 3);
  nz = std::sqrt(ps.integrate(zr.cwiseAbs2()));
  CHECK((ps.Z - zr / nz).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("ODE residual and tail decay") {
  for (double p : {2.0, 3.0, 4.0, 5.0}) {
    ProfileSet ps = build_profile(p);
    INFO("p = " << p << " residual " << ode_residual(ps));
    // odd p leaves a kink of |1-w|^p at w = 1 that caps the eighth-order stencil
    CHECK(ode_residual(ps) < (std::fmod(p, 2.0) == 0.0 || p > 4.0 ? 1e-8 : 1e-7));
    CHECK(ps.decay.rel_gap < 1e-4);
    CHECK(ps.lambda0 > 0.0);
    CHECK(ps.C0 == doctest::Approx(2.0 * ps.decay.alpha_int).epsilon(1e-10));
  }
}

TEST_CASE("profile identities hold for p = 4") {
  const auto& ps = set_p4();
  for (const auto& c : verify_profile_identities(ps)) {
    INFO(c.name << " lhs=" << c.lhs << " rhs=" << c.rhs);
    CHECK(std::abs(c.residual()) < 1e-6);
  }
}

TEST_CASE("companions are even and orthogonal to w_x") {
  const auto& ps = set_p4();
  const int n = ps.grid.n;
  auto parity = [n](const Eigen::VectorXd& f, double sign) {
    double a = 0.0;
    for (int i = 0; i < n; ++i) a = std::max(a, std::abs(f[i] - sign * f[n - 1 - i]));
    return a / (1.0 + f.cwiseAbs().maxCoeff());
  };
  CHECK(parity(ps.w0, -1.0) < 1e-9);
  CHECK(parity(ps.w1, -1.0) < 1e-9);
  CHECK(parity(ps.w2, 1.0) < 1e-12);
  CHECK(parity(ps.w3, 1.0) < 1e-12);
  CHECK(parity(ps.Z, 1.0) < 1e-8);
  CHECK((ps.Z.segment(1, n - 2).array() > 0.0).all());
  CHECK(std::abs(ps.integrate(ps.w0.cwiseProduct(ps.wx))) < 1e-9);
  CHECK(std::abs(ps.integrate(ps.w1.cwiseProduct(ps.wx))) < 1e-9);
}

TEST_CASE("quintic Hermite interpolation reproduces w between nodes") {
  const auto& ps = set_p2();
  for (double x : {0.013, 0.77, -1.9, 4.123}) {
    double v, vx, vxx;
    ps.eval(ps.w, ps.wx, ps.wxx, x, v, vx, vxx);
    double s = sech(x / std::sqrt(2.0));
    CHECK(v == doctest::Approx(3.0 * s * s).epsilon(1e-9));
    CHECK(vxx == doctest::Approx(1.0 - std::pow(1.0 - 3.0 * s * s, 2)).epsilon(1e-6));
  }
  CHECK(ps.w_at(ps.grid.L + 1.0) == 0.0);
}

TEST_CASE("linearized solve enforces the solvability condition") {
  const auto& ps = set_p4();
  CHECK_THROWS_AS(solve_linearized(ps, ps.wx), clayer::ValidationError);
  CHECK_THROWS_AS(ProfileGrid::with(10.0, 100), clayer::ValidationError);
  CHECK_THROWS_AS(solve_profile(4.0, ProfileGrid::with(3.0, 401)), clayer::NumericalError);
}

TEST_CASE("p below 2: the quadrature defect of the Fredholm condition shrinks under refinement") {
  // |w-1|^{p-2}(w-1) is not C1 at w = 1, so the trapezoid rule loses order there
  ProfileSet coarse = build_profile(1.5, ProfileGrid::make(1.5, 4001));
  ProfileSet fine = build_profile(1.5, ProfileGrid::make(1.5, 16001));
  CHECK(coarse.fredholm_defect < 1e-3);
  CHECK(fine.fredholm_defect < 0.2 * coarse.fredholm_defect);
  CHECK(fine.lambda0 > 0.0);
  CHECK(std::abs(fine.integrate(fine.w0.cwiseProduct(fine.wx))) < 1e-9);
  CHECK(set_p4().fredholm_defect < 1e-8);
  CHECK(set_p2().fredholm_defect < 1e-12);
}
