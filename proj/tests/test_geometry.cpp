#include <doctest.h>

#include "clayer/errors.hpp"
#include "clayer/geometry.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace clayer;
using namespace clayer::geometry;

namespace {

constexpr double kPi = std::numbers::pi;

ScalarField q_field(double p) { return ScalarField::power(ScalarField::bessel_disk(), 1.0 / p); }

BuildOptions opts(double p) {
  BuildOptions o;
  o.p = p;
  o.delta0 = 0.1;
  return o;
}

VectorXd random_trig(const CurveGeometry& g, std::mt19937& rng, int modes, double amp) {
  std::normal_distribution<double> N;
  VectorXd h = VectorXd::Zero(g.m);
  for (int k = 0; k <= modes; ++k) {
    double a = N(rng), b = N(rng);
    for (int i = 0; i < g.m; ++i) {
      double th = 2.0 * kPi * k * g.s[i] / g.length;
      h[i] += amp * (a * std::cos(th) + b * std::sin(th)) / (1.0 + k * k);
    }
  }
  return h;
}

}  // namespace

TEST_CASE("arclength reparametrization of an ellipse") {
  Curve c = arclength(Curve::ellipse({0.1, 0.0}, 0.5, 0.3, 128, 0.4));
  VectorXd xt = periodic::diff(c.x, 1.0), yt = periodic::diff(c.y, 1.0);
  VectorXd sp = (xt.cwiseAbs2() + yt.cwiseAbs2()).cwiseSqrt();
  CHECK((sp.array() - sp.mean()).abs().maxCoeff() < 1e-10 * sp.mean());
  // Ramanujan's second approximation is accurate to ~1e-7 relative for this eccentricity
  double a = 0.5, b = 0.3, hh = std::pow((a - b) / (a + b), 2);
  double perim = kPi * (a + b) * (1 + 3 * hh / (10 + std::sqrt(4 - 3 * hh)));
  CHECK(sp.mean() == doctest::Approx(perim).epsilon(1e-6));
}

TEST_CASE("unit-circumference circle with A = I") {
  const double R = 1.0 / (2.0 * kPi);
  auto g = build_curve(Curve::circle({0, 0}, R, 64), MatrixField::identity(), ScalarField::constant(1.0, [](const Vec2&) { return true; }),
                       opts(4.0));
  CHECK(g.length == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((g.nx - g.nux).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(g.c.cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g.a11.array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK((g.a31.array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(g.a22.cwiseAbs().maxCoeff() < 1e-10);
  CHECK((g.k.array() + 1.0 / R).abs().maxCoeff() < 1e-9);
  CHECK((g.b21.array() - 1.0 / R).abs().maxCoeff() < 1e-9);
  CHECK((g.b22.array() + 1.0 / (R * R)).abs().maxCoeff() < 1e-7);
  // constant field: K is the length, all t-derivatives vanish, so the residual is pure geometry
  CHECK(functional_K(g, MatrixField::identity(), ScalarField::constant(1.0, [](const Vec2&) { return true; })) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.U1.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("Frenet relations and the A* identity on an anisotropic field") {
  auto A = MatrixField::rotated_diagonal(1.0, 2.0, 0.3, 0.7);
  auto g = build_curve(Curve::ellipse({0.05, 0.02}, 0.5, 0.4, 128, 0.3), A, q_field(4.0), opts(4.0));
  VectorXd xss = periodic::diff(g.x, g.length, 2), nupx = periodic::diff(g.nux, g.length);
  CHECK((xss - g.k.cwiseProduct(g.nux)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((nupx + g.k.cwiseProduct(g.tx)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(g.ATn.cwiseAbs().maxCoeff() < 1e-10 * g.length);
  CHECK(((g.nx.cwiseAbs2() + g.ny.cwiseAbs2()).array() - 1.0).abs().maxCoeff() < 1e-14);
  CHECK(g.a11.minCoeff() > 0.0);
  CHECK(g.a31.minCoeff() > 0.0);
  CHECK(g.U2.minCoeff() > 0.0);
}

TEST_CASE("eigenvector direction: n equals nu on a coordinate axis") {
  auto A = MatrixField::diagonal(1.0, 4.0);
  auto g = build_curve(Curve::circle({0, 0}, 0.5, 64), A, q_field(4.0), opts(4.0));
  // node 0 sits at (R, 0), where nu = e1 is an eigenvector of A
  CHECK(g.nx[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(g.ny[0]) < 1e-12);
}

TEST_CASE("functional K: homogeneity and resampling invariance") {
  const double p = 4.0;
  auto A = MatrixField::rotated_diagonal(1.0, 1.5, 0.2, 0.5);
  auto psi = ScalarField::bessel_disk();
  Curve c = Curve::ellipse({0.0, 0.05}, 0.5, 0.45, 128, 0.1);
  double K1 = functional_K(c, A, ScalarField::power(psi, 1.0 / p), p);
  ScalarField psi3{"3psi", [psi](const Vec2& x) { return 3.0 * psi(x); }, psi.inside};
  double K3 = functional_K(c, A, ScalarField::power(psi3, 1.0 / p), p);
  CHECK(K3 / K1 == doctest::Approx(std::pow(3.0, (p + 3.0) / (2.0 * p))).epsilon(1e-12));
  Curve c2 = Curve::ellipse({0.0, 0.05}, 0.5, 0.45, 200, 0.1);
  CHECK(functional_K(c2, A, ScalarField::power(psi, 1.0 / p), p) == doctest::Approx(K1).epsilon(1e-10));
  CHECK(functional_K(arclength(c), A, ScalarField::power(psi, 1.0 / p), p) == doctest::Approx(K1).epsilon(1e-10));
}

TEST_CASE("first variation against finite differences of K") {
  const double p = 4.0, e = 1e-4;
  auto q = q_field(p);
  std::mt19937 rng(7);
  for (auto A : {MatrixField::identity(), MatrixField::rotated_diagonal(1.0, 1.6, 0.4, 0.9)}) {
    auto g = build_curve(Curve::ellipse({0.03, -0.02}, 0.5, 0.42, 128, 0.2), A, q, opts(p));
    CHECK(first_variation(g, VectorXd::Zero(g.m)).value == 0.0);
    for (int t = 0; t < 5; ++t) {
      VectorXd h = random_trig(g, rng, 5, 1.0);
      double fd = (functional_K(perturb(g, e * h), A, q, p) - functional_K(perturb(g, -e * h), A, q, p)) / (2 * e);
      double jv = first_variation(g, h).value;
      CHECK(std::abs(jv - fd) <= 5.0 * e * std::abs(fd));
    }
  }
}

TEST_CASE("second variation against the finite-difference Hessian") {
  const double p = 4.0;
  auto q = q_field(p);
  auto A = MatrixField::rotated_diagonal(1.0, 1.6, 0.4, 0.9);
  auto g = build_curve(Curve::ellipse({0.03, -0.02}, 0.5, 0.42, 128, 0.2), A, q, opts(p));
  std::mt19937 rng(11);
  for (int t = 0; t < 3; ++t) {
    VectorXd h = random_trig(g, rng, 4, 0.5);
    double e1 = fd_hessian(g, A, q, h, 2e-3), e2 = fd_hessian(g, A, q, h, 1e-3);
    double J = second_variation(g, h, h);
    // the FD error is O(e^2): halving e must shrink it about fourfold
    CHECK(std::abs(e2 - J) < 0.4 * std::abs(e1 - J) + 1e-8 * std::abs(J));
    CHECK(std::abs(e2 - J) < 1e-4 * std::abs(J));
    VectorXd k = random_trig(g, rng, 4, 0.5);
    CHECK(h.dot(second_variation_matrix(g) * k) == doctest::Approx(second_variation(g, h, k)).epsilon(1e-10));
  }
}

TEST_CASE("Jacobi operator substitution u = beta h") {
  const double p = 4.0;
  auto g = build_curve(Curve::ellipse({0.03, -0.02}, 0.5, 0.42, 128, 0.2), MatrixField::rotated_diagonal(1.0, 1.6, 0.4, 0.9),
                       q_field(p), opts(p));
  std::mt19937 rng(3);
  for (int t = 0; t < 4; ++t) {
    VectorXd h = random_trig(g, rng, 6, 1.0);
    VectorXd lhs = jacobi_apply(g, g.beta.cwiseProduct(h));
    VectorXd rhs = (g.alpha.array().pow(1.0 - p) * g.beta.array() * layer_operator_apply(g, h).array()).matrix();
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9 * lhs.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("critical circle of the radial Bessel field") {
  for (double p : {4.0, 5.0}) {
    const double Rs = critical_radius_bessel(p);
    auto q = q_field(p);
    CriticalOptions co;
    auto res = find_critical_curve(Curve::circle({0, 0}, 0.8 * Rs, 128), MatrixField::identity(), q, opts(p), co);
    const auto& g = res.curve;
    CHECK(g.length / (2 * kPi) == doctest::Approx(Rs).epsilon(1e-6));
    CHECK(res.defect_history.back() < 1e-6);
    // the scalar criticality condition for a circle, evaluated directly from q
    double lhs = 0.5 * (p + 3.0) * g.qt[0], rhs = -g.q[0] / Rs;
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-5));
    // closed form of U0 on a circle with A = I
    double U0 = std::pow(g.alpha[0], 1 - p) * ((p + 5) / ((p + 3) * Rs * Rs) - (p + 3) * g.qtt[0] / (2 * g.q[0]));
    CHECK(g.U0[0] == doctest::Approx(U0).epsilon(1e-6));
    CHECK(g.U0_positive);
    CHECK(g.U1.cwiseAbs().maxCoeff() < 1e-8);
    CHECK(jacobi_smallest_singular_value(g) > 1e-3);
    // Jacobi quadratic form equals the second variation on a critical curve
    VectorXd h(g.m);
    for (int i = 0; i < g.m; ++i) h[i] = std::cos(6 * kPi * g.s[i] / g.length) + 0.3 * std::sin(2 * kPi * g.s[i] / g.length);
    CHECK(jacobi_quadratic(g, h) == doctest::Approx(second_variation(g, h, h)).epsilon(1e-7));
    // restarting at the answer takes no Newton step
    auto again = find_critical_curve(g.samples(), MatrixField::identity(), q, opts(p), co);
    CHECK(again.iterations == 0);
  }
}

TEST_CASE("critical curve under a mildly anisotropic field is not a circle") {
  const double p = 4.0;
  auto A = MatrixField::sine_diagonal(0.1);
  auto q = q_field(p);
  auto res = find_critical_curve(Curve::circle({0, 0}, critical_radius_bessel(p), 128), A, q, opts(p));
  CHECK(res.defect_history.back() < 1e-5);
  const auto& g = res.curve;
  VectorXd r = (g.x.cwiseAbs2() + g.y.cwiseAbs2()).cwiseSqrt();
  CHECK(r.maxCoeff() - r.minCoeff() > 1e-2);
  VectorXd h = VectorXd::Ones(g.m) + 0.4 * g.nx;
  CHECK(jacobi_quadratic(g, h) == doctest::Approx(second_variation(g, h, h)).epsilon(1e-5));
}

TEST_CASE("validation errors") {
  auto q = q_field(4.0);
  Curve fig8{VectorXd(64), VectorXd(64)};
  for (int i = 0; i < 64; ++i) {
    double t = 2 * kPi * i / 64;
    fig8.x[i] = 0.4 * std::sin(t);
    fig8.y[i] = 0.3 * std::sin(2 * t);
  }
  CHECK_THROWS_AS(build_curve(fig8, MatrixField::identity(), q, opts(4.0)), ValidationError);
  BuildOptions wide = opts(4.0);
  wide.delta0 = 0.5;
  CHECK_THROWS_AS(build_curve(Curve::circle({0, 0}, 0.7, 64), MatrixField::identity(), q, wide), ValidationError);
  CHECK_THROWS_AS(MatrixField::sine_diagonal(1.5), ValidationError);
}
