#include <doctest.h>

#include "clayer/errors.hpp"
#include "clayer/periodic.hpp"
#include "clayer/toda.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace clayer;
using namespace clayer::toda;

namespace {

constexpr double kPi = std::numbers::pi;

// rho e^{2 rho} = 1 by bisection.
double lambert_half_w2() {
  double lo = 0.0, hi = 1.0;
  for (int k = 0; k < 200; ++k) {
    double mid = 0.5 * (lo + hi);
    (mid * std::exp(2.0 * mid) < 1.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Coefficients smooth_coeffs(int m, double period = 1.0) {
  Coefficients c;
  c.period = period;
  c.U2.resize(m);
  c.U1.resize(m);
  c.U0.resize(m);
  for (int i = 0; i < m; ++i) {
    double t = 2.0 * kPi * i / m;
    c.U2[i] = 1.0 + 0.3 * std::cos(t);
    c.U1[i] = 0.4 * std::sin(t) + 0.1 * std::cos(2 * t);
    c.U0[i] = 2.0 + 0.5 * std::sin(t + 0.3);
  }
  return c;
}

geometry::CurveGeometry critical_circle(double p, int m = 128) {
  double R = geometry::critical_radius_bessel(p);
  geometry::BuildOptions o;
  o.p = p;
  return geometry::build_curve(geometry::Curve::circle({0, 0}, R, m), MatrixField::identity(),
                               ScalarField::power(ScalarField::bessel_disk(), 1.0 / p), o);
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= x.size();
  my /= x.size();
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

}  // namespace

TEST_CASE("interaction distance rho") {
  // p alpha C0 = eps^2 at p = 4 reduces the equation to rho = e^{-2 rho}
  const double eps = 0.1;
  auto r = solve_rho(eps, 4.0, eps * eps / 4.0, 1.0);
  CHECK(r.rho == doctest::Approx(lambert_half_w2()).epsilon(1e-13));
  CHECK(r.rho == doctest::Approx(0.42630).epsilon(1e-5));
  CHECK(r.residual < 1e-14);

  const double p = 4.0, alpha = 18.01668, C0 = 2 * alpha;
  double prev_gap = INFINITY, prev_rho = 0.0;
  for (int m = 1; m <= 8; ++m) {
    auto s = solve_rho(std::pow(10.0, -m), p, alpha, C0);
    CHECK(s.residual < 1e-14);
    CHECK(s.rho > prev_rho);
    CHECK(std::abs(s.gap) < prev_gap);
    prev_gap = std::abs(s.gap);
    prev_rho = s.rho;
  }
  CHECK_THROWS_AS(solve_rho(1.5, p, alpha, C0), ValidationError);
}

TEST_CASE("Toda matrices") {
  for (int N = 2; N <= 12; ++N) {
    auto T = toda_matrices(N, 4.0);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(T.M);
    for (int k = 1; k < N; ++k) {
      double s = std::sin(k * kPi / (2.0 * N));
      CHECK(std::abs(es.eigenvalues()[k - 1] - 4 * s * s) < 1e-10);
    }
    CHECK((T.B * T.Binv - MatrixXd::Identity(N, N)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((T.Mhalf * T.Mhalf - T.M).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((T.D - T.D.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(T.Lambda.minCoeff() > 0.0);
  }
  auto T2 = toda_matrices(2, 4.0);
  CHECK(T2.Lambda[0] == doctest::Approx(2.0).epsilon(1e-14));
  auto T3 = toda_matrices(3, 4.0);
  Eigen::SelfAdjointEigenSolver<MatrixXd> e3(T3.M);
  CHECK(e3.eigenvalues()[0] == doctest::Approx(1.0));
  CHECK(e3.eigenvalues()[1] == doctest::Approx(3.0));
  CHECK_THROWS_AS(toda_matrices(0, 4.0), ValidationError);
}

TEST_CASE("leading layer profile") {
  const int m = 32;
  auto T2 = toda_matrices(2, 4.0);
  auto a = leading_layer_profile(T2, VectorXd::Constant(m, 2.0));
  CHECK(a.v.cwiseAbs().maxCoeff() < 1e-15);
  auto T3 = toda_matrices(3, 4.0);
  auto b = leading_layer_profile(T3, VectorXd::Constant(m, 2.0));
  CHECK(b.v(0, 0) == doctest::Approx(-0.5 * std::log(2.0)).epsilon(1e-14));
  CHECK(b.v(1, 5) == doctest::Approx(-0.34657).epsilon(1e-5));

  auto c = smooth_coeffs(m);
  for (int N = 2; N <= 6; ++N) {
    auto T = toda_matrices(N, 5.0);
    auto lp = leading_layer_profile(T, c.U0);
    CHECK(lp.defect < 1e-12);
    CHECK(lp.d.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
    MatrixXd stacked(N, m);
    stacked.topRows(N - 1) = lp.v;
    stacked.row(N - 1).setZero();
    CHECK((T.Binv * stacked - lp.d).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((v_from_d(lp.d) - stacked).cwiseAbs().maxCoeff() < 1e-12);
  }
  VectorXd bad = c.U0;
  bad[3] = -0.1;
  CHECK_THROWS_AS(leading_layer_profile(T3, bad), ValidationError);
}

TEST_CASE("B-conjugation and telescoping") {
  const int m = 64;
  auto c = smooth_coeffs(m);
  std::mt19937 rng(7);
  std::normal_distribution<double> nd;
  for (int N = 2; N <= 5; ++N) {
    auto T = toda_matrices(N, 4.0);
    MatrixXd d(N, m);
    for (int j = 0; j < N; ++j) {
      double a = nd(rng), b = nd(rng), e = nd(rng);
      for (int i = 0; i < m; ++i) {
        double t = 2 * kPi * i / m;
        d(j, i) = 0.5 * j + 0.3 * a + 0.2 * b * std::cos(t) + 0.1 * e * std::sin(2 * t);
      }
    }
    const double sigma = 0.2;
    MatrixXd v = T.B * d;
    MatrixXd lhs = Q_apply(T, c, sigma, v), rhs = T.B * R_apply(T, c, sigma, d);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(interaction(T, d).colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("periodic linear solver") {
  const int m = 64;
  auto c = Coefficients::constant(1.0, 0.0, 1.0, m);
  VectorXd g(m), exact(m);
  const double sigma = 0.3, mu = 1.7;
  for (int i = 0; i < m; ++i) {
    g[i] = std::cos(2 * kPi * i / m);
    exact[i] = g[i] / (4 * kPi * kPi * sigma - mu);
  }
  auto s = solve_periodic_linear(c, mu, sigma, g);
  CHECK((s.phi - exact).cwiseAbs().maxCoeff() < 1e-12);

  std::mt19937 rng(3);
  std::normal_distribution<double> nd;
  VectorXd rg(m);
  for (int i = 0; i < m; ++i) rg[i] = nd(rng);
  auto c2 = Coefficients::constant(1.3, 0.4, 0.8, m);
  auto s2 = solve_periodic_linear(c2, 0.9, 0.25, rg);
  CHECK(s2.residual < 1e-10);

  // resonant: mu / sigma equal to 4 pi^2
  CHECK_THROWS_AS(solve_periodic_linear(c, 4 * kPi * kPi * sigma, sigma, g), ResonanceError);

  // Weyl asymptotics of the periodic spectrum: lambda_j ~ 4 pi^2 j^2 / l1^2, each j twice
  auto cv = smooth_coeffs(256);
  double l1 = periodic::integrate(cv.U0.cwiseQuotient(cv.U2).cwiseSqrt(), 1.0);
  VectorXd spec = periodic_spectrum(cv);
  double worst5 = 0.0, worst20 = 0.0;
  for (int j = 5; j <= 20; ++j) {
    double w = 4 * kPi * kPi * j * j / (l1 * l1);
    double r = std::max(std::abs(spec[2 * j - 1] / w - 1), std::abs(spec[2 * j] / w - 1));
    if (j == 5) worst5 = r;
    if (j == 20) worst20 = r;
    CHECK(r < 0.02);
  }
  CHECK(worst20 < worst5);
}

TEST_CASE("layer profile refinement") {
  const int m = 64;
  // constant coefficients: the derivatives vanish and the first defect is sigma |U0 v1|
  {
    auto c = Coefficients::constant(1.0, 0.0, 3.0, m);
    auto T = toda_matrices(3, 4.0);
    const double sigma = 0.05;
    auto r = refine_layer_profile(1, T, c, sigma);
    auto lp = leading_layer_profile(T, c.U0);
    CHECK(r.defects[0] == doctest::Approx(sigma * l2_norm(3.0 * lp.v, 1.0)).epsilon(1e-12));
  }
  // period 4: the sigma-expansion is asymptotic once sigma |U2 d^2| is small
  auto c = smooth_coeffs(m, 4.0);
  for (int N : {2, 3, 4}) {
    auto T = toda_matrices(N, 4.0);
    for (int k = 1; k <= 3; ++k) {
      std::vector<double> sig{1.0 / 20, 1.0 / 40, 1.0 / 80}, def;
      for (double s : sig) def.push_back(refine_layer_profile(k, T, c, s).defects.back());
      CHECK(slope(sig, def) >= k - 0.2);
    }
  }
}

TEST_CASE("resonance gaps") {
  auto T = toda_matrices(2, 4.0);
  const double l1 = 2 * kPi;  // comparison lattice j^2
  std::vector<double> eps;
  for (int k = 0; k < 400; ++k) eps.push_back(0.1 * std::pow(0.995, k));
  auto rep = resonance_gaps(eps, T, l1, 10.0, 1.0);
  for (const auto& r : rep) {
    double L = std::abs(std::log(r.eps)), x = 2.0 * L, best = INFINITY;
    for (int j = 0; j * j <= x + 1; ++j) best = std::min(best, std::abs(x - j * j));
    bool outside = best > 1.0 / std::sqrt(L);
    CHECK((r.toda_gap_margin > 0.0) == outside);
  }
  // margins move continuously with eps
  for (size_t k = 1; k < rep.size(); ++k) {
    double L0 = std::abs(std::log(rep[k - 1].eps)), L1 = std::abs(std::log(rep[k].eps));
    CHECK(std::abs(rep[k].toda_gap_margin - rep[k - 1].toda_gap_margin) <= 2.0 * (L1 - L0) + 0.01);
  }
  std::vector<double> geo;
  for (int m = 1; m <= 30; ++m) geo.push_back(std::pow(2.0, -m));
  auto g = resonance_gaps(geo, T, l1, 10.0, 3.0);
  int passes = 0;
  for (const auto& r : g) passes += r.pass;
  CHECK(passes > 0);
  CHECK(passes < 30);
}

TEST_CASE("amplitude equation") {
  const int m = 128;
  const double eps = 0.047, lambda0 = 10.06813, cst = 0.7;
  VectorXd U2 = VectorXd::Constant(m, cst), h(m), exact(m);
  const double l2 = 1.0 / std::sqrt(cst);
  for (int i = 0; i < m; ++i) {
    double t = 2 * kPi * i / m;
    h[i] = std::cos(3 * t);
    exact[i] = h[i] / (lambda0 - eps * eps * cst * 4 * kPi * kPi * 9);
  }
  GapOptions o;
  o.lambda_star_4pi2 = true;
  o.c2 = 0.1;  // lambda* < 1 here, so c2 = 1 would exclude every eps
  auto a = amplitude_solve(eps, U2, lambda0, h, 1.0, l2, o);
  CHECK((a.e - exact).cwiseAbs().maxCoeff() < 1e-12);
  auto one = amplitude_solve(eps, U2, lambda0, VectorXd::Constant(m, lambda0), 1.0, l2, o);
  CHECK((one.e.array() - 1.0).abs().maxCoeff() < 1e-12);

  // exact resonance: eps^2 k^2 = lambda*
  const double ls = lambda_star(lambda0, l2, o);
  CHECK_THROWS_AS(amplitude_solve(std::sqrt(ls) / 7.0, U2, lambda0, h, 1.0, l2, o), ResonanceError);

  std::mt19937 rng(11);
  std::normal_distribution<double> nd;
  VectorXd U2v(m), hr = VectorXd::Zero(m);
  for (int i = 0; i < m; ++i) U2v[i] = 0.7 + 0.2 * std::sin(2 * kPi * i / m);
  for (int k = 1; k <= 8; ++k) {
    double a1 = nd(rng), b1 = nd(rng);
    for (int i = 0; i < m; ++i) hr[i] += (a1 * std::cos(2 * kPi * k * i / m) + b1 * std::sin(2 * kPi * k * i / m)) / k;
  }
  double l2v = periodic::integrate(U2v.cwiseSqrt().cwiseInverse(), 1.0);
  // admissible eps near 0.05 by the amplitude gap margin
  int solved = 0;
  for (double e = 0.05; e > 0.04; e -= 0.0007) {
    AmplitudeSolve ar;
    try {
      ar = amplitude_solve(e, U2v, lambda0, hr, 1.0, l2v, o);
    } catch (const ResonanceError&) {
      continue;
    }
    ++solved;
    CHECK(ar.residual < 1e-10);
    CHECK(ar.bound_ratio > 0.0);
    CHECK(ar.bound_ratio < 10.0);
  }
  CHECK(solved >= 3);
}

TEST_CASE("Jacobi-Toda residual") {
  auto g = critical_circle(4.0);
  ProfileConstants k{4.0, 18.01668, 2 * 18.01668, 5.77833, 10.06813, 0.3};
  auto c = Coefficients::from(g);
  const double eps = 0.03;
  auto rho = solve_rho(eps, k.p, k.alpha_p, k.C0).rho;

  // N = 1: no neighbours, the residual is the Jacobi part alone
  auto T1 = toda_matrices(1, 4.0);
  auto s1 = make_layer_state(g, T1, MatrixXd::Zero(0, g.m), eps, rho);
  auto r1 = jacobi_toda_residual(s1, g, k);
  VectorXd lin = eps * eps * g.alpha.array().pow(1 - k.p).matrix().cwiseProduct(g.beta).cwiseProduct(
                                 geometry::layer_operator_apply(g, s1.f.row(0).transpose()));
  CHECK((r1.r_position.row(0).transpose() - lin).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(r1.r_amplitude.cwiseAbs().maxCoeff() < 1e-14);

  for (int N : {2, 3}) {
    auto T = toda_matrices(N, 4.0);
    auto ref = refine_layer_profile(2, T, c, 1.0 / rho);
    auto s = make_layer_state(g, T, ref.v, eps, rho);
    auto r = jacobi_toda_residual(s, g, k);
    // the position equation with e = 0 is eps^2 rho R(d)
    MatrixXd R = R_apply(T, c, 1.0 / rho, s.d);
    CHECK((r.r_position / (eps * eps * rho) - R).cwiseAbs().maxCoeff() < 1e-8 * (1.0 + R.cwiseAbs().maxCoeff()));
    // reversing the layers flips the sign of the residual on a symmetric geometry
    auto sr = s;
    for (int j = 0; j < N; ++j) {
      sr.f.row(j) = -s.f.row(N - 1 - j);
      sr.fb.row(j) = -s.fb.row(N - 1 - j);
    }
    auto rr = jacobi_toda_residual(sr, g, k);
    for (int j = 0; j < N; ++j)
      CHECK((rr.r_position.row(j) + r.r_position.row(N - 1 - j)).cwiseAbs().maxCoeff() < 1e-10);
    // amplitudes from the interaction keep |e|_* small
    solve_amplitudes(s, g, k);
    CHECK(s.e.cwiseAbs().maxCoeff() < std::sqrt(eps));
  }
}
