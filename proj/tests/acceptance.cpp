// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Arguments, if given, select criteria by number.

#include "clayer/assembler.hpp"
#include "clayer/errors.hpp"
#include "clayer/field2d.hpp"
#include "clayer/geometry.hpp"
#include "clayer/periodic.hpp"
#include "clayer/profile1d.hpp"
#include "clayer/toda.hpp"

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace clayer;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double j01() { return boost::math::cyl_bessel_j_zero(0.0, 1); }

ScalarField q_field(double p) { return ScalarField::power(ScalarField::bessel_disk(), 1.0 / p); }

geometry::CurveGeometry circle_geometry(double p, double R, int m, double delta0) {
  geometry::BuildOptions o;
  o.p = p;
  o.delta0 = delta0;
  return geometry::build_curve(geometry::Curve::circle({0, 0}, R, m), MatrixField::identity(), q_field(p), o);
}

// Radius where a circle is critical for q = J0(j r)^{1/p}: (p+3) j R J1(jR) = 2p J0(jR).
double circle_radius_oracle(double p) {
  const double j = j01();
  auto f = [&](double R) {
    return (p + 3.0) * j * R * boost::math::cyl_bessel_j(1, j * R) - 2.0 * p * boost::math::cyl_bessel_j(0, j * R);
  };
  std::uintmax_t it = 200;
  auto r = boost::math::tools::toms748_solve(f, 0.05, 0.99, boost::math::tools::eps_tolerance<double>(52), it);
  return 0.5 * (r.first + r.second);
}

VectorXd random_trig(const geometry::CurveGeometry& g, std::mt19937& rng, int modes) {
  std::normal_distribution<double> N;
  VectorXd h = VectorXd::Zero(g.m);
  for (int k = 0; k <= modes; ++k) {
    double a = N(rng), b = N(rng);
    for (int i = 0; i < g.m; ++i) {
      double th = 2.0 * kPi * k * g.s[i] / g.length;
      h[i] += (a * std::cos(th) + b * std::sin(th)) / (1.0 + k * k);
    }
  }
  return h;
}

// Disk with the exact Bessel forcing and the critical circle of p = 4.
struct CriticalDisk {
  MatrixField A = MatrixField::identity();
  geometry::CurveGeometry g;
  field2d::EigenField ef;
  profile1d::ProfileSet ps;

  explicit CriticalDisk(double h) {
    g = circle_geometry(4.0, geometry::critical_radius_bessel(4.0), 256, 0.44);
    const double j = j01();
    ef = field2d::sampled_eigenfield(field2d::DomainGrid::disk({0, 0}, 1.0, h), A, ScalarField::bessel_disk(), j * j);
    ps = profile1d::build_profile(4.0);
  }

  assembler::SweepSetup setup(int N) const {
    assembler::SweepSetup s;
    s.ef = &ef;
    s.A = &A;
    s.g = &g;
    s.ps = &ps;
    s.N = N;
    return s;
  }
};

void profile_exactness(Outcome& o) {
  auto t0 = std::chrono::steady_clock::now();
  auto ps = profile1d::build_profile(2.0);
  const double t = seconds_since(t0);
  const double res = profile1d::ode_residual(ps);
  o.detail << "w(0) - 3 = " << ps.w_center - 3.0 << ", ODE residual " << res << ", " << t << " s. ";
  o.require(std::abs(ps.w_center - 3.0) < 1e-8, "w(0) = 3");
  o.require(res < 1e-8, "ODE residual < 1e-8");
  o.require(t < 1.0, "runtime < 1 s");
}

bool interaction_identity(const std::string& name) { return name.find("projection") != std::string::npos; }

void identity_suite(Outcome& o) {
  auto t0 = std::chrono::steady_clock::now();
  double worst_profile = 0.0, worst_interaction = 0.0;
  for (double p : {2.0, 3.0, 4.0, 5.0}) {
    // the closed-form checks converge at second order for odd p; p = 3 needs twice the default resolution
    auto ps = profile1d::build_profile(p, profile1d::ProfileGrid::make(p, 8001));
    for (const auto& c : profile1d::verify_profile_identities(ps)) {
      const double r = std::abs(c.residual());
      if (interaction_identity(c.name)) {
        worst_interaction = std::max(worst_interaction, r);
        o.require(r < 1e-5, c.name + " at p = " + std::to_string(p));
      } else {
        worst_profile = std::max(worst_profile, r);
        o.require(r < 1e-6, c.name + " at p = " + std::to_string(p));
      }
    }
  }
  const double t = seconds_since(t0);
  o.detail << "profile identities " << worst_profile << ", projection identities " << worst_interaction << ", " << t
           << " s. ";
  o.require(t < 10.0, "runtime < 10 s");
}

void decay_consistency(Outcome& o) {
  for (double p : {2.0, 3.0, 4.0, 5.0}) {
    auto ps = profile1d::build_profile(p);
    const auto& d = ps.decay;
    o.detail << "p=" << p << ": fit " << d.alpha_fit << ", kernel(e- - e+) " << d.alpha_int << " gap " << d.rel_gap
             << ", kernel(e+ + e-) " << d.alpha_int_plus << ", C0 " << ps.C0 << ", lambda0 " << ps.lambda0 << "; ";
    if (p == 2.0 || p == 4.0) o.require(d.rel_gap < 1e-4, "alpha gap < 1e-4 at p = " + std::to_string(p));
    o.require(ps.C0 > 0.0 && ps.lambda0 > 0.0, "C0 > 0 and lambda0 > 0");
  }
  o.detail << "sign convention: the (e^{-sqrt p t} - e^{sqrt p t}) kernel reproduces the fit, the symmetric one "
              "integrates an odd function to zero. ";
}

void geometry_variations(Outcome& o) {
  auto t0 = std::chrono::steady_clock::now();
  const double p = 4.0, e = 1e-4;
  auto A = MatrixField::rotated_diagonal(1.0, 1.6, 0.4, 0.9);
  auto q = q_field(p);
  geometry::BuildOptions bo;
  bo.p = p;
  bo.delta0 = 0.1;
  auto g = geometry::build_curve(geometry::Curve::ellipse({0.03, -0.02}, 0.5, 0.42, 128, 0.2), A, q, bo);
  std::mt19937 rng(20240611);
  double worst = 0.0;
  for (int t = 0; t < 5; ++t) {
    VectorXd h = random_trig(g, rng, 5);
    double fd = (geometry::functional_K(geometry::perturb(g, e * h), A, q, p) -
                 geometry::functional_K(geometry::perturb(g, -e * h), A, q, p)) /
                (2 * e);
    double rel = std::abs(geometry::first_variation(g, h).value - fd) / std::abs(fd);
    worst = std::max(worst, rel);
  }
  double subst = 0.0;
  for (int t = 0; t < 4; ++t) {
    VectorXd h = random_trig(g, rng, 6);
    VectorXd lhs = geometry::jacobi_apply(g, g.beta.cwiseProduct(h));
    VectorXd rhs = (g.alpha.array().pow(1.0 - p) * g.beta.array() * geometry::layer_operator_apply(g, h).array()).matrix();
    subst = std::max(subst, (lhs - rhs).cwiseAbs().maxCoeff() / lhs.cwiseAbs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  o.detail << "first variation rel err " << worst << " (bound " << 5 * e << "), substitution " << subst << ", " << secs
           << " s. ";
  o.require(worst <= 5 * e, "first variation within 5 eps_FD");
  o.require(subst < 1e-9, "substitution u = beta h");
  o.require(secs < 5.0, "runtime < 5 s");
}

void critical_curve(Outcome& o) {
  const double p = 4.0;
  const double R = circle_radius_oracle(p);
  geometry::BuildOptions bo;
  bo.p = p;
  bo.delta0 = 0.1;
  auto res = geometry::find_critical_curve(geometry::Curve::circle({0, 0}, 0.8 * R, 128), MatrixField::identity(),
                                           q_field(p), bo);
  const double Rc = res.curve.length / (2 * kPi);
  const double defect = geometry::criticality_defect(res.curve);
  o.detail << "oracle R " << R << ", solver R " << Rc << ", defect " << defect << ", " << res.iterations
           << " iterations. ";
  o.require(std::abs(Rc - R) < 1e-5, "radius within 1e-5");
  o.require(defect < 1e-6, "criticality defect < 1e-6");
}

void eigenfield_accuracy(Outcome& o) {
  auto t0 = std::chrono::steady_clock::now();
  auto disk = field2d::first_eigenpair(field2d::DomainGrid::disk({0, 0}, 1.0, 1.0 / 128), MatrixField::identity());
  const double t = seconds_since(t0);
  auto sq = field2d::first_eigenpair(field2d::DomainGrid::square({0, 0}, 1.0, 1.0 / 128), MatrixField::identity());
  const double jd = j01() * j01(), js = 2 * kPi * kPi;
  o.detail << "disk " << disk.lambda1 << " vs " << jd << " (" << t << " s), square " << sq.lambda1 << " vs " << js
           << ". ";
  o.require(std::abs(disk.lambda1 / jd - 1) < 0.01, "disk within 1%");
  o.require(t < 30.0, "disk runtime < 30 s");
  o.require(std::abs(sq.lambda1 / js - 1) < 0.01, "square within 1%");
}

void negative_branch(Outcome& o) {
  auto ef = field2d::first_eigenpair(field2d::DomainGrid::disk({0, 0}, 1.0, 1.0 / 64), MatrixField::identity());
  auto rep = field2d::verify_negative_expansion(ef, 4.0, {0.2, 0.1, 0.05});
  o.detail << "E =";
  for (double E : rep.E) o.detail << " " << E;
  o.detail << " on " << rep.K_size << " nodes. ";
  bool strict = rep.E[0] > rep.E[1] && rep.E[1] > rep.E[2];
  bool box = true;
  for (size_t k = 0; k < rep.eps.size(); ++k) box = box && rep.min_gap[k] >= 0.0 && rep.max_u[k] <= 0.0;
  o.require(strict, "E strictly decreasing");
  o.require(box, "box -Psi^{1/p} <= u <= 0");
  o.require(rep.monotone_in_eps, "pointwise monotone in eps");
}

void toda_suite(Outcome& o) {
  double eig = 0.0;
  for (int N = 2; N <= 12; ++N) {
    auto T = toda::toda_matrices(N, 4.0);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(T.M);
    for (int k = 1; k < N; ++k) {
      double s = std::sin(k * kPi / (2.0 * N));
      eig = std::max(eig, std::abs(es.eigenvalues()[k - 1] - 4 * s * s));
    }
  }
  o.require(eig < 1e-10, "eig(M)");

  const double alpha = 18.01668, C0 = 2 * alpha;
  double worst_rho = 0.0, prev_gap = INFINITY;
  bool shrinking = true;
  for (int m = 1; m <= 8; ++m) {
    auto s = toda::solve_rho(std::pow(10.0, -m), 4.0, alpha, C0);
    worst_rho = std::max(worst_rho, s.residual);
    shrinking = shrinking && std::abs(s.gap) < prev_gap;
    prev_gap = std::abs(s.gap);
  }
  o.require(worst_rho < 1e-14, "rho residual");
  o.require(shrinking, "rho gap shrinking");

  const int m = 64;
  toda::Coefficients c;
  c.period = 4.0;
  c.U2.resize(m);
  c.U1.resize(m);
  c.U0.resize(m);
  for (int i = 0; i < m; ++i) {
    double t = 2.0 * kPi * i / m;
    c.U2[i] = 1.0 + 0.3 * std::cos(t);
    c.U1[i] = 0.4 * std::sin(t) + 0.1 * std::cos(2 * t);
    c.U0[i] = 2.0 + 0.5 * std::sin(t + 0.3);
  }
  const std::vector<double> sig{1.0 / 20, 1.0 / 40, 1.0 / 80};
  double worst_slope = INFINITY;
  for (int N : {2, 3, 4})
    for (int k = 1; k <= 3; ++k) {
      std::vector<double> def;
      for (double s : sig) def.push_back(toda::refine_layer_profile(k, toda::toda_matrices(N, 4.0), c, s).defects.back());
      double sl = assembler::loglog_slope(sig, def);
      worst_slope = std::min(worst_slope, sl - k);
      o.require(sl >= k - 0.2, "refinement slope N=" + std::to_string(N) + " k=" + std::to_string(k));
    }

  auto cc = toda::Coefficients::constant(1.0, 0.0, 1.0, m);
  const double sigma = 0.3, mu = 1.7;
  double modes = 0.0;
  for (int k = 1; k <= 6; ++k)
    for (int phase = 0; phase < 2; ++phase) {
      VectorXd g(m), exact(m);
      for (int i = 0; i < m; ++i) {
        double th = 2 * kPi * k * i / m;
        g[i] = phase ? std::sin(th) : std::cos(th);
        exact[i] = g[i] / (4 * kPi * kPi * k * k * sigma - mu);
      }
      modes = std::max(modes, (toda::solve_periodic_linear(cc, mu, sigma, g).phi - exact).cwiseAbs().maxCoeff());
    }
  o.require(modes < 1e-12, "periodic solver on Fourier modes");
  o.detail << "eig " << eig << ", rho residual " << worst_rho << ", slope - k >= " << worst_slope << ", Fourier modes "
           << modes << ". ";
}

void resonance(Outcome& o) {
  auto g = circle_geometry(4.0, geometry::critical_radius_bessel(4.0), 256, 0.44);
  auto ps = profile1d::build_profile(4.0);
  auto T = toda::toda_matrices(2, 4.0);
  std::vector<double> eps;
  for (int k = 0; k < 160; ++k) eps.push_back(0.1 * std::pow(0.99, k));
  auto rep = toda::resonance_gaps(eps, T, g.l1, ps.lambda0, g.l2);
  int passes = 0;
  double jump41 = 0.0, jump108 = 0.0;
  for (size_t k = 0; k < rep.size(); ++k) {
    passes += rep[k].pass;
    if (k == 0) continue;
    // each margin is a minimum of Lipschitz functions of eps; steps must respect the Lipschitz bound
    const auto &a = rep[k - 1], &b = rep[k];
    const double L0 = std::abs(std::log(a.eps)), L1 = std::abs(std::log(b.eps));
    jump41 = std::max(jump41, std::abs(b.toda_gap_margin - a.toda_gap_margin) / (L1 - L0));
    const double kk = std::max(a.amplitude_gap_k, b.amplitude_gap_k) + 1.0;
    const double lip = 2.0 * kk * kk * a.eps + 1.0;
    jump108 = std::max(jump108, std::abs(b.amplitude_gap_margin - a.amplitude_gap_margin) / (lip * (a.eps - b.eps)));
  }
  o.detail << passes << " of " << rep.size() << " admissible, max |d margin| / |d log eps| " << jump41
           << ", max |d margin| / (Lipschitz bound |d eps|) " << jump108 << "; ";
  o.require(passes > 0 && passes < static_cast<int>(rep.size()), "both classes present");
  o.require(jump41 < 10.0, "toda gap margin continuous");
  o.require(jump108 <= 1.0, "amplitude gap margin continuous");

  std::mt19937 rng(5);
  VectorXd h = random_trig(g, rng, 8);
  double lo = INFINITY, hi = 0.0;
  int solved = 0;
  for (double e : eps) {
    toda::AmplitudeSolve a;
    try {
      a = toda::amplitude_solve(e, g.U2, ps.lambda0, h, g.length, g.l2);
    } catch (const ResonanceError&) {
      continue;
    }
    ++solved;
    lo = std::min(lo, a.bound_ratio);
    hi = std::max(hi, a.bound_ratio);
  }
  o.detail << "|e|_* eps / |h|_2 in [" << lo << ", " << hi << "] over " << solved << " admissible eps. ";
  o.require(solved >= 3, "amplitude solves");
  o.require(hi < 10.0, "bound ratio bounded");
}

void residual_decay(Outcome& o) {
  auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> eps{0.034, 0.031, 0.028, 0.025, 0.022, 0.02};
  double s0[2], s1[2];
  int k = 0;
  for (double h : {1.0 / 128, 1.0 / 256}) {
    CriticalDisk d(h);
    auto rep = assembler::residual_sweep(d.setup(2), eps);
    s0[k] = rep.slope0;
    s1[k] = rep.slope1;
    o.detail << "h = 1/" << std::lround(1 / h) << ": " << rep.points.size() << " admissible, slopes " << rep.slope0
             << " / " << rep.slope1 << "; ";
    o.require(rep.points.size() >= 4, "at least four admissible eps");
    o.require(rep.slope0 >= 0.8, "order-0 slope >= 0.8");
    o.require(rep.slope1 >= rep.slope0 + 0.3, "order-1 slope gain >= 0.3");
    ++k;
  }
  const double t = seconds_since(t0);
  o.detail << t << " s. ";
  o.require(std::abs(s0[1] - s0[0]) <= 0.1 && std::abs(s1[1] - s1[0]) <= 0.1, "grid-stable slopes");
  o.require(t < 600.0, "runtime < 10 min");
}

void newton_certificate(Outcome& o) {
  CriticalDisk d(1.0 / 256);
  auto s = d.setup(1);
  auto chart = assembler::fermi_chart(d.g, d.ef.grid, s.cfg.delta0);
  std::vector<double> dist;
  for (double e : {0.05, 0.035, 0.03}) {
    auto pt = assembler::classify(s, e);
    o.require(pt.admissible, "eps " + std::to_string(e) + " admissible");
    if (!pt.admissible) continue;
    auto st = assembler::layer_state(s, e);
    assembler::LayerField lf(d.g, d.ps, st, s.cfg);
    auto br = field2d::solve_negative_branch(d.ef, e, 4.0);
    auto a = assembler::build_ansatz(d.ef, br, d.g, lf, chart);
    auto r = assembler::newton_refine(d.ef, a.u, e, 4.0);
    auto c = assembler::layer_census(d.ef, r.u, d.g, 4.0, 0.4);
    dist.push_back((r.u - a.u).lpNorm<Eigen::Infinity>());
    o.detail << "eps " << e << ": " << r.iterations << " iterations, residual " << r.residuals.back() << ", census "
             << c.mode << (c.uniform ? "" : " (not uniform)") << ", |u* - ansatz| " << dist.back() << "; ";
    if (e == 0.05) {
      o.require(r.converged && r.iterations <= 10, "converged in <= 10 iterations");
      o.require(r.residuals.back() < 1e-10, "residual < 1e-10");
    }
    o.require(c.mode == 1 && c.uniform, "census = 1");
  }
  o.require(dist.size() == 3 && dist[0] > dist[1] && dist[1] > dist[2], "distance decreasing");
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"profile exactness", profile_exactness},
      {"identity suite", identity_suite},
      {"decay constant consistency", decay_consistency},
      {"geometry variations", geometry_variations},
      {"critical-curve solver", critical_curve},
      {"eigenfield accuracy", eigenfield_accuracy},
      {"negative branch expansion", negative_branch},
      {"Toda suite", toda_suite},
      {"resonance certification", resonance},
      {"end-to-end residual decay", residual_decay},
      {"Newton certificate", newton_certificate},
  };
  int failed = 0, run = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && std::find(only.begin(), only.end(), static_cast<int>(i + 1)) == only.end()) continue;
    ++run;
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "[exception: " << e.what() << "] ";
    }
    failed += !o.pass;
    std::printf("%s %2zu %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                seconds_since(t0), o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", run - failed, run);
  return failed ? 1 : 0;
}
