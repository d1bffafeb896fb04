#include "clayer/toda.hpp"

#include "clayer/errors.hpp"
#include "clayer/periodic.hpp"

#include <boost/math/tools/roots.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace clayer::toda {

using std::numbers::pi;

RhoResult solve_rho(double eps, double p, double alpha_p, double C0) {
  if (!(eps > 0.0 && eps < 1.0)) throw ValidationError("solve_rho needs 0 < eps < 1");
  if (!(alpha_p > 0.0 && C0 > 0.0 && p > 1.0)) throw ValidationError("solve_rho needs p > 1 and positive constants");
  const double sp = std::sqrt(p), K = p * alpha_p * C0, L = std::abs(std::log(eps));
  // g is increasing in rho: log(eps^2 rho) - log K + sqrt(p) rho
  auto g = [&](double r) { return std::log(eps * eps * r) - std::log(K) + sp * r; };
  double lo = 1e-300, hi = std::max(1.0, 2.0 * L / sp);
  while (g(hi) <= 0.0) hi *= 2.0;
  boost::uintmax_t it = 200;
  auto br = boost::math::tools::toms748_solve(g, lo, hi, boost::math::tools::eps_tolerance<double>(50), it);
  double r = 0.5 * (br.first + br.second);
  for (int k = 0; k < 3; ++k) r -= g(r) / (1.0 / r + sp);
  RhoResult out;
  out.rho = r;
  out.iterations = static_cast<int>(it);
  out.asymptotic = 2.0 / sp * L - std::log(2.0 / sp * L) / sp + std::log(K) / sp;
  out.gap = r - out.asymptotic;
  out.residual = std::abs(eps * eps * r - K * std::exp(-sp * r));
  return out;
}

TodaMatrices toda_matrices(int N, double p) {
  if (N < 1) throw ValidationError("toda_matrices needs N >= 1");
  if (!(p > 1.0)) throw ValidationError("toda_matrices needs p > 1");
  TodaMatrices T;
  T.N = N;
  T.p = p;
  const int n = N - 1;
  T.M = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    T.M(i, i) = 2.0;
    if (i + 1 < n) T.M(i, i + 1) = T.M(i + 1, i) = -1.0;
  }
  T.r.resize(n);
  for (int i = 1; i <= n; ++i) T.r[i - 1] = static_cast<double>((N - i) * i);
  if (n > 0) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(T.M);
    T.Mhalf = es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    T.D = 0.5 * std::sqrt(p) * T.Mhalf * T.r.asDiagonal() * T.Mhalf;
    T.D = 0.5 * (T.D + T.D.transpose());
    T.Lambda = Eigen::SelfAdjointEigenSolver<MatrixXd>(T.D, Eigen::EigenvaluesOnly).eigenvalues();
  } else {
    T.Mhalf = T.D = MatrixXd::Zero(0, 0);
    T.Lambda = VectorXd::Zero(0);
  }
  T.B = MatrixXd::Zero(N, N);
  for (int i = 0; i < n; ++i) {
    T.B(i, i) = -1.0;
    T.B(i, i + 1) = 1.0;
  }
  T.B.row(N - 1).setOnes();
  T.Binv = T.B.partialPivLu().inverse();
  return T;
}

Coefficients Coefficients::from(const geometry::CurveGeometry& g) { return {g.U2, g.U1, g.U0, g.length}; }

Coefficients Coefficients::constant(double U2, double U1, double U0, int m, double period) {
  return {VectorXd::Constant(m, U2), VectorXd::Constant(m, U1), VectorXd::Constant(m, U0), period};
}

MatrixXd jacobi_rows(const Coefficients& c, const MatrixXd& u) {
  MatrixXd out(u.rows(), u.cols());
  for (int j = 0; j < u.rows(); ++j) {
    VectorXd x = u.row(j).transpose();
    VectorXd r = -c.U2.cwiseProduct(periodic::diff(x, c.period, 2)) + c.U1.cwiseProduct(periodic::diff(x, c.period)) -
                 c.U0.cwiseProduct(x);
    out.row(j) = r.transpose();
  }
  return out;
}

double l2_norm(const MatrixXd& u, double period) {
  if (u.size() == 0) return 0.0;
  return std::sqrt(u.squaredNorm() * period / u.cols());
}

LeadingProfile leading_layer_profile(const TodaMatrices& T, const VectorXd& U0) {
  if (!(U0.minCoeff() > 0.0))
    throw ValidationError("degenerate geometry: Upsilon0 must be positive for the leading layer profile");
  const int n = T.N - 1, m = static_cast<int>(U0.size());
  const double sp = std::sqrt(T.p);
  LeadingProfile lp;
  lp.v.resize(n, m);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < m; ++k) lp.v(i, k) = -std::log(0.5 * U0[k] * T.r[i]) / sp;
  lp.d = d_from_v(lp.v, VectorXd::Zero(m));
  lp.defect = 0.0;
  if (n > 0) {
    MatrixXd q = T.M * (-sp * lp.v).array().exp().matrix();
    for (int i = 0; i < n; ++i) lp.defect = std::max(lp.defect, (q.row(i).transpose() - U0).cwiseAbs().maxCoeff());
  }
  return lp;
}

MatrixXd d_from_v(const MatrixXd& vbar, const VectorXd& vN) {
  const int n = static_cast<int>(vbar.rows()), N = n + 1, m = static_cast<int>(vN.size());
  MatrixXd d(N, m);
  VectorXd moment = VectorXd::Zero(m);
  for (int k = 1; k <= n; ++k) moment += k * vbar.row(k - 1).transpose();
  for (int j = 1; j <= N; ++j) {
    VectorXd tail = VectorXd::Zero(m);
    for (int k = j; k <= n; ++k) tail += vbar.row(k - 1).transpose();
    d.row(j - 1) = (vN / N - tail + moment / N).transpose();
  }
  return d;
}

MatrixXd v_from_d(const MatrixXd& d) {
  const int N = static_cast<int>(d.rows());
  MatrixXd v(N, d.cols());
  for (int j = 0; j + 1 < N; ++j) v.row(j) = d.row(j + 1) - d.row(j);
  v.row(N - 1) = d.colwise().sum();
  return v;
}

MatrixXd interaction(const TodaMatrices& T, const MatrixXd& d) {
  const int N = static_cast<int>(d.rows());
  const double sp = std::sqrt(T.p);
  MatrixXd out = MatrixXd::Zero(N, d.cols());
  for (int j = 0; j < N; ++j) {
    if (j > 0) out.row(j) += (-sp * (d.row(j) - d.row(j - 1))).array().exp().matrix();
    if (j + 1 < N) out.row(j) -= (-sp * (d.row(j + 1) - d.row(j))).array().exp().matrix();
  }
  return out;
}

MatrixXd R_apply(const TodaMatrices& T, const Coefficients& c, double sigma, const MatrixXd& d) {
  const int N = static_cast<int>(d.rows());
  const double rho = 1.0 / sigma;
  MatrixXd out = sigma * jacobi_rows(c, d);
  for (int j = 0; j < N; ++j) out.row(j) -= (sigma * (j + 1 - 0.5 * (N + 1)) * rho) * c.U0.transpose();
  return out + interaction(T, d);
}

MatrixXd Qbar_apply(const TodaMatrices& T, const Coefficients& c, double sigma, const MatrixXd& vbar) {
  const double sp = std::sqrt(T.p);
  MatrixXd out = sigma * jacobi_rows(c, vbar);
  out.rowwise() -= c.U0.transpose();
  return out + T.M * (-sp * vbar).array().exp().matrix();
}

MatrixXd Q_apply(const TodaMatrices& T, const Coefficients& c, double sigma, const MatrixXd& v) {
  const int N = static_cast<int>(v.rows());
  MatrixXd out(N, v.cols());
  out.topRows(N - 1) = Qbar_apply(T, c, sigma, v.topRows(N - 1));
  out.row(N - 1) = sigma * jacobi_rows(c, v.bottomRows(1));
  return out;
}

Refinement refine_layer_profile(int k, const TodaMatrices& T, const Coefficients& c, double sigma) {
  if (k < 1) throw ValidationError("refine_layer_profile needs k >= 1");
  if (T.N < 2) throw ValidationError("refine_layer_profile needs N >= 2");
  const double sp = std::sqrt(T.p);
  auto lp = leading_layer_profile(T, c.U0);
  const MatrixXd ev = (-sp * lp.v).array().exp().matrix();
  const MatrixXd Minv = T.M.inverse();
  Refinement out;
  out.v = lp.v;
  for (int j = 1; j <= k; ++j) {
    MatrixXd Q = Qbar_apply(T, c, sigma, out.v);
    double nrm = l2_norm(Q, c.period);
    if (!out.defects.empty() && !(nrm < out.defects.back())) {
      std::ostringstream os;
      os << "layer refinement stalled at step " << j << ":";
      for (double x : out.defects) os << ' ' << x;
      os << ' ' << nrm;
      throw NumericalError(os.str());
    }
    out.defects.push_back(nrm);
    if (j == k) break;
    // -DQbar0(v1) w = Q with DQbar0(v1) = -sqrt(p) M diag(e^{-sqrt(p) v1})
    MatrixXd w = (Minv * Q).cwiseQuotient(ev) / sp;
    out.v += w;
  }
  return out;
}

namespace {

MatrixXd jacobi_matrix(const Coefficients& c) {
  const int m = c.size();
  MatrixXd J = c.U1.asDiagonal() * periodic::diff_matrix(m, c.period, 1);
  J -= c.U2.asDiagonal() * periodic::diff_matrix(m, c.period, 2);
  return J;
}

}  // namespace

VectorXd periodic_spectrum(const Coefficients& c) {
  if (!(c.U0.minCoeff() > 0.0)) throw ValidationError("periodic spectrum needs Upsilon0 > 0");
  MatrixXd G = c.U0.cwiseInverse().asDiagonal() * jacobi_matrix(c);
  Eigen::EigenSolver<MatrixXd> es(G, false);
  VectorXd ev = es.eigenvalues().real();
  std::sort(ev.data(), ev.data() + ev.size());
  return ev;
}

PeriodicSolve solve_periodic_linear(const Coefficients& c, double mu, double sigma, const VectorXd& g,
                                    double min_gap) {
  if (!(sigma > 0.0)) throw ValidationError("periodic solve needs sigma > 0");
  if (g.size() != c.size()) throw ValidationError("periodic solve: size mismatch");
  PeriodicSolve out;
  VectorXd spec = periodic_spectrum(c);
  const double target = mu / sigma;
  out.gap = INFINITY;
  for (int j = 0; j < spec.size(); ++j)
    if (std::abs(target - spec[j]) < out.gap) {
      out.gap = std::abs(target - spec[j]);
      out.nearest = spec[j];
    }
  if (out.gap < min_gap * std::max(1.0, std::abs(target))) {
    std::ostringstream os;
    os << "periodic solve is resonant: mu/sigma = " << target << " is within " << out.gap
       << " of the eigenvalue " << out.nearest;
    throw ResonanceError(os.str());
  }
  MatrixXd A = sigma * jacobi_matrix(c);
  A.diagonal() -= mu * c.U0;
  out.phi = A.partialPivLu().solve(g);
  out.residual = (A * out.phi - g).cwiseAbs().maxCoeff();
  return out;
}

double lambda_star(double lambda0, double l2, const GapOptions& opt) {
  return lambda0 * l2 * l2 / (opt.lambda_star_4pi2 ? 4.0 * pi * pi : 4.0 * pi);
}

namespace {

void amplitude_gap_margin(double eps, double ls, double c2, GapReport& r) {
  r.amplitude_gap_margin = INFINITY;
  const int kmax = static_cast<int>(std::ceil(std::sqrt((ls + 1.0) / (eps * eps)))) + 1;
  for (int k = 1; k <= kmax; ++k) {
    double m = std::abs(eps * eps * k * k - ls) - c2 * eps;
    if (m < r.amplitude_gap_margin) {
      r.amplitude_gap_margin = m;
      r.amplitude_gap_k = k;
    }
  }
}

}  // namespace

std::vector<GapReport> resonance_gaps(const std::vector<double>& eps, const TodaMatrices& T, double l1,
                                      double lambda0, double l2, const GapOptions& opt) {
  if (T.N > 1 && !(l1 > 0.0)) throw ValidationError("resonance_gaps needs l1 > 0 (Upsilon0 > 0)");
  const double sp = std::sqrt(T.p), ls = lambda_star(lambda0, l2, opt);
  std::vector<GapReport> out;
  for (double e : eps) {
    if (!(e > 0.0 && e < 1.0)) throw ValidationError("resonance_gaps needs 0 < eps < 1");
    GapReport r;
    r.eps = e;
    const double L = std::abs(std::log(e));
    const double thr = opt.c1 * std::sqrt(2.0 / (sp * L));
    r.toda_gap_margin = INFINITY;
    for (int i = 0; i < T.Lambda.size(); ++i) {
      const double x = 2.0 / sp * T.Lambda[i] * L;
      for (int j = 0;; ++j) {
        const double y = 4.0 * pi * pi * j * j / (l1 * l1);
        const double m = std::abs(x - y) - thr;
        if (m < r.toda_gap_margin) {
          r.toda_gap_margin = m;
          r.toda_gap_i = i + 1;
          r.toda_gap_j = j;
        }
        if (y > x) break;
      }
    }
    amplitude_gap_margin(e, ls, opt.c2, r);
    r.pass = r.toda_gap_margin > 0.0 && r.amplitude_gap_margin > 0.0;
    out.push_back(r);
  }
  return out;
}

AmplitudeSolve amplitude_solve(double eps, const VectorXd& U2, double lambda0, const VectorXd& h, double period,
                               double l2, const GapOptions& opt) {
  if (!(eps > 0.0)) throw ValidationError("amplitude_solve needs eps > 0");
  if (h.size() != U2.size()) throw ValidationError("amplitude_solve: size mismatch");
  AmplitudeSolve out;
  out.gap.eps = eps;
  amplitude_gap_margin(eps, lambda_star(lambda0, l2, opt), opt.c2, out.gap);
  out.gap.toda_gap_margin = INFINITY;
  out.gap.pass = out.gap.amplitude_gap_margin > 0.0;
  if (!out.gap.pass) {
    std::ostringstream os;
    os << "amplitude equation is resonant at eps = " << eps << " (k = " << out.gap.amplitude_gap_k
       << ", margin " << out.gap.amplitude_gap_margin << ")";
    throw ResonanceError(os.str());
  }
  const int m = static_cast<int>(U2.size());
  MatrixXd A = eps * eps * U2.asDiagonal() * periodic::diff_matrix(m, period, 2);
  A.diagonal().array() += lambda0;
  out.e = A.partialPivLu().solve(h);
  out.residual = (A * out.e - h).cwiseAbs().maxCoeff();
  const VectorXd e1 = periodic::diff(out.e, period), e2 = periodic::diff(out.e, period, 2);
  out.norm_star = out.e.cwiseAbs().maxCoeff() + eps * l2_norm(e1.transpose(), period) +
                  eps * eps * l2_norm(e2.transpose(), period);
  const double hn = l2_norm(h.transpose(), period);
  out.bound_ratio = hn > 0.0 ? out.norm_star * eps / hn : 0.0;
  return out;
}

LayerState make_layer_state(const geometry::CurveGeometry& g, const TodaMatrices& T, const MatrixXd& vbar, double eps,
                            double rho) {
  LayerState s;
  s.N = T.N;
  s.eps = eps;
  s.rho = rho;
  s.sigma = 1.0 / rho;
  s.period = g.length;
  const int m = g.m;
  MatrixXd vb = T.N > 1 ? vbar : MatrixXd::Zero(0, m);
  s.d = d_from_v(vb, VectorXd::Zero(m));
  s.v = v_from_d(s.d);
  s.fb.resize(T.N, m);
  s.f.resize(T.N, m);
  for (int j = 0; j < T.N; ++j) {
    s.fb.row(j) = s.d.row(j).array() + (j + 1 - 0.5 * (T.N + 1)) * rho;
    s.f.row(j) = s.fb.row(j).cwiseQuotient(g.beta.transpose());
  }
  s.e = MatrixXd::Zero(T.N, m);
  return s;
}

void solve_amplitudes(LayerState& s, const geometry::CurveGeometry& g, const ProfileConstants& k,
                      const GapOptions& opt) {
  const double sp = std::sqrt(k.p);
  const int N = s.N;
  for (int j = 0; j < N; ++j) {
    VectorXd B = VectorXd::Zero(g.m);
    if (j > 0) B += (-sp * (s.d.row(j) - s.d.row(j - 1))).array().exp().matrix().transpose();
    if (j + 1 < N) B += (-sp * (s.d.row(j + 1) - s.d.row(j))).array().exp().matrix().transpose();
    B *= s.eps * k.C1 / k.C0 * s.rho;
    auto a = amplitude_solve(s.eps, g.U2, k.lambda0, -B, g.length, g.l2, opt);
    s.e.row(j) = a.e.transpose();
  }
}

JacobiTodaResidual jacobi_toda_residual(const LayerState& s, const geometry::CurveGeometry& g,
                                        const ProfileConstants& k) {
  const double sp = std::sqrt(k.p), eps = s.eps, L = g.length;
  const int N = s.N, m = g.m;
  JacobiTodaResidual out;
  out.r_position = MatrixXd::Zero(N, m);
  out.r_amplitude = MatrixXd::Zero(N, m);
  const VectorXd w = g.alpha.array().pow(1.0 - k.p).matrix();
  for (int j = 0; j < N; ++j) {
    const VectorXd f = s.f.row(j).transpose(), e = s.e.row(j).transpose();
    const VectorXd fp = periodic::diff(f, L), ep = periodic::diff(e, L), epp = periodic::diff(e, L, 2);
    const VectorXd lin = geometry::layer_operator_apply(g, f);
    VectorXd lower = VectorXd::Zero(m), upper = VectorXd::Zero(m);
    if (j > 0) {
      VectorXd fl = s.f.row(j - 1).transpose();
      lower = (-sp * g.beta.cwiseProduct(f - fl)).array().exp().matrix();
    }
    if (j + 1 < N) {
      VectorXd fu = s.f.row(j + 1).transpose();
      upper = (-sp * g.beta.cwiseProduct(fu - f)).array().exp().matrix();
    }
    for (int i = 0; i < m; ++i) {
      double couple = (-2.0 * eps * g.a11[i] * ep[i] * fp[i] + 2.0 * eps * g.a22[i] * ep[i] * f[i]) * k.zx_wx_ratio;
      out.r_position(j, i) = eps * eps * w[i] * g.beta[i] * (lin[i] + couple) +
                      k.C0 * k.p * k.alpha_p * (lower[i] - upper[i]);
      out.r_amplitude(j, i) = eps * (eps * eps * g.a11[i] * w[i] * epp[i] + k.lambda0 * e[i]) +
                      k.p * k.alpha_p * k.C1 * (lower[i] + upper[i]);
    }
    out.norm_position.push_back(l2_norm(out.r_position.row(j), L));
    out.norm_amplitude.push_back(l2_norm(out.r_amplitude.row(j), L));
  }
  return out;
}

}  // namespace clayer::toda
