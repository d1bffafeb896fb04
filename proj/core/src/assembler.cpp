#include "clayer/assembler.hpp"

#include "clayer/errors.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace clayer::assembler {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double wrap(double s, double L) {
  s = std::fmod(s, L);
  return s < 0.0 ? s + L : s;
}

toda::ProfileConstants constants(const profile1d::ProfileSet& ps) {
  return {ps.p, ps.alpha_p, ps.C0, ps.C1, ps.lambda0, ps.zx_wx / ps.I_w};
}

}  // namespace

bool chart_point(const geometry::CurveGeometry& g, const Vec2& y, double theta0, double& theta, double& t) {
  Vec2 p, tan, n, np;
  theta = theta0;
  g.frame_at(theta, p, tan, n, np);
  t = (y - p).dot(n);
  for (int it = 0; it < 40; ++it) {
    g.frame_at(theta, p, tan, n, np);
    Vec2 F = p + t * n - y;
    Mat2 J;
    J.col(0) = tan + t * np;
    J.col(1) = n;
    double det = J.determinant();
    if (std::abs(det) < 1e-8) return false;
    Vec2 d = J.inverse() * F;
    theta -= d[0];
    t -= d[1];
    if (d.norm() < 1e-14 * (1.0 + g.length)) {
      theta = wrap(theta, g.length);
      return true;
    }
  }
  return false;
}

FermiChart fermi_chart(const geometry::CurveGeometry& g, const field2d::DomainGrid& grid, double delta0) {
  if (!(delta0 > 0.0)) throw ValidationError("chart half-width must be positive");
  FermiChart c;
  c.delta0 = delta0;
  const int n = grid.unknowns();
  c.theta = VectorXd::Constant(n, kNaN);
  c.t = VectorXd::Constant(n, kNaN);
  // the n-line chart of a curve of curvature k folds at |t| = 1/|k| (isotropic case); keep well inside
  for (int u = 0; u < n; ++u) {
    Vec2 y = grid.point(u);
    int best = 0;
    double dmin = INFINITY;
    for (int i = 0; i < g.m; ++i) {
      double d = (Vec2(g.x[i], g.y[i]) - y).squaredNorm();
      if (d < dmin) {
        dmin = d;
        best = i;
      }
    }
    if (std::sqrt(dmin) > 2.0 * delta0) continue;
    double theta, t;
    const bool ok = chart_point(g, y, g.s[best], theta, t);
    if (ok && std::abs(t) >= delta0) continue;
    if (!ok) {
      // only a failure when the node is plainly inside the tube
      if (std::sqrt(dmin) < 0.5 * delta0) throw ValidationError("Fermi chart folds inside the tube: reduce delta0");
      continue;
    }
    Vec2 p, tan, nn, np;
    g.frame_at(theta, p, tan, nn, np);
    Mat2 J;
    J.col(0) = tan + t * np;
    J.col(1) = nn;
    if (std::abs(J.determinant()) < 0.05 || (p + t * nn - y).norm() > 1e-9)
      throw ValidationError("Fermi chart folds inside the tube: reduce delta0");
    c.theta[u] = theta;
    c.t[u] = t;
    c.nodes.push_back(u);
  }
  return c;
}

double cutoff(double t, const AnsatzConfig& cfg) {
  const double a = std::abs(t), lo = cfg.plateau * cfg.delta, hi = cfg.support * cfg.delta;
  if (a <= lo) return 1.0;
  if (a >= hi) return 0.0;
  const double s = (a - lo) / (hi - lo);
  return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

LayerField::LayerField(const geometry::CurveGeometry& g, const profile1d::ProfileSet& ps, const toda::LayerState& s,
                       const AnsatzConfig& cfg)
    : N_(s.N), eps_(s.eps), p_(g.p), length_(g.length), cfg_(cfg), ps_(ps) {
  if (!(g.p > 3.0)) throw ValidationError("layered ansatz requires p > 3");
  if (std::abs(ps.p - g.p) > 1e-12) throw ValidationError("profile and curve exponents differ");
  if (N_ < 1 || N_ > 16) throw ValidationError("layer count must be in 1..16");
  if (cfg.order != 0 && cfg.order != 1) throw ValidationError("ansatz order must be 0 or 1");
  if (!(cfg.delta > 0.0 && cfg.plateau > 0.0 && cfg.support > cfg.plateau))
    throw ValidationError("cutoff needs delta > 0 and support > plateau > 0");
  if (!(cfg.support * cfg.delta < cfg.delta0)) throw ValidationError("cutoff support must lie inside the chart");
  if (s.f.cols() != g.m) throw ValidationError("layer state and curve sample counts differ");
  alpha_ = g.alpha;
  beta_ = g.beta;
  b21_ = g.b21;
  a32_ = g.a32;
  qt_ = g.qt;
  f_ = s.f;
  e_ = s.e;
  for (const VectorXd* v : {&alpha_, &beta_, &b21_, &a32_, &qt_}) trig_.emplace_back(*v, length_);
  for (int k = 0; k < N_; ++k) trig_.emplace_back(VectorXd(f_.row(k).transpose()), length_);
  for (int k = 0; k < N_; ++k) trig_.emplace_back(VectorXd(e_.row(k).transpose()), length_);
  if (N_ > 1 && separation_margin(s, g, p_) <= 0.0)
    throw LayerOverlapError("adjacent layers violate the separation constraint");
}

LayerField::Local LayerField::node(int i) const {
  Local c{alpha_[i], beta_[i], b21_[i], a32_[i], qt_[i], {}, {}};
  for (int k = 0; k < N_; ++k) {
    c.f[k] = f_(k, i);
    c.e[k] = e_(k, i);
  }
  return c;
}

double LayerField::eval(const Local& c, double t) const {
  const double eta = cutoff(t, cfg_);
  if (eta == 0.0) return 0.0;
  const double ap = std::pow(c.alpha, 1.0 - p_);
  double sum = 0.0, v, vx, vxx;
  for (int k = 0; k < N_; ++k) {
    const double X = c.beta * (t / eps_ - c.f[k]);
    ps_.eval(ps_.w, ps_.wx, ps_.wxx, X, v, vx, vxx);
    double V = v;
    if (cfg_.order >= 1) {
      double phi = 0.0;
      ps_.eval(ps_.w0, ps_.w0x, ps_.w0xx, X, v, vx, vxx);
      phi += c.b21 * ap * c.beta * v;
      ps_.eval(ps_.w1, ps_.w1x, ps_.w1xx, X, v, vx, vxx);
      phi += c.a32 * ap * c.beta * v;
      ps_.eval(ps_.w2, ps_.w2x, ps_.w2xx, X, v, vx, vxx);
      phi += c.a32 * ap * c.beta * c.beta * c.f[k] * v;
      ps_.eval(ps_.w3, ps_.w3x, ps_.w3xx, X, v, vx, vxx);
      phi -= p_ / c.alpha * c.qt * c.f[k] * v;
      V += eps_ * phi;
      if (cfg_.amplitudes && c.e[k] != 0.0) {
        ps_.eval(ps_.Z, ps_.Zx, ps_.Zxx, X, v, vx, vxx);
        V += eps_ * c.e[k] * v;
      }
    }
    sum += V;
  }
  return eta * c.alpha * sum;
}

double LayerField::at_node(int i, double t) const { return eval(node(i), t); }

double LayerField::operator()(double theta, double t) const {
  if (cutoff(t, cfg_) == 0.0) return 0.0;
  Local c;
  c.alpha = trig_[0](theta);
  c.beta = trig_[1](theta);
  c.b21 = trig_[2](theta);
  c.a32 = trig_[3](theta);
  c.qt = trig_[4](theta);
  for (int k = 0; k < N_; ++k) {
    c.f[k] = trig_[5 + k](theta);
    c.e[k] = trig_[5 + N_ + k](theta);
  }
  return eval(c, t);
}

double separation_margin(const toda::LayerState& s, const geometry::CurveGeometry& g, double p) {
  const double le = std::abs(std::log(s.eps));
  const double need = 2.0 / std::sqrt(p) * le - 4.0 / std::sqrt(p) * std::log(le);
  double m = INFINITY;
  for (int k = 0; k + 1 < s.N; ++k)
    for (int i = 0; i < g.m; ++i) m = std::min(m, g.beta[i] * (s.f(k + 1, i) - s.f(k, i)) - need);
  return m;
}

double plateau_margin(const toda::LayerState& s, const geometry::CurveGeometry& g, const AnsatzConfig& cfg) {
  double m = INFINITY;
  for (int k = 0; k < s.N; ++k)
    for (int i = 0; i < g.m; ++i)
      m = std::min(m, cfg.plateau * cfg.delta - std::abs(s.eps * s.f(k, i)) - 4.0 * s.eps / g.beta[i]);
  return m;
}

Ansatz2D build_ansatz(const field2d::EigenField& ef, const field2d::NegativeBranch& branch,
                      const geometry::CurveGeometry& g, const LayerField& layer, const FermiChart& chart) {
  if (branch.u.size() != ef.grid.unknowns()) throw ValidationError("branch does not match the grid");
  if (std::abs(branch.eps - layer.eps()) > 1e-14) throw ValidationError("branch and layers use different eps");
  if (!(g.p > 3.0)) throw ValidationError("layered ansatz requires p > 3");
  if (chart.delta0 < layer.config().support * layer.config().delta)
    throw ValidationError("chart is narrower than the cutoff support");
  Ansatz2D a;
  a.eps = layer.eps();
  a.p = g.p;
  a.order = layer.config().order;
  a.N = layer.N();
  a.chart = chart;
  a.ubar = branch.u;
  a.layer = VectorXd::Zero(branch.u.size());
  for (int u : chart.nodes) a.layer[u] = layer(chart.theta[u], chart.t[u]);
  a.u = a.ubar + a.layer;
  return a;
}

VectorXd grid_residual(const field2d::EigenField& ef, const VectorXd& u, double eps, double p) {
  return -(eps * eps * (ef.L * u) - u.array().abs().pow(p).matrix() + ef.psi);
}

TubeResidual tube_residual(const LayerField& layer, const geometry::CurveGeometry& g, const ScalarField& ubar,
                           const MatrixField& A, double p, int points_per_width) {
  const AnsatzConfig& cfg = layer.config();
  const double eps = layer.eps();
  const int m = g.m;
  const double ht = eps / g.beta.maxCoeff() / points_per_width;
  const double T = cfg.support * cfg.delta + 4.0 * ht;
  const int half = static_cast<int>(std::ceil(T / ht));
  const int nt = 2 * half + 1;
  MatrixXd W(nt, m), U(nt, m), J(nt, m), Mtt(nt, m), Mts(nt, m), Mss(nt, m);
  for (int j = 0; j < nt; ++j) {
    const double t = (j - half) * ht;
    for (int i = 0; i < m; ++i) {
      Vec2 y(g.x[i] + t * g.nx[i], g.y[i] + t * g.ny[i]);
      Mat2 P;
      P << g.tx[i] + t * g.npx[i], g.nx[i], g.ty[i] + t * g.npy[i], g.ny[i];
      Mat2 Pi = P.inverse();
      Mat2 M = Pi * A(y) * Pi.transpose();
      J(j, i) = P.determinant();
      Mss(j, i) = M(0, 0);
      Mts(j, i) = M(0, 1);
      Mtt(j, i) = M(1, 1);
      W(j, i) = layer.at_node(i, t);
      U(j, i) = W(j, i) != 0.0 ? ubar(y) : 0.0;
    }
  }
  auto dtheta = [&](const MatrixXd& F) {
    MatrixXd D(nt, m);
    for (int j = 0; j < nt; ++j) D.row(j) = periodic::diff(F.row(j).transpose(), g.length).transpose();
    return D;
  };
  auto dt = [&](const MatrixXd& F) {
    MatrixXd D = MatrixXd::Zero(nt, m);
    for (int j = 2; j + 2 < nt; ++j)
      D.row(j) = (-F.row(j + 2) + 8.0 * F.row(j + 1) - 8.0 * F.row(j - 1) + F.row(j - 2)) / (12.0 * ht);
    return D;
  };
  const MatrixXd Ws = dtheta(W), Wt = dt(W);
  const MatrixXd Fs = J.cwiseProduct(Mss.cwiseProduct(Ws) + Mts.cwiseProduct(Wt));
  const MatrixXd Ft = J.cwiseProduct(Mts.cwiseProduct(Ws) + Mtt.cwiseProduct(Wt));
  const MatrixXd div = (dtheta(Fs) + dt(Ft)).cwiseQuotient(J);
  TubeResidual out;
  out.nt = nt;
  out.ntheta = m;
  const double dA = ht * g.length / m, plateau = cfg.plateau * cfg.delta;
  double tube = 0.0, band = 0.0;
  for (int j = 4; j + 4 < nt; ++j) {
    const double t = (j - half) * ht;
    for (int i = 0; i < m; ++i) {
      if (W(j, i) == 0.0) continue;
      const double r = -eps * eps * div(j, i) - std::pow(std::abs(U(j, i) + W(j, i)), p) +
                       std::pow(std::abs(U(j, i)), p);
      const double w = r * r * std::abs(J(j, i)) * dA;
      if (std::abs(t) < plateau) {
        tube += w;
        out.sup = std::max(out.sup, std::abs(r));
      } else {
        band += w;
      }
    }
  }
  out.tube = std::sqrt(tube);
  out.band = std::sqrt(band);
  return out;
}

ResidualNorms pde_residual(const Ansatz2D& a, const field2d::EigenField& ef, const LayerField& layer,
                           const geometry::CurveGeometry& g, const MatrixField& A) {
  ResidualNorms r;
  const VectorXd res = grid_residual(ef, a.u, a.eps, a.p);
  r.global = res.norm() * ef.grid.h;
  r.sup = res.lpNorm<Eigen::Infinity>();
  const ScalarField ubar = field2d::interpolate(ef.grid, a.ubar, "ubar");
  const TubeResidual t = tube_residual(layer, g, ubar, A, a.p);
  r.tube = t.tube;
  r.band = t.band;
  r.tube_sup = t.sup;
  return r;
}

toda::LayerState layer_state(const SweepSetup& s, double eps) {
  const auto& g = *s.g;
  const auto& ps = *s.ps;
  const auto rho = toda::solve_rho(eps, g.p, ps.alpha_p, ps.C0);
  const auto T = toda::toda_matrices(s.N, g.p);
  MatrixXd vbar = MatrixXd::Zero(0, g.m);
  if (s.N > 1) {
    const auto c = toda::Coefficients::from(g);
    const double sigma = 1.0 / rho.rho;
    vbar = toda::leading_layer_profile(T, g.U0).v;
    for (int k = s.refine_k; k > 1; --k) {
      try {
        vbar = toda::refine_layer_profile(k, T, c, sigma).v;
        break;
      } catch (const NumericalError&) {
      }
    }
  }
  auto st = toda::make_layer_state(g, T, vbar, eps, rho.rho);
  if (s.N > 1 && s.cfg.amplitudes && s.cfg.order >= 1) toda::solve_amplitudes(st, g, constants(ps), s.gap);
  return st;
}

SweepPoint classify(const SweepSetup& s, double eps) {
  SweepPoint pt;
  pt.eps = eps;
  const auto T = toda::toda_matrices(s.N, s.g->p);
  pt.gap = toda::resonance_gaps({eps}, T, s.g->l1, s.ps->lambda0, s.g->l2, s.gap)[0];
  if (!pt.gap.pass) return pt;
  toda::LayerState st;
  try {
    st = layer_state(s, eps);
  } catch (const ResonanceError&) {
    return pt;
  }
  pt.rho = st.rho;
  pt.separation = s.N > 1 ? separation_margin(st, *s.g, s.g->p) : INFINITY;
  pt.plateau = plateau_margin(st, *s.g, s.cfg);
  pt.admissible = pt.separation > 0.0 && pt.plateau > 0.0;
  return pt;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  if (n < 2 || y.size() != x.size()) throw ValidationError("slope needs at least two matching points");
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0, sxx = 0;
  for (int i = 0; i < n; ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

SweepReport residual_sweep(const SweepSetup& s, const std::vector<double>& eps) {
  if (!s.ef || !s.A || !s.g || !s.ps) throw ValidationError("sweep setup is incomplete");
  SweepReport rep;
  std::vector<double> es = eps;
  std::sort(es.begin(), es.end(), std::greater<>());
  const FermiChart chart = fermi_chart(*s.g, s.ef->grid, s.cfg.delta0);
  const VectorXd* start = nullptr;
  field2d::NegativeBranch prev;
  for (double e : es) {
    SweepPoint pt = classify(s, e);
    if (!pt.admissible) {
      rep.rejected.push_back(pt);
      continue;
    }
    auto branch = field2d::solve_negative_branch(*s.ef, e, s.g->p, {}, start);
    for (int order = 0; order <= 1; ++order) {
      SweepSetup so = s;
      so.cfg.order = order;
      const auto st = layer_state(so, e);
      const LayerField lf(*s.g, *s.ps, st, so.cfg);
      const auto a = build_ansatz(*s.ef, branch, *s.g, lf, chart);
      (order == 0 ? pt.order0 : pt.order1) = pde_residual(a, *s.ef, lf, *s.g, *s.A);
    }
    rep.points.push_back(pt);
    prev = std::move(branch);
    prev.u = -prev.u;  // warm start in the w = -u_bar variable
    start = &prev.u;
  }
  if (rep.points.size() >= 2) {
    std::vector<double> x, y0, y1;
    for (const auto& p : rep.points) {
      x.push_back(p.eps);
      y0.push_back(p.order0.tube);
      y1.push_back(p.order1.tube);
    }
    rep.slope0 = loglog_slope(x, y0);
    rep.slope1 = loglog_slope(x, y1);
    rep.monotone0 = rep.monotone1 = true;
    for (size_t i = 1; i < x.size(); ++i) {
      rep.monotone0 = rep.monotone0 && y0[i] < y0[i - 1];
      rep.monotone1 = rep.monotone1 && y1[i] < y1[i - 1];
    }
  }
  return rep;
}

RefineResult newton_refine(const field2d::EigenField& ef, const VectorXd& u0, double eps, double p,
                           const RefineOptions& opt) {
  if (u0.size() != ef.grid.unknowns()) throw ValidationError("initial state does not match the grid");
  const double scale = ef.psi.norm();
  auto F = [&](const VectorXd& u) {
    return VectorXd(eps * eps * (ef.L * u) - u.array().abs().pow(p).matrix() + ef.psi);
  };
  RefineResult r;
  r.u = u0;
  VectorXd Fu = F(r.u);
  if (!std::isfinite(Fu.norm())) throw ValidationError("initial residual is not finite");
  Eigen::SparseLU<field2d::SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  field2d::SparseMatrix I(ef.L.rows(), ef.L.cols());
  I.setIdentity();
  bool analyzed = false;
  for (int it = 1; it <= opt.max_iter; ++it) {
    const double res = Fu.norm() / scale;
    r.residuals.push_back(res);
    r.iterations = it;
    if (res < opt.tol) {
      r.converged = true;
      return r;
    }
    const VectorXd d = (p * r.u.array().abs().pow(p - 2.0) * r.u.array()).matrix();
    field2d::SparseMatrix Jm = eps * eps * ef.L;
    Jm -= field2d::SparseMatrix(d.asDiagonal() * I);
    if (!analyzed) {
      lu.analyzePattern(Jm);
      analyzed = true;
    }
    lu.factorize(Jm);
    if (lu.info() != Eigen::Success) throw NumericalError("refinement: singular Jacobian");
    const VectorXd step = lu.solve(Fu);
    double lam = 1.0;
    VectorXd trial = r.u - step, Ft = F(trial);
    int k = 0;
    while (!(Ft.norm() < Fu.norm()) && k < opt.max_halvings) {
      lam *= 0.5;
      trial = r.u - lam * step;
      Ft = F(trial);
      ++k;
    }
    if (!(Ft.norm() < Fu.norm())) {
      std::ostringstream os;
      os << "refinement diverged; history:";
      for (double h : r.residuals) os << ' ' << h;
      throw NumericalError(os.str());
    }
    r.u = trial;
    Fu = Ft;
  }
  r.residuals.push_back(Fu.norm() / scale);
  r.converged = r.residuals.back() < opt.tol;
  if (!r.converged) {
    std::ostringstream os;
    os << "refinement did not converge; history:";
    for (double h : r.residuals) os << ' ' << h;
    throw NumericalError(os.str());
  }
  return r;
}

std::vector<std::pair<int, double>> prominent_maxima(const std::vector<double>& y, double threshold) {
  std::vector<std::pair<int, double>> out;
  const int n = static_cast<int>(y.size());
  for (int i = 1; i + 1 < n; ++i) {
    if (!(y[i] > y[i - 1] && y[i] >= y[i + 1])) continue;
    double lmin = y[i], rmin = y[i];
    for (int j = i - 1; j >= 0 && y[j] <= y[i]; --j) lmin = std::min(lmin, y[j]);
    for (int j = i + 1; j < n && y[j] < y[i]; ++j) rmin = std::min(rmin, y[j]);
    const double prom = y[i] - std::max(lmin, rmin);
    if (prom >= threshold) out.emplace_back(i, prom);
  }
  return out;
}

Census layer_census(const field2d::EigenField& ef, const VectorXd& u, const geometry::CurveGeometry& g, double p,
                    double half_width, int sections, double frac) {
  const ScalarField uf = field2d::interpolate(ef.grid, u, "u");
  const ScalarField qf = field2d::interpolate(ef.grid, ef.psi.array().pow(1.0 / p).matrix(), "q");
  Census c;
  const int n = 801;
  std::map<int, int> freq;
  for (int k = 0; k < sections; ++k) {
    const double theta = k * g.length / sections;
    Vec2 pt, tan, nn, np;
    g.frame_at(theta, pt, tan, nn, np);
    std::vector<double> y(n);
    for (int j = 0; j < n; ++j) {
      const double t = -half_width + 2.0 * half_width * j / (n - 1);
      const Vec2 x = pt + t * nn;
      y[j] = uf(x) + qf(x);
    }
    const double top = *std::max_element(y.begin(), y.end());
    const auto peaks = prominent_maxima(y, frac * top);
    c.counts.push_back(static_cast<int>(peaks.size()));
    std::vector<double> ts;
    for (const auto& pk : peaks) ts.push_back(-half_width + 2.0 * half_width * pk.first / (n - 1));
    c.peaks.push_back(ts);
    ++freq[c.counts.back()];
  }
  int best = -1;
  for (const auto& [cnt, f] : freq)
    if (f > best) {
      best = f;
      c.mode = cnt;
    }
  c.uniform = freq.size() == 1;
  return c;
}

}  // namespace clayer::assembler
