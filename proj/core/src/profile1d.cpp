#include "clayer/profile1d.hpp"

#include "clayer/errors.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace clayer::profile1d {

using Eigen::VectorXd;
using Quad = boost::math::quadrature::gauss<double, 20>;

Eigen::VectorXd ProfileGrid::nodes() const {
  VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = this->x(i);
  return x;
}

ProfileGrid ProfileGrid::make(double p, int nodes, double tail_tol) {
  if (!(p > 1.0)) throw ValidationError("exponent p must exceed 1");
  return with(-std::log(tail_tol) / std::sqrt(p), nodes);
}

ProfileGrid ProfileGrid::with(double L, int nodes) {
  if (nodes < 41 || nodes % 2 == 0) throw ValidationError("profile grid needs an odd node count >= 41");
  if (!(L > 0.0)) throw ValidationError("profile half-width must be positive");
  ProfileGrid g;
  g.L = L;
  g.n = nodes;
  g.h = 2.0 * L / (nodes - 1);
  return g;
}

double G(double p, double s) {
  if (s < 0.0) s = -s;  // the profile never reaches s < 0; keep G even for robustness
  if (s <= 0.25) {
    // sum_{k>=1} binom(p,k) (-1)^k s^{k+1}/(k+1)
    double c = -p, sk = s * s, sum = 0.0;
    for (int k = 1; k < 200; ++k) {
      double term = c * sk / (k + 1);
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
      c *= (k - p) / (k + 1);
      sk *= s;
    }
    return sum;
  }
  if (s <= 1.0) return -std::expm1((p + 1.0) * std::log1p(-s)) / (p + 1.0) - s;
  return (1.0 + std::pow(s - 1.0, p + 1.0)) / (p + 1.0) - s;
}

double F_near_top(double p, double w0, double d) {
  const double a = w0 - 1.0;
  if (d >= a) return -2.0 * G(p, w0 - d);
  double e = std::pow(a, p + 1.0) * std::expm1((p + 1.0) * std::log1p(-d / a)) / (p + 1.0);
  return -2.0 * (e + d);
}

double turning_point(double p) {
  if (!(p > 1.0)) throw ValidationError("exponent p must exceed 1");
  auto g = [p](double s) { return G(p, s); };
  double hi = 2.0;
  while (g(hi) < 0.0) hi *= 2.0;
  boost::math::tools::eps_tolerance<double> tol(52);
  std::uintmax_t it = 200;
  auto r = boost::math::tools::toms748_solve(g, 1.0, hi, tol, it);
  double w0 = 0.5 * (r.first + r.second);
  // Newton polish, G'(s) = (s-1)^p - 1
  for (int k = 0; k < 3; ++k) {
    double d = std::pow(w0 - 1.0, p) - 1.0;
    w0 -= g(w0) / d;
  }
  return w0;
}

namespace {

// profile in the u = sqrt(w0 - s) variable (s >= 1) and the tau = log s variable (s < 1)
struct Marcher {
  double p, w0, a, slope0;
  double fu(double u) const {
    if (u < 1e-7) return 2.0 / std::sqrt(2.0 * slope0);
    return 2.0 * u / std::sqrt(F_near_top(p, w0, u * u));
  }
  double ft(double tau) const {
    double s = std::exp(tau);
    return s / std::sqrt(-2.0 * G(p, s));
  }
};

}  // namespace

Profile solve_profile(double p, const ProfileGrid& grid, double tail_tol) {
  const double w0 = turning_point(p);
  Marcher M{p, w0, w0 - 1.0, std::pow(w0 - 1.0, p) - 1.0};
  const int c = grid.center();
  VectorXd w(grid.n), wx(grid.n);
  w[c] = w0;
  wx[c] = 0.0;

  // x-position where w = 1
  const double ua = std::sqrt(M.a);
  double x1 = 0.0;
  {
    const int panels = 64;
    for (int k = 0; k < panels; ++k) {
      double lo = ua * k / panels, hi = ua * (k + 1) / panels;
      x1 += Quad::integrate([&](double u) { return M.fu(u); }, lo, hi);
    }
  }

  double u = 0.0, xu = 0.0;     // state in the u region
  double tau = 0.0, xt = x1;    // state in the tau region
  bool upper = true;
  for (int i = c + 1; i < grid.n; ++i) {
    const double xi = (i - c) * grid.h;
    if (upper && xi <= x1) {
      const double delta = xi - xu;
      double un = u + delta / M.fu(u);
      un = std::min(un, ua);
      for (int it = 0; it < 50; ++it) {
        double I = Quad::integrate([&](double v) { return M.fu(v); }, u, un);
        double step = (I - delta) / M.fu(un);
        un -= step;
        un = std::clamp(un, u, ua);
        if (std::abs(step) < 1e-16 * (1.0 + un)) break;
      }
      u = un;
      xu = xi;
      w[i] = w0 - u * u;
      wx[i] = -std::sqrt(std::max(F_near_top(p, w0, u * u), 0.0));
      continue;
    }
    upper = false;
    const double delta = xi - xt;
    double tn = tau - delta / M.ft(tau);
    for (int it = 0; it < 50; ++it) {
      double I = Quad::integrate([&](double v) { return M.ft(v); }, tn, tau);
      double step = (I - delta) / M.ft(tn);
      tn += step;
      tn = std::min(tn, tau);
      if (std::abs(step) < 1e-15 * (1.0 + std::abs(tn))) break;
    }
    tau = tn;
    xt = xi;
    w[i] = std::exp(tau);
    wx[i] = -std::sqrt(std::max(-2.0 * G(p, w[i]), 0.0));
  }
  for (int k = 1; k <= c; ++k) {
    w[c - k] = w[c + k];
    wx[c - k] = -wx[c + k];
  }
  if (w[grid.n - 1] > tail_tol) {
    double Ls = grid.L + std::log(w[grid.n - 1] / tail_tol) / std::sqrt(p);
    std::ostringstream os;
    os << "profile tail w(L) = " << w[grid.n - 1] << " exceeds " << tail_tol << "; use L >= " << Ls;
    throw NumericalError(os.str());
  }
  return {w, wx};
}

namespace {

VectorXd bracket_of(double p, const VectorXd& w) {
  VectorXd b(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    double v = w[i];
    b[i] = v < 1.0 ? -std::expm1((p - 1.0) * std::log1p(-v)) : std::pow(v - 1.0, p - 1.0) + 1.0;
  }
  return b;
}

VectorXd potential_of(double p, const VectorXd& w) {
  VectorXd V(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    double y = w[i] - 1.0;
    V[i] = p * (y < 0.0 ? -std::pow(-y, p - 1.0) : std::pow(y, p - 1.0));
  }
  return V;
}

double trapz(const VectorXd& f, double h) {
  const Eigen::Index n = f.size();
  return h * (f.sum() - 0.5 * (f[0] + f[n - 1]));
}

}  // namespace

DecayReport decay_constant(double p, const ProfileGrid& grid, const VectorXd& w, const VectorXd& wx) {
  DecayReport r;
  const double sp = std::sqrt(p);
  const int c = grid.center();
  const double kappa = std::min(p - 1.0, 1.0);
  const double lo = std::max(1e-10, 100.0 * w[grid.n - 1]);
  std::vector<double> gs, ws;
  for (int i = c; i < grid.n; ++i) {
    if (w[i] <= 1e-5 && w[i] >= lo) {
      double x = grid.x(i);
      gs.push_back(std::exp(sp * x) * w[i]);
      ws.push_back(std::pow(w[i], kappa));
    }
  }
  if (gs.size() < 8) throw NumericalError("decay fit window has fewer than 8 nodes; enlarge L");
  const int m = static_cast<int>(gs.size());
  Eigen::MatrixXd A(m, 2);
  VectorXd b(m);
  for (int k = 0; k < m; ++k) {
    A(k, 0) = 1.0;
    A(k, 1) = ws[k];
    b[k] = gs[k];
  }
  VectorXd coef = A.colPivHouseholderQr().solve(b);
  r.alpha_fit = coef[0];
  r.fit_rms = std::sqrt((A * coef - b).squaredNorm() / m) / std::abs(coef[0]);
  if (!(r.alpha_fit > 0.0) || r.fit_rms > 1e-7) {
    std::ostringstream os;
    os << "decay fit too noisy (relative rms " << r.fit_rms << ")";
    throw NumericalError(os.str());
  }

  const VectorXd B = bracket_of(p, w);
  const double cp = 1.0 / (2.0 * sp);
  const double pref = sp * cp / 2.0;
  VectorXd fplus(grid.n), fminus(grid.n);
  for (int i = 0; i < grid.n; ++i) {
    double x = grid.x(i);
    double ep = std::exp(sp * x), em = std::exp(-sp * x);
    fplus[i] = B[i] * (ep + em) * wx[i];
    fminus[i] = B[i] * (ep - em) * wx[i];
  }
  r.alpha_int_plus = pref * trapz(fplus, grid.h);
  r.alpha_int_minus = pref * trapz(fminus, grid.h);
  r.alpha_int = -r.alpha_int_minus;
  r.rel_gap = std::abs(r.alpha_int - r.alpha_fit) / r.alpha_fit;
  return r;
}

VectorXd fd_derivative(const VectorXd& f, double h, int order) {
  static const double d1[9] = {1.0 / 280, -4.0 / 105, 1.0 / 5, -4.0 / 5, 0.0, 4.0 / 5, -1.0 / 5, 4.0 / 105, -1.0 / 280};
  static const double d2[9] = {-1.0 / 560, 8.0 / 315, -1.0 / 5, 8.0 / 5, -205.0 / 72, 8.0 / 5, -1.0 / 5, 8.0 / 315, -1.0 / 560};
  const double* c = order == 1 ? d1 : d2;
  const double scale = order == 1 ? 1.0 / h : 1.0 / (h * h);
  const Eigen::Index n = f.size();
  VectorXd d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = -4; k <= 4; ++k) {
      Eigen::Index j = i + k;
      if (j >= 0 && j < n) s += c[k + 4] * f[j];
    }
    d[i] = s * scale;
  }
  return d;
}

double ode_residual(double p, const ProfileGrid& grid, const VectorXd& w) {
  VectorXd d2 = fd_derivative(w, grid.h, 2);
  double r = 0.0;
  for (int i = 4; i < grid.n - 4; ++i) {
    double rhs = std::pow(std::abs(1.0 - w[i]), p) - 1.0;
    r = std::max(r, std::abs(-d2[i] - rhs));
  }
  return r;
}

double ode_residual(const ProfileSet& ps) { return ode_residual(ps.p, ps.grid, ps.w); }

VectorXd ProfileSet::potential() const { return potential_of(p, w); }
VectorXd ProfileSet::bracket() const { return bracket_of(p, w); }
double ProfileSet::integrate(const VectorXd& f) const { return trapz(f, grid.h); }

void ProfileSet::eval(const VectorXd& f, const VectorXd& fx, const VectorXd& fxx, double x, double& v,
                      double& vx, double& vxx) const {
  v = vx = vxx = 0.0;
  if (x <= -grid.L || x >= grid.L) return;
  const double s = (x + grid.L) / grid.h;
  int i = std::min(static_cast<int>(s), grid.n - 2);
  const double t = s - i, h = grid.h;
  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
  const double H[6] = {1 - 10 * t3 + 15 * t4 - 6 * t5, t - 6 * t3 + 8 * t4 - 3 * t5,
                       0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5, 10 * t3 - 15 * t4 + 6 * t5,
                       -4 * t3 + 7 * t4 - 3 * t5, 0.5 * t3 - t4 + 0.5 * t5};
  const double D[6] = {-30 * t2 + 60 * t3 - 30 * t4, 1 - 18 * t2 + 32 * t3 - 15 * t4,
                       t - 4.5 * t2 + 6 * t3 - 2.5 * t4, 30 * t2 - 60 * t3 + 30 * t4,
                       -12 * t2 + 28 * t3 - 15 * t4, 1.5 * t2 - 4 * t3 + 2.5 * t4};
  const double DD[6] = {-60 * t + 180 * t2 - 120 * t3, -36 * t + 96 * t2 - 60 * t3, 1 - 9 * t + 18 * t2 - 10 * t3,
                        60 * t - 180 * t2 + 120 * t3, -24 * t + 84 * t2 - 60 * t3, 3 * t - 12 * t2 + 10 * t3};
  const double c[6] = {f[i], h * fx[i], h * h * fxx[i], f[i + 1], h * fx[i + 1], h * h * fxx[i + 1]};
  for (int k = 0; k < 6; ++k) {
    v += c[k] * H[k];
    vx += c[k] * D[k];
    vxx += c[k] * DD[k];
  }
  vx /= h;
  vxx /= h * h;
}

double ProfileSet::w_at(double x) const {
  double v, vx, vxx;
  eval(w, wx, wxx, x, v, vx, vxx);
  return v;
}

namespace {

// phi'' + V phi on interior nodes 1..n-2, five-point fourth-order stencil, odd reflection
// across the Dirichlet ends.
Eigen::SparseMatrix<double> linear_operator(const ProfileSet& ps) {
  const int m = ps.grid.n - 2;
  const double s = 1.0 / (12.0 * ps.grid.h * ps.grid.h);
  const VectorXd V = ps.potential();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(5 * m);
  for (int k = 0; k < m; ++k) {
    double diag = -30.0 * s + V[k + 1];
    if (k == 0 || k == m - 1) diag += s;  // ghost value -phi_1 beyond the end node
    t.emplace_back(k, k, diag);
    if (k + 1 < m) t.emplace_back(k, k + 1, 16.0 * s);
    if (k - 1 >= 0) t.emplace_back(k, k - 1, 16.0 * s);
    if (k + 2 < m) t.emplace_back(k, k + 2, -s);
    if (k - 2 >= 0) t.emplace_back(k, k - 2, -s);
  }
  Eigen::SparseMatrix<double> A(m, m);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

}  // namespace

VectorXd solve_linearized(const ProfileSet& ps, const VectorXd& rhs, double fredholm_tol) {
  const int n = ps.grid.n, m = n - 2;
  if (rhs.size() != n) throw ValidationError("rhs size does not match the profile grid");
  const double proj = ps.integrate(rhs.cwiseProduct(ps.wx));
  const double scale = std::sqrt(ps.integrate(rhs.cwiseAbs2()) * ps.integrate(ps.wx.cwiseAbs2()));
  if (std::abs(proj) > fredholm_tol * scale) {
    std::ostringstream os;
    os << "solvability condition violated: integral of rhs*w_x = " << proj;
    throw ValidationError(os.str());
  }
  if (scale == 0.0) return VectorXd::Zero(n);
  Eigen::SparseMatrix<double> A = linear_operator(ps);
  std::vector<Eigen::Triplet<double>> t;
  for (int k = 0; k < A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it) t.emplace_back(it.row(), it.col(), -it.value());
  for (int k = 0; k < m; ++k) {
    t.emplace_back(k, m, ps.wx[k + 1]);
    t.emplace_back(m, k, ps.wx[k + 1]);
  }
  Eigen::SparseMatrix<double> K(m + 1, m + 1);
  K.setFromTriplets(t.begin(), t.end());
  VectorXd b(m + 1);
  b.head(m) = rhs.segment(1, m);
  b[m] = 0.0;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(K);
  if (lu.info() != Eigen::Success) throw NumericalError("linearized operator factorization failed");
  VectorXd sol = lu.solve(b);
  VectorXd phi = VectorXd::Zero(n);
  phi.segment(1, m) = sol.head(m);
  return phi;
}

void correction_profiles(ProfileSet& ps) {
  const double p = ps.p;
  const VectorXd x = ps.grid.nodes();
  const VectorXd B = ps.bracket();
  const VectorXd V = ps.potential();
  const double h = ps.grid.h;

  VectorXd rhs0 = ps.wx + (2.0 * p / (p + 3.0)) * x.cwiseProduct(B);
  VectorXd rhs1 = x.cwiseProduct(ps.wxx) - (p / (p + 3.0)) * x.cwiseProduct(B);
  const double wx_norm = std::sqrt(ps.I_w);
  ps.fredholm_defect = 0.0;
  for (VectorXd* r : {&rhs0, &rhs1}) {
    const double proj = ps.integrate(r->cwiseProduct(ps.wx));
    const double rel = std::abs(proj) / (std::sqrt(ps.integrate(r->cwiseAbs2())) * wx_norm);
    if (rel > 1e-2) {
      std::ostringstream os;
      os << "solvability condition violated: integral of rhs*w_x = " << proj;
      throw ValidationError(os.str());
    }
    ps.fredholm_defect = std::max(ps.fredholm_defect, rel);
    *r -= (proj / ps.I_w) * ps.wx;
  }
  ps.w0 = solve_linearized(ps, rhs0);
  ps.w1 = solve_linearized(ps, rhs1);

  // w_xxx = -V w_x
  const VectorXd wxxx = -V.cwiseProduct(ps.wx);
  ps.w2 = -0.5 * x.cwiseProduct(ps.wx);
  ps.w2x = -0.5 * (ps.wx + x.cwiseProduct(ps.wxx));
  ps.w2xx = -ps.wxx - 0.5 * x.cwiseProduct(wxxx);
  const double k = (1.0 - p) / (2.0 * p);
  ps.w3 = k * x.cwiseProduct(ps.wx) - ps.w / p;
  ps.w3x = k * (ps.wx + x.cwiseProduct(ps.wxx)) - ps.wx / p;
  ps.w3xx = k * (2.0 * ps.wxx + x.cwiseProduct(wxxx)) - ps.wxx / p;

  ps.w0x = fd_derivative(ps.w0, h, 1);
  ps.w1x = fd_derivative(ps.w1, h, 1);
  // second derivatives from the equations they solve
  ps.w0xx = -V.cwiseProduct(ps.w0) - rhs0;
  ps.w1xx = -V.cwiseProduct(ps.w1) - rhs1;
  ps.w0xx[0] = ps.w0xx[ps.grid.n - 1] = 0.0;
  ps.w1xx[0] = ps.w1xx[ps.grid.n - 1] = 0.0;

  // closed forms of w2, w3 against their equations with independent finite-difference second derivatives
  VectorXd d2 = fd_derivative(ps.w2, h, 2), d3 = fd_derivative(ps.w3, h, 2);
  double r2 = 0.0, r3 = 0.0;
  for (int i = 4; i < ps.grid.n - 4; ++i) {
    r2 = std::max(r2, std::abs(-d2[i] - V[i] * ps.w2[i] - ps.wxx[i]));
    r3 = std::max(r3, std::abs(-d3[i] - V[i] * ps.w3[i] - B[i]));
  }
  // relative to the forcing; for odd p the kink of |1-w|^p at w = 1 limits the stencil to second order
  ps.residual_w2 = r2 / ps.wxx.cwiseAbs().maxCoeff();
  ps.residual_w3 = r3 / B.cwiseAbs().maxCoeff();
}

Eigenpair eigenpair(const ProfileSet& ps) {
  const int n = ps.grid.n, m = n - 2;
  Eigen::SparseMatrix<double> A = linear_operator(ps);
  const double sigma = ps.potential().maxCoeff() + 1.0;
  Eigen::SparseMatrix<double> S(m, m);
  S.setIdentity();
  S *= sigma;
  S -= A;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  ldlt.compute(S);
  if (ldlt.info() != Eigen::Success) throw NumericalError("eigen shift factorization failed");
  VectorXd z = ps.w.segment(1, m);
  z.normalize();
  Eigenpair e;
  double rq = 0.0;
  for (int it = 1; it <= 5000; ++it) {
    z = ldlt.solve(z);
    z.normalize();
    VectorXd Az = A * z;
    rq = z.dot(Az);
    e.iterations = it;
    e.residual = (Az - rq * z).norm();
    if (e.residual < 1e-11 * std::max(1.0, std::abs(rq))) break;
  }
  if (!(rq > 0.0)) throw NumericalError("principal eigenvalue of the linearized operator is not positive");
  if (z.sum() < 0.0) z = -z;
  VectorXd Z = VectorXd::Zero(n);
  Z.segment(1, m) = z;
  Z /= std::sqrt(ps.integrate(Z.cwiseAbs2()));
  e.lambda0 = rq;
  e.rayleigh = rq;
  e.Z = Z;
  return e;
}

Interaction interaction_constants(const ProfileSet& ps) {
  const double sp = std::sqrt(ps.p);
  const VectorXd B = ps.bracket();
  const int n = ps.grid.n, c = ps.grid.center();
  VectorXd f0(n), f1(n);
  for (int i = 0; i < n; ++i) {
    double x = ps.grid.x(i);
    double ep = std::exp(sp * x), em = std::exp(-sp * x);
    f0[i] = 0.5 * B[i] * (em - ep) * ps.wx[i];
    f1[i] = 0.5 * B[i] * (ep + em) * ps.Z[i];
  }
  Interaction r;
  r.C0 = ps.integrate(f0);
  r.C1 = ps.integrate(f1);
  r.C0_half = 2.0 * trapz(f0.segment(c, n - c), ps.grid.h);
  r.tail = std::max({std::abs(f0[0]), std::abs(f0[n - 1]), std::abs(f1[0]), std::abs(f1[n - 1])});
  if (r.tail > 1e-8 * std::max(std::abs(r.C0), 1.0)) {
    std::ostringstream os;
    os << "interaction integrands not decayed at the truncation ends (" << r.tail << ")";
    throw NumericalError(os.str());
  }
  return r;
}

std::vector<IdentityCheck> verify_profile_identities(const ProfileSet& ps) {
  const double p = ps.p;
  const VectorXd x = ps.grid.nodes();
  const VectorXd B = ps.bracket();
  const double I = ps.I_w;
  const double h = ps.grid.h;
  auto in = [&](const VectorXd& f) { return ps.integrate(f); };
  // |w-1|^{p-2}, finite for p >= 2; for p < 2 the singular factor only multiplies smooth data
  VectorXd P(ps.grid.n);
  for (int i = 0; i < ps.grid.n; ++i) {
    double y = std::abs(ps.w[i] - 1.0);
    P[i] = y > 0.0 ? std::pow(y, p - 2.0) : (p >= 2.0 ? (p == 2.0 ? 1.0 : 0.0) : 0.0);
  }
  const VectorXd w0xx = fd_derivative(ps.w0, h, 2);
  const VectorXd w1xx = fd_derivative(ps.w1, h, 2);
  const VectorXd& wx = ps.wx;
  const double a = 2.0 * p / (p + 3.0), b = 2.0 * p * (p - 1.0) / (p + 3.0);
  const double c = p / (p + 3.0), d = p * (p - 1.0) / (p + 3.0);

  std::vector<IdentityCheck> out;
  auto add = [&](std::string name, double l, double r, double s) { out.push_back({std::move(name), l, r, s}); };
  const double Iw = in(ps.w);
  add("int w = (p+3)/(2p) int w_x^2", Iw, (p + 3.0) / (2.0 * p) * I, std::abs(Iw));
  add("int x w_xx w_x = -1/2 int w_x^2", in(x.cwiseProduct(ps.wxx).cwiseProduct(wx)), -0.5 * I, I);
  add("int B x w_x = -int w", in(B.cwiseProduct(x).cwiseProduct(wx)), -Iw, std::abs(Iw));
  add("int w2_x w_x = -1/4 int w_x^2", in(ps.w2x.cwiseProduct(wx)), -0.25 * I, I);
  add("int w3_x w_x = -(p+3)/(4p) int w_x^2", in(ps.w3x.cwiseProduct(wx)), -(p + 3.0) / (4.0 * p) * I, I);
  add("int B w2 = (p+3)/(4p) int w_x^2", in(B.cwiseProduct(ps.w2)), (p + 3.0) / (4.0 * p) * I, I);
  add("closed form w2 sup residual", ps.residual_w2, 0.0, 1.0);
  add("closed form w3 sup residual", ps.residual_w3, 0.0, 1.0);

  const VectorXd Pwx = P.cwiseProduct(wx);
  {
    double l = in((w0xx + p * (p - 1.0) * P.cwiseProduct(ps.w0).cwiseProduct(ps.w2)).cwiseProduct(wx));
    double r = in(ps.w2x.cwiseProduct(wx)) - a * in(B.cwiseProduct(ps.w2)) - b * in(Pwx.cwiseProduct(x).cwiseProduct(ps.w2));
    add("w0 against w2 projection", l, r, I);
  }
  {
    double l = (p - 1.0) * in(Pwx.cwiseProduct(ps.w0)) + p * (p - 1.0) * in(Pwx.cwiseProduct(ps.w0).cwiseProduct(ps.w3));
    double r = in(ps.w3x.cwiseProduct(wx)) - a * in(B.cwiseProduct(ps.w3)) - b * in(Pwx.cwiseProduct(x).cwiseProduct(ps.w3));
    add("w0 against w3 projection", l, r, I);
  }
  {
    double l = in((w1xx + p * (p - 1.0) * P.cwiseProduct(ps.w1).cwiseProduct(ps.w2)).cwiseProduct(wx));
    double r = -in(ps.w2x.cwiseProduct(wx)) - in(x.cwiseProduct(ps.w2xx).cwiseProduct(wx)) + c * in(B.cwiseProduct(ps.w2)) +
               d * in(Pwx.cwiseProduct(x).cwiseProduct(ps.w2));
    add("w1 against w2 projection", l, r, I);
  }
  {
    double l = in((x.cwiseProduct(ps.w3xx) + p * (p - 1.0) * P.cwiseProduct(ps.w1).cwiseProduct(ps.w3)).cwiseProduct(wx)) +
               (p - 1.0) * in(Pwx.cwiseProduct(ps.w1));
    double r = -in(ps.w3x.cwiseProduct(wx)) + c * in(B.cwiseProduct(ps.w3)) + d * in(Pwx.cwiseProduct(x).cwiseProduct(ps.w3));
    add("w1 against w3 projection", l, r, I);
  }
  add("int w0 w_x = 0", in(ps.w0.cwiseProduct(wx)), 0.0, I);
  add("int w1 w_x = 0", in(ps.w1.cwiseProduct(wx)), 0.0, I);
  return out;
}

ProfileSet build_profile(double p, const ProfileGrid& grid) {
  ProfileSet ps;
  ps.p = p;
  ps.grid = grid;
  Profile pr = solve_profile(p, grid);
  ps.w = pr.w;
  ps.wx = pr.wx;
  ps.wxx = VectorXd(grid.n);
  for (int i = 0; i < grid.n; ++i) ps.wxx[i] = 1.0 - std::pow(std::abs(1.0 - ps.w[i]), p);
  ps.w_center = ps.w[grid.center()];
  ps.I_w = ps.integrate(ps.wx.cwiseAbs2());
  ps.c_p = 1.0 / (2.0 * std::sqrt(p));
  ps.decay = decay_constant(p, grid, ps.w, ps.wx);
  ps.alpha_p = ps.decay.alpha_fit;
  correction_profiles(ps);
  Eigenpair e = eigenpair(ps);
  ps.lambda0 = e.lambda0;
  ps.Z = e.Z;
  ps.Zx = fd_derivative(ps.Z, grid.h, 1);
  ps.Zxx = (e.lambda0 * VectorXd::Ones(grid.n) - ps.potential()).cwiseProduct(ps.Z);
  ps.zx_wx = ps.integrate(ps.Zx.cwiseProduct(ps.wx));
  Interaction ic = interaction_constants(ps);
  ps.C0 = ic.C0;
  ps.C1 = ic.C1;
  return ps;
}

ProfileSet build_profile(double p) { return build_profile(p, ProfileGrid::make(p)); }

}  // namespace clayer::profile1d
