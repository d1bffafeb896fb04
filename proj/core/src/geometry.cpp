#include "clayer/geometry.hpp"

#include "clayer/errors.hpp"

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/tools/roots.hpp>

#include <Eigen/SVD>
#include <cmath>
#include <numbers>
#include <sstream>

namespace clayer::geometry {

using periodic::diff;
using periodic::Trig;

namespace {

constexpr double kPi = std::numbers::pi;

double quad(const Mat2& M, const Vec2& a, const Vec2& b) { return a.dot(M * b); }

bool segments_cross(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
  };
  double o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
  return (o1 * o2 < 0.0) && (o3 * o4 < 0.0);
}

void check_simple(const Curve& c) {
  const int m = c.size();
  for (int i = 0; i < m; ++i) {
    Vec2 a(c.x[i], c.y[i]), b(c.x[(i + 1) % m], c.y[(i + 1) % m]);
    for (int j = i + 2; j < m; ++j) {
      if (i == 0 && j == m - 1) continue;
      Vec2 e(c.x[j], c.y[j]), f(c.x[(j + 1) % m], c.y[(j + 1) % m]);
      if (segments_cross(a, b, e, f)) {
        std::ostringstream os;
        os << "curve self-intersects between samples " << i << " and " << j;
        throw ValidationError(os.str());
      }
    }
  }
}

VectorXd five_point(const std::function<double(double)>& f, double h, double& d1, double& d2) {
  VectorXd v(5);
  for (int j = -2; j <= 2; ++j) v[j + 2] = f(j * h);
  d1 = (v[0] - 8.0 * v[1] + 8.0 * v[3] - v[4]) / (12.0 * h);
  d2 = (-v[0] + 16.0 * v[1] - 30.0 * v[2] + 16.0 * v[3] - v[4]) / (12.0 * h * h);
  return v;
}

}  // namespace

Curve Curve::circle(const Vec2& center, double R, int m) { return ellipse(center, R, R, m); }

Curve Curve::ellipse(const Vec2& center, double a, double b, int m, double tilt) {
  Curve c{VectorXd(m), VectorXd(m)};
  const double ct = std::cos(tilt), st = std::sin(tilt);
  for (int i = 0; i < m; ++i) {
    double phi = 2.0 * kPi * i / m;
    double u = a * std::cos(phi), v = b * std::sin(phi);
    c.x[i] = center[0] + ct * u - st * v;
    c.y[i] = center[1] + st * u + ct * v;
  }
  return c;
}

Curve Curve::star(const Vec2& center, double R, const std::vector<double>& cc, const std::vector<double>& ss, int m) {
  Curve c{VectorXd(m), VectorXd(m)};
  for (int i = 0; i < m; ++i) {
    double phi = 2.0 * kPi * i / m;
    double r = 1.0;
    for (std::size_t k = 0; k < cc.size(); ++k) r += cc[k] * std::cos((k + 1) * phi);
    for (std::size_t k = 0; k < ss.size(); ++k) r += ss[k] * std::sin((k + 1) * phi);
    c.x[i] = center[0] + R * r * std::cos(phi);
    c.y[i] = center[1] + R * r * std::sin(phi);
  }
  return c;
}

Curve arclength(const Curve& curve) {
  const int m = curve.size();
  if (m < 16) throw ValidationError("curve needs at least 16 samples");
  Curve c = curve;
  // counterclockwise orientation
  VectorXd xt = diff(c.x, 1.0), yt = diff(c.y, 1.0);
  double area = 0.5 * periodic::integrate(c.x.cwiseProduct(yt) - c.y.cwiseProduct(xt), 1.0);
  if (area < 0.0) {
    Curve r{VectorXd(m), VectorXd(m)};
    for (int i = 0; i < m; ++i) {
      r.x[i] = c.x[(m - i) % m];
      r.y[i] = c.y[(m - i) % m];
    }
    c = r;
  }
  for (int pass = 0; pass < 2; ++pass) {
    xt = diff(c.x, 1.0);
    yt = diff(c.y, 1.0);
    VectorXd speed = (xt.cwiseAbs2() + yt.cwiseAbs2()).cwiseSqrt();
    if (speed.minCoeff() <= 0.0) throw ValidationError("curve has a singular point");
    const double L = speed.mean();
    Trig P(periodic::antiderivative(speed, 1.0), 1.0), S(speed, 1.0), X(c.x, 1.0), Y(c.y, 1.0);
    Curve r{VectorXd(m), VectorXd(m)};
    double th = 0.0;
    for (int j = 0; j < m; ++j) {
      const double target = L * j / m;
      if (j > 0) th += (target - L * (j - 1.0) / m) / S(th);
      for (int it = 0; it < 30; ++it) {
        double step = (L * th + P(th) - target) / S(th);
        th -= step;
        if (std::abs(step) < 1e-15) break;
      }
      r.x[j] = X(th);
      r.y[j] = Y(th);
    }
    c = r;
  }
  return c;
}

void CurveGeometry::frame_at(double sv, Vec2& g, Vec2& t, Vec2& n, Vec2& np) const {
  double f, fs, fss;
  gx.eval(sv, f, fs, fss);
  g[0] = f;
  t[0] = fs;
  gy.eval(sv, f, fs, fss);
  g[1] = f;
  t[1] = fs;
  gnx.eval(sv, f, fs, fss);
  n[0] = f;
  np[0] = fs;
  gny.eval(sv, f, fs, fss);
  n[1] = f;
  np[1] = fs;
}

CurveGeometry build_curve(const Curve& curve, const MatrixField& A, const ScalarField& q, const BuildOptions& opt) {
  if (!(opt.p > 1.0)) throw ValidationError("exponent p must exceed 1");
  Curve c = arclength(curve);
  if (opt.check_simple) check_simple(c);
  CurveGeometry g;
  const int m = c.size();
  const double p = opt.p;
  g.m = m;
  g.p = p;
  g.x = c.x;
  g.y = c.y;
  {
    VectorXd xt = diff(c.x, 1.0), yt = diff(c.y, 1.0);
    g.length = (xt.cwiseAbs2() + yt.cwiseAbs2()).cwiseSqrt().mean();
  }
  const double L = g.length;
  g.s = periodic::nodes(m, L);
  g.tx = diff(g.x, L);
  g.ty = diff(g.y, L);
  VectorXd xss = diff(g.x, L, 2), yss = diff(g.y, L, 2);
  g.nux = g.ty;
  g.nuy = -g.tx;
  g.k = xss.cwiseProduct(g.nux) + yss.cwiseProduct(g.nuy);
  g.nx.resize(m);
  g.ny.resize(m);
  for (int i = 0; i < m; ++i) {
    Vec2 nu(g.nux[i], g.nuy[i]);
    Vec2 An = A(Vec2(g.x[i], g.y[i])) * nu;
    An.normalize();
    g.nx[i] = An[0];
    g.ny[i] = An[1];
  }
  g.npx = diff(g.nx, L);
  g.npy = diff(g.ny, L);

  auto resize = [m](std::initializer_list<VectorXd*> v) {
    for (auto* a : v) a->resize(m);
  };
  resize({&g.c, &g.D, &g.W, &g.Ann, &g.ATn, &g.AnpT, &g.AtTT, &g.Anpnp, &g.AtnpT, &g.AttTT, &g.Annp, &g.AtnT, &g.q,
          &g.qt, &g.qtt});
  VectorXd AtTnp(m);
  for (int i = 0; i < m; ++i) {
    Vec2 X(g.x[i], g.y[i]), T(g.tx[i], g.ty[i]), n(g.nx[i], g.ny[i]), np(g.npx[i], g.npy[i]);
    Mat2 a, at, att;
    A.adjugate_along(X, n, a, at, att);
    g.c[i] = T.dot(n);
    g.D[i] = 1.0 - g.c[i] * g.c[i];
    g.W[i] = quad(a, T, T);
    g.Ann[i] = quad(a, n, n);
    g.ATn[i] = quad(a, T, n);
    g.AnpT[i] = quad(a, np, T);
    g.AtTT[i] = quad(at, T, T);
    g.Anpnp[i] = quad(a, np, np);
    g.AtnpT[i] = quad(at, np, T);
    AtTnp[i] = quad(at, T, np);
    g.AttTT[i] = quad(att, T, T);
    g.Annp[i] = quad(a, n, np);
    g.AtnT[i] = quad(at, n, T);
    for (double t : {-opt.delta0, opt.delta0}) {
      Vec2 Y = X + t * n;
      if (!q.inside(Y) || !(q(Y) > 0.0)) {
        std::ostringstream os;
        os << "tube of half-width " << opt.delta0 << " leaves the domain near (" << X[0] << ", " << X[1] << ")";
        throw ValidationError(os.str());
      }
    }
    double d1, d2;
    VectorXd v = five_point([&](double t) { return q(X + t * n); }, opt.q_step, d1, d2);
    g.q[i] = v[2];
    g.qt[i] = d1;
    g.qtt[i] = d2;
  }
  if ((g.D.array() <= 0.0).any()) throw NumericalError("modified normal is tangent to the curve");

  const VectorXd& D = g.D;
  const VectorXd Tnp = g.tx.cwiseProduct(g.npx) + g.ty.cwiseProduct(g.npy);
  const VectorXd npnp = g.npx.cwiseAbs2() + g.npy.cwiseAbs2();
  const VectorXd ATnp = g.AnpT;  // A* symmetric
  g.a11 = g.Ann.cwiseQuotient(D);
  g.a22 = -(g.Annp + g.AtnT).cwiseQuotient(D);
  g.a31 = g.W.cwiseQuotient(D);
  g.a32.resize(m);
  g.a33.resize(m);
  for (int i = 0; i < m; ++i) {
    const double d = D[i], d2 = d * d, d3 = d2 * d;
    g.a32[i] = g.AtTT[i] / d + 2.0 * ATnp[i] / d - 2.0 * Tnp[i] * g.W[i] / d2;
    g.a33[i] = (g.Anpnp[i] + 2.0 * AtTnp[i] + 0.5 * g.AttTT[i]) / d -
               2.0 * Tnp[i] * (g.AtTT[i] + 2.0 * ATnp[i]) / d2 +
               (4.0 * Tnp[i] * Tnp[i] / d3 - npnp[i] / d2) * g.W[i];
  }
  const VectorXd invD = D.cwiseInverse();
  g.b11 = diff(g.a11, L) - 0.5 * diff(invD, L).cwiseProduct(g.Ann) - (g.Annp + g.AtnT).cwiseQuotient(D);
  g.b21 = Tnp.cwiseProduct(g.a31).cwiseQuotient(D) + g.a32;
  g.b22 = 0.5 * diff(D, L).cwiseQuotient(D).cwiseProduct(g.a22) +
          (npnp.cwiseQuotient(D) - 2.0 * Tnp.cwiseAbs2().cwiseQuotient(D.cwiseAbs2())).cwiseProduct(g.a31) +
          Tnp.cwiseQuotient(D).cwiseProduct(g.a32) + diff(g.a22, L) + 2.0 * g.a33;

  g.alpha = g.q;
  g.beta.resize(m);
  for (int i = 0; i < m; ++i) g.beta[i] = std::pow(g.q[i], 0.5 * (p - 1.0)) / std::sqrt(g.a31[i]);
  const VectorXd ap = diff(g.alpha, L);
  const VectorXd bp = diff(g.beta, L), bpp = diff(g.beta, L, 2);
  g.U2.resize(m);
  g.U1.resize(m);
  g.U0.resize(m);
  for (int i = 0; i < m; ++i) {
    const double al = g.alpha[i], be = g.beta[i];
    const double w = std::pow(al, 1.0 - p);
    const double ab = w * be * be;  // alpha^{1-p} beta^2
    g.U2[i] = w * g.a11[i];
    g.U1[i] = w * (g.a22[i] - g.b11[i] + g.a11[i] * (bp[i] / be - 2.0 * ap[i] / al));
    double brace = 2.0 * ap[i] / al * g.a22[i] + bp[i] / be * g.b11[i] + g.b22[i] - g.a33[i] +
                   0.5 * (p + 3.0) * std::pow(al, p - 2.0) / (be * be) * g.qtt[i] +
                   (p + 2.0) / (2.0 * (p + 3.0)) * ab * g.a32[i] * g.a32[i] -
                   (p + 1.0) / (p + 3.0) * ab * g.a32[i] * g.b21[i] - 2.0 / (p + 3.0) * ab * g.b21[i] * g.b21[i] +
                   g.a11[i] * (bpp[i] / be + 2.0 * ap[i] * bp[i] / (al * be) - bp[i] * bp[i] / (be * be));
    g.U0[i] = -w * brace;
  }
  g.U0_positive = g.U0.minCoeff() > 0.0;
  g.l1 = g.U0_positive ? periodic::integrate(g.U0.cwiseQuotient(g.U2).cwiseSqrt(), L) : 0.0;
  g.l2 = periodic::integrate(g.U2.cwiseSqrt().cwiseInverse(), L);

  g.gx = Trig(g.x, L);
  g.gy = Trig(g.y, L);
  g.gnx = Trig(g.nx, L);
  g.gny = Trig(g.ny, L);
  return g;
}

double functional_K(const Curve& curve, const MatrixField& A, const ScalarField& q, double p) {
  VectorXd xt = diff(curve.x, 1.0), yt = diff(curve.y, 1.0);
  double sum = 0.0;
  for (int i = 0; i < curve.size(); ++i) {
    Vec2 X(curve.x[i], curve.y[i]), T(xt[i], yt[i]);
    sum += std::pow(q(X), 0.5 * (p + 3.0)) * std::sqrt(quad(A.adjugate(X), T, T));
  }
  return sum / curve.size();
}

double functional_K(const CurveGeometry& g, const MatrixField& A, const ScalarField& q) {
  return functional_K(g.samples(), A, q, g.p);
}

Curve perturb(const CurveGeometry& g, const VectorXd& h) {
  return {g.x + h.cwiseProduct(g.nx), g.y + h.cwiseProduct(g.ny)};
}

FirstVariation first_variation(const CurveGeometry& g, const VectorXd& h) {
  const double p = g.p;
  FirstVariation r;
  r.density.resize(g.m);
  for (int i = 0; i < g.m; ++i) {
    const double qi = g.q[i];
    r.density[i] = std::pow(qi, 0.5 * (p + 1.0)) / std::sqrt(g.W[i]) *
                   (0.5 * (p + 3.0) * g.qt[i] * g.W[i] + qi * (g.AnpT[i] + 0.5 * g.AtTT[i]));
  }
  r.value = periodic::integrate(r.density.cwiseProduct(h), g.length);
  return r;
}

double second_variation(const CurveGeometry& g, const VectorXd& h, const VectorXd& kk) {
  const double p = g.p, a = 0.5 * (p + 3.0);
  const VectorXd hp = diff(h, g.length), kp = diff(kk, g.length);
  double sum = 0.0;
  for (int i = 0; i < g.m; ++i) {
    const double qi = g.q[i], sw = std::sqrt(g.W[i]);
    const double qa = std::pow(qi, a), qa1 = std::pow(qi, a - 1.0), qa2 = std::pow(qi, a - 2.0);
    const double hk = h[i] * kk[i];
    const double w1 = g.AnpT[i] + 0.5 * g.AtTT[i];
    double v = (a * (a - 1.0) * qa2 * g.qt[i] * g.qt[i] + a * qa1 * g.qtt[i]) * sw * hk;
    v += a * qa1 * g.qt[i] / sw * 2.0 * w1 * hk;
    v += qa / sw *
         ((g.Anpnp[i] + 2.0 * g.AtnpT[i] + 0.5 * g.AttTT[i]) * hk + g.Ann[i] * hp[i] * kp[i] +
          (g.Annp[i] + g.AtnT[i]) * (h[i] * kp[i] + hp[i] * kk[i]));
    v -= qa / (sw * g.W[i]) * w1 * w1 * hk;
    sum += v;
  }
  return sum * g.length / g.m;
}

Eigen::MatrixXd second_variation_matrix(const CurveGeometry& g) {
  const double p = g.p, a = 0.5 * (p + 3.0);
  VectorXd S(g.m), P(g.m), R(g.m);
  for (int i = 0; i < g.m; ++i) {
    const double qi = g.q[i], sw = std::sqrt(g.W[i]);
    const double qa = std::pow(qi, a), qa1 = std::pow(qi, a - 1.0), qa2 = std::pow(qi, a - 2.0);
    const double w1 = g.AnpT[i] + 0.5 * g.AtTT[i];
    S[i] = (a * (a - 1.0) * qa2 * g.qt[i] * g.qt[i] + a * qa1 * g.qtt[i]) * sw + a * qa1 * g.qt[i] / sw * 2.0 * w1 +
           qa / sw * (g.Anpnp[i] + 2.0 * g.AtnpT[i] + 0.5 * g.AttTT[i]) - qa / (sw * g.W[i]) * w1 * w1;
    P[i] = qa / sw * g.Ann[i];
    R[i] = qa / sw * (g.Annp[i] + g.AtnT[i]);
  }
  const Eigen::MatrixXd D1 = periodic::diff_matrix(g.m, g.length, 1);
  Eigen::MatrixXd H = D1.transpose() * P.asDiagonal() * D1;
  Eigen::MatrixXd C = R.asDiagonal() * D1;
  H += C + C.transpose();
  H.diagonal() += S;
  return H * (g.length / g.m);
}

double fd_hessian(const CurveGeometry& g, const MatrixField& A, const ScalarField& q, const VectorXd& h, double e) {
  double kp = functional_K(perturb(g, e * h), A, q, g.p);
  double km = functional_K(perturb(g, -e * h), A, q, g.p);
  double k0 = functional_K(g, A, q);
  return (kp - 2.0 * k0 + km) / (e * e);
}

VectorXd criticality_residual(const CurveGeometry& g) {
  const double p = g.p;
  VectorXd r(g.m);
  for (int i = 0; i < g.m; ++i) {
    double f = std::pow(g.alpha[i], 2.0 - p) * g.beta[i] * g.beta[i];
    r[i] = g.qt[i] - g.a32[i] * f / (p + 3.0) + 2.0 * g.b21[i] * f / (p + 3.0);
  }
  return r;
}

double criticality_defect(const CurveGeometry& g) {
  const double p = g.p;
  double s1 = 0.0, s2 = 0.0, s3 = 0.0;
  for (int i = 0; i < g.m; ++i) {
    double f = std::pow(g.alpha[i], 2.0 - p) * g.beta[i] * g.beta[i];
    s1 = std::max(s1, std::abs(g.qt[i]));
    s2 = std::max(s2, std::abs(g.a32[i] * f / (p + 3.0)));
    s3 = std::max(s3, std::abs(2.0 * g.b21[i] * f / (p + 3.0)));
  }
  return criticality_residual(g).cwiseAbs().maxCoeff() / (s1 + s2 + s3);
}

VectorXd jacobi_apply(const CurveGeometry& g, const VectorXd& u) {
  return -g.U2.cwiseProduct(diff(u, g.length, 2)) + g.U1.cwiseProduct(diff(u, g.length)) - g.U0.cwiseProduct(u);
}

VectorXd layer_operator_apply(const CurveGeometry& g, const VectorXd& h) {
  const double p = g.p;
  const double L = g.length;
  const VectorXd ap = diff(g.alpha, L), bp = diff(g.beta, L);
  const VectorXd hp = diff(h, L), hpp = diff(h, L, 2);
  VectorXd r(g.m);
  for (int i = 0; i < g.m; ++i) {
    const double al = g.alpha[i], be = g.beta[i];
    const double ab = std::pow(al, 1.0 - p) * be * be;
    const double lg = bp[i] / be + 2.0 * ap[i] / al;
    double c0 = g.a22[i] * lg - g.a33[i] + g.b22[i] + 0.5 * (p + 3.0) * std::pow(al, p - 2.0) / (be * be) * g.qtt[i] +
                (p + 2.0) / (2.0 * (p + 3.0)) * ab * g.a32[i] * g.a32[i] -
                (p + 1.0) / (p + 3.0) * ab * g.a32[i] * g.b21[i] - 2.0 / (p + 3.0) * ab * g.b21[i] * g.b21[i];
    r[i] = -g.a11[i] * hpp[i] + (g.a22[i] - g.b11[i] - g.a11[i] * lg) * hp[i] + c0 * h[i];
  }
  return r;
}

double jacobi_quadratic(const CurveGeometry& g, const VectorXd& h) {
  const VectorXd u = g.beta.cwiseProduct(h);
  const VectorXd Ju = jacobi_apply(g, u);
  double sum = 0.0;
  for (int i = 0; i < g.m; ++i) sum += std::pow(g.q[i], 0.5 * (g.p + 3.0)) * std::sqrt(g.W[i]) * u[i] * Ju[i];
  return sum * g.length / g.m;
}

double jacobi_smallest_singular_value(const CurveGeometry& g) {
  Eigen::MatrixXd J = g.U2.asDiagonal() * periodic::diff_matrix(g.m, g.length, 2);
  J = -J;
  J += g.U1.asDiagonal() * periodic::diff_matrix(g.m, g.length, 1);
  J.diagonal() -= g.U0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
  return svd.singularValues()[svd.singularValues().size() - 1];
}

CriticalResult find_critical_curve(const Curve& initial, const MatrixField& A, const ScalarField& q,
                                   const BuildOptions& opt, const CriticalOptions& copt) {
  CriticalResult res;
  Curve cur = initial;
  for (int it = 0; it <= copt.max_iter; ++it) {
    CurveGeometry g = build_curve(cur, A, q, opt);
    double defect = criticality_defect(g);
    res.defect_history.push_back(defect);
    if (defect < copt.tol) {
      res.curve = std::move(g);
      res.iterations = it;
      return res;
    }
    if (it == copt.max_iter) break;
    if (it >= 6 && defect > 0.5 * res.defect_history[it - 4]) break;  // no progress over four steps
    const int K = copt.modes > 0 ? std::min(copt.modes, (g.m - 1) / 2) : (g.m - 1) / 2;
    Eigen::MatrixXd Phi(g.m, 2 * K + 1);
    Phi.col(0).setOnes();
    for (int k = 1; k <= K; ++k)
      for (int i = 0; i < g.m; ++i) {
        double th = 2.0 * kPi * k * g.s[i] / g.length;
        Phi(i, 2 * k - 1) = std::cos(th);
        Phi(i, 2 * k) = std::sin(th);
      }
    const FirstVariation fv = first_variation(g, VectorXd::Zero(g.m));
    const double wq = g.length / g.m;
    Eigen::VectorXd grad = wq * Phi.transpose() * fv.density;
    Eigen::MatrixXd H = Phi.transpose() * second_variation_matrix(g) * Phi;
    Eigen::VectorXd coef = H.colPivHouseholderQr().solve(-grad);
    VectorXd h = Phi * coef;
    double hmax = h.cwiseAbs().maxCoeff();
    if (hmax > copt.max_step) h *= copt.max_step / hmax;
    cur = perturb(g, h);
  }
  std::ostringstream os;
  os << "critical curve search stalled; defect history:";
  for (double d : res.defect_history) os << ' ' << d;
  throw NumericalError(os.str());
}

double critical_radius_bessel(double p, double disk_radius) {
  const double j = bessel_j0_zero() / disk_radius;
  auto f = [&](double R) {
    double psi = boost::math::cyl_bessel_j(0, j * R);
    double dpsi = -j * boost::math::cyl_bessel_j(1, j * R);
    return 1.0 / R + (p + 3.0) / (2.0 * p) * dpsi / psi;
  };
  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t it = 200;
  auto r = boost::math::tools::toms748_solve(f, 1e-3 * disk_radius, (1.0 - 1e-9) * disk_radius, tol, it);
  return 0.5 * (r.first + r.second);
}

}  // namespace clayer::geometry
