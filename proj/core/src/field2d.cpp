#include "clayer/field2d.hpp"

#include "clayer/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <queue>
#include <sstream>

namespace clayer::field2d {

int DomainGrid::at(int i, int j) const {
  if (i < 0 || j < 0 || i >= nx || j >= ny) return -1;
  return index[j * nx + i];
}

namespace {

// Outside nodes with an inside 4-neighbour.
std::vector<Vec2> boundary_nodes(const DomainGrid& g) {
  std::vector<Vec2> out;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (g.at(i, j) >= 0) continue;
      if (g.at(i + 1, j) >= 0 || g.at(i - 1, j) >= 0 || g.at(i, j + 1) >= 0 || g.at(i, j - 1) >= 0)
        out.push_back(g.point(i, j));
    }
  return out;
}

}  // namespace

VectorXd DomainGrid::boundary_distance() const {
  auto b = boundary_nodes(*this);
  VectorXd d(unknowns());
  for (int u = 0; u < unknowns(); ++u) {
    Vec2 x = point(u);
    double m = INFINITY;
    for (const auto& y : b) m = std::min(m, (x - y).squaredNorm());
    d[u] = std::sqrt(m);
  }
  return d;
}

double DomainGrid::diameter() const {
  auto b = boundary_nodes(*this);
  double m = 0.0;
  for (size_t i = 0; i < b.size(); ++i)
    for (size_t j = i + 1; j < b.size(); ++j) m = std::max(m, (b[i] - b[j]).squaredNorm());
  return std::sqrt(m);
}

DomainGrid DomainGrid::from_indicator(const std::string& name, const Vec2& lo, const Vec2& hi, double h,
                                      std::function<bool(const Vec2&)> inside) {
  if (!(h > 0.0) || !((hi - lo).minCoeff() > 0.0)) throw ValidationError("grid needs h > 0 and a nonempty box");
  DomainGrid g;
  g.name = name;
  g.h = h;
  g.lo = lo - Vec2::Constant(3.0 * h);
  g.nx = static_cast<int>(std::ceil((hi[0] - lo[0]) / h)) + 7;
  g.ny = static_cast<int>(std::ceil((hi[1] - lo[1]) / h)) + 7;
  g.inside = std::move(inside);
  g.index.assign(static_cast<size_t>(g.nx) * g.ny, -1);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (i < 2 || j < 2 || i >= g.nx - 2 || j >= g.ny - 2) continue;
      if (g.inside(g.point(i, j))) {
        g.index[j * g.nx + i] = g.unknowns();
        g.node.push_back(j * g.nx + i);
      }
    }
  if (g.node.empty()) throw ValidationError("grid " + name + " has no interior nodes");
  std::vector<char> seen(g.node.size(), 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int count = 1;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    int i = g.node[u] % g.nx, j = g.node[u] / g.nx;
    for (auto [di, dj] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
      int v = g.at(i + di, j + dj);
      if (v >= 0 && !seen[v]) {
        seen[v] = 1;
        ++count;
        q.push(v);
      }
    }
  }
  if (count != g.unknowns()) throw ValidationError("grid " + name + " interior is not connected");
  return g;
}

DomainGrid DomainGrid::disk(const Vec2& center, double R, double h) {
  return from_indicator("disk", center - Vec2::Constant(R), center + Vec2::Constant(R), h,
                        [=](const Vec2& x) { return (x - center).norm() < R; });
}

DomainGrid DomainGrid::square(const Vec2& lo, double side, double h) {
  Vec2 hi = lo + Vec2::Constant(side);
  return from_indicator("square", lo, hi, h, [=](const Vec2& x) {
    return x[0] > lo[0] + 1e-12 && x[1] > lo[1] + 1e-12 && x[0] < hi[0] - 1e-12 && x[1] < hi[1] - 1e-12;
  });
}

DomainGrid DomainGrid::ellipse(const Vec2& center, double a, double b, double h) {
  return from_indicator("ellipse", center - Vec2(a, b), center + Vec2(a, b), h, [=](const Vec2& x) {
    Vec2 d = x - center;
    return d[0] * d[0] / (a * a) + d[1] * d[1] / (b * b) < 1.0;
  });
}

SparseMatrix discretize_operator(const DomainGrid& g, const MatrixField& A) {
  const int nx = g.nx, ny = g.ny;
  std::vector<Mat2> a(static_cast<size_t>(nx) * ny, Mat2::Zero());
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) a[j * nx + i] = A(g.point(i, j));
  for (int u = 0; u < g.unknowns(); ++u) {
    const Mat2& m = a[g.node[u]];
    if (std::abs(m(0, 1) - m(1, 0)) > 1e-14 * m.norm())
      throw ValidationError("matrix field " + A.name + " is not symmetric");
    if (!(m(0, 0) > 0.0 && m.determinant() > 0.0))
      throw ValidationError("matrix field " + A.name + " is not elliptic on the grid");
  }
  auto c = [&](int i, int j, int r, int s) { return a[j * nx + i](r, s); };
  const double h2 = g.h * g.h;
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<size_t>(g.unknowns()) * 9);
  for (int u = 0; u < g.unknowns(); ++u) {
    int i = g.node[u] % nx, j = g.node[u] / nx;
    double axp = 0.5 * (c(i, j, 0, 0) + c(i + 1, j, 0, 0)), axm = 0.5 * (c(i, j, 0, 0) + c(i - 1, j, 0, 0));
    double ayp = 0.5 * (c(i, j, 1, 1) + c(i, j + 1, 1, 1)), aym = 0.5 * (c(i, j, 1, 1) + c(i, j - 1, 1, 1));
    t.emplace_back(u, u, (axp + axm + ayp + aym) / h2);
    auto add = [&](int ii, int jj, double v) {
      int w = g.at(ii, jj);
      if (w >= 0 && v != 0.0) t.emplace_back(u, w, v);
    };
    add(i + 1, j, -axp / h2);
    add(i - 1, j, -axm / h2);
    add(i, j + 1, -ayp / h2);
    add(i, j - 1, -aym / h2);
    const double q = 4.0 * h2;
    add(i + 1, j + 1, -(c(i + 1, j, 0, 1) + c(i, j + 1, 0, 1)) / q);
    add(i + 1, j - 1, (c(i + 1, j, 0, 1) + c(i, j - 1, 0, 1)) / q);
    add(i - 1, j + 1, (c(i - 1, j, 0, 1) + c(i, j + 1, 0, 1)) / q);
    add(i - 1, j - 1, -(c(i - 1, j, 0, 1) + c(i, j - 1, 0, 1)) / q);
  }
  SparseMatrix L(g.unknowns(), g.unknowns());
  L.setFromTriplets(t.begin(), t.end());
  L.makeCompressed();
  return L;
}

EigenField first_eigenpair(const DomainGrid& grid, const MatrixField& A, double tol, int max_iter) {
  EigenField ef;
  ef.grid = grid;
  ef.L = discretize_operator(grid, A);
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(ef.L);
  if (ldlt.info() != Eigen::Success) throw NumericalError("eigenpair: factorization failed");
  VectorXd v = VectorXd::Ones(grid.unknowns());
  v.normalize();
  double lambda = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    VectorXd w = ldlt.solve(v);
    v = w.normalized();
    VectorXd Lv = ef.L * v;
    lambda = v.dot(Lv);
    double res = (Lv - lambda * v).norm();
    ef.iterations = it;
    ef.residual = res;
    if (res < tol * lambda) break;
    if (it == max_iter) throw NumericalError("eigenpair: inverse iteration did not converge");
  }
  if (v.sum() < 0.0) v = -v;
  if (v.minCoeff() <= 0.0) throw NumericalError("eigenpair: first eigenvector is not positive");
  ef.lambda1 = lambda;
  ef.psi = v / v.maxCoeff();
  return ef;
}

EigenField sampled_eigenfield(const DomainGrid& grid, const MatrixField& A, const ScalarField& psi, double lambda1) {
  EigenField ef;
  ef.grid = grid;
  ef.L = discretize_operator(grid, A);
  ef.psi.resize(grid.unknowns());
  for (int u = 0; u < grid.unknowns(); ++u) ef.psi[u] = psi(grid.point(u));
  if (!(ef.psi.minCoeff() > 0.0)) throw ValidationError("sampled eigenfunction must be positive inside");
  ef.psi /= ef.psi.maxCoeff();
  ef.lambda1 = lambda1;
  ef.residual = (ef.L * ef.psi - lambda1 * ef.psi).norm() / ef.psi.norm();
  return ef;
}

VectorXd branch_residual(const EigenField& ef, double eps, double p, const VectorXd& w) {
  return eps * eps * (ef.L * w) + w.array().abs().pow(p).matrix() - ef.psi;
}

NegativeBranch solve_negative_branch(const EigenField& ef, double eps, double p, const BranchOptions& opt,
                                     const VectorXd* start) {
  if (!(eps > 0.0)) throw ValidationError("negative branch needs eps > 0");
  if (!(p > 1.0)) throw ValidationError("negative branch needs p > 1");
  NegativeBranch nb;
  nb.eps = eps;
  nb.p = p;
  const VectorXd top = ef.psi.array().pow(1.0 / p).matrix();
  auto clip = [&](VectorXd w) { return w.cwiseMax(0.0).cwiseMin(top); };
  VectorXd w = start ? clip(*start) : top;
  const double target = opt.tol * ef.psi.norm();
  const SparseMatrix E = eps * eps * ef.L;

  auto newton = [&](VectorXd& w, int max_iter) {
    Eigen::SimplicialLDLT<SparseMatrix> ldlt;
    ldlt.analyzePattern(E);
    double r = branch_residual(ef, eps, p, w).norm();
    nb.residual_history.push_back(r);
    for (int it = 0; it < max_iter && r >= target; ++it) {
      VectorXd F = branch_residual(ef, eps, p, w);
      SparseMatrix J = E;
      for (int k = 0; k < J.rows(); ++k) J.coeffRef(k, k) += p * std::pow(w[k], p - 1.0);
      ldlt.factorize(J);
      if (ldlt.info() != Eigen::Success) return false;
      VectorXd dw = ldlt.solve(-F);
      double s = 1.0;
      bool accepted = false;
      for (int k = 0; k <= opt.max_halvings; ++k, s *= 0.5) {
        VectorXd wn = clip(w + s * dw);
        double rn = branch_residual(ef, eps, p, wn).norm();
        if (rn < r) {
          w = wn;
          r = rn;
          accepted = true;
          break;
        }
      }
      ++nb.newton_iterations;
      nb.residual_history.push_back(r);
      if (!accepted) return false;
    }
    return r < target;
  };

  bool ok = !opt.force_fallback && newton(w, opt.max_iter);
  if (!ok) {
    // Monotone iteration from the supersolution: (eps^2 L + c) w+ = Psi - w^p + c w, c >= p max w^{p-1}.
    nb.used_fallback = true;
    w = top;
    const double c = p * std::pow(top.maxCoeff(), p - 1.0);
    SparseMatrix M = E;
    for (int k = 0; k < M.rows(); ++k) M.coeffRef(k, k) += c;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(M);
    double r = INFINITY;
    for (int k = 0; k < opt.max_sweeps; ++k) {
      VectorXd rhs = ef.psi - w.array().pow(p).matrix() + c * w;
      w = clip(ldlt.solve(rhs));
      ++nb.sweeps;
      r = branch_residual(ef, eps, p, w).norm();
      if (r < target || (k % 50 == 49 && r < 1e-3 * ef.psi.norm())) break;
    }
    nb.residual_history.push_back(r);
    if (r >= target) ok = newton(w, opt.max_iter);
    else ok = true;
    if (!ok) {
      std::ostringstream os;
      os << "negative branch failed at eps=" << eps << "; residual history:";
      for (double v : nb.residual_history) os << ' ' << v;
      throw NumericalError(os.str());
    }
  }
  nb.u = -w;
  return nb;
}

VectorXd expansion_coefficient(const EigenField& ef, double p) {
  VectorXd q = ef.psi.array().pow(1.0 / p).matrix();
  VectorXd Lq = ef.L * q;
  return (-Lq.array() / (p * ef.psi.array().pow((p - 1.0) / p))).matrix();
}

std::vector<int> interior_compact(const DomainGrid& grid, double margin) {
  VectorXd d = grid.boundary_distance();
  double lim = margin * grid.diameter();
  std::vector<int> K;
  for (int u = 0; u < grid.unknowns(); ++u)
    if (d[u] >= lim) K.push_back(u);
  return K;
}

ExpansionReport verify_negative_expansion(const EigenField& ef, double p, const std::vector<double>& eps,
                                          double margin) {
  if (eps.size() < 3) throw ValidationError("expansion check needs at least three eps values");
  for (size_t k = 1; k < eps.size(); ++k)
    if (!(eps[k] < eps[k - 1])) throw ValidationError("eps list must be strictly decreasing");
  ExpansionReport rep;
  rep.eps = eps;
  auto K = interior_compact(ef.grid, margin);
  rep.K_size = static_cast<int>(K.size());
  if (K.empty()) throw ValidationError("interior compact set is empty");
  VectorXd f = expansion_coefficient(ef, p);
  VectorXd q = ef.psi.array().pow(1.0 / p).matrix();
  rep.f_max_on_K = -INFINITY;
  for (int u : K) rep.f_max_on_K = std::max(rep.f_max_on_K, f[u]);
  for (double e : eps) {
    auto nb = solve_negative_branch(ef, e, p);
    double E = 0.0;
    for (int u : K) E = std::max(E, std::abs((nb.u[u] + q[u]) / (e * e) + f[u]));
    rep.E.push_back(E);
    rep.min_gap.push_back((nb.u + q).minCoeff());
    rep.max_u.push_back(nb.u.maxCoeff());
    rep.branches.push_back(std::move(nb));
  }
  rep.monotone_E = true;
  rep.monotone_in_eps = true;
  for (size_t k = 1; k < eps.size(); ++k) {
    if (!(rep.E[k] < rep.E[k - 1])) rep.monotone_E = false;
    // w = -u grows as eps shrinks
    VectorXd dw = rep.branches[k - 1].u - rep.branches[k].u;
    if (dw.minCoeff() < -1e-12) rep.monotone_in_eps = false;
  }
  return rep;
}

Eigen::MatrixXd to_lattice(const DomainGrid& grid, const VectorXd& interior) {
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(grid.nx, grid.ny);
  for (int u = 0; u < grid.unknowns(); ++u) V(grid.node[u] % grid.nx, grid.node[u] / grid.nx) = interior[u];
  return V;
}

namespace {

double keys(double x) {
  const double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

}  // namespace

ScalarField interpolate(const DomainGrid& grid, const VectorXd& interior, const std::string& name) {
  auto V = std::make_shared<Eigen::MatrixXd>(to_lattice(grid, interior));
  const Vec2 lo = grid.lo;
  const double h = grid.h;
  const int nx = grid.nx, ny = grid.ny;
  return {name,
          [=](const Vec2& x) {
            double fx = (x[0] - lo[0]) / h, fy = (x[1] - lo[1]) / h;
            int i0 = static_cast<int>(std::floor(fx)), j0 = static_cast<int>(std::floor(fy));
            double s = 0.0;
            for (int dj = -1; dj <= 2; ++dj) {
              int j = j0 + dj;
              if (j < 0 || j >= ny) continue;
              double wy = keys(fy - j);
              for (int di = -1; di <= 2; ++di) {
                int i = i0 + di;
                if (i < 0 || i >= nx) continue;
                s += keys(fx - i) * wy * (*V)(i, j);
              }
            }
            return s;
          },
          grid.inside};
}

void write_csv(const std::string& path, const DomainGrid& grid, const std::vector<std::string>& names,
               const std::vector<const VectorXd*>& columns) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write " + path);
  os << "x,y";
  for (const auto& n : names) os << ',' << n;
  os << '\n' << std::setprecision(12);
  for (int u = 0; u < grid.unknowns(); ++u) {
    Vec2 x = grid.point(u);
    os << x[0] << ',' << x[1];
    for (const auto* c : columns) os << ',' << (*c)[u];
    os << '\n';
  }
}

}  // namespace clayer::field2d
