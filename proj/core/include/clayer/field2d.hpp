#pragma once

#include "clayer/fields.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace clayer::field2d {

using Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// Uniform node lattice x_ij = lo + (i, j) h over a box padded around the domain. Nodes with
/// inside(x) true are unknowns; all others carry the zero Dirichlet value.
struct DomainGrid {
  std::string name;
  Vec2 lo = Vec2::Zero();
  double h = 0.0;
  int nx = 0, ny = 0;
  std::function<bool(const Vec2&)> inside;
  std::vector<int> index;  // node -> unknown, -1 outside
  std::vector<int> node;   // unknown -> node

  int unknowns() const { return static_cast<int>(node.size()); }
  Vec2 point(int i, int j) const { return lo + h * Vec2(i, j); }
  Vec2 point(int u) const { return point(node[u] % nx, node[u] / nx); }
  int at(int i, int j) const;  // unknown at node (i, j), -1 when outside or off the lattice

  /// Distance from each unknown to the nearest outside node adjacent to the domain.
  VectorXd boundary_distance() const;
  /// Largest distance between two boundary-adjacent outside nodes.
  double diameter() const;

  /// Lattice covering [lo, hi] padded by three cells; throws when the interior is empty or disconnected.
  static DomainGrid from_indicator(const std::string& name, const Vec2& lo, const Vec2& hi, double h,
                                   std::function<bool(const Vec2&)> inside);
  static DomainGrid disk(const Vec2& center, double R, double h);
  static DomainGrid square(const Vec2& lo, double side, double h);
  static DomainGrid ellipse(const Vec2& center, double a, double b, double h);
};

/// -Div(A grad u) in flux form: arithmetic face averages for the diagonal terms, centered
/// node-valued cross terms. Symmetric by construction. Throws ValidationError on a
/// non-symmetric or non-elliptic sample of A at a node.
SparseMatrix discretize_operator(const DomainGrid& grid, const MatrixField& A);

struct EigenField {
  DomainGrid grid;
  SparseMatrix L;
  double lambda1 = 0.0;
  VectorXd psi;  // interior values, max 1
  int iterations = 0;
  double residual = 0.0;  // ||L psi - lambda psi|| / ||psi||
};

/// Smallest eigenpair by inverse iteration with a sparse LDLT factorization.
EigenField first_eigenpair(const DomainGrid& grid, const MatrixField& A, double tol = 1e-11, int max_iter = 500);

/// EigenField from samples of a known eigenfunction (for instance J0 on a disk); lambda1 is taken as
/// given and the residual records how well the discrete operator reproduces it.
EigenField sampled_eigenfield(const DomainGrid& grid, const MatrixField& A, const ScalarField& psi, double lambda1);

struct BranchOptions {
  double tol = 1e-10;     // residual_2 < tol ||Psi||_2
  int max_iter = 60;
  int max_halvings = 30;
  int max_sweeps = 20000;  // fixed-point fallback
  bool force_fallback = false;
};

struct NegativeBranch {
  double eps = 0.0;
  double p = 0.0;
  VectorXd u;  // u_bar = -w, interior values
  int newton_iterations = 0;
  int sweeps = 0;  // fixed-point sweeps used by the fallback
  bool used_fallback = false;
  std::vector<double> residual_history;
};

/// Residual eps^2 L w + w^p - Psi of the equation for w = -u_bar.
VectorXd branch_residual(const EigenField& ef, double eps, double p, const VectorXd& w);

/// Solves -eps^2 Div(A grad w) = Psi - |w|^p for 0 <= w <= Psi^{1/p} and returns u_bar = -w.
/// start (optional) replaces the default initial guess w = Psi^{1/p}.
NegativeBranch solve_negative_branch(const EigenField& ef, double eps, double p, const BranchOptions& opt = {},
                                     const VectorXd* start = nullptr);

struct ExpansionReport {
  std::vector<double> eps;
  std::vector<double> E;  // sup_K |(u_bar + Psi^{1/p}) / eps^2 + f|
  std::vector<double> min_gap;  // min over the interior of u_bar + Psi^{1/p}
  std::vector<double> max_u;    // max over the interior of u_bar
  double f_max_on_K = 0.0;      // f < 0 on K
  int K_size = 0;
  bool monotone_E = false;
  bool monotone_in_eps = false;  // w decreases pointwise as eps grows
  std::vector<NegativeBranch> branches;
};

/// f = Div(A grad Psi^{1/p}) / (p Psi^{(p-1)/p}) with the discrete operator.
VectorXd expansion_coefficient(const EigenField& ef, double p);
/// Unknowns at distance >= margin * diam from the boundary.
std::vector<int> interior_compact(const DomainGrid& grid, double margin = 0.15);

/// Solves the branch for each eps (decreasing) and measures the eps^2 expansion on the interior compact set.
ExpansionReport verify_negative_expansion(const EigenField& ef, double p, const std::vector<double>& eps,
                                          double margin = 0.15);

/// Node values with zeros outside the domain.
Eigen::MatrixXd to_lattice(const DomainGrid& grid, const VectorXd& interior);

/// C1 bicubic convolution interpolant of interior values (zero outside), as a scalar field on the grid domain.
ScalarField interpolate(const DomainGrid& grid, const VectorXd& interior, const std::string& name);

/// CSV with columns x, y and the given interior vectors, one row per unknown.
void write_csv(const std::string& path, const DomainGrid& grid, const std::vector<std::string>& names,
               const std::vector<const VectorXd*>& columns);

}  // namespace clayer::field2d
