#pragma once

#include "clayer/field2d.hpp"
#include "clayer/geometry.hpp"
#include "clayer/profile1d.hpp"
#include "clayer/toda.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace clayer::assembler {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Per-unknown Fermi coordinates: theta is arclength on the curve, t the signed distance along n.
struct FermiChart {
  double delta0 = 0.0;
  std::vector<int> nodes;  // unknowns inside the chart
  VectorXd theta, t;       // per unknown; NaN outside the chart
  bool contains(int u) const { return t[u] == t[u]; }
};

/// Solves y = gamma(theta) + t n(theta) by Newton from the seed theta0; false when the iteration meets a
/// degenerate Jacobian or does not converge.
bool chart_point(const geometry::CurveGeometry& g, const Vec2& y, double theta0, double& theta, double& t);

/// Chart for every unknown with |t| < delta0. Throws ValidationError when the chart folds.
FermiChart fermi_chart(const geometry::CurveGeometry& g, const field2d::DomainGrid& grid, double delta0);

struct AnsatzConfig {
  int order = 1;          // 0: profiles only, 1: adds eps phi^(1)
  bool amplitudes = true; // eps e_k Z at order 1
  double delta = 0.14;    // cutoff equals 1 for |t| < plateau delta, 0 beyond support delta
  double delta0 = 0.44;   // chart half-width
  double plateau = 2.0;
  double support = 3.0;
};

/// C2 cutoff in |t|.
double cutoff(double t, const AnsatzConfig& cfg);

/// Layer part W(theta, t) = eta(t) alpha sum_k V_k(theta, beta (t/eps - f_k)).
class LayerField {
 public:
  LayerField(const geometry::CurveGeometry& g, const profile1d::ProfileSet& ps, const toda::LayerState& s,
             const AnsatzConfig& cfg);

  /// At curve node i (no interpolation along the curve).
  double at_node(int i, double t) const;
  /// At arbitrary arclength theta.
  double operator()(double theta, double t) const;

  int N() const { return N_; }
  double eps() const { return eps_; }
  const AnsatzConfig& config() const { return cfg_; }

 private:
  struct Local {
    double alpha, beta, b21, a32, qt;
    double f[16], e[16];
  };
  double eval(const Local& c, double t) const;
  Local node(int i) const;

  int N_ = 0;
  double eps_ = 0.0, p_ = 0.0, length_ = 1.0;
  AnsatzConfig cfg_;
  profile1d::ProfileSet ps_;
  VectorXd alpha_, beta_, b21_, a32_, qt_;
  MatrixXd f_, e_;
  std::vector<periodic::Trig> trig_;  // alpha, beta, b21, a32, qt, f_1..f_N, e_1..e_N
};

/// Layer-overlap check: beta (f_{j+1} - f_j) > (2/sqrt p)|ln eps| - (4/sqrt p) ln|ln eps| at every node.
/// Returns the smallest margin.
double separation_margin(const toda::LayerState& s, const geometry::CurveGeometry& g, double p);

/// Smallest distance between the plateau edge and a layer, max_k |eps f_k| + 4 eps / beta against plateau delta.
double plateau_margin(const toda::LayerState& s, const geometry::CurveGeometry& g, const AnsatzConfig& cfg);

struct Ansatz2D {
  double eps = 0.0, p = 0.0;
  int order = 0, N = 0;
  VectorXd ubar, layer, u;  // interior values, u = ubar + layer
  FermiChart chart;
};

/// Assembles u on the grid. Throws ValidationError for p <= 3 and LayerOverlapError when the layers overlap.
Ansatz2D build_ansatz(const field2d::EigenField& ef, const field2d::NegativeBranch& branch,
                      const geometry::CurveGeometry& g, const LayerField& layer, const FermiChart& chart);

/// r = -eps^2 Div(A grad u) - |u|^p + Psi on interior unknowns with the lattice operator.
VectorXd grid_residual(const field2d::EigenField& ef, const VectorXd& u, double eps, double p);

struct TubeResidual {
  double tube = 0.0;  // L2 over |t| < plateau delta, area weights
  double band = 0.0;  // L2 over the cutoff band
  double sup = 0.0;   // sup over the tube
  int nt = 0, ntheta = 0;
};

/// Residual of the layer equation -eps^2 Div(A grad W) - |ubar + W|^p + |ubar|^p on a Fermi grid
/// (spectral in theta, fourth-order differences in t), resolving the layer independently of the lattice.
TubeResidual tube_residual(const LayerField& layer, const geometry::CurveGeometry& g, const ScalarField& ubar,
                           const MatrixField& A, double p, int points_per_width = 25);

struct ResidualNorms {
  double tube = 0.0, band = 0.0, tube_sup = 0.0;
  double global = 0.0, sup = 0.0;  // lattice residual over the whole domain
};

ResidualNorms pde_residual(const Ansatz2D& a, const field2d::EigenField& ef, const LayerField& layer,
                           const geometry::CurveGeometry& g, const MatrixField& A);

/// Everything that stays fixed along an eps sweep.
struct SweepSetup {
  const field2d::EigenField* ef = nullptr;
  const MatrixField* A = nullptr;
  const geometry::CurveGeometry* g = nullptr;
  const profile1d::ProfileSet* ps = nullptr;
  int N = 1;
  AnsatzConfig cfg;
  toda::GapOptions gap;
  int refine_k = 2;
};

/// rho, refined layer positions and amplitudes at eps.
toda::LayerState layer_state(const SweepSetup& s, double eps);

struct SweepPoint {
  double eps = 0.0, rho = 0.0;
  bool admissible = false;
  toda::GapReport gap;
  double separation = 0.0, plateau = 0.0;
  ResidualNorms order0, order1;
};

struct SweepReport {
  std::vector<SweepPoint> points;  // admissible points only
  std::vector<SweepPoint> rejected;
  double slope0 = 0.0, slope1 = 0.0;
  bool monotone0 = false, monotone1 = false;
};

/// Admissibility of eps: both resonance gaps pass and the layers fit inside the plateau.
SweepPoint classify(const SweepSetup& s, double eps);

/// Builds order-0 and order-1 ans\"atze for each admissible eps and fits log(tube residual) against log eps.
SweepReport residual_sweep(const SweepSetup& s, const std::vector<double>& eps);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct RefineOptions {
  int max_iter = 20;
  double tol = 1e-10;  // ||F||_2 < tol ||Psi||_2
  int max_halvings = 20;
};

struct RefineResult {
  VectorXd u;
  std::vector<double> residuals;  // relative, before each step and after the last
  int iterations = 0;
  bool converged = false;
};

/// Damped Newton on eps^2 L u - |u|^p + Psi = 0. Throws NumericalError with the history on divergence.
RefineResult newton_refine(const field2d::EigenField& ef, const VectorXd& u0, double eps, double p,
                           const RefineOptions& opt = {});

struct Census {
  std::vector<int> counts;             // per section
  std::vector<std::vector<double>> peaks;  // t of each counted maximum
  int mode = 0;                        // most frequent count
  bool uniform = false;
};

/// Local maxima of u + Psi^{1/p} along normal sections at equally spaced theta, counted with prominence
/// at least frac times the section maximum.
Census layer_census(const field2d::EigenField& ef, const VectorXd& u, const geometry::CurveGeometry& g, double p,
                    double half_width, int sections = 12, double frac = 0.1);

/// Topographic prominence of each strict local maximum of y.
std::vector<std::pair<int, double>> prominent_maxima(const std::vector<double>& y, double threshold);

}  // namespace clayer::assembler
