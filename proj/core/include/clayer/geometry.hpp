#pragma once

#include "clayer/fields.hpp"
#include "clayer/periodic.hpp"

#include <Eigen/Dense>

#include <vector>

namespace clayer::geometry {

using Eigen::VectorXd;

/// Closed planar curve sampled at m equispaced parameter values on [0, 1).
struct Curve {
  VectorXd x, y;
  int size() const { return static_cast<int>(x.size()); }

  static Curve circle(const Vec2& center, double R, int m);
  static Curve ellipse(const Vec2& center, double a, double b, int m, double tilt = 0.0);
  /// Radius r(phi) = R (1 + sum_k c_k cos(k phi) + s_k sin(k phi)) about center.
  static Curve star(const Vec2& center, double R, const std::vector<double>& c, const std::vector<double>& s, int m);
};

struct BuildOptions {
  double p = 4.0;
  double delta0 = 0.1;   // tube half-width that must stay in the domain of q
  double q_step = 1e-3;  // normal-line step for q_t, q_tt
  bool check_simple = true;
};

/// A curve with its modified Fermi frame and expansion coefficients. Sampled at arclength nodes
/// s_i = i l / m; derivatives ' are with respect to arclength, so the unit-speed formulas apply
/// directly with period l in place of 1.
struct CurveGeometry {
  int m = 0;
  double p = 0.0;
  double length = 0.0;
  VectorXd s;
  VectorXd x, y;       // gamma
  VectorXd tx, ty;     // gamma' (unit)
  VectorXd nux, nuy;   // outward unit normal nu
  VectorXd k;          // gamma'' = k nu
  VectorXd nx, ny;     // n = A nu / |A nu|
  VectorXd npx, npy;   // n'
  VectorXd c, D;       // <gamma', n>, 1 - c^2
  VectorXd W;          // <A* gamma', gamma'>
  VectorXd Ann;        // <A* n, n>
  VectorXd ATn;        // <A* gamma', n>, zero up to round-off
  VectorXd a11, a22, a31, a32, a33, b11, b21, b22;
  VectorXd q, qt, qtt;
  VectorXd alpha, beta;
  VectorXd U2, U1, U0;
  double l1 = 0.0;  // \int sqrt(U0 / U2) over one period
  double l2 = 0.0;  // \int U2^{-1/2} over one period
  bool U0_positive = false;

  // auxiliary inner products used by the variations
  VectorXd AnpT;     // <A* n', gamma'>
  VectorXd AtTT;     // <A*_t gamma', gamma'>
  VectorXd Anpnp;    // <A* n', n'>
  VectorXd AtnpT;    // <A*_t n', gamma'>
  VectorXd AttTT;    // <A*_tt gamma', gamma'>
  VectorXd Annp;     // <A* n, n'>
  VectorXd AtnT;     // <A*_t n, gamma'>

  periodic::Trig gx, gy, gnx, gny;  // interpolants of gamma and n

  /// Position, tangent gamma', normal n and n' at arclength s.
  void frame_at(double s, Vec2& g, Vec2& t, Vec2& n, Vec2& np) const;
  Curve samples() const { return {x, y}; }
};

/// Reparametrize to arclength, orient counterclockwise, and evaluate every coefficient.
CurveGeometry build_curve(const Curve& curve, const MatrixField& A, const ScalarField& q, const BuildOptions& opt);

/// Arclength reparametrization on the same node count; counterclockwise orientation.
Curve arclength(const Curve& curve);

/// \int q^{(p+3)/2} sqrt(<A* gamma_theta, gamma_theta>) d theta for any parametrization.
double functional_K(const Curve& curve, const MatrixField& A, const ScalarField& q, double p);
double functional_K(const CurveGeometry& g, const MatrixField& A, const ScalarField& q);

/// gamma + h n, sampled on the same nodes.
Curve perturb(const CurveGeometry& g, const VectorXd& h);

struct FirstVariation {
  double value = 0.0;
  VectorXd density;  // integrand multiplying h
};
FirstVariation first_variation(const CurveGeometry& g, const VectorXd& h);

/// Second variation J''(0)[h, k] of K along normal perturbations (valid on any curve).
double second_variation(const CurveGeometry& g, const VectorXd& h, const VectorXd& k);

/// Matrix of the second variation on nodal values: h^T H k = J''(0)[h, k].
Eigen::MatrixXd second_variation_matrix(const CurveGeometry& g);

/// Central second difference of K along gamma + e h n.
double fd_hessian(const CurveGeometry& g, const MatrixField& A, const ScalarField& q, const VectorXd& h, double e);

/// q_t - (1/(p+3)) a32 alpha^{2-p} beta^2 + (2/(p+3)) b21 alpha^{2-p} beta^2 per node.
VectorXd criticality_residual(const CurveGeometry& g);
/// Sup of the residual over the sum of the sups of its three terms.
double criticality_defect(const CurveGeometry& g);

/// -U2 u'' + U1 u' - U0 u.
VectorXd jacobi_apply(const CurveGeometry& g, const VectorXd& u);
/// The braced operator acting on h in the Jacobi-Toda system (the kernel problem behind it).
VectorXd layer_operator_apply(const CurveGeometry& g, const VectorXd& h);
/// \int q^{(p+3)/2} sqrt(W) u (-U2 u'' + U1 u' - U0 u) with u = beta h; equals J''[h, h] on a critical curve.
double jacobi_quadratic(const CurveGeometry& g, const VectorXd& h);

/// Smallest singular value of the discretized Jacobi operator (non-degeneracy diagnostic).
double jacobi_smallest_singular_value(const CurveGeometry& g);

struct CriticalOptions {
  int modes = 0;           // Fourier modes of the normal perturbation; 0 keeps all below Nyquist
  int max_iter = 40;
  double tol = 1e-6;       // on criticality_defect
  double max_step = 0.05;  // cap on sup |h| per Newton step
};

struct CriticalResult {
  CurveGeometry curve;
  int iterations = 0;
  std::vector<double> defect_history;
};

/// Newton iteration on normal perturbations using the first variation as gradient and the
/// second variation as Hessian. Critical curves are generally saddles, so descent is not used.
CriticalResult find_critical_curve(const Curve& initial, const MatrixField& A, const ScalarField& q,
                                   const BuildOptions& opt, const CriticalOptions& copt = {});

/// Radius R of the critical circle centered at the symmetry point of a radial field:
/// 1/R + ((p+3)/(2p)) Psi'(R)/Psi(R) = 0, for Psi = J0(j01 r).
double critical_radius_bessel(double p, double disk_radius = 1.0);

}  // namespace clayer::geometry
