#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace clayer::profile1d {

/// Uniform grid x_i = -L + i*h, i = 0..n-1, with n odd so that x = 0 is a node.
struct ProfileGrid {
  double L = 0.0;
  double h = 0.0;
  int n = 0;

  double x(int i) const { return -L + i * h; }
  int center() const { return (n - 1) / 2; }
  Eigen::VectorXd nodes() const;

  /// Half-width from e^{-sqrt(p) L} = tail_tol.
  static ProfileGrid make(double p, int nodes = 4001, double tail_tol = 1e-12);
  static ProfileGrid with(double L, int nodes);
};

/// G(s) = \int_0^s (|1-t|^p - 1) dt, evaluated without cancellation near 0.
double G(double p, double s);

/// -2 G(w0 - d) for d = w0 - s >= 0 and s >= 1, accurate as d -> 0.
double F_near_top(double p, double w0, double d);

/// Root w0 > 1 of G; the maximum of the homoclinic profile.
double turning_point(double p);

struct Profile {
  Eigen::VectorXd w, wx;
};

/// Even homoclinic solution of -w'' = |1-w|^p - 1 by inverting x(w) = \int_w^{w0} ds / sqrt(-2G(s)).
/// Throws NumericalError if w(L) exceeds tail_tol.
Profile solve_profile(double p, const ProfileGrid& grid, double tail_tol = 1e-8);

struct DecayReport {
  double alpha_fit = 0.0;       // limit of e^{sqrt(p) x} w(x)
  double fit_rms = 0.0;         // relative rms of the tail fit
  double alpha_int_plus = 0.0;  // kernel (e^{+} + e^{-}); integrand odd, vanishes
  double alpha_int_minus = 0.0; // kernel (e^{+} - e^{-})
  double alpha_int = 0.0;       // kernel (e^{-} - e^{+}), the sign that matches the fit
  double rel_gap = 0.0;         // |alpha_int - alpha_fit| / alpha_fit
};

DecayReport decay_constant(double p, const ProfileGrid& grid, const Eigen::VectorXd& w,
                           const Eigen::VectorXd& wx);

struct ProfileSet {
  double p = 0.0;
  ProfileGrid grid;
  Eigen::VectorXd w, wx, wxx;
  Eigen::VectorXd w0, w1, w2, w3, Z;
  double lambda0 = 0.0;
  double alpha_p = 0.0;
  double C0 = 0.0, C1 = 0.0;
  double c_p = 0.0;
  double I_w = 0.0;       // \int w_x^2
  double w_center = 0.0;  // w(0)
  double zx_wx = 0.0;     // \int Z_x w_x
  DecayReport decay;
  double residual_w2 = 0.0, residual_w3 = 0.0;  // closed-form checks of w2, w3, sup relative to the forcing
  double fredholm_defect = 0.0;  // quadrature defect of \int rhs w_x removed before solving for w0, w1

  /// Potential p|w-1|^{p-2}(w-1) of the linearized operator.
  Eigen::VectorXd potential() const;
  /// Bracket |w-1|^{p-2}(w-1) + 1.
  Eigen::VectorXd bracket() const;
  /// Trapezoid integral on the grid.
  double integrate(const Eigen::VectorXd& f) const;
  /// Quintic Hermite interpolation of f given f, f', f'' on the grid; zero outside [-L, L].
  void eval(const Eigen::VectorXd& f, const Eigen::VectorXd& fx, const Eigen::VectorXd& fxx, double x,
            double& v, double& vx, double& vxx) const;
  double w_at(double x) const;

  // first and second derivatives of the companions, used by eval()
  Eigen::VectorXd w0x, w0xx, w1x, w1xx, w2x, w2xx, w3x, w3xx, Zx, Zxx;
};

/// Profile, companions, eigenpair and constants in one pass.
ProfileSet build_profile(double p, const ProfileGrid& grid);
ProfileSet build_profile(double p);

/// Solve -phi'' - p|w-1|^{p-2}(w-1) phi = rhs with phi(+-L) = 0 and \int phi w_x = 0.
/// Fourth-order five-point stencil; the orthogonality is imposed through a bordered system.
/// Throws ValidationError when |\int rhs w_x| exceeds fredholm_tol * |rhs|_2 |w_x|_2.
Eigen::VectorXd solve_linearized(const ProfileSet& ps, const Eigen::VectorXd& rhs, double fredholm_tol = 1e-5);

/// Fill w0..w3 of ps (w, wx must be set). The right-hand sides of w0, w1 are orthogonal to w_x exactly;
/// the quadrature defect (large for p < 2, where the nonlinearity is not C1) is projected out and recorded.
void correction_profiles(ProfileSet& ps);

struct Eigenpair {
  double lambda0 = 0.0;
  Eigen::VectorXd Z;
  double rayleigh = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

/// Principal eigenpair of phi'' + p|w-1|^{p-2}(w-1) phi with zero ends; Z > 0, \int Z^2 = 1.
Eigenpair eigenpair(const ProfileSet& ps);

struct Interaction {
  double C0 = 0.0, C1 = 0.0;
  double C0_half = 0.0;  // twice the half-line integral
  double tail = 0.0;     // magnitude of the integrands at the truncation ends
};

Interaction interaction_constants(const ProfileSet& ps);

struct IdentityCheck {
  std::string name;
  double lhs = 0.0, rhs = 0.0;
  double scale = 1.0;
  double residual() const { return (lhs - rhs) / scale; }
};

std::vector<IdentityCheck> verify_profile_identities(const ProfileSet& ps);

/// Eighth-order central differences (first or second derivative); values beyond the grid are
/// taken as zero, which is exact to the tail tolerance for decaying profiles.
Eigen::VectorXd fd_derivative(const Eigen::VectorXd& f, double h, int order);

/// Sup over nodes 4..n-5 of | -w'' - (|1-w|^p - 1) | with w'' from the eighth-order stencil.
double ode_residual(const ProfileSet& ps);
double ode_residual(double p, const ProfileGrid& grid, const Eigen::VectorXd& w);

}  // namespace clayer::profile1d
