#pragma once

#include "clayer/geometry.hpp"

#include <Eigen/Dense>

#include <vector>

namespace clayer::toda {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct RhoResult {
  double rho = 0.0;
  double asymptotic = 0.0;  // three-term expansion in |log eps|
  double gap = 0.0;         // rho - asymptotic
  double residual = 0.0;    // |eps^2 rho - p alpha C0 e^{-sqrt(p) rho}|
  int iterations = 0;
};

/// Positive root of eps^2 rho = p alpha C0 e^{-sqrt(p) rho}.
RhoResult solve_rho(double eps, double p, double alpha_p, double C0);

struct TodaMatrices {
  int N = 0;
  double p = 0.0;
  MatrixXd M;      // (N-1) x (N-1) tridiagonal (2, -1)
  MatrixXd Mhalf;  // symmetric square root
  MatrixXd B;      // N x N, rows (-1, 1) then all ones
  MatrixXd Binv;
  VectorXd r;       // r_i = (N - i) i, i = 1..N-1
  MatrixXd D;       // (sqrt(p)/2) M^{1/2} diag(r) M^{1/2}
  VectorXd Lambda;  // eigenvalues of D, ascending
};

TodaMatrices toda_matrices(int N, double p);

/// Periodic coefficients of the Jacobi operator -U2 u'' + U1 u' - U0 u on [0, period).
struct Coefficients {
  VectorXd U2, U1, U0;
  double period = 1.0;
  int size() const { return static_cast<int>(U2.size()); }
  static Coefficients from(const geometry::CurveGeometry& g);
  static Coefficients constant(double U2, double U1, double U0, int m, double period = 1.0);
};

/// -U2 u'' + U1 u' - U0 u applied row-wise to a matrix of periodic samples.
MatrixXd jacobi_rows(const Coefficients& c, const MatrixXd& u);

/// Discrete L2 norm over one period, summed over rows.
double l2_norm(const MatrixXd& u, double period);

struct LeadingProfile {
  MatrixXd v;      // (N-1) x m
  MatrixXd d;      // N x m, with v_N = 0
  double defect = 0.0;  // sup |M e^{-sqrt(p) v} - U0|
};

/// v_i = -(1/sqrt p) log((U0/2)(N - i) i). Throws ValidationError when U0 <= 0 somewhere.
LeadingProfile leading_layer_profile(const TodaMatrices& T, const VectorXd& U0);

/// d = B^{-1} [v; vN] through the explicit inversion formula.
MatrixXd d_from_v(const MatrixXd& vbar, const VectorXd& vN);
/// v_j = d_{j+1} - d_j, v_N = sum d_j.
MatrixXd v_from_d(const MatrixXd& d);

/// R_j(d) = sigma(-U2 d_j'' + U1 d_j' - U0 fb_j) + e^{-sqrt p (d_j - d_{j-1})} - e^{-sqrt p (d_{j+1} - d_j)},
/// fb_j = (j - (N+1)/2) rho + d_j, neighbours beyond 1..N absent.
MatrixXd R_apply(const TodaMatrices& T, const Coefficients& c, double sigma, const MatrixXd& d);
/// Interaction part of R alone.
MatrixXd interaction(const TodaMatrices& T, const MatrixXd& d);
/// Q(v) = [Qbar(vbar); Q_N(v_N)] in the difference variables.
MatrixXd Q_apply(const TodaMatrices& T, const Coefficients& c, double sigma, const MatrixXd& v);
/// Qbar(vbar) = sigma(-U2 v'' + U1 v' - U0 v) - U0 + M e^{-sqrt p v}.
MatrixXd Qbar_apply(const TodaMatrices& T, const Coefficients& c, double sigma, const MatrixXd& vbar);

struct Refinement {
  MatrixXd v;                   // vbar_k
  std::vector<double> defects;  // ||Qbar(vbar_j)||_2, j = 1..k
};

/// Chord recursion -DQbar0(vbar_1) w_j = Qbar(vbar_j), vbar_{j+1} = vbar_j + w_j. Throws
/// NumericalError when a defect does not decrease.
Refinement refine_layer_profile(int k, const TodaMatrices& T, const Coefficients& c, double sigma);

struct PeriodicSolve {
  VectorXd phi;
  double residual = 0.0;   // sup of the collocation residual
  double gap = 0.0;        // min_j |mu/sigma - lambda_j|
  double nearest = 0.0;    // lambda_j closest to mu/sigma
};

/// Eigenvalues of -U2 phi'' + U1 phi' = lambda U0 phi (periodic), ascending real parts.
VectorXd periodic_spectrum(const Coefficients& c);

/// sigma(-U2 phi'' + U1 phi') - mu U0 phi = g by Fourier collocation. Throws ResonanceError when
/// the gap to the spectrum is below min_gap.
PeriodicSolve solve_periodic_linear(const Coefficients& c, double mu, double sigma, const VectorXd& g,
                                    double min_gap = 1e-8);

struct GapOptions {
  double c1 = 1.0;
  double c2 = 1.0;
  bool lambda_star_4pi2 = false;  // lambda0 l2^2 / (4 pi^2) instead of the default / (4 pi)
};

double lambda_star(double lambda0, double l2, const GapOptions& opt);

struct GapReport {
  double eps = 0.0;
  bool pass = false;
  double toda_gap_margin = 0.0;  // min over (i, j) of the left side minus the threshold; +inf when N = 1
  int toda_gap_i = 0, toda_gap_j = 0;
  double amplitude_gap_margin = 0.0;  // min over k of |eps^2 k^2 - lambda*| - c2 eps
  int amplitude_gap_k = 0;
};

/// Classifies each eps against both spectral gap conditions.
std::vector<GapReport> resonance_gaps(const std::vector<double>& eps, const TodaMatrices& T, double l1,
                                      double lambda0, double l2, const GapOptions& opt = {});

struct AmplitudeSolve {
  VectorXd e;
  double norm_star = 0.0;  // |e|_inf + eps |e'|_2 + eps^2 |e''|_2
  double bound_ratio = 0.0;  // norm_star * eps / |h|_2
  double residual = 0.0;
  GapReport gap;
};

/// eps^2 U2 e'' + lambda0 e = h, periodic. Throws ResonanceError when the amplitude gap margin is negative.
AmplitudeSolve amplitude_solve(double eps, const VectorXd& U2, double lambda0, const VectorXd& h, double period,
                               double l2, const GapOptions& opt = {});

/// Layer positions and amplitudes on the curve nodes.
struct LayerState {
  int N = 0;
  double eps = 0.0, rho = 0.0, sigma = 0.0, period = 1.0;
  MatrixXd d, v;   // N x m
  MatrixXd fb, f;  // fb_j = (j - (N+1)/2) rho + d_j, f = fb / beta
  MatrixXd e;      // amplitudes, N x m
};

/// State from vbar (v_N = 0) with zero amplitudes.
LayerState make_layer_state(const geometry::CurveGeometry& g, const TodaMatrices& T, const MatrixXd& vbar, double eps,
                            double rho);

struct ProfileConstants {
  double p = 0.0, alpha_p = 0.0, C0 = 0.0, C1 = 0.0, lambda0 = 0.0;
  double zx_wx_ratio = 0.0;  // \int Z_x w_x / \int w_x^2
};

/// e_j = G(-B_j(d)), the amplitude driven by the layer interaction.
void solve_amplitudes(LayerState& s, const geometry::CurveGeometry& g, const ProfileConstants& k,
                      const GapOptions& opt = {});

struct JacobiTodaResidual {
  MatrixXd r_position, r_amplitude;  // N x m
  std::vector<double> norm_position, norm_amplitude;
};

/// Left sides of the reduced layer equations, with the interaction term added to the Jacobi part.
JacobiTodaResidual jacobi_toda_residual(const LayerState& s, const geometry::CurveGeometry& g,
                                        const ProfileConstants& k);

}  // namespace clayer::toda
