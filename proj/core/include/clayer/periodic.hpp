#pragma once

#include <Eigen/Dense>

namespace clayer::periodic {

/// Spectral derivative of order k of samples on an equispaced grid of the given period.
Eigen::VectorXd diff(const Eigen::VectorXd& f, double period, int order = 1);

/// Dense spectral differentiation matrix (m x m) of order k.
Eigen::MatrixXd diff_matrix(int m, double period, int order);

/// Periodic antiderivative of f minus its mean, normalized to vanish at s = 0.
Eigen::VectorXd antiderivative(const Eigen::VectorXd& f, double period);

/// Trapezoid rule on a periodic grid (spectrally accurate for smooth data).
double integrate(const Eigen::VectorXd& f, double period);

/// Trigonometric interpolant of the samples evaluated at s.
double interpolate(const Eigen::VectorXd& f, double period, double s);

/// Same, with first derivative.
void interpolate(const Eigen::VectorXd& f, double period, double s, double& value, double& deriv);

/// Resample a periodic function onto n equispaced nodes (zero padding or truncation of modes).
Eigen::VectorXd resample(const Eigen::VectorXd& f, int n);

/// Equispaced nodes s_k = k*period/m.
Eigen::VectorXd nodes(int m, double period);

/// Sup-norm of the modes with |k| >= m/2 - tail, relative to the largest mode; a resolution gauge.
double spectral_tail(const Eigen::VectorXd& f, int tail);

}  // namespace clayer::periodic

namespace clayer::periodic {

/// Trigonometric interpolant with precomputed coefficients; evaluation is O(m).
class Trig {
 public:
  Trig() = default;
  Trig(const Eigen::VectorXd& samples, double period);
  double operator()(double s) const;
  /// Value and first two derivatives at s.
  void eval(double s, double& f, double& fs, double& fss) const;
  double period() const { return period_; }
  int size() const { return m_; }

 private:
  int m_ = 0;
  double period_ = 1.0;
  double mean_ = 0.0;
  Eigen::VectorXd a_, b_;  // cos / sin coefficients for k = 1..K
};

}  // namespace clayer::periodic
