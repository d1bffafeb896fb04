#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <utility>

namespace clayer {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Symmetric, uniformly elliptic coefficient field x -> A(x).
struct MatrixField {
  std::string name;
  std::function<Mat2(const Vec2&)> eval;
  /// Step of the centered differences used for derivatives of adj(A).
  double fd_step = 1e-3;

  Mat2 operator()(const Vec2& x) const;
  /// adj(A) = det(A) A^{-1}.
  Mat2 adjugate(const Vec2& x) const;
  /// adj(A) at x and its first two derivatives along the direction d (fourth-order stencils).
  void adjugate_along(const Vec2& x, const Vec2& d, Mat2& a, Mat2& at, Mat2& att) const;
  /// Smallest and largest eigenvalue over an n x n lattice on the box [lo, hi].
  std::pair<double, double> ellipticity(const Vec2& lo, const Vec2& hi, int n = 33) const;

  static MatrixField identity();
  static MatrixField scaled(double c);
  static MatrixField diagonal(double d1, double d2);
  /// diag(1, 1 + a sin(2 pi x1) sin(2 pi x2)).
  static MatrixField sine_diagonal(double a);
  /// R(phi) diag(d1, d2) R(phi)^T with phi = angle + twist * x1.
  static MatrixField rotated_diagonal(double d1, double d2, double angle, double twist = 0.0);
};

/// Scalar field with a domain indicator; evaluating outside the domain is the caller's error.
struct ScalarField {
  std::string name;
  std::function<double(const Vec2&)> eval;
  std::function<bool(const Vec2&)> inside;

  double operator()(const Vec2& x) const { return eval(x); }

  static ScalarField constant(double c, std::function<bool(const Vec2&)> inside);
  /// J0(j01 |x - c| / R): first Dirichlet eigenfunction of the Laplacian on a disk, max 1.
  static ScalarField bessel_disk(const Vec2& center = Vec2::Zero(), double R = 1.0);
  /// f^e, for the weight q = Psi^{1/p}.
  static ScalarField power(const ScalarField& f, double e);
};

/// First zero of J0.
double bessel_j0_zero();

}  // namespace clayer
