#include "clayer/fields.hpp"

#include "clayer/errors.hpp"

#include <boost/math/special_functions/bessel.hpp>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

namespace clayer {

Mat2 MatrixField::operator()(const Vec2& x) const { return eval(x); }

Mat2 MatrixField::adjugate(const Vec2& x) const {
  Mat2 A = eval(x);
  Mat2 r;
  r << A(1, 1), -A(0, 1), -A(1, 0), A(0, 0);
  return r;
}

void MatrixField::adjugate_along(const Vec2& x, const Vec2& d, Mat2& a, Mat2& at, Mat2& att) const {
  const double h = fd_step;
  Mat2 m2 = adjugate(x - 2.0 * h * d), m1 = adjugate(x - h * d);
  Mat2 p1 = adjugate(x + h * d), p2 = adjugate(x + 2.0 * h * d);
  a = adjugate(x);
  at = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
  att = (-m2 + 16.0 * m1 - 30.0 * a + 16.0 * p1 - p2) / (12.0 * h * h);
}

std::pair<double, double> MatrixField::ellipticity(const Vec2& lo, const Vec2& hi, int n) const {
  double lmin = INFINITY, lmax = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Vec2 x(lo[0] + (hi[0] - lo[0]) * i / (n - 1), lo[1] + (hi[1] - lo[1]) * j / (n - 1));
      Mat2 A = eval(x);
      if (A(0, 1) != A(1, 0)) throw ValidationError("matrix field " + name + " is not symmetric");
      Eigen::SelfAdjointEigenSolver<Mat2> es(A, Eigen::EigenvaluesOnly);
      lmin = std::min(lmin, es.eigenvalues()[0]);
      lmax = std::max(lmax, es.eigenvalues()[1]);
    }
  return {lmin, lmax};
}

MatrixField MatrixField::identity() { return scaled(1.0); }

MatrixField MatrixField::scaled(double c) {
  if (!(c > 0.0)) throw ValidationError("scaled identity needs c > 0");
  return {"scaled", [c](const Vec2&) { return Mat2(c * Mat2::Identity()); }};
}

MatrixField MatrixField::diagonal(double d1, double d2) {
  if (!(d1 > 0.0 && d2 > 0.0)) throw ValidationError("diagonal field needs positive entries");
  return {"diagonal", [d1, d2](const Vec2&) {
            Mat2 A = Mat2::Zero();
            A(0, 0) = d1;
            A(1, 1) = d2;
            return A;
          }};
}

MatrixField MatrixField::sine_diagonal(double a) {
  if (!(std::abs(a) < 1.0)) throw ValidationError("sine_diagonal needs |a| < 1 for ellipticity");
  return {"sine_diagonal", [a](const Vec2& x) {
            using std::numbers::pi;
            Mat2 A = Mat2::Zero();
            A(0, 0) = 1.0;
            A(1, 1) = 1.0 + a * std::sin(2 * pi * x[0]) * std::sin(2 * pi * x[1]);
            return A;
          }};
}

MatrixField MatrixField::rotated_diagonal(double d1, double d2, double angle, double twist) {
  if (!(d1 > 0.0 && d2 > 0.0)) throw ValidationError("rotated_diagonal needs positive entries");
  return {"rotated_diagonal", [=](const Vec2& x) {
            double phi = angle + twist * x[0];
            double c = std::cos(phi), s = std::sin(phi);
            Mat2 R;
            R << c, -s, s, c;
            Mat2 D = Mat2::Zero();
            D(0, 0) = d1;
            D(1, 1) = d2;
            Mat2 A = R * D * R.transpose();
            A(1, 0) = A(0, 1);
            return A;
          }};
}

double bessel_j0_zero() {
  static const double z = boost::math::cyl_bessel_j_zero(0.0, 1);
  return z;
}

ScalarField ScalarField::constant(double c, std::function<bool(const Vec2&)> inside) {
  return {"constant", [c](const Vec2&) { return c; }, std::move(inside)};
}

ScalarField ScalarField::bessel_disk(const Vec2& center, double R) {
  const double j = bessel_j0_zero();
  return {"bessel_disk",
          [=](const Vec2& x) { return boost::math::cyl_bessel_j(0, j * (x - center).norm() / R); },
          [=](const Vec2& x) { return (x - center).norm() < R; }};
}

ScalarField ScalarField::power(const ScalarField& f, double e) {
  auto g = f.eval;
  return {f.name + "^e", [g, e](const Vec2& x) { return std::pow(g(x), e); }, f.inside};
}

}  // namespace clayer
