#include "clayer/periodic.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace clayer::periodic {

namespace {

using cvec = std::vector<std::complex<double>>;

cvec forward(const Eigen::VectorXd& f) {
  Eigen::FFT<double> fft;
  std::vector<double> in(f.data(), f.data() + f.size());
  cvec out;
  fft.fwd(out, in);
  return out;
}

Eigen::VectorXd inverse(const cvec& c) {
  Eigen::FFT<double> fft;
  cvec tmp = c;
  cvec out;
  fft.inv(out, tmp);
  Eigen::VectorXd r(static_cast<Eigen::Index>(out.size()));
  for (std::size_t i = 0; i < out.size(); ++i) r[static_cast<Eigen::Index>(i)] = out[i].real();
  return r;
}

// signed wavenumber of FFT slot j
int wavenumber(int j, int m) { return j <= m / 2 ? j : j - m; }

}  // namespace

Eigen::VectorXd diff(const Eigen::VectorXd& f, double period, int order) {
  const int m = static_cast<int>(f.size());
  if (order == 0) return f;
  cvec c = forward(f);
  const double w = 2.0 * std::numbers::pi / period;
  for (int j = 0; j < m; ++j) {
    int k = wavenumber(j, m);
    if (m % 2 == 0 && j == m / 2 && order % 2 == 1) {
      c[j] = 0.0;
      continue;
    }
    std::complex<double> ik(0.0, w * k);
    c[j] *= std::pow(ik, order);
  }
  return inverse(c);
}

Eigen::MatrixXd diff_matrix(int m, double period, int order) {
  Eigen::MatrixXd D(m, m);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
  for (int j = 0; j < m; ++j) {
    e.setZero();
    e[j] = 1.0;
    D.col(j) = diff(e, period, order);
  }
  return D;
}

Eigen::VectorXd antiderivative(const Eigen::VectorXd& f, double period) {
  const int m = static_cast<int>(f.size());
  cvec c = forward(f);
  const double w = 2.0 * std::numbers::pi / period;
  c[0] = 0.0;
  for (int j = 1; j < m; ++j) {
    if (m % 2 == 0 && j == m / 2) {
      c[j] = 0.0;
      continue;
    }
    c[j] /= std::complex<double>(0.0, w * wavenumber(j, m));
  }
  Eigen::VectorXd r = inverse(c);
  return r.array() - r[0];
}

double integrate(const Eigen::VectorXd& f, double period) {
  return f.sum() * period / static_cast<double>(f.size());
}

Eigen::VectorXd nodes(int m, double period) {
  Eigen::VectorXd s(m);
  for (int k = 0; k < m; ++k) s[k] = period * k / m;
  return s;
}

Eigen::VectorXd resample(const Eigen::VectorXd& f, int n) {
  const int m = static_cast<int>(f.size());
  if (n == m) return f;
  cvec c = forward(f);
  cvec d(static_cast<std::size_t>(n), 0.0);
  // modes strictly below the smaller Nyquist frequency; the Nyquist mode itself is dropped
  const int K = (std::min(m, n) - 1) / 2;
  for (int k = -K; k <= K; ++k) d[(k + n) % n] = c[(k + m) % m];
  Eigen::VectorXd r = inverse(d);
  return r * (static_cast<double>(n) / m);
}

double spectral_tail(const Eigen::VectorXd& f, int tail) {
  const int m = static_cast<int>(f.size());
  cvec c = forward(f);
  double top = 0.0, high = 0.0;
  for (int j = 0; j < m; ++j) {
    int k = std::abs(wavenumber(j, m));
    top = std::max(top, std::abs(c[j]));
    if (k >= m / 2 - tail) high = std::max(high, std::abs(c[j]));
  }
  return top > 0.0 ? high / top : 0.0;
}

Trig::Trig(const Eigen::VectorXd& samples, double period) : m_(static_cast<int>(samples.size())), period_(period) {
  cvec c = forward(samples);
  const int K = m_ / 2;
  a_ = Eigen::VectorXd::Zero(K);
  b_ = Eigen::VectorXd::Zero(K);
  mean_ = c[0].real() / m_;
  for (int k = 1; k <= K; ++k) {
    double scale = (m_ % 2 == 0 && k == K) ? 1.0 / m_ : 2.0 / m_;
    a_[k - 1] = scale * c[k].real();
    b_[k - 1] = -scale * c[k].imag();
  }
}

void Trig::eval(double s, double& f, double& fs, double& fss) const {
  const double w = 2.0 * std::numbers::pi / period_;
  const double th = w * s;
  const double c1 = std::cos(th), s1 = std::sin(th);
  double ck = 1.0, sk = 0.0;
  f = mean_;
  fs = 0.0;
  fss = 0.0;
  const int K = static_cast<int>(a_.size());
  for (int k = 1; k <= K; ++k) {
    double cn = ck * c1 - sk * s1;
    double sn = sk * c1 + ck * s1;
    ck = cn;
    sk = sn;
    double wk = w * k;
    if (m_ % 2 == 0 && k == K) {
      // Nyquist mode: keep the real cosine part only, derivatives of it vanish at nodes
      f += a_[k - 1] * ck;
      fss -= wk * wk * a_[k - 1] * ck;
      continue;
    }
    f += a_[k - 1] * ck + b_[k - 1] * sk;
    fs += wk * (-a_[k - 1] * sk + b_[k - 1] * ck);
    fss -= wk * wk * (a_[k - 1] * ck + b_[k - 1] * sk);
  }
}

double Trig::operator()(double s) const {
  double f, fs, fss;
  eval(s, f, fs, fss);
  return f;
}

double interpolate(const Eigen::VectorXd& f, double period, double s) { return Trig(f, period)(s); }

void interpolate(const Eigen::VectorXd& f, double period, double s, double& value, double& deriv) {
  double fss;
  Trig(f, period).eval(s, value, deriv, fss);
}

}  // namespace clayer::periodic
