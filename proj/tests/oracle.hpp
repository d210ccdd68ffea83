#pragma once

// Reference implementations that share no code with the library: dense
// complex matrices, exp(-iHt) by scaling and squaring of a Taylor series, and
// closed-form Rabi populations.

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

namespace oracle {

using C = std::complex<double>;

struct Mat {
  std::size_t n = 0;
  std::vector<C> a;

  explicit Mat(std::size_t n_) : n(n_), a(n_ * n_) {}
  C& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
  C operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

inline Mat eye(std::size_t n) {
  Mat m(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

inline Mat mul(const Mat& x, const Mat& y) {
  Mat r(x.n);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t k = 0; k < x.n; ++k)
      for (std::size_t j = 0; j < x.n; ++j) r(i, j) += x(i, k) * y(k, j);
  return r;
}

inline Mat axpy(C s, const Mat& x, const Mat& y) {
  Mat r = y;
  for (std::size_t i = 0; i < r.a.size(); ++i) r.a[i] += s * x.a[i];
  return r;
}

/// exp(-i H t), Taylor to 30 terms after scaling ||H t|| below 1/2.
inline Mat expm(const Mat& H, double t) {
  double norm = 0.0;
  for (const auto& z : H.a) norm += std::abs(z);
  norm *= std::abs(t);
  int squarings = 0;
  while (norm > 0.5) {
    norm /= 2.0;
    ++squarings;
  }
  const double h = t / std::ldexp(1.0, squarings);
  Mat A(H.n);
  for (std::size_t i = 0; i < A.a.size(); ++i) A.a[i] = C(0.0, -h) * H.a[i];
  Mat sum = eye(H.n), term = eye(H.n);
  for (int k = 1; k <= 30; ++k) {
    term = mul(term, A);
    for (auto& z : term.a) z /= static_cast<double>(k);
    sum = axpy(1.0, term, sum);
  }
  for (int s = 0; s < squarings; ++s) sum = mul(sum, sum);
  return sum;
}

inline std::vector<C> apply(const Mat& U, const std::vector<C>& v) {
  std::vector<C> r(v.size());
  for (std::size_t i = 0; i < U.n; ++i)
    for (std::size_t j = 0; j < U.n; ++j) r[i] += U(i, j) * v[j];
  return r;
}

/// Populations |<1|U|0>|^2 for H = -E sz + u sx held for time t.
inline double rabi(double E, double u, double t) {
  const double w = std::sqrt(E * E + u * u);
  const double s = std::sin(w * t);
  return u * u / (w * w) * s * s;
}

inline Mat two_level_h(double E, double u) {
  Mat h(2);
  h(0, 0) = -E;
  h(1, 1) = E;
  h(0, 1) = u;
  h(1, 0) = u;
  return h;
}

inline Mat three_level_h(double E, double mu1, double mu2, double u) {
  Mat h(3);
  h(0, 0) = -E;
  h(2, 2) = E;
  h(0, 1) = h(1, 0) = mu1;
  h(1, 2) = h(2, 1) = mu2 * u;
  return h;
}

/// |<target|psi(T)>|^2 for a sequence of constant segments (amplitude, duration).
template <class HamFn>
double fidelity(HamFn&& ham, std::vector<C> psi, const std::vector<C>& target,
                const std::vector<std::pair<double, double>>& segments) {
  for (auto [u, t] : segments) psi = oracle::apply(expm(ham(u), t), psi);
  C o = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) o += std::conj(target[i]) * psi[i];
  return std::norm(o);
}

/// Segments for a word over {P, N, 0/Z}.
inline std::vector<std::pair<double, double>> segments(const std::string& word, const std::vector<double>& d,
                                                       double M) {
  std::vector<std::pair<double, double>> s;
  for (std::size_t k = 0; k < word.size(); ++k)
    s.emplace_back(word[k] == 'P' ? M : word[k] == 'N' ? -M : 0.0, d[k]);
  return s;
}

inline std::vector<C> case2_target() {
  const double r = 1.0 / std::sqrt(2.0);
  return {C(r, 0.0), std::polar(r, 0.9 * std::numbers::pi)};
}

}  // namespace oracle
