#include "hgff/hermite.hpp"

#include <cmath>

#include "hgff/errors.hpp"
#include "hgff/quadrature.hpp"

namespace hgff {

HermiteSeries HermiteSeries::from_orthonormal(std::vector<double> c, double tail) {
  HermiteSeries s;
  s.c_ = std::move(c);
  s.tail_ = tail;
  return s;
}

HermiteSeries HermiteSeries::from_coefficients(const std::vector<double>& h) {
  std::vector<double> c(h.size());
  double sf = 1.0;  // sqrt(n!)
  for (std::size_t n = 0; n < h.size(); ++n) {
    if (n > 0) sf *= std::sqrt(static_cast<double>(n));
    c[n] = h[n] * sf;
  }
  return from_orthonormal(std::move(c));
}

double HermiteSeries::coeff(int n) const {
  if (n < 0 || n >= static_cast<int>(c_.size())) return 0.0;
  double sf = 1.0;
  for (int k = 2; k <= n; ++k) sf *= std::sqrt(static_cast<double>(k));
  return c_[n] / sf;
}

std::vector<double> hermite_orthonormal(int N, double x) {
  std::vector<double> h(N + 1);
  h[0] = 1.0;
  if (N >= 1) h[1] = x;
  for (int n = 1; n < N; ++n) h[n + 1] = (x * h[n] - std::sqrt(static_cast<double>(n)) * h[n - 1]) / std::sqrt(n + 1.0);
  return h;
}

double HermiteSeries::operator()(double x) const {
  if (c_.empty()) return 0.0;
  auto h = hermite_orthonormal(degree(), x);
  double s = 0.0;
  for (std::size_t n = 0; n < c_.size(); ++n) s += c_[n] * h[n];
  return s;
}

double HermiteSeries::norm2() const {
  double s = 0.0;
  for (double c : c_) s += c * c;
  return s;
}

HermiteSeries HermiteSeries::derivative() const {
  // He_n' = n He_{n-1}  =>  c'_n = sqrt(n + 1) c_{n+1}
  if (c_.size() <= 1) return from_orthonormal({0.0});
  std::vector<double> d(c_.size() - 1);
  for (std::size_t n = 0; n + 1 < c_.size(); ++n) d[n] = std::sqrt(n + 1.0) * c_[n + 1];
  return from_orthonormal(std::move(d));
}

double gaussian_expectation(const std::function<double(double)>& f, int order) {
  Rule r = gauss_hermite_normal(order);
  double s = 0.0;
  for (std::size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * f(r.x[i]);
  return s;
}

HermiteSeries hermite_coeffs(const std::function<double(double)>& f, int N, int quad_order, double tail_tol) {
  if (N < 0) throw DomainError("Hermite degree must be >= 0");
  if (quad_order <= 0) quad_order = std::max(2 * N + 40, 160);
  if (quad_order < 2 * N) throw DomainError("quadrature order must be >= 2N");
  Rule r = gauss_hermite_normal(quad_order);
  std::vector<double> c(N + 1, 0.0);
  double f2 = 0.0;
  for (std::size_t i = 0; i < r.x.size(); ++i) {
    double fx = f(r.x[i]);
    f2 += r.w[i] * fx * fx;
    auto h = hermite_orthonormal(N, r.x[i]);
    for (int n = 0; n <= N; ++n) c[n] += r.w[i] * fx * h[n];
  }
  double s = 0.0;
  for (double v : c) s += v * v;
  double tail = std::max(0.0, f2 - s);
  if (f2 > 0.0 && tail > tail_tol * f2)
    throw DegreeError("Hermite tail mass " + std::to_string(tail / f2) + " above tolerance at degree " +
                      std::to_string(N) + "; increase N");
  return HermiteSeries::from_orthonormal(std::move(c), tail);
}

double resolvent_1d_pair(const HermiteSeries& f, const HermiteSeries& g) {
  const int n = std::min(f.degree(), g.degree());
  double s = 0.0;
  for (int k = 0; k <= n; ++k) s += f.orthonormal(k) * g.orthonormal(k) / (1.0 + k);
  return s;
}

double resolvent_apply(const HermiteSeries& f, double x) {
  auto h = hermite_orthonormal(f.degree(), x);
  double s = 0.0;
  for (int n = 0; n <= f.degree(); ++n) s += f.orthonormal(n) * h[n] / (1.0 + n);
  return s;
}

double resolvent_two_edge_pair(const HermiteSeries& p, const HermiteSeries& q) {
  double s = 0.0;
  for (int m = 1; m <= p.degree(); ++m) {
    const double pm = p.orthonormal(m) * p.orthonormal(m);
    for (int n = 0; n <= q.degree(); ++n) s += pm * q.orthonormal(n) * q.orthonormal(n) / (1.0 + m + n);
  }
  return s;
}

double resolvent_product_pair(const std::vector<std::pair<HermiteSeries, HermiteSeries>>& edges) {
  int total = 0;
  for (const auto& [A, B] : edges) total += std::min(A.degree(), B.degree());
  // the integrand is a polynomial of degree `total` in rho
  Rule r = gauss_legendre(total / 2 + 2, 0.0, 1.0);
  double s = 0.0;
  for (std::size_t k = 0; k < r.x.size(); ++k) {
    double prod = 1.0;
    for (const auto& [A, B] : edges) {
      const int n = std::min(A.degree(), B.degree());
      double m = 0.0, pw = 1.0;
      for (int j = 0; j <= n; ++j) {
        m += A.orthonormal(j) * B.orthonormal(j) * pw;
        pw *= r.x[k];
      }
      prod *= m;
    }
    s += r.w[k] * prod;
  }
  return s;
}

}  // namespace hgff
