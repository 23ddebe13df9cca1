#include "hgff/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "hgff/errors.hpp"

namespace hgff {

namespace {

Rule legendre_uncached(int n) {
  Rule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
    }
    double w = 2.0 / ((1.0 - z * z) * dp * dp);
    r.x[i] = -z;
    r.x[n - 1 - i] = z;
    r.w[i] = w;
    r.w[n - 1 - i] = w;
  }
  if (n % 2 == 1) r.x[n / 2] = 0.0;
  return r;
}

}  // namespace

Rule gauss_legendre(int n) {
  if (n < 1) throw DomainError("quadrature order must be >= 1");
  static std::mutex m;
  static std::map<int, Rule> cache;
  std::lock_guard<std::mutex> lock(m);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Rule r = legendre_uncached(n);
  cache.emplace(n, r);
  return r;
}

Rule gauss_legendre(int n, double a, double b) {
  Rule r = gauss_legendre(n);
  const double h = 0.5 * (b - a), c = 0.5 * (a + b);
  for (int i = 0; i < n; ++i) {
    r.x[i] = c + h * r.x[i];
    r.w[i] *= h;
  }
  return r;
}

Rule composite_legendre(const std::vector<double>& breaks, int n) {
  Rule out;
  Rule base = gauss_legendre(n);
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    const double h = 0.5 * (breaks[p + 1] - breaks[p]), c = 0.5 * (breaks[p + 1] + breaks[p]);
    for (int i = 0; i < n; ++i) {
      out.x.push_back(c + h * base.x[i]);
      out.w.push_back(h * base.w[i]);
    }
  }
  return out;
}

// Golub-Welsch for the probabilists' Jacobi matrix, then Newton polishing on the
// orthonormal recurrence; weights from the Christoffel function.
Rule gauss_hermite_normal(int n) {
  if (n < 1) throw DomainError("quadrature order must be >= 1");
  static std::mutex m;
  static std::map<int, Rule> cache;
  {
    std::lock_guard<std::mutex> lock(m);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
  }
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J, Eigen::EigenvaluesOnly);
  // returns h_n(z), h_{n-1}(z) and sum_{k<n} h_k(z)^2 for the orthonormal family
  auto eval = [n](double z, double& hn, double& hnm1, double& sum) {
    double h0 = 1.0, h1 = z;
    sum = 1.0;
    if (n == 1) {
      hn = z;
      hnm1 = 1.0;
      return;
    }
    sum += z * z;
    for (int k = 1; k < n; ++k) {
      double h2 = (z * h1 - std::sqrt(static_cast<double>(k)) * h0) / std::sqrt(k + 1.0);
      h0 = h1;
      h1 = h2;
      if (k + 1 < n) sum += h1 * h1;
    }
    hn = h1;
    hnm1 = h0;
  };
  Rule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double z = es.eigenvalues()(i);
    double hn, hnm1, sum;
    for (int it = 0; it < 4; ++it) {
      eval(z, hn, hnm1, sum);
      double dz = hn / (std::sqrt(static_cast<double>(n)) * hnm1);
      if (!std::isfinite(dz)) break;
      z -= dz;
      if (std::abs(dz) < 1e-15 * (1.0 + std::abs(z))) break;
    }
    eval(z, hn, hnm1, sum);
    r.x[i] = z;
    r.w[i] = 1.0 / sum;
  }
  std::lock_guard<std::mutex> lock(m);
  cache.emplace(n, r);
  return r;
}

}  // namespace hgff
