#pragma once

#include <vector>

namespace hgff {

struct Rule {
  std::vector<double> x;
  std::vector<double> w;
};

// Gauss-Legendre on [-1, 1]
Rule gauss_legendre(int n);
// Gauss-Legendre mapped to [a, b]
Rule gauss_legendre(int n, double a, double b);
// Gauss-Hermite for the standard normal density: sum w f(x) ~ E[f(Z)]
Rule gauss_hermite_normal(int n);

// composite rule: panels [p_k, p_{k+1}] each with an n-point Gauss-Legendre rule
Rule composite_legendre(const std::vector<double>& breaks, int n);

}  // namespace hgff
