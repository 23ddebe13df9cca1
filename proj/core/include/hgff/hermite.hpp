#pragma once

#include <functional>
#include <utility>
#include <vector>

namespace hgff {

// f = sum_n h_n He_n with E[He_m He_n] = n! delta_mn. Stored internally in the
// orthonormal basis He_n / sqrt(n!) for stability at high degree.
class HermiteSeries {
 public:
  HermiteSeries() = default;
  static HermiteSeries from_orthonormal(std::vector<double> c, double tail = 0.0);
  static HermiteSeries from_coefficients(const std::vector<double>& h);

  int degree() const { return static_cast<int>(c_.size()) - 1; }
  double coeff(int n) const;  // h_n
  double orthonormal(int n) const { return n < static_cast<int>(c_.size()) ? c_[n] : 0.0; }
  const std::vector<double>& orthonormal() const { return c_; }
  double tail() const { return tail_; }  // E f^2 - sum c_n^2 at construction
  double operator()(double x) const;
  double norm2() const;  // sum c_n^2 = E f^2 up to truncation
  HermiteSeries derivative() const;

 private:
  std::vector<double> c_;
  double tail_ = 0.0;
};

// orthonormal Hermite values h_0 .. h_N at x
std::vector<double> hermite_orthonormal(int N, double x);

// E[f(Z)] for Z ~ N(0, 1)
double gaussian_expectation(const std::function<double(double)>& f, int order = 200);

// Gauss-Hermite projection; throws DegreeError when the relative tail mass
// E f^2 - sum c_n^2 exceeds tail_tol
HermiteSeries hermite_coeffs(const std::function<double(double)>& f, int N, int quad_order = 0,
                             double tail_tol = 1e-6);

// <f (1 + L)^{-1} g> = sum n! f_n g_n / (1 + n)
double resolvent_1d_pair(const HermiteSeries& f, const HermiteSeries& g);
// (1 + L)^{-1} f evaluated at x
double resolvent_apply(const HermiteSeries& f, double x);
// sum_{m >= 1, n >= 0} m! n! p_m^2 q_n^2 / (1 + m + n): edge 1 carries p, edge 0 carries q
double resolvent_two_edge_pair(const HermiteSeries& p, const HermiteSeries& q);
// E[prod_e A_e(zeta_e) (1 + L)^{-1} prod_e B_e(zeta_e)] over independent edges,
// = int_0^1 prod_e M_e(rho) d rho with M_e(rho) = sum c^A_n c^B_n rho^n
double resolvent_product_pair(const std::vector<std::pair<HermiteSeries, HermiteSeries>>& edges);

}  // namespace hgff
