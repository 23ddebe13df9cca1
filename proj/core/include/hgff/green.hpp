#pragma once

#include <vector>

namespace hgff {

struct GreenValue {
  double value = 0.0;
  double error = 0.0;  // |order p - order 2p|
};

// G_lambda(x) = (2 pi)^{-d} int cos(x.theta) / (lambda + sum 4 sin^2(theta_i / 2)).
// The theta_1 integral is done in closed form, the remaining d-1 axes by
// panel Gauss-Legendre with geometric grading towards theta = 0.
GreenValue green_value(const std::vector<long>& x, double lambda, int d, int quad_order = 10);

// G_lambda on the box |x|_inf <= R.
class GreenTable {
 public:
  GreenTable(int d, double lambda, int R, int quad_order = 10, bool estimate_error = true);

  int d() const { return d_; }
  int radius() const { return R_; }
  double lambda() const { return lambda_; }
  int quad_order() const { return order_; }
  double error_estimate() const { return error_; }
  bool contains(const std::vector<long>& x) const;
  double operator()(const std::vector<long>& x) const;

  // (lambda - Delta) G(x) - delta_0(x)
  double equation_residual(const std::vector<long>& x) const;

 private:
  std::size_t index(const std::vector<long>& x) const;
  int d_;
  int R_;
  double lambda_;
  int order_;
  double error_ = 0.0;
  std::vector<double> values_;
};

// first slot: forward difference along i at x; second slot: forward difference
// along j at y = 0, for G(x, y) = G(x - y)
double grad_grad_green(const GreenTable& G, int i, int j, const std::vector<long>& x);
double grad_grad_green(int i, int j, const std::vector<long>& x, double lambda, int d = 3, int quad_order = 10);

// Hessian kernel grad grad_i G(e_j, y): difference across the edge (0, e_j) in the
// first variable, derivative along i in y
double hessian_kernel(const GreenTable& G, int i, int j, const std::vector<long>& y);

// sum over |y|_inf <= R of the Hessian kernel
double hessian_row_sum(const GreenTable& G, int i, int j, int R);

struct TailSum {
  double partial = 0.0;       // sum over |y|_inf <= R
  double partial_half = 0.0;  // sum over |y|_inf <= R/2
  double tail = 0.0;          // A R^{-d}, A from the last octave
  double total = 0.0;
  int radius = 0;
};

TailSum hessian_l2_sum(const GreenTable& G, int i, int j, int R);
TailSum hessian_l2_sum(int i, int j, double lambda, int R, int d = 3, int quad_order = 10);

// D-_i D+_j D-_k G(z): two y-derivatives and one x-derivative of G(x - y)
double triple_grad(const GreenTable& G, int i, int j, int k, const std::vector<long>& z);

struct DecayFit {
  double lambda = 0.0;
  double exponent = 0.0;
  double constant = 0.0;  // max |T| |z|^{d+1} over sampled z with |z| >= 1
  int points = 0;
};

struct DecayReport {
  std::vector<DecayFit> fits;
  double max_exponent = 0.0;
  double max_constant = 0.0;
  double constant_ratio = 0.0;  // max over lambda of C(lambda) / C(lambda_set[0])
};

DecayReport triple_grad_decay_check(const std::vector<double>& lambdas, int R, int d = 3, int quad_order = 10);

}  // namespace hgff
