#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "hgff/lattice.hpp"

namespace hgff {

using cplx = std::complex<double>;

// Real-to-complex transforms on the torus plus the discrete symbols
// psi_i = e^{i theta_i} - 1 (forward difference) and sigma = sum |psi_i|^2.
// Only the half spectrum (last axis 0..L/2) is stored.
class Spectral {
 public:
  static std::shared_ptr<const Spectral> get(const TorusGrid& g);
  explicit Spectral(const TorusGrid& g);
  ~Spectral();
  Spectral(const Spectral&) = delete;
  Spectral& operator=(const Spectral&) = delete;

  const TorusGrid& grid() const { return grid_; }
  std::size_t modes() const { return nk_; }
  // unnormalized forward transform, f_hat(k) = sum_x f(x) e^{-i k.x}
  void forward(const double* in, cplx* out) const;
  // inverse including the 1/L^d factor; does not modify `in`
  void backward(const cplx* in, double* out) const;

  double sigma(std::size_t k) const { return sigma_[k]; }
  cplx psi(int i, std::size_t k) const { return psi_[static_cast<std::size_t>(i) * nk_ + k]; }
  double theta(std::size_t k, int i) const;
  // 1 for self-conjugate planes of the half spectrum, 2 otherwise
  double weight(std::size_t k) const { return weight_[k]; }
  std::vector<double> sigma_matrix(const Eigen::MatrixXd& M) const;

 private:
  TorusGrid grid_;
  std::size_t nk_ = 0;
  std::vector<double> sigma_;
  std::vector<cplx> psi_;
  std::vector<double> weight_;
  void* fwd_ = nullptr;
  void* bwd_ = nullptr;
};

// u = (lambda - Delta)^{-1} f; for lambda == 0 the zero mode is discarded
std::vector<double> solve_shifted(const TorusGrid& g, const std::vector<double>& f, double lambda);
// grad (lambda - Delta)^{-1} div_adj F, edge field in, edge field out
std::vector<double> project_gradient(const TorusGrid& g, const std::vector<double>& F, double lambda);

}  // namespace hgff
