#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hgff {

// f(x) = (1 - |x - c|^2 / r^2)^4 on the closed ball B(c, r), zero outside
struct BumpFunction {
  std::vector<double> center;
  double radius = 1.0;

  static constexpr int power = 4;

  int dim() const { return static_cast<int>(center.size()); }
  double operator()(const std::vector<double>& x) const;
  // 1-d only
  double derivative(double x) const;
  // radial part of the Fourier transform, r^d F(r k) with
  // f^(xi) = e^{-i xi.c} r^d F(r |xi|)
  double fourier_radial(double k) const;
  // integral of f^2
  double l2_norm2() const;
};

// F(k) for the unit bump in dimension d
double bump_fourier_profile(double k, int d);

// Bracket of the explicit kernel for x != 0, normalization constant set to 1:
//   |x|^{-(d+2)} [-d (tr A)^2 - 2d tr A^2] + 2d(d+2) x.Ax tr A |x|^{-(d+4)}
//   + 4d(d+2) x.A^2x |x|^{-(d+4)} - d(d+2)(d+4) (x.Ax)^2 |x|^{-(d+6)}
double kernel_K(const Eigen::VectorXd& x, const Eigen::MatrixXd& A, int d);
// prefactor c with (div A grad)^2 (-Delta)^{-1} = c * kernel_K away from 0
double kernel_constant(int d);

struct PairingResult {
  double value = 0.0;
  double error = 0.0;
  double scale = 0.0;  // integral of the absolute integrand, for relative statements
  std::string method;
};

// (2 pi)^{-d} int conj(f1^) (xi.abar xi)^2 / (xi.Q xi) f2^ d xi, d = 3
PairingResult pairing_fourier(const BumpFunction& f1, const BumpFunction& f2, const Eigen::MatrixXd& abar,
                              const Eigen::MatrixXd& Q);

// int int g1(x) K(x - y) g2(y) with the normalized kernel of (div A grad)^2 (-Delta)^{-1}; disjoint supports
PairingResult pairing_realspace(const BumpFunction& g1, const BumpFunction& g2, const Eigen::MatrixXd& A);
// the same form for general Q through xi -> Q^{-1/2} xi:
//   |Q|^{-1/2} int int g1(x) K_A(Q^{-1/2}(x - y)) g2(y),  A = Q^{-1/2} abar Q^{-1/2}
PairingResult pairing_realspace(const BumpFunction& g1, const BumpFunction& g2, const Eigen::MatrixXd& abar,
                                const Eigen::MatrixXd& Q);

struct Region {
  enum class Kind { half_space, ball } kind = Kind::half_space;
  Eigen::VectorXd normal;  // half-space {x : normal.x < offset}
  double offset = 0.0;
  Eigen::VectorXd center;  // ball
  double radius = 1.0;

  static Region half_space(Eigen::VectorXd n, double offset = 0.0);
  static Region ball(Eigen::VectorXd c, double r);
};

struct WitnessResult {
  bool proportional = false;
  BumpFunction f1;  // inside U
  BumpFunction f2;  // outside the closure of U
  PairingResult pairing;
  int candidates = 0;
};

// InconclusiveError when no witness is found and the pair is not proportional
WitnessResult nonlocality_witness(const Eigen::MatrixXd& abar, const Eigen::MatrixXd& Q, const Region& U,
                                  double tol = 1e-10);

// bump pairs tried by the witness search, in order
std::vector<std::pair<BumpFunction, BumpFunction>> witness_candidates(const Region& U);

struct DivisibilityResult {
  bool multiple_of_identity = false;
  double c = 0.0;
  Eigen::MatrixXd B;
  double residual = 0.0;         // relative, of the best symmetric B
  double eigen_spread = 0.0;     // max |lambda_i - lambda_1| / |lambda|_max
  bool criteria_agree = true;    // monomial solve and eigenvalue test give the same verdict
};

// is (x.Ax)^2 = |x|^2 x.Bx for a symmetric B?
DivisibilityResult quartic_divisibility(const Eigen::MatrixXd& A, double tol = 1e-10);

struct Counterexample1d {
  double covariance = 0.0;     // int f g + f' g'
  double kernel_pairing = 0.0; // int int f(x) e^{-|x - y|} / 2 g(y)
};

Counterexample1d counterexample_1d(const BumpFunction& f, const BumpFunction& g);

}  // namespace hgff
