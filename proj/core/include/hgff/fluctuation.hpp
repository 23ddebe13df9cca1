#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hgff/green.hpp"
#include "hgff/hermite.hpp"
#include "hgff/lattice.hpp"

namespace hgff {

struct McValue {
  double value = 0.0;
  double std_error = 0.0;
  int samples = 0;
};

// (1 + L)^{-1} F at zeta via the Mehler representation
//   int_0^1 E'[F(rho zeta + sqrt(1 - rho^2) zeta')] d rho
// with Gauss-Legendre nodes in rho and antithetic zeta'. The standard error is
// taken over the `inner` independent zeta' replicates.
McValue resolvent_mc(const std::function<double(const std::vector<double>&)>& F, const std::vector<double>& zeta,
                     int rho_nodes, int inner, std::uint64_t seed);

// E[f(Z) (1 + L)^{-1} g(Z)] for a single Gaussian, same Mehler estimator
McValue resolvent_pair_mc(const std::function<double(double)>& f, const std::function<double(double)>& g,
                          int rho_nodes, int samples, std::uint64_t seed);

enum class QEstimator { site_average, origin };

struct QEstimate {
  Eigen::MatrixXd matrix;
  Eigen::MatrixXd std_error;
  double tau = 0.0;
  Eigen::VectorXd xi;
  double lambda = 0.0;
  int L = 0;
  int d = 0;
  std::string profile;
  int n_samples = 0;
  std::uint64_t seed = 0;
  QEstimator estimator = QEstimator::site_average;
  bool underpowered = false;
};

struct EnvRecord {
  int env = 0;
  std::vector<std::vector<Eigen::MatrixXd>> q;  // [tau][xi]
  int solves = 0;
  int max_iterations = 0;
  double max_residual = 0.0;
};

struct QTensorParams {
  TorusGrid grid{3, 16};
  std::string profile = "tanh";
  std::vector<double> taus{0.05};
  std::vector<Eigen::VectorXd> xis;
  double lambda = 0.0;
  int n_env = 20;
  int rho_nodes = 8;
  int inner = 1;
  std::uint64_t seed = 1;
  QEstimator estimator = QEstimator::site_average;
  double tol = 1e-11;
  unsigned threads = 1;
  // invoked in environment order as records complete
  std::function<void(const EnvRecord&)> on_env;
};

struct QTensorRun {
  std::vector<EnvRecord> envs;
  std::vector<std::vector<QEstimate>> estimates;  // [tau][xi]
};

// Monte Carlo for
//   Q_ij = sum_k < G_ik (1 + L)^{-1} G_jk >,
//   G_ik = a'(e_k) (e_i + grad phi_i)(e_k) (xi + grad phi_xi)(e_k).
// The same environments and Mehler draws are reused for every tau and xi.
QTensorRun q_tensor_mc_run(const QTensorParams& params);

QEstimate q_tensor_mc(const TorusGrid& grid, const std::string& profile, double tau, const Eigen::VectorXd& xi,
                      double lambda, int n_env, int rho_nodes, std::uint64_t seed,
                      QEstimator estimator = QEstimator::site_average, unsigned threads = 1);

struct PolyFit {
  int degree = 0;
  int samples = 0;
  std::vector<double> coef;
  std::vector<double> std_error;
  std::vector<double> systematic;  // |degree fit - (degree + 1) fit|, 0 if not enough nodes
  double sigma(int k) const;       // combined statistical and systematic
};

// per-environment least squares of values[env][t] against taus, then mean and
// standard error of the coefficients over environments
PolyFit fit_tau_polynomial(const std::vector<std::vector<double>>& values, const std::vector<double>& taus,
                           int degree);

// values[env][t] = Q_ij(tau_t) / tau_t^2 extracted from a run
std::vector<std::vector<double>> normalized_entry(const QTensorRun& run, const std::vector<double>& taus,
                                                  std::size_t xi_index, int i, int j);

// E[b(Z)^2]
double profile_second_moment(const std::string& profile);
Eigen::MatrixXd c0(const std::string& profile, const Eigen::VectorXd& xi);

struct C2Result {
  double value = 0.0;    // full fourth-order coefficient (both mirror classes)
  double printed = 0.0;  // one representative of each class, as displayed in the derivation
  double hessian_sum = 0.0;
  double hessian_tail = 0.0;
  double b2 = 0.0;           // <b^2>
  double db_resolvent = 0.0; // <b' (1 + L)^{-1} b'>
  double two_edge = 0.0;     // <b(e_i) b'(e_j) (1 + L)^{-1} b'(e_j) b(e_i)>
  int radius = 0;
  int hermite_degree = 0;
};

C2Result c2_offdiag(const std::string& profile, const Eigen::VectorXd& xi, int i, int j, const GreenTable& green,
                    int R = 24, int hermite_degree = 40);
C2Result c2_offdiag(const std::string& profile, const Eigen::VectorXd& xi, int i, int j, int R = 24,
                    int hermite_degree = 40);

struct C1Params {
  TorusGrid grid{3, 16};
  std::vector<double> taus{0.02, 0.03, 0.04, 0.05, 0.06};
  int n_env = 50;
  int rho_nodes = 8;
  double lambda = 0.0;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

// cubic fit of Q_ij / tau^2 in tau over a common-random-number tau grid
PolyFit c1_check(const std::string& profile, const Eigen::VectorXd& xi, int i, int j, const C1Params& params);

enum class QTermMode { automatic, exact, monte_carlo };

struct QTermParams {
  TorusGrid grid{3, 16};
  std::string profile = "tanh";
  int i = 0;
  int j = 1;
  Eigen::VectorXd xi;
  double lambda = 0.0;
  std::array<int, 4> orders{0, 0, 0, 0};
  QTermMode mode = QTermMode::automatic;
  int n_env = 20;
  int rho_nodes = 8;
  int inner = 1;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  int hermite_degree = 40;
};

// Q^lambda_{n1 n2 n3 n4}(i, j, xi) on the torus. Orders with n1 + .. + n4 <= 2
// are evaluated exactly from projection kernels and single/two-edge resolvent
// constants; Monte Carlo handles any total order up to 8.
McValue q_term(const QTermParams& params);

// sum of exact q_terms with n1 + .. + n4 = l (l <= 2)
double expansion_coefficient_torus(int l, const QTermParams& params);

}  // namespace hgff
