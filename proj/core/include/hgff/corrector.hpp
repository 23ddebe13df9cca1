#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hgff/lattice.hpp"

namespace hgff {

// b with <b> = 0 and |b| <= 1 under the standard Gaussian; a = 1 + tau b.
struct Profile {
  std::string name;
  std::function<double(double)> b;
  std::function<double(double)> db;
};

const Profile& profile_by_name(const std::string& name);
std::vector<std::string> profile_names();

// i.i.d. standard Gaussians per edge, a pure function of (seed, env, edge)
std::vector<double> sample_zeta(const TorusGrid& g, std::uint64_t seed, std::uint64_t env = 0);
ConductanceField conductance_from_zeta(const TorusGrid& g, const Profile& p, double tau, std::vector<double> zeta);
ConductanceField sample_conductance(const TorusGrid& g, const Profile& p, double tau, std::uint64_t seed,
                                    std::uint64_t env = 0);

struct CorrectorSolution {
  SiteField phi;
  Eigen::VectorXd eta;
  double residual = 0.0;  // relative
  double lambda = 0.0;
  int iterations = 0;
  std::vector<double> history;
};

// PCG for lambda phi + div_adj a (grad phi + eta) = 0, preconditioned by the
// exact spectral inverse of (lambda - Delta). lambda = 0 is solved in the
// mean-zero subspace. max_iter <= 0 means 10 L.
CorrectorSolution solve_corrector(const ConductanceField& a, const Eigen::VectorXd& eta, double lambda = 0.0,
                                  double tol = 1e-10, int max_iter = 0);

// X_{k,eta} = [-grad (-Delta)^{-1} div_adj (a - 1)]^k eta
EdgeField neumann_term(int k, const Eigen::VectorXd& eta, const ConductanceField& a);
// X_0 .. X_kmax in one sweep
std::vector<EdgeField> neumann_terms(int kmax, const Eigen::VectorXd& eta, const ConductanceField& a);
// l2 bound on sum_{k > K} X_k: |X_0| q^{K+1} / (1 - q), q = max |a - 1|.
// The projection is orthogonal, so each step contracts by at most q.
double neumann_tail_bound(int K, const Eigen::VectorXd& eta, const ConductanceField& a);
// power-iteration estimate of the operator norm of grad (-Delta)^{-1} div_adj (a - 1)
double contraction_estimate(const ConductanceField& a, int iterations = 50, std::uint64_t seed = 1);

struct MatrixEstimate {
  Eigen::MatrixXd value;
  Eigen::MatrixXd std_error;
  int samples = 0;
};

struct HomogenizationSample {
  ConductanceField a;
  std::vector<CorrectorSolution> phi;  // eta = e_1 .. e_d
};

// mean over sites of a(x, i) (delta_ij + grad_i phi_j), symmetrized
Eigen::MatrixXd homogenized_sample(const ConductanceField& a, const std::vector<CorrectorSolution>& phi);
MatrixEstimate homogenized_estimate(const std::vector<HomogenizationSample>& samples);

// Psi = grad (lambda - Delta)^{-1} div_adj F
EdgeField projection_field(const EdgeField& F, double lambda);

}  // namespace hgff
