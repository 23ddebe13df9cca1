#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "hgff/lattice.hpp"

namespace hgff {

// Generalized GFF on the unit torus discretized with mesh h = 1/L:
//   -div_h abar grad_h Phi = div_h W,
// W white noise on edges with covariance Q across directions at each site.
struct GffSpec {
  Eigen::MatrixXd abar;
  Eigen::MatrixXd Q;
  TorusGrid grid;
  std::uint64_t seed = 1;

  // throws DimensionError / EllipticityError
  void validate() const;
};

struct FieldSample {
  SiteField phi;  // mean zero
  EdgeField W;
  std::uint64_t index = 0;
};

// sample `index` of the stream fixed by spec.seed
FieldSample sample_gff(const GffSpec& spec, std::uint64_t index = 0);
// Phi for a given noise realization
SiteField solve_gff(const GffSpec& spec, const EdgeField& W);

// Phi(f) = h^d sum_x f(x) Phi(x)
double field_functional(const SiteField& phi, const SiteField& f);

struct CovarianceValue {
  double value = 0.0;
  bool projected = false;  // an input had a nonzero mean and was projected
};

// E[Phi(f) Phi(g)] = h^{d+2} L^{-d} sum_{k != 0} conj(f^(k)) g^(k) sigma_Q(k) / sigma_abar(k)^2
CovarianceValue covariance_pair(const SiteField& f, const SiteField& g, const Eigen::MatrixXd& abar,
                                const Eigen::MatrixXd& Q);

using SiteMask = std::vector<char>;

SiteMask half_space_mask(const TorusGrid& g, int axis = 0);
SiteMask ball_mask(const TorusGrid& g, const std::vector<long>& center, double radius);

struct RestrictedSample {
  FieldSample full;
  FieldSample inside;   // noise restricted to edges (x, i) with x in A
  FieldSample outside;  // complement
};

RestrictedSample sample_gff_restricted(const GffSpec& spec, const SiteMask& A, std::uint64_t index = 0);

// max |div_h abar grad_h Phi_A| over sites x with x and every x - e_i outside A,
// relative to the maximum over all sites. DomainError if no such site exists.
double harmonicity_check(const SiteField& phi_A, const Eigen::MatrixXd& abar, const SiteMask& A);

// |div_h (W + abar grad_h Phi)| relative to |div_h W|, sup over sites
double helmholtz_residual(const GffSpec& spec, const FieldSample& s);

// sqrt(Var Phi(g)) / |g|_{L^2}; g must be supported within L/4 of `center`
// (periodic sup distance). An empty center means the site of largest |g|.
double regularity_bound_check(const SiteField& g, const Eigen::MatrixXd& abar, const Eigen::MatrixXd& Q,
                              std::vector<long> center = {});

}  // namespace hgff
