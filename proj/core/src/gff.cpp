#include "hgff/gff.hpp"

#include <algorithm>
#include <cmath>

#include "hgff/errors.hpp"
#include "hgff/rng.hpp"
#include "hgff/spectral.hpp"

namespace hgff {

namespace {

void check_spd(const Eigen::MatrixXd& M, int d, const char* name) {
  if (M.rows() != d || M.cols() != d) throw DimensionError(std::string(name) + " must be d x d");
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, M.cwiseAbs().maxCoeff()))
    throw EllipticityError(std::string(name) + " is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  if (!(es.eigenvalues().minCoeff() > 0.0)) throw EllipticityError(std::string(name) + " is not positive definite");
}

Eigen::MatrixXd sqrtm(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

// (abar grad_h phi)(x, i) = sum_j abar_ij grad_h,j phi(x)
std::vector<double> flux(const Eigen::MatrixXd& abar, const SiteField& phi) {
  const TorusGrid& g = phi.grid;
  const int d = g.d();
  const std::size_t N = g.sites();
  const double inv_h = g.L();
  std::vector<double> gr(g.edges()), out(g.edges(), 0.0);
  grad_raw(g, phi.v.data(), gr.data());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const double a = abar(i, j) * inv_h;
      if (a == 0.0) continue;
      for (std::size_t s = 0; s < N; ++s) out[i * N + s] += a * gr[j * N + s];
    }
  return out;
}

std::vector<double> div_h(const TorusGrid& g, const std::vector<double>& F) {
  std::vector<double> out(g.sites());
  div_adj_raw(g, F.data(), out.data());
  for (double& v : out) v *= g.L();
  return out;
}

}  // namespace

void GffSpec::validate() const {
  const int d = grid.d();
  if (d < 1) throw DimensionError("grid not initialized");
  check_spd(abar, d, "abar");
  check_spd(Q, d, "Q");
}

SiteField solve_gff(const GffSpec& spec, const EdgeField& W) {
  spec.validate();
  const TorusGrid& g = spec.grid;
  if (W.grid != g || W.v.size() != g.edges()) throw DimensionError("noise does not match the grid");
  auto sp = Spectral::get(g);
  const int d = g.d();
  const std::size_t nk = sp->modes();
  const double h = 1.0 / g.L();
  const std::vector<double> sa = sp->sigma_matrix(spec.abar);
  std::vector<cplx> buf(nk), acc(nk, cplx(0.0));
  for (int i = 0; i < d; ++i) {
    sp->forward(W.v.data() + g.edge(0, i), buf.data());
    for (std::size_t k = 0; k < nk; ++k) acc[k] += std::conj(sp->psi(i, k)) * buf[k];
  }
  for (std::size_t k = 0; k < nk; ++k) acc[k] = sa[k] > 0.0 ? -h * acc[k] / sa[k] : cplx(0.0);
  SiteField phi(g);
  sp->backward(acc.data(), phi.v.data());
  return phi;
}

FieldSample sample_gff(const GffSpec& spec, std::uint64_t index) {
  spec.validate();
  const TorusGrid& g = spec.grid;
  const int d = g.d();
  const std::size_t N = g.sites();
  const double scale = std::pow(static_cast<double>(g.L()), 0.5 * d);  // h^{-d/2}
  const Eigen::MatrixXd R = sqrtm(spec.Q);
  std::vector<double> z(g.edges());
  Stream(spec.seed, streams::gff_noise, static_cast<std::uint32_t>(index)).normals(z);
  FieldSample s;
  s.index = index;
  s.W = EdgeField(g);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const double r = R(i, j) * scale;
      for (std::size_t x = 0; x < N; ++x) s.W.v[i * N + x] += r * z[j * N + x];
    }
  s.phi = solve_gff(spec, s.W);
  return s;
}

double field_functional(const SiteField& phi, const SiteField& f) {
  if (phi.grid != f.grid) throw DimensionError("grid mismatch");
  const double hd = std::pow(1.0 / phi.grid.L(), phi.grid.d());
  return hd * dot(phi.v, f.v);
}

CovarianceValue covariance_pair(const SiteField& f, const SiteField& g, const Eigen::MatrixXd& abar,
                                const Eigen::MatrixXd& Q) {
  if (f.grid != g.grid) throw DimensionError("grid mismatch");
  const TorusGrid& G = f.grid;
  const int d = G.d();
  check_spd(abar, d, "abar");
  check_spd(Q, d, "Q");
  CovarianceValue r;
  for (const SiteField* u : {&f, &g}) {
    double m = 0.0, amax = 0.0;
    for (double v : u->v) {
      m += v;
      amax = std::max(amax, std::abs(v));
    }
    m /= static_cast<double>(u->v.size());
    if (std::abs(m) > 1e-12 * std::max(amax, 1e-300)) r.projected = true;
  }
  auto sp = Spectral::get(G);
  const std::size_t nk = sp->modes();
  std::vector<cplx> fh(nk), gh(nk);
  sp->forward(f.v.data(), fh.data());
  sp->forward(g.v.data(), gh.data());
  const std::vector<double> sa = sp->sigma_matrix(abar);
  const std::vector<double> sq = sp->sigma_matrix(Q);
  double s = 0.0;
  for (std::size_t k = 0; k < nk; ++k) {
    if (!(sa[k] > 0.0)) continue;
    s += sp->weight(k) * (std::conj(fh[k]) * gh[k]).real() * sq[k] / (sa[k] * sa[k]);
  }
  const double h = 1.0 / G.L();
  r.value = std::pow(h, d + 2) * s / static_cast<double>(G.sites());
  return r;
}

SiteMask half_space_mask(const TorusGrid& g, int axis) {
  if (axis < 0 || axis >= g.d()) throw DimensionError("axis out of range");
  SiteMask m(g.sites());
  for (std::size_t s = 0; s < g.sites(); ++s) m[s] = g.coords(s)[axis] < g.L() / 2 ? 1 : 0;
  return m;
}

SiteMask ball_mask(const TorusGrid& g, const std::vector<long>& center, double radius) {
  if (static_cast<int>(center.size()) != g.d()) throw DimensionError("center length != d");
  SiteMask m(g.sites());
  for (std::size_t s = 0; s < g.sites(); ++s) {
    auto x = g.coords(s);
    double r2 = 0.0;
    for (int i = 0; i < g.d(); ++i) {
      long dx = ((x[i] - center[i]) % g.L() + g.L()) % g.L();
      dx = std::min(dx, g.L() - dx);
      r2 += static_cast<double>(dx * dx);
    }
    m[s] = r2 <= radius * radius ? 1 : 0;
  }
  return m;
}

RestrictedSample sample_gff_restricted(const GffSpec& spec, const SiteMask& A, std::uint64_t index) {
  const TorusGrid& g = spec.grid;
  if (A.size() != g.sites()) throw DimensionError("mask size != site count");
  RestrictedSample r;
  r.full = sample_gff(spec, index);
  r.inside.index = r.outside.index = index;
  r.inside.W = EdgeField(g);
  r.outside.W = EdgeField(g);
  for (int i = 0; i < g.d(); ++i)
    for (std::size_t s = 0; s < g.sites(); ++s) {
      const std::size_t e = g.edge(s, i);
      (A[s] ? r.inside.W : r.outside.W).v[e] = r.full.W.v[e];
    }
  r.inside.phi = solve_gff(spec, r.inside.W);
  r.outside.phi = solve_gff(spec, r.outside.W);
  return r;
}

double harmonicity_check(const SiteField& phi_A, const Eigen::MatrixXd& abar, const SiteMask& A) {
  const TorusGrid& g = phi_A.grid;
  if (A.size() != g.sites()) throw DimensionError("mask size != site count");
  std::vector<double> r = div_h(g, flux(abar, phi_A));
  double inner = 0.0, all = 0.0;
  bool any = false;
  for (std::size_t s = 0; s < g.sites(); ++s) {
    all = std::max(all, std::abs(r[s]));
    bool interior = !A[s];
    for (int i = 0; i < g.d() && interior; ++i) interior = !A[g.down(s, i)];
    if (!interior) continue;
    any = true;
    inner = std::max(inner, std::abs(r[s]));
  }
  if (!any) throw DomainError("complement of A has no interior sites");
  return all > 0.0 ? inner / all : 0.0;
}

double helmholtz_residual(const GffSpec& spec, const FieldSample& s) {
  const TorusGrid& g = spec.grid;
  std::vector<double> F = flux(spec.abar, s.phi);
  for (std::size_t e = 0; e < F.size(); ++e) F[e] += s.W.v[e];
  std::vector<double> r = div_h(g, F);
  std::vector<double> w = div_h(g, s.W.v);
  double num = 0.0, den = 0.0;
  for (std::size_t x = 0; x < r.size(); ++x) {
    num = std::max(num, std::abs(r[x]));
    den = std::max(den, std::abs(w[x]));
  }
  return den > 0.0 ? num / den : num;
}

double regularity_bound_check(const SiteField& g, const Eigen::MatrixXd& abar, const Eigen::MatrixXd& Q,
                              std::vector<long> center) {
  const TorusGrid& G = g.grid;
  const int d = G.d();
  if (center.empty()) {
    std::size_t best = 0;
    for (std::size_t s = 1; s < G.sites(); ++s)
      if (std::abs(g.v[s]) > std::abs(g.v[best])) best = s;
    center = G.coords(best);
  }
  if (static_cast<int>(center.size()) != d) throw DimensionError("center length != d");
  const double R = G.L() / 4.0;
  for (std::size_t s = 0; s < G.sites(); ++s) {
    if (g.v[s] == 0.0) continue;
    auto x = G.coords(s);
    double r2 = 0.0;
    for (int i = 0; i < d; ++i) {
      long dx = ((x[i] - center[i]) % G.L() + G.L()) % G.L();
      dx = std::min(dx, G.L() - dx);
      r2 += static_cast<double>(dx * dx);
    }
    if (std::sqrt(r2) > R + 1e-12) throw DomainError("test function support exceeds the ball of radius L/4");
  }
  SiteField g0 = g;
  const double m = mean(g0.v);
  for (double& v : g0.v) v -= m;
  const double hd = std::pow(1.0 / G.L(), d);
  const double l2 = std::sqrt(hd * dot(g0.v, g0.v));
  if (l2 == 0.0) throw DomainError("test function vanishes after projection");
  return std::sqrt(covariance_pair(g0, g0, abar, Q).value) / l2;
}

}  // namespace hgff
