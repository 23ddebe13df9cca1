#include "hgff/lattice.hpp"

#include <cmath>
#include <numeric>

#include "hgff/errors.hpp"

namespace hgff {

TorusGrid::TorusGrid(int d, int L) : d_(d), L_(L) {
  if (d < 1) throw DimensionError("dimension must be >= 1");
  if (L < 2) throw DimensionError("side length must be >= 2");
  n_ = 1;
  for (int i = 0; i < d; ++i) n_ *= static_cast<std::size_t>(L);
  auto plus = std::make_shared<std::vector<std::size_t>>(edges());
  auto minus = std::make_shared<std::vector<std::size_t>>(edges());
  std::size_t stride = n_;
  for (int i = 0; i < d; ++i) {
    stride /= static_cast<std::size_t>(L);
    for (std::size_t s = 0; s < n_; ++s) {
      std::size_t c = (s / stride) % static_cast<std::size_t>(L);
      std::size_t base = s - c * stride;
      (*plus)[edge(s, i)] = base + ((c + 1) % L) * stride;
      (*minus)[edge(s, i)] = base + ((c + L - 1) % L) * stride;
    }
  }
  plus_ = std::move(plus);
  minus_ = std::move(minus);
}

std::size_t TorusGrid::site(const std::vector<long>& x) const {
  if (static_cast<int>(x.size()) != d_) throw DimensionError("coordinate length != d");
  std::size_t s = 0;
  for (int i = 0; i < d_; ++i) {
    long c = x[i] % L_;
    if (c < 0) c += L_;
    s = s * static_cast<std::size_t>(L_) + static_cast<std::size_t>(c);
  }
  return s;
}

std::vector<long> TorusGrid::coords(std::size_t s) const {
  std::vector<long> x(d_);
  for (int i = d_ - 1; i >= 0; --i) {
    x[i] = static_cast<long>(s % L_);
    s /= L_;
  }
  return x;
}

std::size_t TorusGrid::shift(std::size_t s, const std::vector<long>& v) const {
  auto x = coords(s);
  for (int i = 0; i < d_; ++i) x[i] += v[i];
  return site(x);
}

EdgeField constant_edge_field(const TorusGrid& g, const Eigen::VectorXd& eta) {
  if (eta.size() != g.d()) throw DimensionError("direction length != d");
  EdgeField F(g);
  for (int i = 0; i < g.d(); ++i)
    std::fill(F.v.begin() + g.edge(0, i), F.v.begin() + g.edge(0, i) + g.sites(), eta[i]);
  return F;
}

void grad_raw(const TorusGrid& g, const double* f, double* out) {
  const std::size_t n = g.sites();
  for (int i = 0; i < g.d(); ++i) {
    double* o = out + g.edge(0, i);
    for (std::size_t s = 0; s < n; ++s) o[s] = f[g.up(s, i)] - f[s];
  }
}

void div_adj_raw(const TorusGrid& g, const double* F, double* out) {
  const std::size_t n = g.sites();
  std::fill(out, out + n, 0.0);
  for (int i = 0; i < g.d(); ++i) {
    const double* Fi = F + g.edge(0, i);
    for (std::size_t s = 0; s < n; ++s) out[s] += Fi[g.down(s, i)] - Fi[s];
  }
}

EdgeField grad(const SiteField& f) {
  EdgeField out(f.grid);
  grad_raw(f.grid, f.v.data(), out.v.data());
  return out;
}

SiteField div_adj(const EdgeField& F) {
  SiteField out(F.grid);
  div_adj_raw(F.grid, F.v.data(), out.v.data());
  return out;
}

SiteField apply_operator(const ConductanceField& a, const SiteField& f) {
  if (a.grid != f.grid || a.a.size() != a.grid.edges())
    throw DimensionError("conductance and field live on different grids");
  EdgeField g = grad(f);
  for (std::size_t e = 0; e < g.size(); ++e) g[e] *= a.a[e];
  return div_adj(g);
}

SiteField apply_constant_operator(const Eigen::MatrixXd& A, const SiteField& f) {
  const TorusGrid& g = f.grid;
  const int d = g.d();
  if (A.rows() != d || A.cols() != d) throw DimensionError("matrix size != d");
  EdgeField gr = grad(f);
  EdgeField flux(g);
  for (std::size_t s = 0; s < g.sites(); ++s)
    for (int i = 0; i < d; ++i) {
      double acc = 0.0;
      for (int j = 0; j < d; ++j) acc += A(i, j) * gr.at(s, j);
      flux.at(s, i) = acc;
    }
  return div_adj(flux);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

double mean(const std::vector<double>& a) {
  if (a.empty()) return 0.0;
  return std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
}

}  // namespace hgff
