#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hgff {

// Periodic lattice (Z/L)^d. Sites are row-major (last coordinate fastest),
// edge (x, i) has index i * L^d + site(x).
class TorusGrid {
 public:
  TorusGrid() = default;
  TorusGrid(int d, int L);

  int d() const { return d_; }
  int L() const { return L_; }
  std::size_t sites() const { return n_; }
  std::size_t edges() const { return n_ * static_cast<std::size_t>(d_); }

  std::size_t site(const std::vector<long>& x) const;
  std::vector<long> coords(std::size_t s) const;
  std::size_t edge(std::size_t s, int i) const { return static_cast<std::size_t>(i) * n_ + s; }

  // neighbour x + e_i and x - e_i with wraparound
  std::size_t up(std::size_t s, int i) const { return (*plus_)[edge(s, i)]; }
  std::size_t down(std::size_t s, int i) const { return (*minus_)[edge(s, i)]; }
  std::size_t shift(std::size_t s, const std::vector<long>& v) const;

  bool operator==(const TorusGrid& o) const { return d_ == o.d_ && L_ == o.L_; }
  bool operator!=(const TorusGrid& o) const { return !(*this == o); }

 private:
  int d_ = 0;
  int L_ = 0;
  std::size_t n_ = 0;
  std::shared_ptr<const std::vector<std::size_t>> plus_;
  std::shared_ptr<const std::vector<std::size_t>> minus_;
};

struct SiteField {
  TorusGrid grid;
  std::vector<double> v;

  SiteField() = default;
  explicit SiteField(const TorusGrid& g, double fill = 0.0) : grid(g), v(g.sites(), fill) {}
  double& operator[](std::size_t s) { return v[s]; }
  double operator[](std::size_t s) const { return v[s]; }
  std::size_t size() const { return v.size(); }
};

struct EdgeField {
  TorusGrid grid;
  std::vector<double> v;

  EdgeField() = default;
  explicit EdgeField(const TorusGrid& g, double fill = 0.0) : grid(g), v(g.edges(), fill) {}
  double& at(std::size_t s, int i) { return v[grid.edge(s, i)]; }
  double at(std::size_t s, int i) const { return v[grid.edge(s, i)]; }
  double& operator[](std::size_t e) { return v[e]; }
  double operator[](std::size_t e) const { return v[e]; }
  std::size_t size() const { return v.size(); }
};

// a(e) = 1 + tau * b(zeta_e)
struct ConductanceField {
  TorusGrid grid;
  double tau = 0.0;
  std::vector<double> zeta;
  std::vector<double> a;
  std::string profile;
};

EdgeField constant_edge_field(const TorusGrid& g, const Eigen::VectorXd& eta);

EdgeField grad(const SiteField& f);
SiteField div_adj(const EdgeField& F);
// div_adj(a .* grad f)
SiteField apply_operator(const ConductanceField& a, const SiteField& f);
// div_adj(A grad f) for a constant d x d matrix mixing directions at each site
SiteField apply_constant_operator(const Eigen::MatrixXd& A, const SiteField& f);

// raw-buffer kernels used by the solvers
void grad_raw(const TorusGrid& g, const double* f, double* out);
void div_adj_raw(const TorusGrid& g, const double* F, double* out);

double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm2(const std::vector<double>& a);
double mean(const std::vector<double>& a);

}  // namespace hgff
