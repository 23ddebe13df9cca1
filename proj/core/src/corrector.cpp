#include "hgff/corrector.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hgff/errors.hpp"
#include "hgff/rng.hpp"
#include "hgff/spectral.hpp"

namespace hgff {

namespace {

const std::map<std::string, Profile>& registry() {
  static const std::map<std::string, Profile> r = [] {
    std::map<std::string, Profile> m;
    m["tanh"] = {"tanh", [](double z) { return std::tanh(z); },
                 [](double z) {
                   double c = std::cosh(z);
                   return 1.0 / (c * c);
                 }};
    // z e^{-z^2/2} scaled to unit maximum
    m["hermite-bump"] = {"hermite-bump", [](double z) { return z * std::exp(0.5 * (1.0 - z * z)); },
                         [](double z) { return (1.0 - z * z) * std::exp(0.5 * (1.0 - z * z)); }};
    // even profile, E cos Z = e^{-1/2}
    const double c = std::exp(-0.5);
    m["cosine"] = {"cosine", [c](double z) { return (std::cos(z) - c) / (1.0 + c); },
                   [c](double z) { return -std::sin(z) / (1.0 + c); }};
    return m;
  }();
  return r;
}

}  // namespace

const Profile& profile_by_name(const std::string& name) {
  auto it = registry().find(name);
  if (it == registry().end()) throw DomainError("unknown profile '" + name + "'");
  return it->second;
}

std::vector<std::string> profile_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : registry()) out.push_back(k);
  return out;
}

std::vector<double> sample_zeta(const TorusGrid& g, std::uint64_t seed, std::uint64_t env) {
  std::vector<double> z(g.edges());
  Stream(seed, streams::environment, static_cast<std::uint32_t>(env)).normals(z);
  return z;
}

ConductanceField conductance_from_zeta(const TorusGrid& g, const Profile& p, double tau, std::vector<double> zeta) {
  if (!(tau >= 0.0) || tau >= 1.0) throw EllipticityError("contrast tau must lie in [0, 1)");
  if (zeta.size() != g.edges()) throw DimensionError("zeta length != edge count");
  ConductanceField a;
  a.grid = g;
  a.tau = tau;
  a.profile = p.name;
  a.a.resize(zeta.size());
  for (std::size_t e = 0; e < zeta.size(); ++e) a.a[e] = 1.0 + tau * p.b(zeta[e]);
  a.zeta = std::move(zeta);
  return a;
}

ConductanceField sample_conductance(const TorusGrid& g, const Profile& p, double tau, std::uint64_t seed,
                                    std::uint64_t env) {
  if (!(tau >= 0.0) || tau >= 1.0) throw EllipticityError("contrast tau must lie in [0, 1)");
  return conductance_from_zeta(g, p, tau, sample_zeta(g, seed, env));
}

CorrectorSolution solve_corrector(const ConductanceField& a, const Eigen::VectorXd& eta, double lambda, double tol,
                                  int max_iter) {
  const TorusGrid& g = a.grid;
  if (eta.size() != g.d()) throw DimensionError("direction length != d");
  if (lambda < 0.0) throw DomainError("mass lambda must be >= 0");
  if (a.a.size() != g.edges()) throw DimensionError("conductance size mismatch");
  const std::size_t n = g.sites();
  if (max_iter <= 0) max_iter = 10 * g.L();

  CorrectorSolution sol;
  sol.phi = SiteField(g);
  sol.eta = eta;
  sol.lambda = lambda;

  std::vector<double> flux(g.edges()), rhs(n);
  for (int i = 0; i < g.d(); ++i)
    for (std::size_t s = 0; s < n; ++s) flux[g.edge(s, i)] = -a.a[g.edge(s, i)] * eta[i];
  div_adj_raw(g, flux.data(), rhs.data());
  const double bnorm = norm2(rhs);
  if (bnorm == 0.0) return sol;

  auto apply = [&](const std::vector<double>& u, std::vector<double>& out) {
    grad_raw(g, u.data(), flux.data());
    for (std::size_t e = 0; e < flux.size(); ++e) flux[e] *= a.a[e];
    div_adj_raw(g, flux.data(), out.data());
    if (lambda > 0.0)
      for (std::size_t s = 0; s < n; ++s) out[s] += lambda * u[s];
  };

  std::vector<double>& x = sol.phi.v;
  std::vector<double> r = rhs, Ap(n);
  std::vector<double> z = solve_shifted(g, r, lambda);
  std::vector<double> p = z;
  double rz = dot(r, z);
  sol.history.push_back(1.0);
  for (int it = 1; it <= max_iter; ++it) {
    apply(p, Ap);
    const double alpha = rz / dot(p, Ap);
    for (std::size_t s = 0; s < n; ++s) {
      x[s] += alpha * p[s];
      r[s] -= alpha * Ap[s];
    }
    const double rel = norm2(r) / bnorm;
    sol.history.push_back(rel);
    sol.iterations = it;
    if (rel <= tol) {
      if (lambda == 0.0) {
        const double m = mean(x);
        for (auto& v : x) v -= m;
      }
      // recompute the true residual rather than trusting the recursion
      std::vector<double> check(n);
      apply(x, check);
      for (std::size_t s = 0; s < n; ++s) check[s] -= rhs[s];
      sol.residual = norm2(check) / bnorm;
      return sol;
    }
    z = solve_shifted(g, r, lambda);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t s = 0; s < n; ++s) p[s] = z[s] + beta * p[s];
  }
  throw SolverError("corrector CG did not converge within " + std::to_string(max_iter) + " iterations",
                    sol.history);
}

std::vector<EdgeField> neumann_terms(int kmax, const Eigen::VectorXd& eta, const ConductanceField& a) {
  if (kmax < 0) throw DomainError("Neumann order must be >= 0");
  const TorusGrid& g = a.grid;
  std::vector<EdgeField> out;
  out.push_back(constant_edge_field(g, eta));
  std::vector<double> w(g.edges());
  for (int k = 1; k <= kmax; ++k) {
    const auto& prev = out.back().v;
    for (std::size_t e = 0; e < w.size(); ++e) w[e] = (a.a[e] - 1.0) * prev[e];
    EdgeField next(g);
    next.v = project_gradient(g, w, 0.0);
    for (auto& v : next.v) v = -v;
    out.push_back(std::move(next));
  }
  return out;
}

EdgeField neumann_term(int k, const Eigen::VectorXd& eta, const ConductanceField& a) {
  return neumann_terms(k, eta, a).back();
}

double neumann_tail_bound(int K, const Eigen::VectorXd& eta, const ConductanceField& a) {
  double q = 0.0;
  for (double v : a.a) q = std::max(q, std::abs(v - 1.0));
  if (q >= 1.0) throw DivergenceError("Neumann series needs max |a - 1| < 1");
  const double x0 = std::sqrt(static_cast<double>(a.grid.sites())) * eta.norm();
  return x0 * std::pow(q, K + 1) / (1.0 - q);
}

double contraction_estimate(const ConductanceField& a, int iterations, std::uint64_t seed) {
  // || P B || with B = diag(a - 1), P an orthogonal projection: power iteration on B P B
  const TorusGrid& g = a.grid;
  std::vector<double> v(g.edges());
  Stream(seed, streams::test, 77).normals(v);
  double nv = norm2(v), est = 0.0;
  for (auto& x : v) x /= nv;
  std::vector<double> w(g.edges());
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t e = 0; e < w.size(); ++e) w[e] = (a.a[e] - 1.0) * v[e];
    w = project_gradient(g, w, 0.0);
    for (std::size_t e = 0; e < w.size(); ++e) w[e] *= (a.a[e] - 1.0);
    double nw = norm2(w);
    if (nw == 0.0) return 0.0;
    est = std::sqrt(nw);
    for (std::size_t e = 0; e < w.size(); ++e) v[e] = w[e] / nw;
  }
  return est;
}

Eigen::MatrixXd homogenized_sample(const ConductanceField& a, const std::vector<CorrectorSolution>& phi) {
  const TorusGrid& g = a.grid;
  const int d = g.d();
  if (static_cast<int>(phi.size()) != d) throw DimensionError("need correctors for e_1 .. e_d");
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
  const double inv = 1.0 / static_cast<double>(g.sites());
  for (int j = 0; j < d; ++j) {
    EdgeField gp = grad(phi[j].phi);
    for (int i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t s = 0; s < g.sites(); ++s) {
        std::size_t e = g.edge(s, i);
        acc += a.a[e] * ((i == j ? 1.0 : 0.0) + gp[e]);
      }
      A(i, j) = acc * inv;
    }
  }
  return 0.5 * (A + A.transpose());
}

MatrixEstimate homogenized_estimate(const std::vector<HomogenizationSample>& samples) {
  if (samples.empty()) throw DomainError("no samples");
  MatrixEstimate out;
  const int d = samples.front().a.grid.d();
  Eigen::MatrixXd s1 = Eigen::MatrixXd::Zero(d, d), s2 = Eigen::MatrixXd::Zero(d, d);
  for (const auto& smp : samples) {
    Eigen::MatrixXd A = homogenized_sample(smp.a, smp.phi);
    s1 += A;
    s2 += A.cwiseProduct(A);
  }
  const double n = static_cast<double>(samples.size());
  out.samples = static_cast<int>(samples.size());
  out.value = s1 / n;
  if (samples.size() >= 2) {
    Eigen::MatrixXd var = (s2 - n * out.value.cwiseProduct(out.value)) / (n - 1.0);
    out.std_error = (var.cwiseMax(0.0) / n).cwiseSqrt();
  } else {
    out.std_error = Eigen::MatrixXd::Constant(d, d, std::numeric_limits<double>::infinity());
  }
  return out;
}

EdgeField projection_field(const EdgeField& F, double lambda) {
  if (lambda < 0.0) throw DomainError("mass lambda must be >= 0");
  EdgeField out(F.grid);
  out.v = project_gradient(F.grid, F.v, lambda);
  return out;
}

}  // namespace hgff
