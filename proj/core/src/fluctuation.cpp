#include "hgff/fluctuation.hpp"

#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>

#include "hgff/corrector.hpp"
#include "hgff/errors.hpp"
#include "hgff/parallel.hpp"
#include "hgff/quadrature.hpp"
#include "hgff/rng.hpp"
#include "hgff/spectral.hpp"

namespace hgff {

namespace {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& y) {
  MeanSe r;
  if (y.empty()) return r;
  const double n = static_cast<double>(y.size());
  for (double v : y) r.mean += v;
  r.mean /= n;
  if (y.size() < 2) {
    r.se = std::numeric_limits<double>::infinity();
    return r;
  }
  double ss = 0.0;
  for (double v : y) ss += (v - r.mean) * (v - r.mean);
  r.se = std::sqrt(ss / (n - 1.0) / n);
  return r;
}

Rule mehler_rule(int nodes) {
  if (nodes < 1) throw DomainError("resolvent quadrature needs at least one node");
  return gauss_legendre(nodes, 0.0, 1.0);
}

// zeta_pm = rho zeta +- sqrt(1 - rho^2) zeta'
void mehler_pair(const std::vector<double>& z, const std::vector<double>& zp, double rho, std::vector<double>& plus,
                 std::vector<double>& minus) {
  const double s = std::sqrt(1.0 - rho * rho);
  plus.resize(z.size());
  minus.resize(z.size());
  for (std::size_t e = 0; e < z.size(); ++e) {
    plus[e] = rho * z[e] + s * zp[e];
    minus[e] = rho * z[e] - s * zp[e];
  }
}

// Calls body(env) for every environment and hands finished records to `emit`
// in environment order.
template <class Rec, class Body, class Emit>
std::vector<Rec> run_ordered(int n, unsigned threads, Body&& body, Emit&& emit) {
  std::vector<Rec> out(static_cast<std::size_t>(n));
  std::vector<char> done(static_cast<std::size_t>(n), 0);
  std::size_t next = 0;
  std::mutex m;
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t k) {
    Rec r = body(static_cast<int>(k));
    std::lock_guard<std::mutex> lock(m);
    out[k] = std::move(r);
    done[k] = 1;
    while (next < out.size() && done[next]) emit(out[next++]);
  });
  return out;
}

// unit-direction edge fields e_l + grad phi_l at one environment and tau
struct Gradients {
  std::vector<std::vector<double>> g;
  std::vector<double> tdb;  // tau b'(zeta_e)
};

Gradients corrector_gradients(const TorusGrid& grid, const Profile& p, double tau, const std::vector<double>& zeta,
                              double lambda, double tol, EnvRecord& stats) {
  Gradients out;
  const int d = grid.d();
  out.tdb.resize(zeta.size());
  for (std::size_t e = 0; e < zeta.size(); ++e) out.tdb[e] = tau * p.db(zeta[e]);
  out.g.assign(static_cast<std::size_t>(d), std::vector<double>(grid.edges(), 0.0));
  if (tau == 0.0) {
    for (int l = 0; l < d; ++l)
      std::fill(out.g[l].begin() + static_cast<long>(l * grid.sites()),
                out.g[l].begin() + static_cast<long>((l + 1) * grid.sites()), 1.0);
    return out;
  }
  ConductanceField a = conductance_from_zeta(grid, p, tau, zeta);
  for (int l = 0; l < d; ++l) {
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(d);
    eta[l] = 1.0;
    CorrectorSolution sol = solve_corrector(a, eta, lambda, tol);
    ++stats.solves;
    stats.max_iterations = std::max(stats.max_iterations, sol.iterations);
    stats.max_residual = std::max(stats.max_residual, sol.residual);
    grad_raw(grid, sol.phi.v.data(), out.g[l].data());
    for (std::size_t s = 0; s < grid.sites(); ++s) out.g[l][grid.edge(s, l)] += 1.0;
  }
  return out;
}

// G_i(e) = tau b'(zeta_e) g_i(e) g_xi(e) for one xi, all i
std::vector<std::vector<double>> inner_functional(const Gradients& gr, const Eigen::VectorXd& xi) {
  const std::size_t d = gr.g.size();
  const std::size_t E = gr.tdb.size();
  std::vector<double> gx(E, 0.0);
  for (std::size_t l = 0; l < d; ++l)
    if (xi[static_cast<long>(l)] != 0.0)
      for (std::size_t e = 0; e < E; ++e) gx[e] += xi[static_cast<long>(l)] * gr.g[l][e];
  std::vector<std::vector<double>> G(d, std::vector<double>(E));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t e = 0; e < E; ++e) G[i][e] = gr.tdb[e] * gr.g[i][e] * gx[e];
  return G;
}

}  // namespace

McValue resolvent_mc(const std::function<double(const std::vector<double>&)>& F, const std::vector<double>& zeta,
                     int rho_nodes, int inner, std::uint64_t seed) {
  if (inner <= 0) throw DomainError("inner sample count must be positive");
  const Rule r = mehler_rule(rho_nodes);
  const Stream st(seed, streams::mehler, 0);
  std::vector<double> zp(zeta.size()), plus, minus;
  std::vector<double> y(static_cast<std::size_t>(inner), 0.0);
  for (int m = 0; m < inner; ++m) {
    for (std::size_t n = 0; n < r.x.size(); ++n) {
      st.normals(zp, (static_cast<std::uint64_t>(m) * r.x.size() + n) * zeta.size());
      mehler_pair(zeta, zp, r.x[n], plus, minus);
      y[m] += r.w[n] * 0.5 * (F(plus) + F(minus));
    }
  }
  MeanSe ms = mean_se(y);
  return {ms.mean, ms.se, inner};
}

McValue resolvent_pair_mc(const std::function<double(double)>& f, const std::function<double(double)>& g,
                          int rho_nodes, int samples, std::uint64_t seed) {
  if (samples <= 0) throw DomainError("sample count must be positive");
  const Rule r = mehler_rule(rho_nodes);
  const Stream st(seed, streams::mehler, 1);
  std::vector<double> y(static_cast<std::size_t>(samples));
  for (int s = 0; s < samples; ++s) {
    const double z = st.normal(2 * static_cast<std::uint64_t>(s));
    const double zp = st.normal(2 * static_cast<std::uint64_t>(s) + 1);
    double acc = 0.0;
    for (std::size_t n = 0; n < r.x.size(); ++n) {
      const double c = std::sqrt(1.0 - r.x[n] * r.x[n]);
      acc += r.w[n] * 0.5 * (g(r.x[n] * z + c * zp) + g(r.x[n] * z - c * zp));
    }
    y[s] = f(z) * acc;
  }
  MeanSe ms = mean_se(y);
  return {ms.mean, ms.se, samples};
}

QTensorRun q_tensor_mc_run(const QTensorParams& P) {
  const TorusGrid& grid = P.grid;
  const int d = grid.d();
  if (P.n_env <= 0) throw DomainError("environment count must be positive");
  if (P.inner <= 0) throw DomainError("inner sample count must be positive");
  if (P.taus.empty()) throw DomainError("empty tau grid");
  for (double t : P.taus)
    if (!(t >= 0.0) || t >= 1.0) throw EllipticityError("contrast tau must lie in [0, 1)");
  std::vector<Eigen::VectorXd> xis = P.xis;
  if (xis.empty()) {
    xis.push_back(Eigen::VectorXd::Zero(d));
    xis.back()[0] = 1.0;
  }
  for (const auto& x : xis)
    if (x.size() != d) throw DimensionError("xi length != d");
  const Profile& prof = profile_by_name(P.profile);
  const Rule rule = mehler_rule(P.rho_nodes);
  const std::size_t E = grid.edges();
  const double N = static_cast<double>(grid.sites());

  auto body = [&](int env) {
    EnvRecord rec;
    rec.env = env;
    const std::vector<double> zeta = sample_zeta(grid, P.seed, static_cast<std::uint64_t>(env));
    const Stream st(P.seed, streams::mehler, static_cast<std::uint32_t>(env));
    std::vector<double> zp(E), plus, minus;
    rec.q.assign(P.taus.size(), std::vector<Eigen::MatrixXd>(xis.size()));
    for (std::size_t t = 0; t < P.taus.size(); ++t) {
      const double tau = P.taus[t];
      Gradients g0 = corrector_gradients(grid, prof, tau, zeta, P.lambda, P.tol, rec);
      std::vector<std::vector<std::vector<double>>> left(xis.size()), right(xis.size());
      for (std::size_t x = 0; x < xis.size(); ++x) {
        left[x] = inner_functional(g0, xis[x]);
        right[x].assign(static_cast<std::size_t>(d), std::vector<double>(E, 0.0));
      }
      if (tau > 0.0) {
        for (int m = 0; m < P.inner; ++m) {
          for (std::size_t n = 0; n < rule.x.size(); ++n) {
            st.normals(zp, (static_cast<std::uint64_t>(m) * rule.x.size() + n) * E);
            mehler_pair(zeta, zp, rule.x[n], plus, minus);
            const double w = rule.w[n] * 0.5 / P.inner;
            for (const auto* zz : {&plus, &minus}) {
              Gradients gp = corrector_gradients(grid, prof, tau, *zz, P.lambda, P.tol, rec);
              for (std::size_t x = 0; x < xis.size(); ++x) {
                auto G = inner_functional(gp, xis[x]);
                for (int j = 0; j < d; ++j)
                  for (std::size_t e = 0; e < E; ++e) right[x][j][e] += w * G[j][e];
              }
            }
          }
        }
      }
      for (std::size_t x = 0; x < xis.size(); ++x) {
        Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(d, d);
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) {
            double s = 0.0;
            if (P.estimator == QEstimator::site_average) {
              for (std::size_t e = 0; e < E; ++e) s += left[x][i][e] * right[x][j][e];
              s /= N;
            } else {
              for (int k = 0; k < d; ++k) {
                const std::size_t e = grid.edge(0, k);
                s += left[x][i][e] * right[x][j][e];
              }
            }
            Q(i, j) = s;
          }
        rec.q[t][x] = 0.5 * (Q + Q.transpose());
      }
    }
    return rec;
  };
  auto emit = [&](const EnvRecord& r) {
    if (P.on_env) P.on_env(r);
  };

  QTensorRun run;
  run.envs = run_ordered<EnvRecord>(P.n_env, P.threads, body, emit);
  run.estimates.assign(P.taus.size(), std::vector<QEstimate>(xis.size()));
  std::vector<double> y(static_cast<std::size_t>(P.n_env));
  for (std::size_t t = 0; t < P.taus.size(); ++t)
    for (std::size_t x = 0; x < xis.size(); ++x) {
      QEstimate& q = run.estimates[t][x];
      q.matrix = Eigen::MatrixXd::Zero(d, d);
      q.std_error = Eigen::MatrixXd::Zero(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          for (int k = 0; k < P.n_env; ++k) y[k] = run.envs[k].q[t][x](i, j);
          MeanSe ms = mean_se(y);
          q.matrix(i, j) = ms.mean;
          q.std_error(i, j) = ms.se;
        }
      q.tau = P.taus[t];
      q.xi = xis[x];
      q.lambda = P.lambda;
      q.L = grid.L();
      q.d = d;
      q.profile = P.profile;
      q.n_samples = P.n_env;
      q.seed = P.seed;
      q.estimator = P.estimator;
      for (int i = 0; i < d; ++i)
        if (q.matrix(i, i) != 0.0 && q.std_error(i, i) > std::abs(q.matrix(i, i))) q.underpowered = true;
    }
  return run;
}

QEstimate q_tensor_mc(const TorusGrid& grid, const std::string& profile, double tau, const Eigen::VectorXd& xi,
                      double lambda, int n_env, int rho_nodes, std::uint64_t seed, QEstimator estimator,
                      unsigned threads) {
  QTensorParams P;
  P.grid = grid;
  P.profile = profile;
  P.taus = {tau};
  P.xis = {xi};
  P.lambda = lambda;
  P.n_env = n_env;
  P.rho_nodes = rho_nodes;
  P.seed = seed;
  P.estimator = estimator;
  P.threads = threads;
  return q_tensor_mc_run(P).estimates[0][0];
}

double PolyFit::sigma(int k) const {
  const double s = std_error.at(static_cast<std::size_t>(k));
  const double y = systematic.at(static_cast<std::size_t>(k));
  return std::sqrt(s * s + y * y);
}

namespace {

// least-squares operator (V^T V)^{-1} V^T for the monomial basis
Eigen::MatrixXd poly_pseudo_inverse(const std::vector<double>& taus, int degree) {
  const long T = static_cast<long>(taus.size());
  Eigen::MatrixXd V(T, degree + 1);
  for (long t = 0; t < T; ++t) {
    double p = 1.0;
    for (int k = 0; k <= degree; ++k) {
      V(t, k) = p;
      p *= taus[t];
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(V, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[s.size() - 1] <= 0.0 || s[0] / s[s.size() - 1] > 1e12)
    throw FitError("polynomial fit is ill-conditioned on this tau grid");
  Eigen::MatrixXd Sinv = s.cwiseInverse().asDiagonal();
  return svd.matrixV() * Sinv * svd.matrixU().transpose();
}

std::vector<std::vector<double>> per_env_fit(const std::vector<std::vector<double>>& values,
                                             const std::vector<double>& taus, int degree) {
  const Eigen::MatrixXd Pinv = poly_pseudo_inverse(taus, degree);
  std::vector<std::vector<double>> coefs;
  for (const auto& row : values) {
    if (row.size() != taus.size()) throw DimensionError("fit values do not match the tau grid");
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(row.data(), static_cast<long>(row.size()));
    Eigen::VectorXd c = Pinv * y;
    coefs.emplace_back(c.data(), c.data() + c.size());
  }
  return coefs;
}

}  // namespace

PolyFit fit_tau_polynomial(const std::vector<std::vector<double>>& values, const std::vector<double>& taus,
                           int degree) {
  if (degree < 0) throw FitError("negative polynomial degree");
  if (static_cast<int>(taus.size()) < degree + 1) throw FitError("fewer tau points than coefficients");
  if (values.empty()) throw FitError("no samples to fit");
  PolyFit f;
  f.degree = degree;
  f.samples = static_cast<int>(values.size());
  auto c = per_env_fit(values, taus, degree);
  std::vector<double> col(values.size());
  for (int k = 0; k <= degree; ++k) {
    for (std::size_t e = 0; e < c.size(); ++e) col[e] = c[e][k];
    MeanSe ms = mean_se(col);
    f.coef.push_back(ms.mean);
    f.std_error.push_back(ms.se);
  }
  f.systematic.assign(static_cast<std::size_t>(degree + 1), 0.0);
  if (static_cast<int>(taus.size()) >= degree + 2) {
    auto c2 = per_env_fit(values, taus, degree + 1);
    for (int k = 0; k <= degree; ++k) {
      double m = 0.0;
      for (const auto& r : c2) m += r[k];
      m /= static_cast<double>(c2.size());
      f.systematic[k] = std::abs(m - f.coef[k]);
    }
  }
  return f;
}

std::vector<std::vector<double>> normalized_entry(const QTensorRun& run, const std::vector<double>& taus,
                                                  std::size_t xi_index, int i, int j) {
  std::vector<std::vector<double>> out;
  for (const auto& r : run.envs) {
    std::vector<double> row;
    for (std::size_t t = 0; t < taus.size(); ++t) {
      if (taus[t] <= 0.0) throw FitError("tau = 0 cannot be normalized by tau^2");
      row.push_back(r.q.at(t).at(xi_index)(i, j) / (taus[t] * taus[t]));
    }
    out.push_back(std::move(row));
  }
  return out;
}

double profile_second_moment(const std::string& profile) {
  const Profile& p = profile_by_name(profile);
  return gaussian_expectation([&](double z) {
    const double b = p.b(z);
    return b * b;
  });
}

Eigen::MatrixXd c0(const std::string& profile, const Eigen::VectorXd& xi) {
  const double b2 = profile_second_moment(profile);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(xi.size(), xi.size());
  for (long i = 0; i < xi.size(); ++i) m(i, i) = xi[i] * xi[i] * b2;
  return m;
}

C2Result c2_offdiag(const std::string& profile, const Eigen::VectorXd& xi, int i, int j, const GreenTable& green,
                    int R, int hermite_degree) {
  const int d = green.d();
  if (xi.size() != d) throw DimensionError("xi length != d");
  if (i < 0 || j < 0 || i >= d || j >= d) throw DimensionError("direction index out of range");
  if (i == j) throw DomainError("the fourth-order formula is for i != j");
  if (d < 3) throw DomainError("the Hessian sum diverges for d < 3");
  const Profile& p = profile_by_name(profile);
  C2Result r;
  r.radius = R;
  r.hermite_degree = hermite_degree;
  TailSum S = hessian_l2_sum(green, i, j, R);
  r.hessian_sum = S.total;
  r.hessian_tail = S.tail;
  r.b2 = profile_second_moment(profile);
  HermiteSeries hb = hermite_coeffs(p.b, hermite_degree);
  HermiteSeries hdb = hermite_coeffs(p.db, hermite_degree);
  r.db_resolvent = resolvent_1d_pair(hdb, hdb);
  r.two_edge = resolvent_two_edge_pair(hb, hdb);
  r.printed = xi[i] * xi[j] * S.total * (r.b2 * r.db_resolvent + r.two_edge);
  // (0,0,1,1) and (0,1,1,0) contribute the same amount as their mirrors
  r.value = 2.0 * r.printed;
  return r;
}

C2Result c2_offdiag(const std::string& profile, const Eigen::VectorXd& xi, int i, int j, int R, int hermite_degree) {
  GreenTable G(static_cast<int>(xi.size()), 0.0, R + 2, 10, false);
  return c2_offdiag(profile, xi, i, j, G, R, hermite_degree);
}

PolyFit c1_check(const std::string& profile, const Eigen::VectorXd& xi, int i, int j, const C1Params& params) {
  if (i == j) throw DomainError("c1_check is for i != j");
  if (params.taus.size() < 4) throw FitError("a cubic fit needs at least four tau points");
  QTensorParams P;
  P.grid = params.grid;
  P.profile = profile;
  P.taus = params.taus;
  P.xis = {xi};
  P.lambda = params.lambda;
  P.n_env = params.n_env;
  P.rho_nodes = params.rho_nodes;
  P.seed = params.seed;
  P.threads = params.threads;
  QTensorRun run = q_tensor_mc_run(P);
  return fit_tau_polynomial(normalized_entry(run, params.taus, 0, i, j), params.taus, 3);
}

namespace {

struct ExactConstants {
  double b2, m0, m1, m2, m3, p2;
};

ExactConstants exact_constants(const Profile& p, int N) {
  ExactConstants c;
  c.b2 = gaussian_expectation([&](double z) { return p.b(z) * p.b(z); });
  auto hdb = hermite_coeffs(p.db, N);
  auto hb = hermite_coeffs(p.b, N);
  // products decay more slowly in the Hermite basis; their truncation enters the
  // pairings only through a (N + 1)^{-1}-damped tail
  auto hbdb = hermite_coeffs([&](double z) { return p.b(z) * p.db(z); }, 2 * N, 0, 1e-5);
  auto hb2db = hermite_coeffs([&](double z) { return p.b(z) * p.b(z) * p.db(z); }, 2 * N, 0, 1e-5);
  c.m0 = resolvent_1d_pair(hdb, hdb);
  c.m1 = resolvent_1d_pair(hbdb, hdb);
  c.m2 = resolvent_1d_pair(hb2db, hdb);
  c.m3 = resolvent_1d_pair(hbdb, hbdb);
  c.p2 = resolvent_two_edge_pair(hb, hdb);
  return c;
}

double q_term_exact(const QTermParams& P) {
  const TorusGrid& g = P.grid;
  const int d = g.d();
  const auto& n = P.orders;
  const int total = n[0] + n[1] + n[2] + n[3];
  if (total > 2) throw UnsupportedError("exact evaluation covers n1 + .. + n4 <= 2");
  const ExactConstants c = exact_constants(profile_by_name(P.profile), P.hermite_degree);
  const std::size_t E = g.edges();
  const std::size_t Ns = g.sites();

  std::array<Eigen::VectorXd, 4> eta;
  eta[0] = Eigen::VectorXd::Zero(d);
  eta[0][P.i] = 1.0;
  eta[1] = P.xi;
  eta[2] = Eigen::VectorXd::Zero(d);
  eta[2][P.j] = 1.0;
  eta[3] = P.xi;
  const std::array<int, 4> side{0, 0, 1, 1};

  // u^k(e) = -Pi((0,k), e) and Pi_ll at the origin
  std::vector<std::vector<double>> u(static_cast<std::size_t>(d));
  std::vector<double> pii(static_cast<std::size_t>(d));
  if (total > 0) {
    for (int k = 0; k < d; ++k) {
      std::vector<double> delta(E, 0.0);
      delta[g.edge(0, k)] = 1.0;
      u[k] = project_gradient(g, delta, P.lambda);
      pii[k] = u[k][g.edge(0, k)];
      for (double& v : u[k]) v = -v;
    }
  }
  auto l_of = [&](std::size_t e) { return static_cast<int>(e / Ns); };

  double sum = 0.0;
  for (int k = 0; k < d; ++k) {
    const std::size_t e0 = g.edge(0, k);
    auto rest = [&](std::initializer_list<int> skip) {
      double K = 1.0;
      for (int s = 0; s < 4; ++s) {
        bool skipped = false;
        for (int t : skip) skipped |= (t == s);
        if (!skipped) K *= eta[s][k];
      }
      return K;
    };
    if (total == 0) {
      sum += rest({}) * c.m0;
      continue;
    }
    if (total == 1) {
      int s = 0;
      while (n[s] != 1) ++s;
      sum += rest({s}) * u[k][e0] * eta[s][k] * c.m1;
      continue;
    }
    int s = -1, t = -1;
    for (int q = 0; q < 4; ++q) {
      if (n[q] == 2) s = q;
      if (n[q] == 1) (s < 0 ? s : t) = q;
    }
    double acc = 0.0;
    if (t < 0) {
      const double K = rest({s});
      if (K == 0.0) continue;
      for (std::size_t e = 0; e < E; ++e) {
        const int l = l_of(e);
        const double q = u[k][e] * (-pii[l]) * eta[s][l];
        acc += q * (e == e0 ? c.m2 : c.b2 * c.m0);
      }
      sum += K * acc;
    } else {
      const double K = rest({s, t});
      if (K == 0.0) continue;
      const bool same = side[s] == side[t];
      for (std::size_t e = 0; e < E; ++e) {
        const int l = l_of(e);
        const double cc = u[k][e] * eta[s][l] * u[k][e] * eta[t][l];
        const double w = same ? (e == e0 ? c.m2 : c.b2 * c.m0) : (e == e0 ? c.m3 : c.p2);
        acc += cc * w;
      }
      sum += K * acc;
    }
  }
  return sum;
}

// P^n eta for n = 0..nmax: X_{n+1} = -grad (lambda - Delta)^{-1} div_adj (b X_n)
std::vector<std::vector<double>> projection_powers(const TorusGrid& g, const std::vector<double>& b,
                                                   const Eigen::VectorXd& eta, int nmax, double lambda) {
  std::vector<std::vector<double>> X;
  X.push_back(constant_edge_field(g, eta).v);
  std::vector<double> tmp(g.edges());
  for (int n = 0; n < nmax; ++n) {
    for (std::size_t e = 0; e < tmp.size(); ++e) tmp[e] = b[e] * X.back()[e];
    std::vector<double> y = project_gradient(g, tmp, lambda);
    for (double& v : y) v = -v;
    X.push_back(std::move(y));
  }
  return X;
}

std::vector<double> q_term_side(const TorusGrid& g, const Profile& p, const std::vector<double>& zeta,
                                const Eigen::VectorXd& a, int na, const Eigen::VectorXd& c, int nc, double lambda) {
  std::vector<double> b(zeta.size());
  for (std::size_t e = 0; e < zeta.size(); ++e) b[e] = p.b(zeta[e]);
  auto Xa = projection_powers(g, b, a, na, lambda);
  auto Xc = projection_powers(g, b, c, nc, lambda);
  std::vector<double> out(zeta.size());
  for (std::size_t e = 0; e < zeta.size(); ++e) out[e] = Xa[na][e] * Xc[nc][e] * p.db(zeta[e]);
  return out;
}

McValue q_term_mc(const QTermParams& P) {
  const TorusGrid& g = P.grid;
  const int d = g.d();
  const auto& n = P.orders;
  if (n[0] + n[1] + n[2] + n[3] > 8) throw UnsupportedError("Monte Carlo q_term is capped at total order 8");
  if (P.n_env <= 0 || P.inner <= 0) throw DomainError("sample counts must be positive");
  const Profile& prof = profile_by_name(P.profile);
  const Rule rule = mehler_rule(P.rho_nodes);
  Eigen::VectorXd ei = Eigen::VectorXd::Zero(d), ej = Eigen::VectorXd::Zero(d);
  ei[P.i] = 1.0;
  ej[P.j] = 1.0;
  const std::size_t E = g.edges();
  auto body = [&](int env) {
    const std::vector<double> zeta = sample_zeta(g, P.seed, static_cast<std::uint64_t>(env));
    const Stream st(P.seed, streams::mehler, static_cast<std::uint32_t>(env));
    std::vector<double> left = q_term_side(g, prof, zeta, ei, n[0], P.xi, n[1], P.lambda);
    std::vector<double> right(E, 0.0), zp(E), plus, minus;
    for (int m = 0; m < P.inner; ++m)
      for (std::size_t k = 0; k < rule.x.size(); ++k) {
        st.normals(zp, (static_cast<std::uint64_t>(m) * rule.x.size() + k) * E);
        mehler_pair(zeta, zp, rule.x[k], plus, minus);
        const double w = rule.w[k] * 0.5 / P.inner;
        for (const auto* zz : {&plus, &minus}) {
          auto r = q_term_side(g, prof, *zz, ej, n[2], P.xi, n[3], P.lambda);
          for (std::size_t e = 0; e < E; ++e) right[e] += w * r[e];
        }
      }
    double s = 0.0;
    for (std::size_t e = 0; e < E; ++e) s += left[e] * right[e];
    return s / static_cast<double>(g.sites());
  };
  std::vector<double> y = run_ordered<double>(P.n_env, P.threads, body, [](double) {});
  MeanSe ms = mean_se(y);
  return {ms.mean, ms.se, P.n_env};
}

}  // namespace

McValue q_term(const QTermParams& P) {
  const int d = P.grid.d();
  if (P.xi.size() != d) throw DimensionError("xi length != d");
  if (P.i < 0 || P.j < 0 || P.i >= d || P.j >= d) throw DimensionError("direction index out of range");
  for (int v : P.orders)
    if (v < 0) throw DomainError("negative projection order");
  const int total = P.orders[0] + P.orders[1] + P.orders[2] + P.orders[3];
  const bool exact = P.mode == QTermMode::exact || (P.mode == QTermMode::automatic && total <= 2);
  if (exact) return {q_term_exact(P), 0.0, 0};
  return q_term_mc(P);
}

double expansion_coefficient_torus(int l, const QTermParams& params) {
  if (l < 0 || l > 2) throw UnsupportedError("exact torus coefficients are available for l <= 2");
  QTermParams P = params;
  P.mode = QTermMode::exact;
  double s = 0.0;
  for (int a = 0; a <= l; ++a)
    for (int b = 0; a + b <= l; ++b)
      for (int c = 0; a + b + c <= l; ++c) {
        P.orders = {a, b, c, l - a - b - c};
        s += q_term(P).value;
      }
  return s;
}

}  // namespace hgff
