#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "hgff/corrector.hpp"
#include "hgff/errors.hpp"
#include "hgff/fluctuation.hpp"
#include "hgff/gff.hpp"
#include "hgff/green.hpp"
#include "hgff/markov.hpp"
#include "hgff/parallel.hpp"

namespace hgff::cli {

using json = nlohmann::json;

namespace {

// ---- parsing helpers -------------------------------------------------------

std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError(what + ": '" + tok + "' is not a number");
    }
  }
  if (out.empty()) throw ConfigError(what + ": empty list");
  return out;
}

Eigen::VectorXd parse_vector(const std::string& s, int d, const std::string& what) {
  auto v = parse_list(s, what);
  if (static_cast<int>(v.size()) != d) throw ConfigError(what + ": expected " + std::to_string(d) + " entries");
  return Eigen::Map<Eigen::VectorXd>(v.data(), d);
}

// one value = multiple of I, d values = diagonal, d*d values = row-major
Eigen::MatrixXd parse_matrix(const std::string& s, int d, const std::string& what) {
  auto v = parse_list(s, what);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d, d);
  if (v.size() == 1) {
    M = v[0] * Eigen::MatrixXd::Identity(d, d);
  } else if (static_cast<int>(v.size()) == d) {
    for (int i = 0; i < d; ++i) M(i, i) = v[i];
  } else if (static_cast<int>(v.size()) == d * d) {
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) M(i, j) = v[i * d + j];
  } else {
    throw ConfigError(what + ": expected 1, d or d*d entries");
  }
  return M;
}

void require_spd(const Eigen::MatrixXd& M, const std::string& what) {
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, M.cwiseAbs().maxCoeff()))
    throw ConfigError(what + " must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  if (!(es.eigenvalues().minCoeff() > 0.0)) throw ConfigError(what + " must be positive definite");
}

void require_tau(double tau) {
  if (!(tau >= 0.0) || tau >= 1.0)
    throw ConfigError("ellipticity: tau = " + std::to_string(tau) + " violates the contrast constraint tau in [0, 1)");
}

void require_profile(const std::string& p) {
  for (const auto& n : profile_names())
    if (n == p) return;
  throw ConfigError("unknown profile '" + p + "'");
}

int require_index(int i, int d, const std::string& what) {
  if (i < 1 || i > d) throw ConfigError(what + " must lie in 1.." + std::to_string(d));
  return i - 1;
}

json to_json(const Eigen::MatrixXd& M) {
  json a = json::array();
  for (long i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (long j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    a.push_back(row);
  }
  return a;
}

json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (long i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json to_json(const TailSum& t) {
  return {{"partial", t.partial}, {"partial_half", t.partial_half}, {"tail", t.tail}, {"total", t.total},
          {"radius", t.radius}};
}

json to_json(const PolyFit& f) {
  json s = json::array();
  for (int k = 0; k <= f.degree; ++k) s.push_back(f.sigma(k));
  return {{"degree", f.degree},         {"samples", f.samples}, {"coef", f.coef}, {"std_error", f.std_error},
          {"systematic", f.systematic}, {"sigma", s}};
}

json to_json(const BumpFunction& b) { return {{"center", b.center}, {"radius", b.radius}}; }

json to_json(const PairingResult& p) {
  return {{"value", p.value}, {"error", p.error}, {"scale", p.scale}, {"method", p.method}};
}

std::filesystem::path output_path(const std::string& p) {
  std::filesystem::path path(p);
  const char* dir = std::getenv("HGFF_OUTPUT_DIR");
  if (dir && *dir && path.is_relative()) path = std::filesystem::path(dir) / path;
  return path;
}

// ---- records ---------------------------------------------------------------

struct Emitter {
  std::ostream* os = nullptr;
  std::string subcommand;
  json config = json::object();
  bool reproducible = false;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  json base(const std::string& type, const std::string& status) const {
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {{"schema_version", schema_version},
            {"version", artifact_version},
            {"subcommand", subcommand},
            {"record_type", type},
            {"status", status},
            {"config", config},
            {"wall_clock_s", reproducible ? 0.0 : t}};
  }
  void emit(const std::string& type, json payload) const {
    json r = base(type, "ok");
    r["payload"] = std::move(payload);
    *os << r.dump() << '\n';
    os->flush();
  }
  void fail(const std::string& cls, const std::string& msg, int code) const {
    json r = base("error", "error");
    r["payload"] = json::object();
    r["error"] = {{"class", cls}, {"message", msg}, {"exit_code", code}};
    *os << r.dump() << '\n';
    os->flush();
  }
};

struct Common {
  std::uint64_t seed = 1;
  int threads = 0;
  std::string output;
  bool reproducible = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "master seed")->capture_default_str();
  sub->add_option("--threads", c.threads, "worker threads (0: HGFF_THREADS or hardware)")->capture_default_str();
  sub->add_option("--output", c.output, "JSON-lines output file (default stdout)");
  sub->add_flag("--reproducible", c.reproducible, "record wall_clock_s as 0 for byte-identical output");
}

json scalar(const std::string& s) {
  json v = json::parse(s, nullptr, false);
  if (!v.is_discarded() && (v.is_number() || v.is_boolean())) return v;
  return s;
}

json echo(const CLI::App* sub) {
  json c = json::object();
  for (const CLI::Option* o : sub->get_options()) {
    const std::string name = o->get_single_name();
    if (name.empty() || name == "help") continue;
    if (o->get_expected_max() == 0) {
      c[name] = o->count() > 0;
    } else if (o->count() > 0) {
      const auto& r = o->results();
      if (o->get_expected_max() <= 1 && r.size() == 1) {
        c[name] = scalar(r[0]);
      } else {
        json a = json::array();
        for (const auto& x : r) a.push_back(scalar(x));
        c[name] = a;
      }
    } else if (!o->get_default_str().empty()) {
      c[name] = scalar(o->get_default_str());
    }
  }
  return c;
}

// ---- subcommands -----------------------------------------------------------

struct GreenOpts {
  int d = 3;
  double lambda = 0.0;
  int radius = 8;
  int order = 10;
  std::vector<std::string> points;
  std::string hessian;
  int hessian_radius = 24;
  bool decay = false;
  std::string decay_lambdas = "0,0.01,0.1,1";
  int decay_radius = 24;
};

void run_green(const GreenOpts& o, const Emitter& em) {
  if (o.d < 1 || o.d > 6) throw ConfigError("d must lie in 1..6");
  if (o.lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (o.d <= 2 && o.lambda == 0.0) throw ConfigError("G_0 diverges for d <= 2; use lambda > 0");
  if (o.radius < 1 || o.order < 2) throw ConfigError("radius >= 1 and order >= 2 required");
  std::vector<std::vector<long>> pts;
  for (const auto& p : o.points.empty() ? std::vector<std::string>{std::string(o.d, '0')} : o.points) {
    std::vector<long> x;
    if (o.points.empty()) {
      x.assign(static_cast<std::size_t>(o.d), 0);
    } else {
      for (double v : parse_list(p, "point")) x.push_back(std::lround(v));
      if (static_cast<int>(x.size()) != o.d) throw ConfigError("point: expected d entries");
    }
    pts.push_back(x);
  }
  int hi = -1, hj = -1;
  if (!o.hessian.empty()) {
    auto v = parse_list(o.hessian, "hessian");
    if (v.size() != 2) throw ConfigError("hessian: expected i,j");
    hi = require_index(static_cast<int>(v[0]), o.d, "hessian i");
    hj = require_index(static_cast<int>(v[1]), o.d, "hessian j");
    if (o.hessian_radius < 2) throw ConfigError("hessian-radius must be >= 2");
  }
  std::vector<double> lambdas;
  if (o.decay) {
    if (o.d != 3) throw ConfigError("decay check is implemented for d = 3");
    lambdas = parse_list(o.decay_lambdas, "decay-lambdas");
    for (double l : lambdas)
      if (l < 0.0) throw ConfigError("decay-lambdas must be >= 0");
  }

  json payload;
  json vals = json::array();
  for (const auto& x : pts) {
    GreenValue g = green_value(x, o.lambda, o.d, o.order);
    vals.push_back({{"x", x}, {"G", g.value}, {"error", g.error}});
  }
  payload["values"] = vals;

  GreenTable T(o.d, o.lambda, o.radius, o.order, true);
  double worst = 0.0;
  std::vector<long> x(static_cast<std::size_t>(o.d), -(o.radius - 1));
  for (;;) {
    worst = std::max(worst, std::abs(T.equation_residual(x)));
    int k = 0;
    while (k < o.d && ++x[k] > o.radius - 1) x[k++] = -(o.radius - 1);
    if (k == o.d) break;
  }
  payload["table"] = {{"radius", o.radius}, {"error_estimate", T.error_estimate()}, {"max_equation_residual", worst}};
  if (hi >= 0) {
    TailSum t = hessian_l2_sum(hi, hj, o.lambda, o.hessian_radius, o.d, o.order);
    payload["hessian_l2"] = to_json(t);
    GreenTable H(o.d, o.lambda, o.hessian_radius + 2, o.order, false);
    json rows = json::array();
    for (int R : {4, 8, 16})
      if (R <= o.hessian_radius) rows.push_back({{"R", R}, {"row_sum", hessian_row_sum(H, hi, hj, R)}});
    payload["hessian_row_sums"] = rows;
  }
  if (o.decay) {
    DecayReport r = triple_grad_decay_check(lambdas, o.decay_radius, o.d, o.order);
    json fits = json::array();
    for (const auto& f : r.fits)
      fits.push_back({{"lambda", f.lambda}, {"exponent", f.exponent}, {"constant", f.constant}, {"points", f.points}});
    payload["decay"] = {{"fits", fits},
                        {"max_exponent", r.max_exponent},
                        {"max_constant", r.max_constant},
                        {"constant_ratio", r.constant_ratio}};
  }
  em.emit("result", payload);
}

struct CorrectorOpts {
  int d = 3;
  int L = 16;
  double tau = 0.05;
  std::string profile = "tanh";
  std::string xi;
  double lambda = 0.0;
  int samples = 4;
  double tol = 1e-10;
  int neumann = 0;
};

void run_corrector(const CorrectorOpts& o, const Common& c, const Emitter& em) {
  if (o.d < 1 || o.d > 4) throw ConfigError("d must lie in 1..4");
  if (o.L < 2) throw ConfigError("L must be >= 2");
  require_tau(o.tau);
  require_profile(o.profile);
  if (o.lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (o.samples < 1) throw ConfigError("samples must be >= 1");
  if (!(o.tol > 0.0)) throw ConfigError("tol must be > 0");
  if (o.neumann < 0) throw ConfigError("neumann order must be >= 0");
  Eigen::VectorXd xi = Eigen::VectorXd::Zero(o.d);
  xi[0] = 1.0;
  if (!o.xi.empty()) xi = parse_vector(o.xi, o.d, "xi");

  const TorusGrid grid(o.d, o.L);
  const Profile& prof = profile_by_name(o.profile);
  std::vector<HomogenizationSample> samples(static_cast<std::size_t>(o.samples));
  std::vector<json> recs(static_cast<std::size_t>(o.samples));
  parallel_for(samples.size(), resolve_threads(c.threads), [&](std::size_t s) {
    HomogenizationSample hs;
    hs.a = sample_conductance(grid, prof, o.tau, c.seed, s);
    json its = json::array(), res = json::array();
    for (int l = 0; l < o.d; ++l) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(o.d);
      e[l] = 1.0;
      hs.phi.push_back(solve_corrector(hs.a, e, o.lambda, o.tol));
      its.push_back(hs.phi.back().iterations);
      res.push_back(hs.phi.back().residual);
    }
    json r = {{"env", s}, {"iterations", its}, {"residual", res},
              {"abar", to_json(homogenized_sample(hs.a, hs.phi))}};
    if (o.neumann > 0) {
      CorrectorSolution sx = solve_corrector(hs.a, xi, 0.0, o.tol);
      EdgeField direct = grad(sx.phi);
      EdgeField eta = constant_edge_field(grid, xi);
      auto terms = neumann_terms(o.neumann, xi, hs.a);
      double diff = 0.0;
      for (std::size_t e = 0; e < direct.v.size(); ++e) {
        double sum = 0.0;
        for (const auto& t : terms) sum += t.v[e];
        const double dv = direct.v[e] + eta.v[e] - sum;
        diff += dv * dv;
      }
      r["neumann"] = {{"order", o.neumann},
                      {"difference_l2", std::sqrt(diff)},
                      {"tail_bound", neumann_tail_bound(o.neumann, xi, hs.a)}};
    }
    recs[s] = std::move(r);
    samples[s] = std::move(hs);
  });
  for (auto& r : recs) em.emit("sample", r);
  MatrixEstimate est = homogenized_estimate(samples);
  em.emit("result", {{"abar", to_json(est.value)},
                     {"std_error", to_json(est.std_error)},
                     {"samples", est.samples},
                     {"contraction", contraction_estimate(samples[0].a)}});
}

struct QtensorOpts {
  int d = 3;
  int L = 16;
  std::string tau = "0.05";
  std::vector<std::string> xi;
  int samples = 20;
  int rho_nodes = 8;
  int inner = 1;
  double lambda = 0.0;
  std::string profile = "tanh";
  std::string estimator = "site";
  double tol = 1e-11;
  bool per_env = false;
  std::string csv;
};

void run_qtensor(const QtensorOpts& o, const Common& c, const Emitter& em) {
  if (o.d < 1 || o.d > 4) throw ConfigError("d must lie in 1..4");
  if (o.L < 2) throw ConfigError("L must be >= 2");
  QTensorParams P;
  P.grid = TorusGrid(o.d, o.L);
  P.taus = parse_list(o.tau, "tau");
  for (double t : P.taus) require_tau(t);
  for (const auto& x : o.xi) P.xis.push_back(parse_vector(x, o.d, "xi"));
  if (o.samples < 1) throw ConfigError("samples must be >= 1");
  if (o.rho_nodes < 1 || o.inner < 1) throw ConfigError("rho-nodes and inner must be >= 1");
  if (o.lambda < 0.0) throw ConfigError("lambda must be >= 0");
  require_profile(o.profile);
  if (o.estimator != "site" && o.estimator != "origin") throw ConfigError("estimator must be site or origin");
  P.profile = o.profile;
  P.n_env = o.samples;
  P.rho_nodes = o.rho_nodes;
  P.inner = o.inner;
  P.lambda = o.lambda;
  P.seed = c.seed;
  P.tol = o.tol;
  P.estimator = o.estimator == "site" ? QEstimator::site_average : QEstimator::origin;
  P.threads = resolve_threads(c.threads);
  if (o.per_env) {
    P.on_env = [&](const EnvRecord& r) {
      json q = json::array();
      for (std::size_t t = 0; t < r.q.size(); ++t)
        for (std::size_t x = 0; x < r.q[t].size(); ++x)
          q.push_back({{"tau", P.taus[t]}, {"xi_index", x}, {"matrix", to_json(r.q[t][x])}});
      em.emit("environment", {{"env", r.env},
                              {"solves", r.solves},
                              {"max_iterations", r.max_iterations},
                              {"max_residual", r.max_residual},
                              {"q", q}});
    };
  }
  QTensorRun run = q_tensor_mc_run(P);
  std::unique_ptr<std::ofstream> csv;
  if (!o.csv.empty()) {
    csv = std::make_unique<std::ofstream>(output_path(o.csv));
    if (!*csv) throw ConfigError("cannot open csv output " + o.csv);
    csv->precision(17);
    *csv << "tau,xi_index,i,j,value,std_error\n";
  }
  for (const auto& row : run.estimates)
    for (std::size_t x = 0; x < row.size(); ++x) {
      const QEstimate& q = row[x];
      em.emit("estimate", {{"tau", q.tau},
                           {"xi", to_json(q.xi)},
                           {"lambda", q.lambda},
                           {"L", q.L},
                           {"d", q.d},
                           {"profile", q.profile},
                           {"estimator", o.estimator},
                           {"n_samples", q.n_samples},
                           {"seed", q.seed},
                           {"matrix", to_json(q.matrix)},
                           {"std_error", to_json(q.std_error)},
                           {"underpowered", q.underpowered}});
      if (csv)
        for (int i = 0; i < q.d; ++i)
          for (int j = 0; j < q.d; ++j)
            *csv << q.tau << ',' << x << ',' << i + 1 << ',' << j + 1 << ',' << q.matrix(i, j) << ','
                 << q.std_error(i, j) << '\n';
    }
}

struct ExpansionOpts {
  std::string check = "c0";
  std::string profile = "tanh";
  int d = 3;
  std::string xi = "1,1,0";
  int i = 1;
  int j = 2;
  int R = 24;
  int hermite_degree = 40;
  bool stability = false;
  int L = 16;
  std::string tau = "0.02,0.03,0.04,0.05,0.06";
  int samples = 50;
  int rho_nodes = 8;
  int inner = 1;
  double lambda = 0.0;
  std::string orders = "0,0,0,0";
  std::string mode = "auto";
};

void run_expansion(const ExpansionOpts& o, const Common& c, const Emitter& em) {
  require_profile(o.profile);
  if (o.d < 1 || o.d > 4) throw ConfigError("d must lie in 1..4");
  const Eigen::VectorXd xi = parse_vector(o.xi, o.d, "xi");
  const int i = require_index(o.i, o.d, "i");
  const int j = require_index(o.j, o.d, "j");
  if (o.check == "c0") {
    em.emit("result", {{"check", "c0"}, {"matrix", to_json(c0(o.profile, xi))}, {"b2", profile_second_moment(o.profile)}});
  } else if (o.check == "c2") {
    if (i == j) throw ConfigError("c2 is defined for i != j");
    if (o.d < 3) throw ConfigError("c2 needs d >= 3");
    if (o.R < 2 || o.hermite_degree < 2) throw ConfigError("R and hermite-degree must be >= 2");
    C2Result r = c2_offdiag(o.profile, xi, i, j, o.R, o.hermite_degree);
    json p = {{"check", "c2"},
              {"value", r.value},
              {"printed_single_class", r.printed},
              {"hessian_sum", r.hessian_sum},
              {"hessian_tail", r.hessian_tail},
              {"b2", r.b2},
              {"db_resolvent", r.db_resolvent},
              {"two_edge", r.two_edge},
              {"radius", r.radius},
              {"hermite_degree", r.hermite_degree}};
    if (o.stability) {
      const double vR = c2_offdiag(o.profile, xi, i, j, 2 * o.R, o.hermite_degree).value;
      const double vN = c2_offdiag(o.profile, xi, i, j, o.R, 2 * o.hermite_degree).value;
      p["stability"] = {{"radius_doubled", vR},
                        {"degree_doubled", vN},
                        {"radius_rel_change", std::abs(vR - r.value) / std::abs(r.value)},
                        {"degree_rel_change", std::abs(vN - r.value) / std::abs(r.value)}};
    }
    em.emit("result", p);
  } else if (o.check == "c1") {
    if (i == j) throw ConfigError("c1 check is defined for i != j");
    C1Params P;
    if (o.L < 2) throw ConfigError("L must be >= 2");
    P.grid = TorusGrid(o.d, o.L);
    P.taus = parse_list(o.tau, "tau");
    for (double t : P.taus) {
      require_tau(t);
      if (t == 0.0) throw ConfigError("tau grid for the c1 check must exclude 0");
    }
    if (P.taus.size() < 4) throw ConfigError("c1 check needs at least four tau values");
    if (o.samples < 2) throw ConfigError("samples must be >= 2");
    P.n_env = o.samples;
    P.rho_nodes = o.rho_nodes;
    P.lambda = o.lambda;
    P.seed = c.seed;
    P.threads = resolve_threads(c.threads);
    PolyFit f = c1_check(o.profile, xi, i, j, P);
    em.emit("result", {{"check", "c1"},
                       {"linear", f.coef[1]},
                       {"linear_sigma", f.sigma(1)},
                       {"constant", f.coef[0]},
                       {"constant_sigma", f.sigma(0)},
                       {"fit", to_json(f)}});
  } else if (o.check == "terms") {
    QTermParams P;
    if (o.L < 2) throw ConfigError("L must be >= 2");
    P.grid = TorusGrid(o.d, o.L);
    P.profile = o.profile;
    P.i = i;
    P.j = j;
    P.xi = xi;
    P.lambda = o.lambda;
    auto n = parse_list(o.orders, "orders");
    if (n.size() != 4) throw ConfigError("orders: expected n1,n2,n3,n4");
    for (int k = 0; k < 4; ++k) {
      if (n[k] < 0 || n[k] != std::floor(n[k])) throw ConfigError("orders must be non-negative integers");
      P.orders[k] = static_cast<int>(n[k]);
    }
    if (o.mode == "auto")
      P.mode = QTermMode::automatic;
    else if (o.mode == "exact")
      P.mode = QTermMode::exact;
    else if (o.mode == "mc")
      P.mode = QTermMode::monte_carlo;
    else
      throw ConfigError("mode must be auto, exact or mc");
    P.n_env = o.samples;
    P.rho_nodes = o.rho_nodes;
    P.inner = o.inner;
    P.seed = c.seed;
    P.threads = resolve_threads(c.threads);
    P.hermite_degree = o.hermite_degree;
    McValue v = q_term(P);
    em.emit("result", {{"check", "terms"},
                       {"orders", P.orders},
                       {"value", v.value},
                       {"std_error", v.std_error},
                       {"samples", v.samples},
                       {"exact", v.samples == 0}});
  } else {
    throw ConfigError("check must be one of c0, c1, c2, terms");
  }
}

struct GffOpts {
  int d = 3;
  int L = 16;
  std::string abar = "1";
  std::string Q = "1";
  int samples = 4;
  std::string mask = "none";
  double mask_radius = 0.0;
  std::string dump;
};

void run_gff(const GffOpts& o, const Common& c, const Emitter& em) {
  if (o.d < 1 || o.d > 4) throw ConfigError("d must lie in 1..4");
  if (o.L < 2) throw ConfigError("L must be >= 2");
  GffSpec spec;
  spec.grid = TorusGrid(o.d, o.L);
  spec.abar = parse_matrix(o.abar, o.d, "abar");
  spec.Q = parse_matrix(o.Q, o.d, "Q");
  spec.seed = c.seed;
  require_spd(spec.abar, "abar");
  require_spd(spec.Q, "Q");
  if (o.samples < 1) throw ConfigError("samples must be >= 1");
  SiteMask mask;
  if (o.mask == "half") {
    mask = half_space_mask(spec.grid, 0);
  } else if (o.mask == "ball") {
    const double r = o.mask_radius > 0.0 ? o.mask_radius : o.L / 4.0;
    mask = ball_mask(spec.grid, std::vector<long>(static_cast<std::size_t>(o.d), o.L / 2), r);
  } else if (o.mask != "none") {
    throw ConfigError("mask must be none, half or ball");
  }
  // test function cos(2 pi x_1)
  SiteField f(spec.grid);
  for (std::size_t s = 0; s < spec.grid.sites(); ++s)
    f[s] = std::cos(2.0 * M_PI * spec.grid.coords(s)[0] / o.L);
  const double var = covariance_pair(f, f, spec.abar, spec.Q).value;

  std::vector<json> recs(static_cast<std::size_t>(o.samples));
  parallel_for(recs.size(), resolve_threads(c.threads), [&](std::size_t k) {
    json r;
    FieldSample s;
    if (mask.empty()) {
      s = sample_gff(spec, k);
    } else {
      RestrictedSample rs = sample_gff_restricted(spec, mask, k);
      double add = 0.0;
      for (std::size_t x = 0; x < rs.full.phi.size(); ++x)
        add = std::max(add, std::abs(rs.inside.phi[x] + rs.outside.phi[x] - rs.full.phi[x]));
      r["additivity_error"] = add;
      r["harmonicity_residual"] = harmonicity_check(rs.inside.phi, spec.abar, mask);
      r["phi_A_f"] = field_functional(rs.inside.phi, f);
      r["phi_Ac_f"] = field_functional(rs.outside.phi, f);
      s = std::move(rs.full);
    }
    double mn = s.phi[0], mx = s.phi[0], ss = 0.0;
    for (double v : s.phi.v) {
      mn = std::min(mn, v);
      mx = std::max(mx, v);
      ss += v * v;
    }
    r["index"] = k;
    r["phi_min"] = mn;
    r["phi_max"] = mx;
    r["phi_rms"] = std::sqrt(ss / s.phi.size());
    r["phi_f"] = field_functional(s.phi, f);
    r["helmholtz_residual"] = helmholtz_residual(spec, s);
    if (!o.dump.empty()) {
      const auto path = output_path(o.dump + "_" + std::to_string(k) + ".bin");
      std::ofstream bin(path, std::ios::binary);
      if (!bin) throw ConfigError("cannot open dump file " + path.string());
      bin.write(reinterpret_cast<const char*>(s.phi.v.data()), static_cast<std::streamsize>(s.phi.v.size() * sizeof(double)));
      bin.write(reinterpret_cast<const char*>(s.W.v.data()), static_cast<std::streamsize>(s.W.v.size() * sizeof(double)));
      r["dump"] = {{"path", path.string()}, {"sites", s.phi.size()}, {"edges", s.W.size()}};
    }
    recs[k] = std::move(r);
  });
  double m2 = 0.0;
  for (auto& r : recs) {
    m2 += r["phi_f"].get<double>() * r["phi_f"].get<double>();
    em.emit("sample", r);
  }
  em.emit("result", {{"samples", o.samples},
                     {"test_function", "cos(2 pi x_1)"},
                     {"variance_exact", var},
                     {"variance_empirical", m2 / o.samples}});
}

struct MarkovOpts {
  std::string abar = "2,1,1";
  std::string Q = "1";
  std::string normal = "0,0,1";
  double offset = 0.0;
  std::string ball;
  double tol = 1e-10;
  bool crosscheck = false;
};

void run_markov(const MarkovOpts& o, const Emitter& em) {
  const Eigen::MatrixXd A = parse_matrix(o.abar, 3, "abar");
  const Eigen::MatrixXd Q = parse_matrix(o.Q, 3, "Q");
  require_spd(A, "abar");
  require_spd(Q, "Q");
  if (!(o.tol > 0.0)) throw ConfigError("tol must be > 0");
  Region U;
  if (!o.ball.empty()) {
    auto v = parse_list(o.ball, "ball");
    if (v.size() != 4 || !(v[3] > 0.0)) throw ConfigError("ball: expected cx,cy,cz,r with r > 0");
    U = Region::ball(Eigen::Vector3d(v[0], v[1], v[2]), v[3]);
  } else {
    Eigen::VectorXd n = parse_vector(o.normal, 3, "normal");
    if (n.norm() == 0.0) throw ConfigError("normal must be nonzero");
    U = Region::half_space(n, o.offset);
  }
  WitnessResult w = nonlocality_witness(A, Q, U, o.tol);
  if (w.proportional) {
    em.emit("result", {{"verdict", "proportional"}});
    return;
  }
  json p = {{"verdict", "witness"},
            {"f1", to_json(w.f1)},
            {"f2", to_json(w.f2)},
            {"value", w.pairing.value},
            {"error", w.pairing.error},
            {"pairing", to_json(w.pairing)},
            {"candidates", w.candidates}};
  if (o.crosscheck) p["realspace"] = to_json(pairing_realspace(w.f1, w.f2, A, Q));
  em.emit("result", p);
}

struct LemmaOpts {
  std::string A = "2";
  int d = 3;
  double tol = 1e-10;
};

void run_lemma(const LemmaOpts& o, const Emitter& em) {
  if (o.d < 1 || o.d > 8) throw ConfigError("d must lie in 1..8");
  const Eigen::MatrixXd A = parse_matrix(o.A, o.d, "A");
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()))
    throw ConfigError("A must be symmetric");
  DivisibilityResult r = quartic_divisibility(A, o.tol);
  json p = {{"verdict", r.multiple_of_identity ? "multiple_of_identity" : "not_divisible"},
            {"residual", r.residual},
            {"eigen_spread", r.eigen_spread},
            {"criteria_agree", r.criteria_agree},
            {"B", to_json(r.B)}};
  if (r.multiple_of_identity) p["c"] = r.c;
  em.emit("result", p);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Numerical companion for generalized Gaussian free fields from stochastic homogenization", "hgff"};
  app.set_config("--config", "", "key = value file with [subcommand] sections; flags override it");
  app.allow_config_extras(false);
  app.require_subcommand(1);
  app.set_version_flag("--version", artifact_version);

  Common common;
  GreenOpts go;
  CorrectorOpts co;
  QtensorOpts qo;
  ExpansionOpts eo;
  GffOpts fo;
  MarkovOpts mo;
  LemmaOpts lo;

  auto* green = app.add_subcommand("green", "lattice Green function values, Hessian sums, decay fits");
  green->add_option("--d", go.d)->capture_default_str();
  green->add_option("--lambda", go.lambda)->capture_default_str();
  green->add_option("--radius", go.radius, "cached box radius")->capture_default_str();
  green->add_option("--order", go.order, "quadrature order")->capture_default_str();
  green->add_option("--point", go.points, "lattice point x1,..,xd (repeatable)");
  green->add_option("--hessian", go.hessian, "i,j (1-based) for the Hessian l2 sum");
  green->add_option("--hessian-radius", go.hessian_radius)->capture_default_str();
  green->add_flag("--decay", go.decay, "triple-gradient decay fit");
  green->add_option("--decay-lambdas", go.decay_lambdas)->capture_default_str();
  green->add_option("--decay-radius", go.decay_radius)->capture_default_str();

  auto* corr = app.add_subcommand("corrector", "corrector solves and homogenized matrix estimate");
  corr->add_option("--d", co.d)->capture_default_str();
  corr->add_option("--L", co.L)->capture_default_str();
  corr->add_option("--tau", co.tau)->capture_default_str();
  corr->add_option("--profile", co.profile)->capture_default_str();
  corr->add_option("--xi", co.xi, "direction for the Neumann comparison");
  corr->add_option("--lambda", co.lambda)->capture_default_str();
  corr->add_option("--samples", co.samples)->capture_default_str();
  corr->add_option("--tol", co.tol)->capture_default_str();
  corr->add_option("--neumann", co.neumann, "compare the Neumann series up to this order")->capture_default_str();

  auto* qt = app.add_subcommand("qtensor", "Monte Carlo estimate of the fluctuation tensor");
  qt->add_option("--d", qo.d)->capture_default_str();
  qt->add_option("--L", qo.L)->capture_default_str();
  qt->add_option("--tau", qo.tau, "contrast or comma separated tau grid")->capture_default_str();
  qt->add_option("--xi", qo.xi, "direction (repeatable)");
  qt->add_option("--samples", qo.samples, "environments")->capture_default_str();
  qt->add_option("--rho-nodes", qo.rho_nodes)->capture_default_str();
  qt->add_option("--inner", qo.inner)->capture_default_str();
  qt->add_option("--lambda", qo.lambda)->capture_default_str();
  qt->add_option("--profile", qo.profile)->capture_default_str();
  qt->add_option("--estimator", qo.estimator, "site or origin")->capture_default_str();
  qt->add_option("--tol", qo.tol)->capture_default_str();
  qt->add_flag("--per-env", qo.per_env, "emit one record per environment");
  qt->add_option("--csv", qo.csv, "matrix dump");

  auto* ex = app.add_subcommand("expansion", "small-contrast expansion coefficients");
  ex->add_option("--check", eo.check, "c0, c1, c2 or terms")->capture_default_str();
  ex->add_option("--profile", eo.profile)->capture_default_str();
  ex->add_option("--d", eo.d)->capture_default_str();
  ex->add_option("--xi", eo.xi)->capture_default_str();
  ex->add_option("--i", eo.i)->capture_default_str();
  ex->add_option("--j", eo.j)->capture_default_str();
  ex->add_option("--R", eo.R)->capture_default_str();
  ex->add_option("--hermite-degree", eo.hermite_degree)->capture_default_str();
  ex->add_flag("--stability", eo.stability, "report c2 under radius and degree doubling");
  ex->add_option("--L", eo.L)->capture_default_str();
  ex->add_option("--tau", eo.tau)->capture_default_str();
  ex->add_option("--samples", eo.samples)->capture_default_str();
  ex->add_option("--rho-nodes", eo.rho_nodes)->capture_default_str();
  ex->add_option("--inner", eo.inner)->capture_default_str();
  ex->add_option("--lambda", eo.lambda)->capture_default_str();
  ex->add_option("--orders", eo.orders, "n1,n2,n3,n4 for --check terms")->capture_default_str();
  ex->add_option("--mode", eo.mode, "auto, exact or mc")->capture_default_str();

  auto* gs = app.add_subcommand("gff-sample", "generalized GFF samples on the torus");
  gs->add_option("--d", fo.d)->capture_default_str();
  gs->add_option("--L", fo.L)->capture_default_str();
  gs->add_option("--abar", fo.abar, "1, d or d*d entries")->capture_default_str();
  gs->add_option("--Q", fo.Q, "1, d or d*d entries")->capture_default_str();
  gs->add_option("--samples", fo.samples)->capture_default_str();
  gs->add_option("--mask", fo.mask, "none, half or ball")->capture_default_str();
  gs->add_option("--mask-radius", fo.mask_radius)->capture_default_str();
  gs->add_option("--dump", fo.dump, "binary field dump prefix");

  auto* mk = app.add_subcommand("markov-test", "non-locality witness search");
  mk->add_option("--abar", mo.abar)->capture_default_str();
  mk->add_option("--Q", mo.Q)->capture_default_str();
  mk->add_option("--normal", mo.normal, "half-space {n.x < offset}")->capture_default_str();
  mk->add_option("--offset", mo.offset)->capture_default_str();
  mk->add_option("--ball", mo.ball, "cx,cy,cz,r instead of a half-space");
  mk->add_option("--tol", mo.tol)->capture_default_str();
  mk->add_flag("--crosscheck", mo.crosscheck, "also evaluate the real-space pairing");

  auto* ml = app.add_subcommand("matrix-lemma", "quartic divisibility test");
  ml->add_option("--A", lo.A, "1, d or d*d entries")->capture_default_str();
  ml->add_option("--d", lo.d)->capture_default_str();
  ml->add_option("--tol", lo.tol)->capture_default_str();

  for (auto* s : {green, corr, qt, ex, gs, mk, ml}) add_common(s, common);

  Emitter em;
  em.os = &out;
  std::unique_ptr<std::ofstream> file;
  auto finish = [&](const std::string& cls, const std::string& msg, int code) {
    err << "hgff: " << msg << '\n';
    em.fail(cls, msg, code);
    return code;
  };

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    if (!app.get_subcommands().empty()) {
      em.subcommand = app.get_subcommands().front()->get_name();
    } else {
      for (std::size_t k = 1; k < args.size(); ++k) {
        if (args[k] == "--config") {
          ++k;
          continue;
        }
        if (args[k].rfind('-', 0) == 0) continue;
        return finish("UnknownSubcommand", "unknown subcommand '" + args[k] + "'", config_error);
      }
    }
    return finish(e.get_name(), e.what(), config_error);
  }

  CLI::App* sub = app.get_subcommands().front();
  em.subcommand = sub->get_name();
  em.config = echo(sub);
  em.reproducible = common.reproducible;
  if (!common.output.empty()) {
    const auto path = output_path(common.output);
    file = std::make_unique<std::ofstream>(path, std::ios::app);
    if (!*file) return finish("ConfigError", "cannot open output file " + path.string(), config_error);
    em.os = file.get();
  }

  try {
    const std::string n = sub->get_name();
    if (n == "green")
      run_green(go, em);
    else if (n == "corrector")
      run_corrector(co, common, em);
    else if (n == "qtensor")
      run_qtensor(qo, common, em);
    else if (n == "expansion")
      run_expansion(eo, common, em);
    else if (n == "gff-sample")
      run_gff(fo, common, em);
    else if (n == "markov-test")
      run_markov(mo, em);
    else
      run_lemma(lo, em);
  } catch (const ConfigError& e) {
    return finish("ConfigError", e.what(), config_error);
  } catch (const InconclusiveError& e) {
    return finish("InconclusiveError", e.what(), inconclusive);
  } catch (const Error& e) {
    return finish("NumericalError", e.what(), numerical_error);
  } catch (const std::exception& e) {
    return finish("NumericalError", e.what(), numerical_error);
  }
  return ok;
}

}  // namespace hgff::cli
