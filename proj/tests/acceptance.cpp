// Acceptance harness: one PASS/FAIL line per criterion. Criterion 12 is reported
// but does not affect the exit status.
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "hgff/corrector.hpp"
#include "hgff/errors.hpp"
#include "hgff/fluctuation.hpp"
#include "hgff/gff.hpp"
#include "hgff/green.hpp"
#include "hgff/hermite.hpp"
#include "hgff/markov.hpp"
#include "hgff/spectral.hpp"

using namespace hgff;

namespace {

constexpr double pi = std::numbers::pi;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[2048];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Eigen::Matrix3d random_spd(std::mt19937_64& rng, double lo, double hi) {
  std::normal_distribution<double> N;
  std::uniform_real_distribution<double> U(lo, hi);
  Eigen::Matrix3d G;
  for (int i = 0; i < 9; ++i) G(i / 3, i % 3) = N(rng);
  Eigen::Matrix3d R = Eigen::HouseholderQR<Eigen::Matrix3d>(G).householderQ();
  Eigen::Matrix3d M = R * Eigen::Vector3d(U(rng), U(rng), U(rng)).asDiagonal() * R.transpose();
  return 0.5 * (M + M.transpose());
}

Eigen::VectorXd gaussian_point(std::mt19937_64& rng, int d = 3) {
  std::normal_distribution<double> N;
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x[i] = N(rng);
  return x;
}

Eigen::VectorXd vec3(double a, double b, double c) {
  Eigen::VectorXd v(3);
  v << a, b, c;
  return v;
}

// E f(Z) by composite Simpson on [-12, 12]
double gauss_simpson(const std::function<double(double)>& f) {
  const int n = 24000;
  const double a = -12.0, h = 24.0 / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double z = a + i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    s += w * f(z) * std::exp(-0.5 * z * z);
  }
  return s * h / 3.0 / std::sqrt(2.0 * pi);
}

double kernel_sup(const Eigen::MatrixXd& A, std::mt19937_64& rng, int n = 1000) {
  double m = 0.0;
  for (int t = 0; t < n; ++t) m = std::max(m, std::abs(kernel_K(gaussian_point(rng), A, 3)));
  return m;
}

// 1. kernel locality dichotomy
Verdict criterion1() {
  std::mt19937_64 rng(101);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::MatrixXd D = Eigen::Vector3d(2, 1, 1).asDiagonal();
  double id_max = 0.0, an_min = 1e300, an_max = 0.0, hom = 0.0;
  std::uniform_real_distribution<double> S(0.1, 10.0);
  std::vector<Eigen::VectorXd> xs;
  for (int t = 0; t < 1000; ++t) {
    xs.push_back(gaussian_point(rng));
    id_max = std::max(id_max, std::abs(kernel_K(xs.back(), I, 3)));
    const double k = std::abs(kernel_K(xs.back().normalized(), D, 3));
    an_min = std::min(an_min, k);
    an_max = std::max(an_max, k);
  }
  // error relative to the size of K on the sphere through s x; pointwise
  // relative error is meaningless next to the zero set of K
  for (const auto& x : xs) {
    const double s = S(rng), k1 = kernel_K(x, D, 3), ks = kernel_K(s * x, D, 3);
    hom = std::max(hom, std::abs(ks - std::pow(s, -5.0) * k1) / (an_max * std::pow(s * x.norm(), -5.0)));
  }
  const double e3 = kernel_K(vec3(0, 0, 1), D, 3);
  const bool ok = id_max <= 1e-12 && an_min > 1e-6 && std::abs(e3) > 1e-6 && hom <= 1e-12;
  return {ok, fmt("max|K(x,I)| = %.3g, min|K(u,diag(2,1,1))| on unit sphere = %.4g, K(e3) = %.6g, "
                  "homogeneity err relative to sup|K| on the sphere = %.3g",
                  id_max, an_min, e3, hom)};
}

// 2. non-Markov witness
Verdict criterion2() {
  std::mt19937_64 rng(202);
  int found = 0, sides = 0, agree = 0;
  double worst_rel = 0.0, worst_prop = 0.0, min_snr = 1e300;
  for (int t = 0; t < 20; ++t) {
    const Eigen::Matrix3d a = random_spd(rng, 0.5, 2.0), Q = random_spd(rng, 0.5, 2.0);
    const Eigen::Vector3d n = gaussian_point(rng).normalized();
    const Region U = Region::half_space(n);
    const WitnessResult w = nonlocality_witness(a, Q, U);
    if (w.proportional) continue;
    const double snr = std::abs(w.pairing.value) / w.pairing.error;
    min_snr = std::min(min_snr, snr);
    if (snr > 10.0) ++found;
    const Eigen::Vector3d c1(w.f1.center[0], w.f1.center[1], w.f1.center[2]);
    const Eigen::Vector3d c2(w.f2.center[0], w.f2.center[1], w.f2.center[2]);
    if (n.dot(c1) + w.f1.radius <= 1e-12 && n.dot(c2) - w.f2.radius >= -1e-12) ++sides;
    const PairingResult r = pairing_realspace(w.f1, w.f2, a, Q);
    const double rel = std::abs(r.value - w.pairing.value) / std::abs(w.pairing.value);
    worst_rel = std::max(worst_rel, rel);
    if (rel <= 1e-6) ++agree;
    // the same bumps under a proportional pair
    std::uniform_real_distribution<double> C(0.5, 3.0);
    const double c = C(rng);
    if (!nonlocality_witness(c * Q, Q, U).proportional) return {false, fmt("pair %d: c Q not detected", t)};
    const PairingResult p = pairing_fourier(w.f1, w.f2, c * Q, Q);
    worst_prop = std::max(worst_prop, std::abs(p.value) / p.scale);
  }
  const bool ok = found == 20 && sides == 20 && agree == 20 && worst_prop < 1e-8;
  return {ok, fmt("witnesses %d/20 (min |value|/error = %.3g), correct sides %d/20, fourier=realspace %d/20 "
                  "(max rel diff %.2g), proportional pairings max |value|/scale = %.2g",
                  found, min_snr, sides, agree, worst_rel, worst_prop)};
}

// 3. quartic divisibility
Verdict criterion3() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> C(0.1, 5.0);
  int scalar_ok = 0, spread_ok = 0, agree = 0;
  double worst_B = 0.0;
  for (int t = 0; t < 100; ++t) {
    const double c = C(rng);
    const Eigen::MatrixXd A = c * Eigen::MatrixXd::Identity(3, 3);
    const DivisibilityResult r = quartic_divisibility(A);
    const double eB = (r.B - c * c * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() / (c * c);
    worst_B = std::max(worst_B, eB);
    if (r.multiple_of_identity && eB <= 1e-10 && std::abs(r.c - c) <= 1e-10 * c) ++scalar_ok;
    if ((kernel_sup(A, rng) == 0.0) == r.multiple_of_identity && r.criteria_agree) ++agree;
  }
  for (int t = 0; t < 100; ++t) {
    const Eigen::MatrixXd A = random_spd(rng, 0.5, 3.0);
    const DivisibilityResult r = quartic_divisibility(A);
    if (!r.multiple_of_identity) ++spread_ok;
    if ((kernel_sup(A, rng) == 0.0) == r.multiple_of_identity && r.criteria_agree) ++agree;
  }
  const bool ok = scalar_ok == 100 && spread_ok == 100 && agree == 200;
  return {ok, fmt("c*I correct %d/100 (max rel |B - c^2 I| = %.2g), spread not_divisible %d/100, "
                  "agreement with kernel detector %d/200",
                  scalar_ok, worst_B, spread_ok, agree)};
}

// 4. derivative resolvent identity
Verdict criterion4() {
  bool ok = true;
  std::ostringstream os;
  for (const auto& name : profile_names()) {
    const Profile& p = profile_by_name(name);
    const HermiteSeries db = hermite_coeffs(p.db, 40);
    const double lhs = resolvent_1d_pair(db, db);
    const double b2 = gauss_simpson([&](double z) { return p.b(z) * p.b(z); });
    const double diff = std::abs(lhs - b2);
    ok = ok && diff <= 1e-8;
    const McValue mc = resolvent_pair_mc(p.db, p.db, 16, 10000, 404);
    const double z_pair = std::abs(mc.value - lhs) / mc.std_error;
    ok = ok && z_pair <= 3.0;
    double z_pt = 0.0;
    for (double z0 : {-1.0, 0.3}) {
      const McValue v = resolvent_mc([&](const std::vector<double>& x) { return p.db(x[0]); }, {z0}, 16, 10000, 405);
      z_pt = std::max(z_pt, std::abs(v.value - resolvent_apply(db, z0)) / v.std_error);
    }
    ok = ok && z_pt <= 3.0;
    os << fmt("%s: <b2> = %.12f, |diff| = %.2g, MC pair %.2f sigma, MC pointwise max %.2f sigma; ", name.c_str(), b2,
              diff, z_pair, z_pt);
  }
  return {ok, os.str()};
}

// shared Monte Carlo run for criteria 5, 6, 7
struct ExpansionRun {
  std::vector<double> taus{0.02, 0.03, 0.04, 0.05, 0.06};
  QTensorRun run;
  bool done = false;
  double seconds = 0.0;
};

ExpansionRun& expansion_run() {
  static ExpansionRun r;
  if (!r.done) {
    QTensorParams p;
    p.grid = TorusGrid(3, 16);
    p.taus = r.taus;
    p.xis = {vec3(1, 0, 0), vec3(1, 1, 0)};
    p.n_env = 200;
    p.rho_nodes = 8;
    p.inner = 1;
    p.seed = 505;
    p.threads = 1;
    const auto t0 = std::chrono::steady_clock::now();
    r.run = q_tensor_mc_run(p);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.done = true;
  }
  return r;
}

// 5. order two: intercept of Q11 / tau^2
Verdict criterion5() {
  ExpansionRun& e = expansion_run();
  // tau in {0.02, 0.04, 0.06}: indices 0, 2, 4 of the shared grid
  const std::vector<double> taus{0.02, 0.04, 0.06};
  auto all = normalized_entry(e.run, e.taus, 0, 0, 0);
  std::vector<std::vector<double>> sub;
  for (const auto& row : all) sub.push_back({row[0], row[2], row[4]});
  const PolyFit f = fit_tau_polynomial(sub, taus, 2);
  const double b2 = gauss_simpson([](double z) { return std::tanh(z) * std::tanh(z); });
  const double sig = f.std_error[0];
  const double dev = std::abs(f.coef[0] - b2);
  const bool ok = dev <= 3.0 * sig && dev <= 0.1 * b2;
  return {ok, fmt("L=16, 200 envs (%.0f s shared run): intercept %.6f +- %.6f vs <tanh^2> = %.6f "
                  "(%.2f sigma, %.3f%% rel)",
                  e.seconds, f.coef[0], sig, b2, dev / sig, 100.0 * dev / b2)};
}

// 6. order three vanishes
Verdict criterion6() {
  ExpansionRun& e = expansion_run();
  const PolyFit f = fit_tau_polynomial(normalized_entry(e.run, e.taus, 1, 0, 1), e.taus, 3);
  const double s = f.sigma(1);
  const bool ok = std::abs(f.coef[1]) <= 3.0 * s;
  return {ok, fmt("xi=(1,1,0), Q12: tau^3 coefficient %.3g +- %.3g (%.2f sigma), common random numbers over %zu taus",
                  f.coef[1], s, std::abs(f.coef[1]) / s, e.taus.size())};
}

// 7. order four off-diagonal
Verdict criterion7() {
  ExpansionRun& e = expansion_run();
  const Eigen::VectorXd xi = vec3(1, 1, 0);
  const PolyFit f = fit_tau_polynomial(normalized_entry(e.run, e.taus, 1, 0, 1), e.taus, 3);
  const C2Result c = c2_offdiag("tanh", xi, 0, 1, 24, 40);
  const C2Result cR = c2_offdiag("tanh", xi, 0, 1, 48, 40);
  const C2Result cN = c2_offdiag("tanh", xi, 0, 1, 24, 80);
  const double s = f.sigma(2);
  const double dev = std::abs(f.coef[2] - c.value);
  const double stabR = std::abs(cR.value - c.value) / std::abs(c.value);
  const double stabN = std::abs(cN.value - c.value) / std::abs(c.value);
  const bool ok = dev <= 3.0 * s && stabR <= 0.01 && stabN <= 0.01 && c.value != 0.0;
  return {ok, fmt("tau^4 coefficient %.6f +- %.6f vs c2 = %.6f (%.2f sigma, %.2f%% rel); c2 stability: R 24->48 "
                  "%.2g, degree 40->80 %.2g",
                  f.coef[2], s, c.value, dev / s, 100.0 * dev / c.value, stabR, stabN)};
}

// 8. Green function
Verdict criterion8() {
  const double watson = std::sqrt(6.0) / (32.0 * pi * pi * pi) * std::tgamma(1.0 / 24) * std::tgamma(5.0 / 24) *
                        std::tgamma(7.0 / 24) * std::tgamma(11.0 / 24) / 6.0;
  const GreenValue g10 = green_value({0, 0, 0}, 0.0, 3, 10);
  const GreenValue g20 = green_value({0, 0, 0}, 0.0, 3, 20);
  const bool g_ok = std::abs(g10.value - 0.2527) <= 1e-4 && std::abs(g10.value - watson) <= 1e-10 &&
                    std::abs(g10.value - g20.value) <= 1e-6;
  double res = 0.0;
  for (double lambda : {0.0, 0.1}) {
    const GreenTable T(3, lambda, 8);
    for (long x = -7; x <= 7; ++x)
      for (long y = -7; y <= 7; ++y)
        for (long z = -7; z <= 7; ++z) res = std::max(res, std::abs(T.equation_residual({x, y, z})));
  }
  const GreenTable T(3, 0.0, 20);
  double s4 = 0, s8 = 0, s16 = 0, diag16 = 0;
  bool rows_ok = true;
  for (auto [i, j] : {std::pair{0, 1}, std::pair{1, 2}, std::pair{2, 0}}) {
    const double a = std::abs(hessian_row_sum(T, i, j, 4)), b = std::abs(hessian_row_sum(T, i, j, 8)),
                 c = std::abs(hessian_row_sum(T, i, j, 16));
    rows_ok = rows_ok && a > b && b > c;
    s4 = std::max(s4, a);
    s8 = std::max(s8, b);
    s16 = std::max(s16, c);
  }
  diag16 = hessian_row_sum(T, 0, 0, 16);
  const DecayReport dr = triple_grad_decay_check({0.0, 0.01, 0.1, 1.0}, 24);
  bool decay_ok = dr.max_exponent <= -4.0 + 0.3 && dr.constant_ratio <= 2.0;
  std::ostringstream ex;
  for (const auto& f : dr.fits) ex << fmt("%.2f ", f.exponent);
  const bool ok = g_ok && res <= 1e-8 && rows_ok && decay_ok;
  return {ok, fmt("G(0) = %.12f (Watson %.12f, order doubling %.2g); max equation residual %.2g; off-diagonal "
                  "row sums R=4,8,16: %.3g, %.3g, %.3g (diagonal R=16: %.6f = 1/d face flux); triple-gradient "
                  "exponents %sconstant ratio %.3f",
                  g10.value, watson, std::abs(g10.value - g20.value), res, s4, s8, s16, diag16, ex.str().c_str(),
                  dr.constant_ratio)};
}

// 9. corrector and projection invariants
Verdict criterion9() {
  std::mt19937_64 rng(909);
  std::normal_distribution<double> N;
  const TorusGrid g(3, 6);
  const double lambdas[] = {0.0, 0.01, 0.1, 1.0};
  double e_mean = 0, e_curl = 0, e_div = 0;
  bool contract = true;
  for (int t = 0; t < 100; ++t) {
    const double lambda = lambdas[t % 4];
    EdgeField F(g);
    for (auto& v : F.v) v = N(rng);
    const EdgeField P = projection_field(F, lambda);
    for (int i = 0; i < 3; ++i) {
      double m = 0.0;
      for (std::size_t s = 0; s < g.sites(); ++s) m += P.at(s, i);
      e_mean = std::max(e_mean, std::abs(m / g.sites()));
    }
    for (std::size_t s = 0; s < g.sites(); ++s)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < i; ++j)
          e_curl = std::max(e_curl, std::abs((P.at(g.up(s, i), j) - P.at(s, j)) - (P.at(g.up(s, j), i) - P.at(s, i))));
    const SiteField dP = div_adj(P), dF = div_adj(F);
    const SiteField lP = div_adj(grad(dP)), lF = div_adj(grad(dF));
    for (std::size_t s = 0; s < g.sites(); ++s) e_div = std::max(e_div, std::abs(lambda * dP[s] + lP[s] - lF[s]));
    contract = contract && norm2(P.v) <= norm2(F.v);
  }
  const bool proj_ok = e_mean <= 1e-10 && e_curl <= 1e-10 && e_div <= 1e-10 && contract;

  // lambda -> 0
  EdgeField F(TorusGrid(3, 8));
  for (auto& v : F.v) v = N(rng);
  const EdgeField P0 = projection_field(F, 0.0);
  double prev = 1e300;
  bool mono = true;
  for (double lambda : {1.0, 0.1, 0.01, 0.001}) {
    const EdgeField P = projection_field(F, lambda);
    std::vector<double> d(P.v.size());
    for (std::size_t e = 0; e < d.size(); ++e) d[e] = P.v[e] - P0.v[e];
    const double n = norm2(d);
    mono = mono && n < prev;
    prev = n;
  }

  // Neumann series against the direct solve
  const Profile& tanh_p = profile_by_name("tanh");
  const ConductanceField a = sample_conductance(TorusGrid(3, 12), tanh_p, 0.05, 9);
  const Eigen::VectorXd eta = vec3(1, 1, 0);
  const CorrectorSolution s = solve_corrector(a, eta, 0.0, 1e-13);
  EdgeField G = grad(s.phi);
  for (int i = 0; i < 3; ++i)
    for (std::size_t x = 0; x < a.grid.sites(); ++x) G.at(x, i) += eta[i];
  bool neumann_ok = true;
  double worst_ratio = 0.0;
  for (int K : {1, 3, 6}) {
    const auto X = neumann_terms(K, eta, a);
    std::vector<double> diff(G.v.size(), 0.0);
    for (const auto& t : X)
      for (std::size_t e = 0; e < diff.size(); ++e) diff[e] += t.v[e];
    for (std::size_t e = 0; e < diff.size(); ++e) diff[e] -= G.v[e];
    const double ratio = norm2(diff) / neumann_tail_bound(K, eta, a);
    worst_ratio = std::max(worst_ratio, ratio);
    neumann_ok = neumann_ok && ratio <= 1.0;
  }

  // energy identity: <grad phi, a (grad phi + eta)> = 0
  double energy = 0.0, scale = 0.0;
  {
    const EdgeField gp = grad(s.phi);
    for (std::size_t e = 0; e < gp.v.size(); ++e) {
      energy += gp.v[e] * a.a[e] * G.v[e];
      scale += std::abs(gp.v[e] * a.a[e] * G.v[e]);
    }
  }
  const double energy_rel = std::abs(energy) / scale;

  // homogenized matrix
  const double tau = 0.3;
  std::vector<HomogenizationSample> hs(12);
  bool bounds = true;
  for (std::size_t n = 0; n < hs.size(); ++n) {
    hs[n].a = sample_conductance(TorusGrid(3, 8), tanh_p, tau, 21, n);
    for (int i = 0; i < 3; ++i) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(3);
      e[i] = 1.0;
      hs[n].phi.push_back(solve_corrector(hs[n].a, e, 0.0, 1e-12));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(homogenized_sample(hs[n].a, hs[n].phi));
    bounds = bounds && es.eigenvalues().minCoeff() >= 1.0 - tau && es.eigenvalues().maxCoeff() <= 1.0 + tau;
  }
  const MatrixEstimate m = homogenized_estimate(hs);
  bool iso = true;
  double worst_z = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double z;
      if (i != j) {
        z = std::abs(m.value(i, j)) / m.std_error(i, j);
      } else {
        const int k = (i + 1) % 3;
        z = std::abs(m.value(i, i) - m.value(k, k)) / std::hypot(m.std_error(i, i), m.std_error(k, k));
      }
      worst_z = std::max(worst_z, z);
      iso = iso && z <= 3.0;
    }
  const bool ok = proj_ok && mono && neumann_ok && energy_rel <= 1e-10 && bounds && iso;
  return {ok, fmt("projection (i) %.2g (ii) %.2g (iii) %.2g, contraction %s; lambda->0 monotone %s; Neumann "
                  "|sum - direct| / tail bound max %.3g; energy identity %.2g; abar in [1-tau,1+tau] %s, "
                  "isotropy max %.2f sigma",
                  e_mean, e_curl, e_div, contract ? "yes" : "no", mono ? "yes" : "no", worst_ratio, energy_rel,
                  bounds ? "yes" : "no", worst_z)};
}

SiteField mean_zero_random(const TorusGrid& g, std::mt19937_64& rng) {
  std::normal_distribution<double> N;
  SiteField f(g);
  for (auto& v : f.v) v = N(rng);
  const double m = mean(f.v);
  for (auto& v : f.v) v -= m;
  return f;
}

SiteField smooth_bump(const TorusGrid& g, double r) {
  SiteField f(g);
  const double h = 1.0 / g.L();
  for (std::size_t s = 0; s < g.sites(); ++s) {
    const auto x = g.coords(s);
    double q = 0.0;
    for (int i = 0; i < g.d(); ++i) q += std::pow(x[i] * h - 0.5, 2);
    f[s] = q < r * r ? std::pow(1.0 - q / (r * r), 4) : 0.0;
  }
  return f;
}

// 10. generalized GFF sampler
Verdict criterion10() {
  std::mt19937_64 rng(1010);
  GffSpec spec;
  spec.grid = TorusGrid(3, 6);
  spec.abar = random_spd(rng, 0.5, 2.0);
  spec.Q = random_spd(rng, 0.5, 2.0);
  spec.seed = 1011;
  const int n = 10000;
  std::vector<SiteField> fs;
  for (int t = 0; t < 20; ++t) fs.push_back(mean_zero_random(spec.grid, rng));
  const SiteMask A = half_space_mask(spec.grid, 2);
  std::vector<std::vector<double>> val(20, std::vector<double>(n)), in(10, std::vector<double>(n)),
      out(10, std::vector<double>(n));
  double additivity = 0.0;
  for (int s = 0; s < n; ++s) {
    const RestrictedSample r = sample_gff_restricted(spec, A, s);
    for (int t = 0; t < 20; ++t) val[t][s] = field_functional(r.full.phi, fs[t]);
    for (int p = 0; p < 10; ++p) {
      in[p][s] = field_functional(r.inside.phi, fs[2 * p]);
      out[p][s] = field_functional(r.outside.phi, fs[2 * p + 1]);
    }
    for (std::size_t x = 0; x < r.full.phi.size(); ++x)
      additivity = std::max(additivity, std::abs(r.inside.phi[x] + r.outside.phi[x] - r.full.phi[x]));
  }
  int cov_in = 0, uncorr = 0;
  double worst_cov = 0.0, worst_corr = 0.0;
  for (int p = 0; p < 10; ++p) {
    double m = 0.0, m2 = 0.0;
    for (int s = 0; s < n; ++s) {
      const double v = val[2 * p][s] * val[2 * p + 1][s];
      m += v;
      m2 += v * v;
    }
    m /= n;
    const double se = std::sqrt((m2 / n - m * m) / (n - 1));
    const double exact = covariance_pair(fs[2 * p], fs[2 * p + 1], spec.abar, spec.Q).value;
    const double z = std::abs(m - exact) / se;
    worst_cov = std::max(worst_cov, z);
    if (z <= 3.0) ++cov_in;
    double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
    for (int s = 0; s < n; ++s) {
      sx += in[p][s];
      sy += out[p][s];
      sxy += in[p][s] * out[p][s];
      sxx += in[p][s] * in[p][s];
      syy += out[p][s] * out[p][s];
    }
    const double cxy = sxy / n - sx * sy / (1.0 * n * n);
    const double corr = cxy / std::sqrt((sxx / n - sx * sx / (1.0 * n * n)) * (syy / n - sy * sy / (1.0 * n * n)));
    const double zc = std::abs(corr) * std::sqrt(static_cast<double>(n));
    worst_corr = std::max(worst_corr, zc);
    if (zc <= 3.0) ++uncorr;
  }
  // harmonicity on a larger grid
  GffSpec big = spec;
  big.grid = TorusGrid(3, 12);
  const SiteMask B = half_space_mask(big.grid, 1);
  const double harm = harmonicity_check(sample_gff_restricted(big, B, 3).inside.phi, big.abar, B);
  // regularity ratio under mesh doubling
  std::vector<double> reg;
  for (int L : {16, 32, 64}) reg.push_back(regularity_bound_check(smooth_bump(TorusGrid(3, L), 0.2), spec.abar, spec.Q));
  const double reg_spread = std::max({reg[0], reg[1], reg[2]}) / std::min({reg[0], reg[1], reg[2]});
  const bool ok = cov_in == 10 && additivity <= 1e-12 && uncorr == 10 && harm <= 1e-10 && reg_spread <= 1.1;
  return {ok, fmt("covariance within 3 sigma %d/10 (max %.2f sigma); additivity %.2g; cross-correlation within "
                  "3 sigma %d/10 (max %.2f); harmonicity %.2g; regularity ratio L=16,32,64: %.4f %.4f %.4f",
                  cov_in, worst_cov, additivity, uncorr, worst_corr, harm, reg[0], reg[1], reg[2])};
}

// 11. one-dimensional counterexample
Verdict criterion11() {
  const Counterexample1d c = counterexample_1d(BumpFunction{{-0.6}, 0.5}, BumpFunction{{0.7}, 0.6});
  const Counterexample1d t = counterexample_1d(BumpFunction{{-0.5}, 0.5}, BumpFunction{{0.5}, 0.5});
  const bool ok = std::abs(c.covariance) <= 1e-10 && c.kernel_pairing > 0.0 && std::abs(t.covariance) <= 1e-10 &&
                  t.kernel_pairing > 0.0;
  return {ok, fmt("covariance %.2g (touching at 0: %.2g), exp-kernel pairing %.6g (touching: %.6g)", c.covariance,
                  t.covariance, c.kernel_pairing, t.kernel_pairing)};
}

// 12. corrector two-point covariance against the lattice generalized GFF
Verdict criterion12() {
  const int L = 32, n_env = 16;
  const double tau = 0.05;
  const TorusGrid g(3, L);
  const Profile& p = profile_by_name("tanh");
  const Eigen::VectorXd xi = vec3(1, 0, 0);
  const std::vector<std::vector<long>> zs{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {2, 0, 0}, {0, 2, 0}, {1, 1, 0}};
  std::vector<std::vector<double>> emp(zs.size());
  std::vector<HomogenizationSample> hs;
  for (int env = 0; env < n_env; ++env) {
    const ConductanceField a = sample_conductance(g, p, tau, 1212, env);
    const CorrectorSolution s = solve_corrector(a, xi, 0.0, 1e-12);
    for (std::size_t k = 0; k < zs.size(); ++k) {
      double c = 0.0;
      for (std::size_t x = 0; x < g.sites(); ++x) {
        auto y = g.coords(x);
        for (int i = 0; i < 3; ++i) y[i] += zs[k][i];
        c += s.phi[x] * s.phi[g.site(y)];
      }
      emp[k].push_back(c / g.sites());
    }
  }
  // leading-order noise covariance c0(xi) tau^2, abar = I + O(tau^2)
  const Eigen::MatrixXd Q = tau * tau * c0("tanh", xi);
  const Eigen::MatrixXd Ab = Eigen::MatrixXd::Identity(3, 3);
  std::vector<double> pred(zs.size(), 0.0), mean_emp(zs.size()), se(zs.size());
  for (std::size_t m = 1; m < g.sites(); ++m) {
    const auto k = g.coords(m);
    std::complex<double> psi[3];
    for (int i = 0; i < 3; ++i) psi[i] = std::polar(1.0, 2.0 * pi * k[i] / L) - 1.0;
    double sq = 0.0, sa = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        sq += (std::conj(psi[i]) * Q(i, j) * psi[j]).real();
        sa += (std::conj(psi[i]) * Ab(i, j) * psi[j]).real();
      }
    for (std::size_t z = 0; z < zs.size(); ++z) {
      double ph = 0.0;
      for (int i = 0; i < 3; ++i) ph += 2.0 * pi * k[i] * zs[z][i] / L;
      pred[z] += std::cos(ph) * sq / (sa * sa) / g.sites();
    }
  }
  int signs = 0;
  double mp = 0, me = 0;
  for (std::size_t z = 0; z < zs.size(); ++z) {
    double s = 0, s2 = 0;
    for (double v : emp[z]) {
      s += v;
      s2 += v * v;
    }
    mean_emp[z] = s / n_env;
    se[z] = std::sqrt((s2 / n_env - mean_emp[z] * mean_emp[z]) / (n_env - 1));
    if ((mean_emp[z] > 0) == (pred[z] > 0)) ++signs;
    mp += pred[z] / zs.size();
    me += mean_emp[z] / zs.size();
  }
  double cov = 0, vp = 0, ve = 0;
  for (std::size_t z = 0; z < zs.size(); ++z) {
    cov += (pred[z] - mp) * (mean_emp[z] - me);
    vp += (pred[z] - mp) * (pred[z] - mp);
    ve += (mean_emp[z] - me) * (mean_emp[z] - me);
  }
  const double corr = cov / std::sqrt(vp * ve);
  std::ostringstream os;
  for (std::size_t z = 0; z < zs.size(); ++z) os << fmt("%.3g/%.3g ", mean_emp[z], pred[z]);
  const bool ok = signs == static_cast<int>(zs.size()) && corr >= 0.9;
  return {ok, fmt("L=32, tau=0.05, %d envs; empirical/predicted at 6 displacements: %ssign agreement %d/6, "
                  "correlation %.4f",
                  n_env, os.str().c_str(), signs, corr)};
}

}  // namespace

int main() {
  const std::vector<std::function<Verdict()>> criteria{criterion1, criterion2, criterion3,  criterion4,
                                                       criterion5, criterion6, criterion7,  criterion8,
                                                       criterion9, criterion10, criterion11, criterion12};
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[k]();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d: %s [%.1f s] %s%s\n", id, v.pass ? "PASS" : "FAIL", dt,
                id == 12 ? "(non-gating) " : "", v.detail.c_str());
    std::fflush(stdout);
    if (!v.pass && id != 12) ++failed;
  }
  std::printf("%s: %d gating criteria failed\n", failed ? "FAIL" : "PASS", failed);
  return failed ? 1 : 0;
}
