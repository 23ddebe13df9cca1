#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "hgff/lattice.hpp"

namespace hgff::test {

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> N;
  std::vector<double> v(n);
  for (auto& x : v) x = N(rng);
  return v;
}

inline SiteField random_site(const TorusGrid& g, std::mt19937_64& rng) {
  SiteField f(g);
  f.v = random_vector(g.sites(), rng);
  return f;
}

inline EdgeField random_edge(const TorusGrid& g, std::mt19937_64& rng) {
  EdgeField F(g);
  F.v = random_vector(g.edges(), rng);
  return F;
}

inline ConductanceField random_conductance(const TorusGrid& g, double tau, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  ConductanceField a;
  a.grid = g;
  a.tau = tau;
  a.zeta.assign(g.edges(), 0.0);
  a.a.resize(g.edges());
  for (auto& x : a.a) x = 1.0 + tau * U(rng);
  return a;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double l2(const std::vector<double>& a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

inline Moments moments(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= v.size();
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / (v.size() - 1) / v.size())};
}

}  // namespace hgff::test
