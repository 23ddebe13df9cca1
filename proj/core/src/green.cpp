#include "hgff/green.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "hgff/errors.hpp"
#include "hgff/quadrature.hpp"

namespace hgff {

namespace {

constexpr int kGradingLevels = 44;

// Nodes on [0, pi]: uniform panels narrow enough for cos(x theta) with |x| <= xmax,
// the first panel split geometrically towards the singular point theta = 0.
Rule axis_rule(long xmax, int p) {
  const int M = static_cast<int>(std::max<long>(8, xmax + 2));
  const double h = std::numbers::pi / M;
  std::vector<double> br{0.0};
  for (int m = kGradingLevels; m >= 1; --m) br.push_back(h * std::ldexp(1.0, -m));
  for (int k = 1; k <= M; ++k) br.push_back(h * k);
  br.back() = std::numbers::pi;
  return composite_legendre(br, p);
}

// closed-form theta_1 integral: (1/2pi) int cos(n t) / (2 + s - 2 cos t) dt
inline void radial_pair(double s, double& amp, double& r) {
  const double q = std::sqrt(s * (s + 4.0));
  amp = 1.0 / q;
  r = 2.0 / (2.0 + s + q);
}

void check_args(double lambda, int d) {
  if (d < 1) throw DimensionError("dimension must be >= 1");
  if (lambda < 0.0 || !std::isfinite(lambda)) throw DomainError("mass lambda must be >= 0");
  if (lambda == 0.0 && d <= 2) throw DivergenceError("G_0 diverges for d <= 2 (recurrent walk)");
}

double green_pointwise(const std::vector<long>& x, double lambda, int d, int p) {
  const long x1 = std::abs(x[0]);
  if (d == 1) {
    double amp, r;
    radial_pair(lambda, amp, r);
    return amp * std::pow(r, static_cast<double>(x1));
  }
  long xmax = 0;
  for (long c : x) xmax = std::max(xmax, std::abs(c));
  Rule ax = axis_rule(xmax, p);
  const std::size_t n = ax.x.size();
  const int m = d - 1;
  std::vector<double> s4(n);
  for (std::size_t a = 0; a < n; ++a) s4[a] = 4.0 * std::sin(0.5 * ax.x[a]) * std::sin(0.5 * ax.x[a]);
  // per-axis weighted cosines
  std::vector<std::vector<double>> wc(m, std::vector<double>(n));
  for (int i = 0; i < m; ++i)
    for (std::size_t a = 0; a < n; ++a)
      wc[i][a] = ax.w[a] * std::cos(static_cast<double>(std::abs(x[i + 1])) * ax.x[a]) / std::numbers::pi;
  std::vector<std::size_t> idx(m, 0);
  double total = 0.0;
  while (true) {
    double s = lambda, w = 1.0;
    for (int i = 0; i < m; ++i) {
      s += s4[idx[i]];
      w *= wc[i][idx[i]];
    }
    double amp, r;
    radial_pair(s, amp, r);
    total += w * amp * std::pow(r, static_cast<double>(x1));
    int i = m - 1;
    while (i >= 0 && ++idx[i] == n) idx[i--] = 0;
    if (i < 0) break;
  }
  return total;
}

// values on [0, R]^3 indexed (x1, x2, x3)
std::vector<double> table3(double lambda, int R, int p) {
  Rule ax = axis_rule(R, p);
  const int n = static_cast<int>(ax.x.size());
  Eigen::MatrixXd C(R + 1, n);
  for (int x = 0; x <= R; ++x)
    for (int a = 0; a < n; ++a) C(x, a) = ax.w[a] * std::cos(x * ax.x[a]) / std::numbers::pi;
  std::vector<double> s4(n);
  for (int a = 0; a < n; ++a) s4[a] = 4.0 * std::sin(0.5 * ax.x[a]) * std::sin(0.5 * ax.x[a]);
  Eigen::MatrixXd amp(n, n), r(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      double am, rr;
      radial_pair(lambda + s4[a] + s4[b], am, rr);
      amp(a, b) = am;
      r(a, b) = rr;
    }
  std::vector<double> out(static_cast<std::size_t>(R + 1) * (R + 1) * (R + 1));
  Eigen::MatrixXd g = amp;
  for (int x1 = 0; x1 <= R; ++x1) {
    Eigen::MatrixXd Gx = C * g * C.transpose();
    for (int x2 = 0; x2 <= R; ++x2)
      for (int x3 = 0; x3 <= R; ++x3)
        out[(static_cast<std::size_t>(x1) * (R + 1) + x2) * (R + 1) + x3] = Gx(x2, x3);
    g = g.cwiseProduct(r);
  }
  return out;
}

std::vector<double> table2(double lambda, int R, int p) {
  Rule ax = axis_rule(R, p);
  const std::size_t n = ax.x.size();
  std::vector<double> out(static_cast<std::size_t>(R + 1) * (R + 1), 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    double am, rr;
    radial_pair(lambda + 4.0 * std::sin(0.5 * ax.x[a]) * std::sin(0.5 * ax.x[a]), am, rr);
    double pw = am;
    for (int x1 = 0; x1 <= R; ++x1) {
      for (int x2 = 0; x2 <= R; ++x2)
        out[static_cast<std::size_t>(x1) * (R + 1) + x2] += ax.w[a] * std::cos(x2 * ax.x[a]) / std::numbers::pi * pw;
      pw *= rr;
    }
  }
  return out;
}

}  // namespace

GreenValue green_value(const std::vector<long>& x, double lambda, int d, int quad_order) {
  check_args(lambda, d);
  if (static_cast<int>(x.size()) != d) throw DimensionError("point dimension != d");
  if (quad_order < 2) throw DomainError("quadrature order must be >= 2");
  GreenValue out;
  out.value = green_pointwise(x, lambda, d, quad_order);
  if (d > 1) out.error = std::abs(green_pointwise(x, lambda, d, 2 * quad_order) - out.value);
  return out;
}

GreenTable::GreenTable(int d, double lambda, int R, int quad_order, bool estimate_error)
    : d_(d), R_(R), lambda_(lambda), order_(quad_order) {
  check_args(lambda, d);
  if (R < 1) throw DomainError("table radius must be >= 1");
  std::size_t side = 2 * static_cast<std::size_t>(R) + 1;
  std::size_t total = 1;
  for (int i = 0; i < d; ++i) total *= side;
  values_.assign(total, 0.0);

  auto canonical = [&](int p) -> std::vector<double> {
    if (d == 3) return table3(lambda, R, p);
    if (d == 2) return table2(lambda, R, p);
    std::size_t q = 1;
    for (int i = 0; i < d; ++i) q *= static_cast<std::size_t>(R + 1);
    std::vector<double> c(q);
    for (std::size_t t = 0; t < q; ++t) {
      std::vector<long> x(d);
      std::size_t u = t;
      for (int i = d - 1; i >= 0; --i) {
        x[i] = static_cast<long>(u % (R + 1));
        u /= (R + 1);
      }
      std::vector<long> key = x;
      std::sort(key.begin(), key.end());
      c[t] = (key == x) ? green_pointwise(x, lambda, d, p) : 0.0;
    }
    // fill permutations from the sorted representative
    for (std::size_t t = 0; t < q; ++t) {
      std::vector<long> x(d);
      std::size_t u = t;
      for (int i = d - 1; i >= 0; --i) {
        x[i] = static_cast<long>(u % (R + 1));
        u /= (R + 1);
      }
      std::sort(x.begin(), x.end());
      std::size_t src = 0;
      for (int i = 0; i < d; ++i) src = src * (R + 1) + static_cast<std::size_t>(x[i]);
      c[t] = c[src];
    }
    return c;
  };

  std::vector<double> base = canonical(quad_order);
  if (estimate_error && d > 1) {
    std::vector<double> fine = canonical(2 * quad_order);
    for (std::size_t t = 0; t < base.size(); ++t) error_ = std::max(error_, std::abs(fine[t] - base[t]));
  }
  for (std::size_t t = 0; t < total; ++t) {
    std::size_t u = t, src = 0, mul = 1;
    std::vector<long> ax(d);
    for (int i = d - 1; i >= 0; --i) {
      ax[i] = std::abs(static_cast<long>(u % side) - R);
      u /= side;
    }
    for (int i = d - 1; i >= 0; --i) {
      src += static_cast<std::size_t>(ax[i]) * mul;
      mul *= static_cast<std::size_t>(R + 1);
    }
    values_[t] = base[src];
  }
}

bool GreenTable::contains(const std::vector<long>& x) const {
  if (static_cast<int>(x.size()) != d_) return false;
  for (long c : x)
    if (std::abs(c) > R_) return false;
  return true;
}

std::size_t GreenTable::index(const std::vector<long>& x) const {
  if (!contains(x)) throw DomainError("point outside the cached Green table");
  std::size_t side = 2 * static_cast<std::size_t>(R_) + 1, t = 0;
  for (long c : x) t = t * side + static_cast<std::size_t>(c + R_);
  return t;
}

double GreenTable::operator()(const std::vector<long>& x) const { return values_[index(x)]; }

double GreenTable::equation_residual(const std::vector<long>& x) const {
  double acc = (lambda_ + 2.0 * d_) * (*this)(x);
  std::vector<long> y = x;
  for (int i = 0; i < d_; ++i) {
    y[i] = x[i] + 1;
    acc -= (*this)(y);
    y[i] = x[i] - 1;
    acc -= (*this)(y);
    y[i] = x[i];
  }
  bool origin = std::all_of(x.begin(), x.end(), [](long c) { return c == 0; });
  return acc - (origin ? 1.0 : 0.0);
}

namespace {
std::vector<long> plus(std::vector<long> x, int i, long s) {
  x[i] += s;
  return x;
}
std::vector<long> neg(std::vector<long> x) {
  for (auto& c : x) c = -c;
  return x;
}
}  // namespace

double grad_grad_green(const GreenTable& G, int i, int j, const std::vector<long>& x) {
  if (i < 0 || j < 0 || i >= G.d() || j >= G.d()) throw DomainError("direction out of range");
  // G(x + e_i - e_j) - G(x + e_i) - G(x - e_j) + G(x)
  auto xi = plus(x, i, 1);
  return G(plus(xi, j, -1)) - G(xi) - G(plus(x, j, -1)) + G(x);
}

double grad_grad_green(int i, int j, const std::vector<long>& x, double lambda, int d, int quad_order) {
  long r = 1;
  for (long c : x) r = std::max(r, std::abs(c) + 1);
  GreenTable G(d, lambda, static_cast<int>(r), quad_order, false);
  return grad_grad_green(G, i, j, x);
}

double hessian_kernel(const GreenTable& G, int i, int j, const std::vector<long>& y) {
  if (i < 0 || j < 0 || i >= G.d() || j >= G.d()) throw DomainError("direction out of range");
  // [G(e_j - y - e_i) - G(e_j - y)] - [G(-y - e_i) - G(-y)]
  auto my = neg(y);
  auto top = plus(my, j, 1);
  return (G(plus(top, i, -1)) - G(top)) - (G(plus(my, i, -1)) - G(my));
}

namespace {
template <class F>
void for_box(int d, int R, F&& f) {
  std::vector<long> y(d, -R);
  while (true) {
    f(y);
    int i = d - 1;
    while (i >= 0 && ++y[i] > R) y[i--] = -R;
    if (i < 0) break;
  }
}
}  // namespace

double hessian_row_sum(const GreenTable& G, int i, int j, int R) {
  if (R + 2 > G.radius()) throw DomainError("table radius too small for the requested box");
  double s = 0.0;
  for_box(G.d(), R, [&](const std::vector<long>& y) { s += hessian_kernel(G, i, j, y); });
  return s;
}

TailSum hessian_l2_sum(const GreenTable& G, int i, int j, int R) {
  if (R < 2) throw DomainError("hessian_l2_sum needs R >= 2");
  if (R + 2 > G.radius()) throw DomainError("table radius too small for the requested box");
  const int d = G.d();
  const int h = R / 2;
  TailSum out;
  out.radius = R;
  for_box(d, R, [&](const std::vector<long>& y) {
    double k = hessian_kernel(G, i, j, y);
    out.partial += k * k;
    long m = 0;
    for (long c : y) m = std::max(m, std::abs(c));
    if (m <= h) out.partial_half += k * k;
  });
  const double a = (out.partial - out.partial_half) / (std::pow(h, -d) - std::pow(R, -d));
  out.tail = a * std::pow(R, -d);
  out.total = out.partial + out.tail;
  return out;
}

TailSum hessian_l2_sum(int i, int j, double lambda, int R, int d, int quad_order) {
  if (d < 3) throw DomainError("hessian_l2_sum requires d >= 3");
  if (R < 2) throw DomainError("hessian_l2_sum needs R >= 2");
  GreenTable G(d, lambda, R + 2, quad_order, false);
  return hessian_l2_sum(G, i, j, R);
}

double triple_grad(const GreenTable& G, int i, int j, int k, const std::vector<long>& z) {
  // D-_i D+_j D-_k, expanded over the 8 shifts
  double acc = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) {
        std::vector<long> p = z;
        p[i] -= a;
        p[j] += b;
        p[k] -= c;
        double sign = ((a + b + c) % 2 == 0) ? -1.0 : 1.0;
        acc += sign * G(p);
      }
  return acc;
}

DecayReport triple_grad_decay_check(const std::vector<double>& lambdas, int R, int d, int quad_order) {
  if (d < 3) throw DomainError("triple_grad_decay_check requires d >= 3");
  if (lambdas.empty()) throw FitError("empty mass set");
  const int zmax = R;
  const int rmin = std::max(3, R / 4);
  if (zmax - rmin < 3) throw FitError("radius too small for a decay fit");
  // rays along a few lattice directions
  std::vector<std::vector<long>> dirs;
  {
    std::vector<std::vector<long>> base = {{1, 0, 0}, {1, 1, 0}, {1, 1, 1}, {2, 1, 0}, {2, 1, 1}};
    for (auto v : base) {
      v.resize(d, 0);
      dirs.push_back(v);
    }
  }
  DecayReport rep;
  rep.max_exponent = -1e300;
  for (double lam : lambdas) {
    GreenTable G(d, lam, zmax + 2, quad_order, false);
    DecayFit fit;
    fit.lambda = lam;
    std::vector<double> lx, ly;
    auto envelope = [&](const std::vector<long>& z) {
      double m = 0.0;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          for (int k = 0; k < d; ++k) m = std::max(m, std::abs(triple_grad(G, i, j, k, z)));
      return m;
    };
    for (const auto& v : dirs) {
      long vmax = *std::max_element(v.begin(), v.end());
      for (long t = 1; t * vmax <= zmax; ++t) {
        std::vector<long> z(d);
        double r2 = 0.0;
        for (int i = 0; i < d; ++i) {
          z[i] = t * v[i];
          r2 += static_cast<double>(z[i] * z[i]);
        }
        double r = std::sqrt(r2);
        double env = envelope(z);
        fit.constant = std::max(fit.constant, env * std::pow(r, d + 1));
        if (r >= rmin && env > 0.0) {
          lx.push_back(std::log(r));
          ly.push_back(std::log(env));
        }
      }
    }
    if (lx.size() < 3) throw FitError("insufficient sample points for a decay fit");
    double mx = 0, my = 0;
    for (std::size_t t = 0; t < lx.size(); ++t) {
      mx += lx[t];
      my += ly[t];
    }
    mx /= lx.size();
    my /= ly.size();
    double sxy = 0, sxx = 0;
    for (std::size_t t = 0; t < lx.size(); ++t) {
      sxy += (lx[t] - mx) * (ly[t] - my);
      sxx += (lx[t] - mx) * (lx[t] - mx);
    }
    fit.exponent = sxy / sxx;
    fit.points = static_cast<int>(lx.size());
    rep.max_exponent = std::max(rep.max_exponent, fit.exponent);
    rep.max_constant = std::max(rep.max_constant, fit.constant);
    rep.fits.push_back(fit);
  }
  const double c0 = rep.fits.front().constant;
  for (const auto& f : rep.fits) rep.constant_ratio = std::max(rep.constant_ratio, f.constant / c0);
  return rep;
}

}  // namespace hgff
