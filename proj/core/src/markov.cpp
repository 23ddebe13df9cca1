#include "hgff/markov.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include "hgff/errors.hpp"
#include "hgff/quadrature.hpp"

namespace hgff {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_spd(const Eigen::MatrixXd& M, int d, const char* name) {
  if (M.rows() != d || M.cols() != d) throw DimensionError(std::string(name) + " must be d x d");
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, M.cwiseAbs().maxCoeff()))
    throw DomainError(std::string(name) + " is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  if (!(es.eigenvalues().minCoeff() > 0.0)) throw EllipticityError(std::string(name) + " is not positive definite");
}

Eigen::MatrixXd inv_sqrtm(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

Eigen::Vector3d to3(const std::vector<double>& c) { return Eigen::Vector3d(c[0], c[1], c[2]); }

// unit vectors completing n to a right-handed frame
void frame(const Eigen::Vector3d& n, Eigen::Vector3d& e1, Eigen::Vector3d& e2) {
  Eigen::Vector3d t = std::abs(n[0]) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  e1 = (t - t.dot(n) * n).normalized();
  e2 = n.cross(e1);
}

// j_0 .. j_lmax at x
void sph_bessel_all(int lmax, double x, std::vector<double>& out) {
  out.assign(static_cast<std::size_t>(lmax + 1), 0.0);
  if (x < 1e-6) {
    double t = 1.0;
    for (int l = 0; l <= lmax; ++l) {
      out[l] = t;
      t *= x / (2 * l + 3);
      if (t == 0.0) break;
    }
    return;
  }
  const double j0 = std::sin(x) / x;
  if (x > lmax) {
    out[0] = j0;
    if (lmax >= 1) out[1] = std::sin(x) / (x * x) - std::cos(x) / x;
    for (int l = 1; l < lmax; ++l) out[l + 1] = (2 * l + 1) / x * out[l] - out[l - 1];
    return;
  }
  // Miller's downward recurrence, normalized by j_0 or j_1
  const int start = lmax + 20 + static_cast<int>(x);
  double tp = 0.0, t = 1e-300;
  for (int l = start; l > 0; --l) {
    const double tm = (2 * l + 1) / x * t - tp;
    tp = t;
    t = tm;
    if (l - 1 <= lmax) out[l - 1] = t;
    if (std::abs(t) > 1e250) {
      t *= 1e-250;
      tp *= 1e-250;
      for (int k = l - 1; k <= lmax; ++k) out[k] *= 1e-250;
    }
  }
  const double j1 = std::sin(x) / (x * x) - std::cos(x) / x;
  const double s = std::abs(j0) > std::abs(j1) || lmax == 0 ? j0 / out[0] : j1 / out[1];
  for (double& v : out) v *= s;
}

void legendre_all(int lmax, double u, std::vector<double>& P) {
  P.assign(static_cast<std::size_t>(lmax + 1), 0.0);
  P[0] = 1.0;
  if (lmax >= 1) P[1] = u;
  for (int l = 1; l < lmax; ++l) P[l + 1] = ((2 * l + 1) * u * P[l] - l * P[l - 1]) / (l + 1);
}

struct FourierLevel {
  int legendre_nodes;
  int phi_nodes;
  double panel_fraction;  // panel width as a fraction of pi / (D + r1 + r2)
  int panel_nodes;
  double kr_max;          // k_max * min radius
};

struct FourierValue {
  double value;
  double scale;
};

FourierValue fourier_once(const BumpFunction& f1, const BumpFunction& f2, const Eigen::MatrixXd& abar,
                          const Eigen::MatrixXd& Q, const FourierLevel& lev) {
  const Eigen::Vector3d delta = to3(f2.center) - to3(f1.center);
  const double D = delta.norm();
  const Eigen::Vector3d n = D > 0.0 ? Eigen::Vector3d(delta / D) : Eigen::Vector3d::UnitZ();
  Eigen::Vector3d e1, e2;
  frame(n, e1, e2);
  auto m = [&](const Eigen::Vector3d& w) {
    const double a = w.dot(abar * w);
    return a * a / w.dot(Q * w);
  };

  // Legendre coefficients of M(u) = int m(omega(u, phi)) dphi, even orders only
  const int lmax = D > 0.0 ? 2 * ((lev.legendre_nodes - 1) / 2) : 0;
  const Rule ru = gauss_legendre(lev.legendre_nodes);
  std::vector<double> Ml(static_cast<std::size_t>(lmax + 1), 0.0), P;
  double mmax = 0.0;
  for (std::size_t q = 0; q < ru.x.size(); ++q) {
    const double u = ru.x[q], s = std::sqrt(1.0 - u * u);
    double M = 0.0;
    for (int p = 0; p < lev.phi_nodes; ++p) {
      const double ph = 2.0 * kPi * p / lev.phi_nodes;
      const double v = m(u * n + s * (std::cos(ph) * e1 + std::sin(ph) * e2));
      mmax = std::max(mmax, v);
      M += v;
    }
    M *= 2.0 * kPi / lev.phi_nodes;
    legendre_all(lmax, u, P);
    for (int l = 0; l <= lmax; l += 2) Ml[l] += 0.5 * (2 * l + 1) * ru.w[q] * M * P[l];
  }
  int lcut = 0;
  for (int l = 0; l <= lmax; l += 2)
    if (std::abs(Ml[l]) > 1e-16 * std::abs(Ml[0])) lcut = l;

  // radial integrals I_l = int k^4 F1 F2 j_l(k D) dk
  const double r1 = f1.radius, r2 = f2.radius;
  const double kmax = lev.kr_max / std::min(r1, r2);
  const double width = lev.panel_fraction * kPi / (D + r1 + r2);
  const int panels = static_cast<int>(std::ceil(kmax / width));
  const Rule rk = gauss_legendre(lev.panel_nodes);
  std::vector<double> I(static_cast<std::size_t>(lcut + 1), 0.0), J;
  double absint = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = p * width, b = (p + 1) * width;
    for (std::size_t q = 0; q < rk.x.size(); ++q) {
      const double k = 0.5 * (a + b) + 0.5 * (b - a) * rk.x[q];
      const double w = 0.5 * (b - a) * rk.w[q];
      const double g = k * k * k * k * f1.fourier_radial(k) * f2.fourier_radial(k);
      absint += w * std::abs(g);
      sph_bessel_all(lcut, k * D, J);
      for (int l = 0; l <= lcut; l += 2) I[l] += w * g * J[l];
    }
  }
  const double pref = 1.0 / std::pow(2.0 * kPi, 3);
  double v = 0.0;
  for (int l = 0; l <= lcut; l += 2) v += Ml[l] * 2.0 * ((l / 2) % 2 ? -1.0 : 1.0) * I[l];
  return {pref * v, pref * 4.0 * kPi * mmax * absint};
}

// H(rho) = int b1(x) b2(x - rho e) dx for centered radial bumps
double overlap_profile(double r1, double r2, double rho) {
  const double zlo = std::max(-r1, rho - r2), zhi = std::min(r1, rho + r2);
  if (zhi <= zlo) return 0.0;
  std::vector<double> breaks{zlo};
  if (rho > 1e-14) {
    const double zs = (rho * rho + r1 * r1 - r2 * r2) / (2.0 * rho);
    if (zs > zlo && zs < zhi) breaks.push_back(zs);
  }
  breaks.push_back(zhi);
  const Rule rz = gauss_legendre(14);
  const Rule rt = gauss_legendre(6);
  double total = 0.0;
  for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
    const double a = breaks[b], c = breaks[b + 1];
    for (std::size_t q = 0; q < rz.x.size(); ++q) {
      const double z = 0.5 * (a + c) + 0.5 * (c - a) * rz.x[q];
      const double S2 = std::max(0.0, std::min(r1 * r1 - z * z, r2 * r2 - (z - rho) * (z - rho)));
      double inner = 0.0;
      for (std::size_t p = 0; p < rt.x.size(); ++p) {
        const double t = 0.5 * S2 * (1.0 + rt.x[p]);
        const double u1 = 1.0 - (t + z * z) / (r1 * r1);
        const double u2 = 1.0 - (t + (z - rho) * (z - rho)) / (r2 * r2);
        inner += 0.5 * S2 * rt.w[p] * std::pow(u1, 4) * std::pow(u2, 4);
      }
      total += 0.5 * (c - a) * rz.w[q] * 0.5 * inner;  // s ds = dt / 2
    }
  }
  return 2.0 * kPi * total;
}

PairingResult realspace_generic(const BumpFunction& g1, const BumpFunction& g2,
                                const std::function<double(const Eigen::Vector3d&)>& k) {
  if (g1.dim() != 3 || g2.dim() != 3) throw UnsupportedError("real-space pairing is implemented for d = 3");
  const Eigen::Vector3d delta = to3(g1.center) - to3(g2.center);
  const double D = delta.norm();
  const double r1 = g1.radius, r2 = g2.radius;
  if (D <= (r1 + r2) * (1.0 + 1e-12)) throw DomainError("bump supports overlap or touch");
  const Eigen::Vector3d n = delta / D;
  Eigen::Vector3d e1, e2;
  frame(n, e1, e2);
  std::vector<double> breaks{0.0};
  if (std::abs(r1 - r2) > 1e-14) breaks.push_back(std::abs(r1 - r2));
  breaks.push_back(r1 + r2);

  auto level = [&](int nr, int nt, int np, double& scale) {
    const Rule rr = gauss_legendre(nr), rt = gauss_legendre(nt);
    double v = 0.0;
    scale = 0.0;
    for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
      const double a = breaks[b], c = breaks[b + 1];
      for (std::size_t q = 0; q < rr.x.size(); ++q) {
        const double rho = 0.5 * (a + c) + 0.5 * (c - a) * rr.x[q];
        const double H = overlap_profile(r1, r2, rho);
        double ang = 0.0, aabs = 0.0;
        for (std::size_t t = 0; t < rt.x.size(); ++t) {
          const double u = rt.x[t], s = std::sqrt(1.0 - u * u);
          for (int p = 0; p < np; ++p) {
            const double ph = 2.0 * kPi * p / np;
            const double kv = k(delta + rho * (u * n + s * (std::cos(ph) * e1 + std::sin(ph) * e2)));
            ang += rt.w[t] * kv;
            aabs += rt.w[t] * std::abs(kv);
          }
        }
        const double w = 0.5 * (c - a) * rr.w[q] * rho * rho * H * 2.0 * kPi / np;
        v += w * ang;
        scale += std::abs(w) * aabs;
      }
    }
    return v;
  };

  PairingResult r;
  r.method = "realspace";
  double scale = 0.0;
  int nr = 16, nt = 24, np = 48;
  double prev = level(nr, nt, np, scale);
  for (int it = 0; it < 5; ++it) {
    nr = nr * 3 / 2;
    nt = nt * 3 / 2;
    np = np * 3 / 2;
    const double cur = level(nr, nt, np, scale);
    r.value = cur;
    r.error = std::abs(cur - prev);
    r.scale = scale;
    if (r.error <= 1e-12 * scale) return r;
    prev = cur;
  }
  if (r.error > 1e-6 * scale) throw InconclusiveError("real-space pairing quadrature did not converge", r.value, prev);
  return r;
}

}  // namespace

double bump_fourier_profile(double k, int d) {
  const double mu = 0.5 * d + BumpFunction::power;
  const double pre = std::pow(2.0 * kPi, 0.5 * d) * std::pow(2.0, BumpFunction::power) *
                     std::tgamma(BumpFunction::power + 1.0);
  k = std::abs(k);
  if (k < 2.0) {
    // J_mu(k) / k^mu as a power series
    double term = 1.0 / (std::pow(2.0, mu) * std::tgamma(mu + 1.0));
    double s = term;
    const double q = 0.25 * k * k;
    for (int m = 1; m < 40; ++m) {
      term *= -q / (m * (m + mu));
      s += term;
      if (std::abs(term) < 1e-18 * std::abs(s)) break;
    }
    return pre * s;
  }
  return pre * std::cyl_bessel_j(mu, k) / std::pow(k, mu);
}

double BumpFunction::operator()(const std::vector<double>& x) const {
  if (x.size() != center.size()) throw DimensionError("point dimension mismatch");
  double u2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) u2 += (x[i] - center[i]) * (x[i] - center[i]);
  u2 /= radius * radius;
  return u2 >= 1.0 ? 0.0 : std::pow(1.0 - u2, power);
}

double BumpFunction::derivative(double x) const {
  if (dim() != 1) throw DimensionError("derivative is defined for 1-d bumps");
  const double u = (x - center[0]) / radius;
  if (std::abs(u) >= 1.0) return 0.0;
  return -2.0 * power * u * std::pow(1.0 - u * u, power - 1) / radius;
}

double BumpFunction::fourier_radial(double k) const {
  return std::pow(radius, dim()) * bump_fourier_profile(radius * k, dim());
}

double BumpFunction::l2_norm2() const {
  const int d = dim();
  const double area = 2.0 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d);
  const Rule r = gauss_legendre(20, 0.0, 1.0);
  double s = 0.0;
  for (std::size_t q = 0; q < r.x.size(); ++q)
    s += r.w[q] * std::pow(1.0 - r.x[q] * r.x[q], 2 * power) * std::pow(r.x[q], d - 1);
  return std::pow(radius, d) * area * s;
}

double kernel_K(const Eigen::VectorXd& x, const Eigen::MatrixXd& A, int d) {
  if (x.size() != d || A.rows() != d || A.cols() != d) throw DimensionError("kernel argument size != d");
  const double r2 = x.squaredNorm();
  if (r2 == 0.0) throw DomainError("the kernel is singular at x = 0");
  // K is unchanged by A -> A - alpha I; shifting by A(0,0) makes multiples of I vanish exactly
  const double r = std::sqrt(r2);
  const Eigen::VectorXd u = x / r;
  const Eigen::MatrixXd D = A - A(0, 0) * Eigen::MatrixXd::Identity(d, d);
  const double t = D.trace();
  const double t2 = (D * D).trace();
  const Eigen::VectorXd Du = D * u;
  const double p = u.dot(Du);
  const double q = Du.squaredNorm();
  const double dd = d;
  const double bracket =
      dd * ((dd + 2) * (4.0 * q + 2.0 * p * t - (dd + 4) * p * p) - t * t - 2.0 * t2);
  return bracket / std::pow(r, d + 2);
}

double kernel_constant(int d) {
  if (d < 3) throw UnsupportedError("kernel constant is derived for d >= 3");
  return -std::tgamma(0.5 * d) / (2.0 * std::pow(kPi, 0.5 * d));
}

PairingResult pairing_fourier(const BumpFunction& f1, const BumpFunction& f2, const Eigen::MatrixXd& abar,
                              const Eigen::MatrixXd& Q) {
  if (f1.dim() != 3 || f2.dim() != 3) throw UnsupportedError("Fourier pairing is implemented for d = 3");
  check_spd(abar, 3, "abar");
  check_spd(Q, 3, "Q");
  const FourierLevel coarse{64, 64, 1.0, 12, 100.0};
  const FourierLevel fine{128, 128, 0.5, 16, 160.0};
  const FourierValue a = fourier_once(f1, f2, abar, Q, coarse);
  const FourierValue b = fourier_once(f1, f2, abar, Q, fine);
  PairingResult r;
  r.method = "fourier";
  r.value = b.value;
  r.error = std::abs(b.value - a.value);
  r.scale = b.scale;
  if (r.error > 1e-6 * r.scale) throw InconclusiveError("Fourier pairing quadrature did not converge", b.value, a.value);
  return r;
}

PairingResult pairing_realspace(const BumpFunction& g1, const BumpFunction& g2, const Eigen::MatrixXd& A) {
  check_spd(A, 3, "A");
  const double c = kernel_constant(3);
  return realspace_generic(g1, g2, [&](const Eigen::Vector3d& z) { return c * kernel_K(z, A, 3); });
}

PairingResult pairing_realspace(const BumpFunction& g1, const BumpFunction& g2, const Eigen::MatrixXd& abar,
                                const Eigen::MatrixXd& Q) {
  check_spd(abar, 3, "abar");
  check_spd(Q, 3, "Q");
  const Eigen::MatrixXd S = inv_sqrtm(Q);
  const Eigen::MatrixXd A = S * abar * S;
  const double c = kernel_constant(3) / std::sqrt(Q.determinant());
  return realspace_generic(g1, g2, [&](const Eigen::Vector3d& z) {
    const Eigen::VectorXd y = S * z;
    return c * kernel_K(y, A, 3);
  });
}

Region Region::half_space(Eigen::VectorXd n, double offset) {
  Region r;
  r.kind = Kind::half_space;
  r.normal = std::move(n);
  r.offset = offset;
  return r;
}

Region Region::ball(Eigen::VectorXd c, double rad) {
  Region r;
  r.kind = Kind::ball;
  r.center = std::move(c);
  r.radius = rad;
  return r;
}

namespace {

BumpFunction make_bump(const Eigen::Vector3d& c, double r) { return BumpFunction{{c[0], c[1], c[2]}, r}; }

}  // namespace

std::vector<std::pair<BumpFunction, BumpFunction>> witness_candidates(const Region& U) {
  std::vector<std::pair<BumpFunction, BumpFunction>> out;
  if (U.kind == Region::Kind::half_space) {
    if (U.normal.size() != 3 || U.normal.norm() == 0.0) throw DimensionError("half-space normal must be a nonzero 3-vector");
    const Eigen::Vector3d n = Eigen::Vector3d(U.normal).normalized();
    const Eigen::Vector3d p0 = U.offset / U.normal.norm() * n;
    Eigen::Vector3d t1, t2;
    frame(n, t1, t2);
    const std::vector<Eigen::Vector3d> lateral{Eigen::Vector3d::Zero(), t1, t2, (t1 + t2).normalized()};
    for (const auto& lat : lateral)
      for (double r : {0.25, 0.5})
        for (double k : {1.5, 2.0, 3.0}) {
          const double dist = k * r;
          out.emplace_back(make_bump(p0 - dist * n, r), make_bump(p0 + dist * n + 2.0 * r * lat, r));
        }
  } else {
    if (U.center.size() != 3 || !(U.radius > 0.0)) throw DimensionError("ball region must be in d = 3 with r > 0");
    const Eigen::Vector3d c = U.center;
    const std::vector<Eigen::Vector3d> dirs{Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(),
                                            Eigen::Vector3d::UnitZ(), Eigen::Vector3d(1, 1, 1).normalized()};
    for (const auto& e : dirs)
      for (double f : {0.25, 0.5})
        for (double k : {1.5, 2.0, 3.0}) {
          const double r = f * U.radius;
          out.emplace_back(make_bump(c, r), make_bump(c + (U.radius + k * r) * e, r));
        }
  }
  return out;
}

WitnessResult nonlocality_witness(const Eigen::MatrixXd& abar, const Eigen::MatrixXd& Q, const Region& U, double tol) {
  check_spd(abar, 3, "abar");
  check_spd(Q, 3, "Q");
  WitnessResult w;
  if ((abar / abar.trace() - Q / Q.trace()).norm() < tol) {
    w.proportional = true;
    return w;
  }
  auto cands = witness_candidates(U);
  double best = -1.0;
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    ++w.candidates;
    PairingResult p = pairing_fourier(cands[i].first, cands[i].second, abar, Q);
    if (std::abs(p.value) > 10.0 * p.error && std::abs(p.value) > 1e-9 * p.scale) {
      w.f1 = cands[i].first;
      w.f2 = cands[i].second;
      w.pairing = p;
      return w;
    }
    if (std::abs(p.value) / p.scale > best) {
      best = std::abs(p.value) / p.scale;
      best_i = i;
    }
  }

  // Nelder-Mead on a lateral shift of the outer bump
  const BumpFunction f1 = cands[best_i].first;
  const BumpFunction base = cands[best_i].second;
  Eigen::Vector3d n = U.kind == Region::Kind::half_space ? Eigen::Vector3d(U.normal).normalized()
                                                         : Eigen::Vector3d(to3(base.center) - to3(f1.center)).normalized();
  Eigen::Vector3d t1, t2;
  frame(n, t1, t2);
  auto shifted = [&](const Eigen::Vector2d& s) {
    BumpFunction b = base;
    const Eigen::Vector3d c = to3(base.center) + base.radius * (s[0] * t1 + s[1] * t2);
    b.center = {c[0], c[1], c[2]};
    return b;
  };
  PairingResult last;
  auto objective = [&](const Eigen::Vector2d& s) {
    ++w.candidates;
    last = pairing_fourier(f1, shifted(s), abar, Q);
    return -std::abs(last.value) / last.scale;
  };
  std::vector<Eigen::Vector2d> x{Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)};
  std::vector<double> fx;
  for (const auto& p : x) fx.push_back(objective(p));
  for (int it = 0; it < 40; ++it) {
    std::vector<int> o{0, 1, 2};
    std::sort(o.begin(), o.end(), [&](int a, int b) { return fx[a] < fx[b]; });
    const Eigen::Vector2d c = 0.5 * (x[o[0]] + x[o[1]]);
    const Eigen::Vector2d xr = c + (c - x[o[2]]);
    const double fr = objective(xr);
    if (fr < fx[o[0]]) {
      const Eigen::Vector2d xe = c + 2.0 * (c - x[o[2]]);
      const double fe = objective(xe);
      if (fe < fr) {
        x[o[2]] = xe;
        fx[o[2]] = fe;
      } else {
        x[o[2]] = xr;
        fx[o[2]] = fr;
      }
    } else if (fr < fx[o[1]]) {
      x[o[2]] = xr;
      fx[o[2]] = fr;
    } else {
      const Eigen::Vector2d xc = c + 0.5 * (x[o[2]] - c);
      const double fc = objective(xc);
      if (fc < fx[o[2]]) {
        x[o[2]] = xc;
        fx[o[2]] = fc;
      } else {
        for (int k : {o[1], o[2]}) {
          x[k] = x[o[0]] + 0.5 * (x[k] - x[o[0]]);
          fx[k] = objective(x[k]);
        }
      }
    }
  }
  const int ib = static_cast<int>(std::min_element(fx.begin(), fx.end()) - fx.begin());
  const BumpFunction f2 = shifted(x[ib]);
  PairingResult p = pairing_fourier(f1, f2, abar, Q);
  if (std::abs(p.value) > 10.0 * p.error && std::abs(p.value) > 1e-9 * p.scale) {
    w.f1 = f1;
    w.f2 = f2;
    w.pairing = p;
    return w;
  }
  throw InconclusiveError("no non-locality witness found for a non-proportional pair", p.value, p.error);
}

DivisibilityResult quartic_divisibility(const Eigen::MatrixXd& A, double tol) {
  const int d = static_cast<int>(A.rows());
  if (A.cols() != d || d < 1) throw DimensionError("matrix must be square");
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()))
    throw DomainError("matrix is not symmetric");

  // monomials of degree 4 keyed by exponent vector
  std::map<std::vector<int>, int> index;
  auto key = [&](std::initializer_list<int> vars) {
    std::vector<int> e(static_cast<std::size_t>(d), 0);
    for (int v : vars) ++e[v];
    auto it = index.find(e);
    if (it != index.end()) return it->second;
    const int k = static_cast<int>(index.size());
    index.emplace(e, k);
    return k;
  };
  std::vector<std::pair<int, double>> lhs_terms;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) lhs_terms.emplace_back(key({i, j, k, l}), A(i, j) * A(k, l));
  std::vector<std::pair<int, int>> unknowns;
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) unknowns.emplace_back(a, b);
  std::vector<std::vector<std::pair<int, double>>> cols(unknowns.size());
  for (std::size_t u = 0; u < unknowns.size(); ++u) {
    const auto [a, b] = unknowns[u];
    for (int m = 0; m < d; ++m) cols[u].emplace_back(key({m, m, a, b}), a == b ? 1.0 : 2.0);
  }
  const int nm = static_cast<int>(index.size());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nm);
  for (const auto& [k, v] : lhs_terms) rhs[k] += v;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nm, static_cast<long>(unknowns.size()));
  for (std::size_t u = 0; u < unknowns.size(); ++u)
    for (const auto& [k, v] : cols[u]) M(k, static_cast<long>(u)) += v;
  const Eigen::VectorXd b = M.colPivHouseholderQr().solve(rhs);

  DivisibilityResult r;
  r.B = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t u = 0; u < unknowns.size(); ++u) {
    const auto [p, q] = unknowns[u];
    r.B(p, q) = r.B(q, p) = b[static_cast<long>(u)];
  }
  const double norm = std::max(rhs.cwiseAbs().maxCoeff(), 1e-300);
  r.residual = (M * b - rhs).cwiseAbs().maxCoeff() / norm;
  r.multiple_of_identity = r.residual < tol;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  const auto& ev = es.eigenvalues();
  r.eigen_spread = (ev.maxCoeff() - ev.minCoeff()) / std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  r.criteria_agree = r.multiple_of_identity == (r.eigen_spread < tol);
  if (r.multiple_of_identity) r.c = A.trace() / d;
  return r;
}

Counterexample1d counterexample_1d(const BumpFunction& f, const BumpFunction& g) {
  if (f.dim() != 1 || g.dim() != 1) throw DimensionError("counterexample bumps are 1-d");
  Counterexample1d out;
  const double fa = f.center[0] - f.radius, fb = f.center[0] + f.radius;
  const double ga = g.center[0] - g.radius, gb = g.center[0] + g.radius;
  const double lo = std::max(fa, ga), hi = std::min(fb, gb);
  if (hi > lo) {
    const Rule r = gauss_legendre(32, lo, hi);
    for (std::size_t q = 0; q < r.x.size(); ++q) {
      const double x = r.x[q];
      out.covariance += r.w[q] * (f({x}) * g({x}) + f.derivative(x) * g.derivative(x));
    }
  }
  const Rule rx = gauss_legendre(48, fa, fb);
  for (std::size_t q = 0; q < rx.x.size(); ++q) {
    const double x = rx.x[q];
    std::vector<double> br{ga};
    if (x > ga && x < gb) br.push_back(x);
    br.push_back(gb);
    double inner = 0.0;
    for (std::size_t b = 0; b + 1 < br.size(); ++b) {
      const Rule ry = gauss_legendre(48, br[b], br[b + 1]);
      for (std::size_t p = 0; p < ry.x.size(); ++p) inner += ry.w[p] * 0.5 * std::exp(-std::abs(x - ry.x[p])) * g({ry.x[p]});
    }
    out.kernel_pairing += rx.w[q] * f({x}) * inner;
  }
  return out;
}

}  // namespace hgff
