#include "hgff/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "hgff/errors.hpp"

namespace hgff {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

std::shared_ptr<const Spectral> Spectral::get(const TorusGrid& g) {
  static std::mutex cache_mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const Spectral>> cache;
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto key = std::make_pair(g.d(), g.L());
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto sp = std::make_shared<const Spectral>(g);
  cache.emplace(key, sp);
  return sp;
}

Spectral::Spectral(const TorusGrid& g) : grid_(g) {
  const int d = g.d();
  const int L = g.L();
  const int half = L / 2 + 1;
  nk_ = g.sites() / static_cast<std::size_t>(L) * static_cast<std::size_t>(half);
  sigma_.resize(nk_);
  weight_.resize(nk_);
  psi_.resize(nk_ * static_cast<std::size_t>(d));
  for (std::size_t k = 0; k < nk_; ++k) {
    double sg = 0.0;
    for (int i = 0; i < d; ++i) {
      double th = theta(k, i);
      cplx p(std::cos(th) - 1.0, std::sin(th));
      psi_[static_cast<std::size_t>(i) * nk_ + k] = p;
      sg += std::norm(p);
    }
    sigma_[k] = sg;
    std::size_t last = k % static_cast<std::size_t>(half);
    bool self = last == 0 || (L % 2 == 0 && last == static_cast<std::size_t>(L / 2));
    weight_[k] = self ? 1.0 : 2.0;
  }

  std::vector<int> dims(d, L);
  std::lock_guard<std::mutex> lock(planner_mutex());
  double* rbuf = fftw_alloc_real(g.sites());
  fftw_complex* cbuf = fftw_alloc_complex(nk_);
  unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  fwd_ = fftw_plan_dft_r2c(d, dims.data(), rbuf, cbuf, flags);
  bwd_ = fftw_plan_dft_c2r(d, dims.data(), cbuf, rbuf, flags);
  fftw_free(rbuf);
  fftw_free(cbuf);
  if (!fwd_ || !bwd_) throw Error("FFTW planning failed");
}

Spectral::~Spectral() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (fwd_) fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
  if (bwd_) fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
}

double Spectral::theta(std::size_t k, int i) const {
  const int d = grid_.d();
  const std::size_t L = static_cast<std::size_t>(grid_.L());
  const std::size_t half = L / 2 + 1;
  std::size_t idx;
  if (i == d - 1) {
    idx = k % half;
  } else {
    std::size_t rest = k / half;
    for (int j = d - 2; j > i; --j) rest /= L;
    idx = rest % L;
  }
  return 2.0 * std::numbers::pi * static_cast<double>(idx) / static_cast<double>(L);
}

void Spectral::forward(const double* in, cplx* out) const {
  fftw_execute_dft_r2c(static_cast<fftw_plan>(fwd_), const_cast<double*>(in),
                       reinterpret_cast<fftw_complex*>(out));
}

void Spectral::backward(const cplx* in, double* out) const {
  std::vector<cplx> scratch(in, in + nk_);
  fftw_execute_dft_c2r(static_cast<fftw_plan>(bwd_), reinterpret_cast<fftw_complex*>(scratch.data()), out);
  const double inv = 1.0 / static_cast<double>(grid_.sites());
  for (std::size_t s = 0; s < grid_.sites(); ++s) out[s] *= inv;
}

std::vector<double> Spectral::sigma_matrix(const Eigen::MatrixXd& M) const {
  const int d = grid_.d();
  if (M.rows() != d || M.cols() != d) throw DimensionError("matrix size != d");
  std::vector<double> out(nk_);
  for (std::size_t k = 0; k < nk_; ++k) {
    cplx acc = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) acc += std::conj(psi(i, k)) * M(i, j) * psi(j, k);
    out[k] = acc.real();
  }
  return out;
}

std::vector<double> solve_shifted(const TorusGrid& g, const std::vector<double>& f, double lambda) {
  auto sp = Spectral::get(g);
  std::vector<cplx> fh(sp->modes());
  sp->forward(f.data(), fh.data());
  for (std::size_t k = 0; k < fh.size(); ++k) {
    double den = lambda + sp->sigma(k);
    fh[k] = den > 0.0 ? fh[k] / den : cplx(0.0);
  }
  std::vector<double> u(g.sites());
  sp->backward(fh.data(), u.data());
  return u;
}

std::vector<double> project_gradient(const TorusGrid& g, const std::vector<double>& F, double lambda) {
  auto sp = Spectral::get(g);
  const int d = g.d();
  const std::size_t nk = sp->modes();
  std::vector<cplx> buf(nk), acc(nk, cplx(0.0));
  for (int l = 0; l < d; ++l) {
    sp->forward(F.data() + g.edge(0, l), buf.data());
    for (std::size_t k = 0; k < nk; ++k) acc[k] += std::conj(sp->psi(l, k)) * buf[k];
  }
  for (std::size_t k = 0; k < nk; ++k) {
    double den = lambda + sp->sigma(k);
    acc[k] = den > 0.0 ? acc[k] / den : cplx(0.0);
  }
  std::vector<double> out(g.edges());
  for (int i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < nk; ++k) buf[k] = sp->psi(i, k) * acc[k];
    sp->backward(buf.data(), out.data() + g.edge(0, i));
  }
  return out;
}

}  // namespace hgff
