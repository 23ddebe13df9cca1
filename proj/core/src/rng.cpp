#include "hgff/rng.hpp"

#include <cmath>
#include <numbers>

namespace hgff {

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int r = 0; r < 10; ++r) {
    std::uint64_t p0 = static_cast<std::uint64_t>(M0) * c[0];
    std::uint64_t p1 = static_cast<std::uint64_t>(M1) * c[2];
    std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += W0;
    k[1] += W1;
  }
  return c;
}

std::array<std::uint32_t, 4> Stream::block(std::uint64_t j) const {
  std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(j >> 32), tag_, stream_};
  std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
  return philox4x32(ctr, key);
}

namespace {
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
  // 53 random bits, shifted off zero
  std::uint64_t x = (static_cast<std::uint64_t>(hi) << 21) ^ (lo >> 11);
  return (static_cast<double>(x & ((1ULL << 53) - 1)) + 0.5) * 0x1.0p-53;
}
}  // namespace

double Stream::uniform(std::uint64_t i) const {
  auto b = block(i);
  return to_unit(b[0], b[1]);
}

// Box-Muller: block j yields normals 2j and 2j+1
double Stream::normal(std::uint64_t i) const {
  auto b = block(i >> 1);
  double u1 = to_unit(b[0], b[1]);
  double u2 = to_unit(b[2], b[3]);
  double r = std::sqrt(-2.0 * std::log(u1));
  double t = 2.0 * std::numbers::pi * u2;
  return (i & 1u) ? r * std::sin(t) : r * std::cos(t);
}

void Stream::normals(std::vector<double>& out, std::uint64_t offset) const {
  std::size_t n = out.size();
  std::size_t i = 0;
  if (offset & 1u) {
    out[0] = normal(offset);
    i = 1;
  }
  for (; i + 1 < n; i += 2) {
    auto b = block((offset + i) >> 1);
    double r = std::sqrt(-2.0 * std::log(to_unit(b[0], b[1])));
    double t = 2.0 * std::numbers::pi * to_unit(b[2], b[3]);
    out[i] = r * std::cos(t);
    out[i + 1] = r * std::sin(t);
  }
  if (i < n) out[i] = normal(offset + i);
}

}  // namespace hgff
