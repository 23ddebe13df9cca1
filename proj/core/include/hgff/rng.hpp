#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace hgff {

// Philox4x32-10 (Salmon et al. 2011). Stateless: the output depends only on
// (key, counter), so any element of a stream can be drawn independently.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key);

// Named sub-streams keyed by (seed, stream, tag); element i is a pure function of
// all four, independent of evaluation order or thread count.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint32_t stream, std::uint32_t tag = 0) : seed_(seed), stream_(stream), tag_(tag) {}
  double uniform(std::uint64_t i) const;  // in (0, 1)
  double normal(std::uint64_t i) const;
  void normals(std::vector<double>& out, std::uint64_t offset = 0) const;
  Stream child(std::uint32_t tag) const { return Stream(seed_ ^ (0x9E3779B97F4A7C15ULL * (tag_ + 1)), stream_, tag); }

 private:
  std::array<std::uint32_t, 4> block(std::uint64_t j) const;
  std::uint64_t seed_;
  std::uint32_t stream_;
  std::uint32_t tag_;
};

// well separated stream identifiers
namespace streams {
inline constexpr std::uint32_t environment = 1;
inline constexpr std::uint32_t mehler = 2;
inline constexpr std::uint32_t gff_noise = 3;
inline constexpr std::uint32_t test = 4;
inline constexpr std::uint32_t search = 5;
}  // namespace streams

}  // namespace hgff
