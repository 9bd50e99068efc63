#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace rde {

// splitmix64 finalizer; the one fixed mixing primitive everything else is
// built from. Changing it would silently change every seeded result, so it
// is part of the serialization contract.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// A node in a deterministic seed tree. Streams are split by position, not by
// sequential draws, so parallel consumers derived from the same parent are
// independent of scheduling and thread count:
//
//   child(i).value = mix64(mix64(value) ^ mix64(i + salt))
struct Seed {
  std::uint64_t value = 0;

  Seed child(std::uint64_t position) const {
    return Seed{mix64(mix64(value) ^ mix64(position + 0x5bf0'3635'dee3'9777ULL))};
  }
};

// Counter-based stream generator (splitmix64). Stateless apart from the
// counter, cheap to fork, identical output on every platform for the same
// seed and draw sequence.
class Rng {
 public:
  explicit Rng(Seed seed) : state_(mix64(seed.value ^ 0x243f'6a88'85a3'08d3ULL)) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1]; safe as a log() argument.
  double uniform_open01() { return 1.0 - uniform01(); }

  // Standard normal via Box-Muller (no cached spare: two uniforms per draw,
  // so the draw count per sample is fixed and streams stay alignable).
  double normal() {
    const double u = uniform_open01();
    const double v = uniform01();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586476925286766559 * v);
  }

  // Uniform index in {0,...,n-1} via 128-bit multiply (bias < 2^-64 * n).
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: empty range");
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  int rademacher() { return (next_u64() >> 63) ? 1 : -1; }

 private:
  std::uint64_t state_;
};

}  // namespace rde
