#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "ragcomp/error.hpp"

namespace ragcomp {

// All seeded draws in this project go through Rng: std::mt19937_64 (bit-exact
// per ISO C++) plus an unbiased rejection bound. std::*_distribution is never
// used because its output is implementation-defined, which would break
// byte-identical runs across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform draw in [0, bound). Rejection sampling over the largest multiple
  // of bound below 2^64, so the result is exactly uniform.
  uint64_t below(uint64_t bound) {
    if (bound == 0) fail(ErrorKind::Contract, "Rng::below: bound must be > 0");
    const uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
    for (;;) {
      const uint64_t x = gen_();
      if (x >= threshold) return x % bound;
    }
  }

  // 53-bit uniform double in [0, 1).
  double unit_double() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // First k entries of a seeded Fisher-Yates permutation of 0..population-1.
  // Taking a longer prefix with the same seed extends the shorter one.
  std::vector<size_t> sample_indices(size_t population, size_t k);

 private:
  std::mt19937_64 gen_;
};

// splitmix64 finalizer, used to spread structured seed material.
uint64_t mix64(uint64_t x);

// FNV-1a over the given byte strings; pieces are length-delimited so that
// ("ab","c") and ("a","bc") hash differently.
uint64_t stable_hash(std::initializer_list<std::string_view> parts);

// Derive the seed of a named sub-stream (e.g. per question, per resample).
uint64_t derive_seed(uint64_t seed, std::string_view tag);
uint64_t derive_seed(uint64_t seed, uint64_t index);

}  // namespace ragcomp
