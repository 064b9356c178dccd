#include "ragcomp/rng.hpp"

#include <numeric>

namespace ragcomp {

std::vector<size_t> Rng::sample_indices(size_t population, size_t k) {
  if (k > population)
    fail(ErrorKind::Bounds, "sample_indices: k exceeds population");
  std::vector<size_t> idx(population);
  std::iota(idx.begin(), idx.end(), size_t{0});
  for (size_t i = 0; i < k; ++i) {
    const size_t j = i + static_cast<size_t>(below(population - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

uint64_t stable_hash(std::initializer_list<std::string_view> parts) {
  uint64_t h = 0xcbf29ce484222325ull;  // FNV offset basis
  auto feed = [&h](unsigned char byte) {
    h ^= byte;
    h *= 0x100000001b3ull;  // FNV prime
  };
  for (const auto& part : parts) {
    uint64_t len = part.size();
    for (int i = 0; i < 8; ++i) feed(static_cast<unsigned char>(len >> (8 * i)));
    for (char c : part) feed(static_cast<unsigned char>(c));
  }
  return h;
}

uint64_t derive_seed(uint64_t seed, std::string_view tag) {
  return mix64(seed ^ stable_hash({tag}));
}

uint64_t derive_seed(uint64_t seed, uint64_t index) {
  return mix64(mix64(seed) ^ mix64(index + 0x51ed2701ull));
}

}  // namespace ragcomp
