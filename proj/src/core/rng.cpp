#include "scenepipe/core/rng.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include "scenepipe/core/errors.hpp"

namespace scenepipe::core {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

uint64_t tag_hash(std::string_view tag) {
  // FNV-1a
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t derive_seed(uint64_t base, std::initializer_list<uint64_t> path) {
  uint64_t h = splitmix64(base);
  for (uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

Rng::Rng(uint64_t seed) : seed_(seed), gen_(at::detail::createCPUGenerator(seed)) {}

Rng Rng::fork(std::string_view tag, std::initializer_list<uint64_t> path) const {
  uint64_t s = derive_seed(seed_, {tag_hash(tag)});
  for (uint64_t p : path) s = derive_seed(s, {p});
  return Rng(s);
}

torch::Tensor Rng::normal(at::IntArrayRef shape, double mean, double stddev, torch::Dtype dtype) {
  auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
  t.normal_(mean, stddev, gen_);
  return t;
}

torch::Tensor Rng::uniform(at::IntArrayRef shape, double lo, double hi, torch::Dtype dtype) {
  auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
  t.uniform_(lo, hi, gen_);
  return t;
}

torch::Tensor Rng::permutation(int64_t n) {
  if (n < 0) throw ArgumentError("permutation size must be non-negative");
  return torch::randperm(n, gen_, torch::TensorOptions().dtype(torch::kLong));
}

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
  if (hi < lo) throw ArgumentError("uniform_int: empty range");
  auto t = torch::randint(lo, hi + 1, {1}, gen_, torch::TensorOptions().dtype(torch::kLong));
  return t.item<int64_t>();
}

uint64_t Rng::next_u64() {
  auto* impl = gen_.get<at::CPUGeneratorImpl>();
  std::lock_guard<std::mutex> lock(gen_.mutex());
  return impl->random64();
}

}  // namespace scenepipe::core
