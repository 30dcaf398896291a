#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

#include <ATen/core/Generator.h>
#include <torch/torch.h>

namespace scenepipe::core {

// Mixes a base seed with a path of integers / tags (splitmix64 chain). Used to
// give every (stage, epoch, iteration) its own independent stream so that
// resuming or skipping work never shifts the draws of unrelated steps.
uint64_t derive_seed(uint64_t base, std::initializer_list<uint64_t> path);
uint64_t tag_hash(std::string_view tag);

// Single-owner random source. Identical seeds produce bit-identical streams.
// Every stochastic operation in the library draws from one of these.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t seed() const { return seed_; }

  // A child stream keyed by `tag`; does not advance this stream.
  Rng fork(std::string_view tag, std::initializer_list<uint64_t> path = {}) const;

  torch::Tensor normal(at::IntArrayRef shape, double mean = 0.0, double stddev = 1.0,
                       torch::Dtype dtype = torch::kFloat32);
  torch::Tensor uniform(at::IntArrayRef shape, double lo = 0.0, double hi = 1.0,
                        torch::Dtype dtype = torch::kFloat32);
  // Random permutation of [0, n).
  torch::Tensor permutation(int64_t n);
  // Uniform integer in [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi);
  uint64_t next_u64();

 private:
  uint64_t seed_;
  at::Generator gen_;
};

}  // namespace scenepipe::core
