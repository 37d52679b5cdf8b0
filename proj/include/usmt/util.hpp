#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace usmt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed external input (files, streams, protocol output).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Structurally unusable input (empty corpus, length mismatch, bad counts).
class InputError : public Error {
 public:
  using Error::Error;
};

// Token required by an operation is missing from an embedding space.
class OovError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

// Deterministic 64-bit PRNG (splitmix64). Fully portable: identical streams
// on every platform/compiler, which the pipeline's byte-identical-artifacts
// guarantee depends on. std::mt19937_64 distributions are not portable.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), state_(seed) {}

  uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Unbiased draw in [0, n).
  uint64_t below(uint64_t n);

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Standard normal (Box-Muller, cached pair).
  double normal();

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Independent child stream; depends only on the original seed and the
  // stream id, never on how much the parent has consumed.
  Rng fork(uint64_t stream) const;

 private:
  uint64_t seed_;
  uint64_t state_;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

// FNV-1a 64-bit, used for content digests in workspace manifests.
uint64_t fnv1a64(std::string_view data, uint64_t h = 14695981039346656037ull);
std::string fnv1a64_hex(std::string_view data);

// Runs fn(i) for i in [0, n) over `threads` workers on contiguous chunks.
// Callers must write only to per-index slots so results are identical for
// any thread count.
void parallel_for(size_t n, unsigned threads, const std::function<void(size_t)>& fn);

}  // namespace usmt
