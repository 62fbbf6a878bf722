#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <string_view>
#include <vector>

namespace airfl {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

// Counter-based random stream.
//
// A stream is identified by a 64-bit key derived from the master seed and a
// path of (label, index) pairs. The i-th 64-bit output is a pure function of
// (key, i), so trials can be evaluated in any order or on any worker and still
// reproduce bit-for-bit. Copying a stream copies its position.
class RngStream {
 public:
  explicit RngStream(std::uint64_t master_seed);

  // Substream for one more path element. Does not advance this stream.
  [[nodiscard]] RngStream child(std::string_view label, std::uint64_t index = 0) const;

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  // Standard normal.
  double normal();
  // Circularly symmetric complex Gaussian with unit total variance.
  Complex complex_normal();
  double exponential(double rate);

  [[nodiscard]] std::uint64_t key() const { return key_; }
  [[nodiscard]] std::uint64_t position() const { return counter_; }

 private:
  RngStream(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}
  void normal_pair(double& a, double& b);

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct PathElement {
  std::string_view label;
  std::uint64_t index = 0;
};

RngStream derive_stream(std::uint64_t master_seed, std::initializer_list<PathElement> path);

// n i.i.d. CN(0, 1) draws. Throws std::invalid_argument for n == 0.
ComplexVector draw_complex_gaussian(std::size_t n, RngStream& stream);

// Fisher-Yates shuffle driven by a stream.
template <typename T>
void shuffle(std::vector<T>& items, RngStream& stream) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(stream.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace airfl
