#include "airfl/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace airfl {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer (Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed) : key_(mix64(master_seed ^ 0x6a09e667f3bcc908ULL)) {}

RngStream RngStream::child(std::string_view label, std::uint64_t index) const {
  std::uint64_t k = mix64(key_ ^ mix64(fnv1a(label)));
  k = mix64(k + kGolden * (index + 1));
  return RngStream(k, 0);
}

std::uint64_t RngStream::next_u64() {
  // Weyl sequence keyed by the stream, then finalized: output i depends only
  // on (key, i).
  return mix64(key_ + kGolden * (++counter_));
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("RngStream::below: n must be positive");
  // Lemire's nearly-divisionless rejection.
  unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(next_u64()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

void RngStream::normal_pair(double& a, double& b) {
  // Marsaglia polar method.
  double x, y, s;
  do {
    x = 2.0 * uniform() - 1.0;
    y = 2.0 * uniform() - 1.0;
    s = x * x + y * y;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  a = x * f;
  b = y * f;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double a, b;
  normal_pair(a, b);
  spare_ = b;
  has_spare_ = true;
  return a;
}

Complex RngStream::complex_normal() {
  double a, b;
  normal_pair(a, b);
  return {a * M_SQRT1_2, b * M_SQRT1_2};
}

double RngStream::exponential(double rate) {
  if (!(rate > 0.0)) throw std::invalid_argument("exponential: rate must be positive");
  return -std::log1p(-uniform()) / rate;
}

RngStream derive_stream(std::uint64_t master_seed, std::initializer_list<PathElement> path) {
  RngStream s(master_seed);
  for (const auto& p : path) s = s.child(p.label, p.index);
  return s;
}

ComplexVector draw_complex_gaussian(std::size_t n, RngStream& stream) {
  if (n == 0) throw std::invalid_argument("draw_complex_gaussian: n must be >= 1");
  ComplexVector out(n);
  for (auto& z : out) z = stream.complex_normal();
  return out;
}

}  // namespace airfl
