#pragma once

#include <cstddef>
#include <functional>
#include <optional>

namespace airfl {

// Worker count: the explicit request if given, else AIRFL_SIM_WORKERS, else
// the hardware concurrency (at least 1).
std::size_t resolve_workers(std::optional<std::size_t> requested = std::nullopt);

// Calls fn(i) for every i in [0, n) on up to `workers` threads. Callers write
// results into slot i and reduce in index order, so results do not depend
// on the worker count. If any call throws, the exception from the lowest
// failing index is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

// Compensated summation.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - c_;
    const double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  [[nodiscard]] double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

}  // namespace airfl
