#ifndef TDC_ENSEMBLE_HPP
#define TDC_ENSEMBLE_HPP

// Streaming mean/variance accumulation with a deterministic merge order.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <thread>
#include <utility>
#include <vector>

#include "tdc/types.hpp"

namespace tdc {

struct Estimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct ComplexEstimate {
  Complex mean;
  double stderr_re = 0.0;
  double stderr_im = 0.0;
};

/// Welford accumulator; merge() is Chan's pairwise update.
struct RunningStat {
  double n = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    n += 1.0;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }

  void merge(const RunningStat& o) {
    if (o.n == 0.0) return;
    if (n == 0.0) {
      *this = o;
      return;
    }
    const double total = n + o.n;
    const double d = o.mean - mean;
    mean += d * (o.n / total);
    m2 += o.m2 + d * d * (n * o.n / total);
    n = total;
  }

  double variance() const { return n > 1.0 ? m2 / (n - 1.0) : 0.0; }
  double standard_error() const { return n > 1.0 ? std::sqrt(variance() / n) : 0.0; }
  Estimate estimate() const { return {mean, standard_error()}; }
};

struct ComplexStat {
  RunningStat re, im;
  void add(Complex z) {
    re.add(z.real());
    im.add(z.imag());
  }
  void merge(const ComplexStat& o) {
    re.merge(o.re);
    im.merge(o.im);
  }
  ComplexEstimate estimate() const {
    return {{re.mean, im.mean}, re.standard_error(), im.standard_error()};
  }
};

/// Reduces per-block results in a fixed binary-tree order: ((0,1),(2,3)),...
/// The outcome depends only on the block layout, not on which thread filled
/// which block.
template <typename T, typename Merge>
T tree_reduce(std::vector<T> parts, Merge merge) {
  if (parts.empty()) return T{};
  for (std::size_t width = 1; width < parts.size(); width *= 2)
    for (std::size_t i = 0; i + width < parts.size(); i += 2 * width)
      merge(parts[i], parts[i + width]);
  return std::move(parts.front());
}

/// Runs fn(block) for every block index on up to `threads` workers
/// (0 selects the hardware concurrency). Blocks are claimed dynamically.
template <typename Fn> void for_each_block(std::size_t n_blocks, unsigned threads, Fn fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_blocks));
  if (threads <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) fn(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t b = next++; b < n_blocks; b = next++) fn(b);
        } catch (...) {
          errors[w] = std::current_exception();
          next = n_blocks;
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

} // namespace tdc

#endif // TDC_ENSEMBLE_HPP
