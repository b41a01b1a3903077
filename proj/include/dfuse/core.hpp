#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace dfuse {

inline constexpr double kPi = 3.14159265358979323846;

/// Dense row-major H x W container. Pixel (0,0) is the top-left element;
/// `at(y, x)` addresses row y, column x.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T{})
      : height_(height), width_(width) {
    if (height < 0 || width < 0) {
      throw std::invalid_argument("Grid: negative dimensions");
    }
    data_.assign(static_cast<std::size_t>(height) * width, fill);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(int y, int x) { return data_[index(y, x)]; }
  const T& at(int y, int x) const { return data_[index(y, x)]; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool same_shape(int height, int width) const {
    return height_ == height && width_ == width;
  }
  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return same_shape(other.height(), other.width());
  }

  bool in_bounds(int y, int x) const {
    return y >= 0 && y < height_ && x >= 0 && x < width_;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int y, int x) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

/// Runs fn(y) for every row in [0, rows). With threads > 1 the row range is
/// split into contiguous static chunks, one thread per chunk. Rows must be
/// independent; output is then bit-identical for any thread count.
template <typename Fn>
void parallel_for_rows(int rows, int threads, Fn&& fn) {
  threads = std::clamp(threads, 1, std::max(1, rows));
  if (threads <= 1 || rows <= 1) {
    for (int y = 0; y < rows; ++y) fn(y);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  std::vector<std::exception_ptr> errors(threads);
  for (int k = 0; k < threads; ++k) {
    const int y0 = static_cast<int>(static_cast<long long>(rows) * k / threads);
    const int y1 =
        static_cast<int>(static_cast<long long>(rows) * (k + 1) / threads);
    pool.emplace_back([&, k, y0, y1] {
      try {
        for (int y = y0; y < y1; ++y) fn(y);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// SplitMix64 finalizer; used to derive decorrelated per-pixel seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(seed ^ mix64(index));
}

/// PCG32 (XSH-RR 64/32, O'Neill). Fixed algorithm so that a given seed
/// reproduces the same stream on every platform. Normal variates use the
/// Box-Muller cosine branch with no cached spare, so consumption per call
/// is constant.
class Pcg32 {
 public:
  explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0x2545f4914f6cdd1dULL)
      : state_(0), inc_((stream << 1u) | 1u) {
    next_u32();
    state_ += seed;
    next_u32();
  }

  std::uint32_t next_u32() {
    const std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    const auto xorshifted =
        static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const auto rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  /// Uniform double in [0, 1).
  double next_double() { return next_u32() * (1.0 / 4294967296.0); }

  /// Uniform double in [a, b).
  double uniform(double a, double b) { return a + (b - a) * next_double(); }

  bool bernoulli(double p) { return next_double() < p; }

  /// Standard normal variate (Box-Muller).
  double normal() {
    const double u1 = (next_u32() + 0.5) * (1.0 / 4294967296.0);
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  double normal(double mean, double stddev) {
    return mean + stddev * normal();
  }

 private:
  std::uint64_t state_;
  std::uint64_t inc_;
};

inline double normal_pdf(double x, double mean, double variance) {
  const double d = x - mean;
  return std::exp(-0.5 * d * d / variance) /
         std::sqrt(2.0 * kPi * variance);
}

}  // namespace dfuse
