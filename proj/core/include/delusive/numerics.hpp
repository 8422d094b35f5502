#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace delusive {

// Dense row-major matrix of doubles. Deliberately minimal: consumers in this
// project walk rows contiguously and do their own loops.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return v_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return v_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return v_[r * cols_ + c]; }

  double* row(std::size_t r) { return v_.data() + r * cols_; }
  const double* row(std::size_t r) const { return v_.data() + r * cols_; }
  std::span<const double> row_span(std::size_t r) const { return {row(r), cols_}; }
  std::span<double> row_span(std::size_t r) { return {row(r), cols_}; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  bool all_finite() const;

  bool operator==(const Matrix& o) const = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> v_;
};

struct Norms {
  double l1 = 0, l2 = 0, linf = 0;
};

// (l1, l2, linf) of a vector in one pass.
Norms norms(std::span<const double> v);

// Standard normal CDF, |error| <= 1e-12 on all finite inputs.
// Throws std::domain_error on NaN or +/-Inf.
double std_normal_cdf(double x);

// Counter-based splittable generator (splitmix64 core). A value type: copying
// snapshots the stream, so "same state -> same draws" holds by construction
// and results are bit-identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  double next_double();   // uniform [0, 1), 53-bit
  double next_gaussian(); // N(0, 1), Box-Muller
  double uniform(double lo, double hi);
  std::uint64_t below(std::uint64_t n);  // uniform {0..n-1}, unbiased

  // Independent child stream; children with distinct tags are decorrelated
  // from each other and from this stream's future output.
  Rng derive(std::uint64_t tag) const;

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  bool operator==(const Rng& o) const = default;

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// mean + std * z, z ~ N(0, I). Requires std > 0 (use std -> 0+ for a point
// mass; exact zero is rejected to keep the contract honest).
std::vector<double> gaussian_sample(Rng& rng, std::span<const double> mean, double std);

}  // namespace delusive
