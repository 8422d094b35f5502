#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "delusive/numerics.hpp"

namespace delusive {

// Labeled empirical distribution. Immutable by convention once built.
struct Dataset {
  Matrix features;          // n x m
  std::vector<int> labels;  // values in {0..class_count-1}
  int class_count = 2;
  std::string provenance;   // free-text tag, e.g. "clean", "p3"

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
};

// Throws std::domain_error if the invariants don't hold (n >= 1, K >= 2,
// labels in range, finite features).
void validate(const Dataset& ds);

enum class MixtureVariant { Original, Delusive1, Delusive2 };

// Two-class Gaussian mixture in R^{d+1}: y uniform on {-1,+1} (stored 0/1),
// x ~ N(y * mean, sigma^2 I). The first coordinate is the robust feature
// (mean 1); the d remaining coordinates have mean eta / -eta / 3*eta
// depending on the variant.
struct GaussianMixtureSpec {
  double eta = 0.1;
  double sigma = 1.0;
  std::size_t d = 10;
  MixtureVariant variant = MixtureVariant::Original;

  std::vector<double> mean() const;  // length d+1, for the +1 class
  // The delusive constructions are legal for an attacker budget eps >= 2*eta;
  // the robust-classifier lemmas additionally need eta < 1/3.
  bool budget_legal(double eps) const { return eps >= 2.0 * eta; }
  bool eta_in_theorem_range() const { return eta > 0 && eta < 1.0 / 3.0; }
};

void validate(const GaussianMixtureSpec& spec);

// [simple block | complex block]. The simple block is y*margin*1 plus tight
// N(0, 0.05^2) noise (linearly separable on its own); the complex block is a
// mixture sample with the same label.
struct ConcatSpec {
  std::size_t simple_dims = 2;
  double simple_margin = 1.0;
  GaussianMixtureSpec complex_spec{0.2, 1.0, 20, MixtureVariant::Original};

  static constexpr double kSimpleNoise = 0.05;
  std::size_t dim() const { return simple_dims + complex_spec.d + 1; }
};

Dataset sample_mixture(const GaussianMixtureSpec& spec, std::size_t n, Rng& rng);
Dataset make_concat_dataset(const ConcatSpec& spec, std::size_t n, Rng& rng);

// Replaces feature columns [begin, end) by a label-independent shuffle of
// those columns across rows. Multiset of block rows is unchanged.
Dataset randomize_block(const Dataset& ds, std::size_t begin, std::size_t end, Rng& rng);

// Uniformly random disjoint partition into (n - holdout, holdout) rows.
std::pair<Dataset, Dataset> split_holdout(const Dataset& ds, std::size_t holdout, Rng& rng);

// Little-endian binary format: magic "DPDS", u32 version, u64 n, u64 m,
// u32 K, u32 tag length, tag bytes, n*m f64 features, n i32 labels.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

// CSV interop: header row `f0,...,f{m-1},label`.
void save_dataset_csv(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset_csv(const std::filesystem::path& path);

}  // namespace delusive
