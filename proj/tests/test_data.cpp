#include <stdexcept>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "delusive/data.hpp"
#include "delusive/errors.hpp"
#include "doctest.h"

using namespace delusive;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
  return fs::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("mixture spec mean depends on the variant") {
  GaussianMixtureSpec spec{0.1, 1.0, 3, MixtureVariant::Original};
  CHECK(spec.mean() == std::vector<double>{1.0, 0.1, 0.1, 0.1});
  spec.variant = MixtureVariant::Delusive1;
  CHECK(spec.mean() == std::vector<double>{1.0, -0.1, -0.1, -0.1});
  spec.variant = MixtureVariant::Delusive2;
  CHECK(spec.mean() == std::vector<double>{1.0, 3.0 * 0.1, 3.0 * 0.1, 3.0 * 0.1});
}

TEST_CASE("mixture spec legality helpers") {
  GaussianMixtureSpec spec{0.1, 1.0, 3, MixtureVariant::Original};
  CHECK(spec.budget_legal(0.2));
  CHECK(spec.budget_legal(0.5));
  CHECK_FALSE(spec.budget_legal(0.19));
  CHECK(spec.eta_in_theorem_range());
  spec.eta = 1.0 / 3.0;
  CHECK_FALSE(spec.eta_in_theorem_range());
  spec.eta = -0.1;
  CHECK_THROWS_AS(validate(spec), std::domain_error);
  spec.eta = 0.1;
  spec.sigma = 0.0;
  CHECK_THROWS_AS(validate(spec), std::domain_error);
}

TEST_CASE("sample_mixture per-class means and spread match the spec") {
  GaussianMixtureSpec spec{0.2, 0.7, 4, MixtureVariant::Original};
  Rng rng(11);
  const Dataset ds = sample_mixture(spec, 20000, rng);
  validate(ds);
  CHECK(ds.dim() == 5);
  CHECK(ds.class_count == 2);

  std::vector<double> mean_pos(5, 0.0), mean_neg(5, 0.0);
  double n_pos = 0, n_neg = 0;
  double var_acc = 0.0;
  const std::vector<double> mu = spec.mean();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double y = ds.labels[i] == 1 ? 1.0 : -1.0;
    for (std::size_t j = 0; j < 5; ++j) {
      (ds.labels[i] == 1 ? mean_pos : mean_neg)[j] += ds.features(i, j);
      const double r = ds.features(i, j) - y * mu[j];
      var_acc += r * r;
    }
    (ds.labels[i] == 1 ? n_pos : n_neg) += 1.0;
  }
  // both labels drawn roughly evenly
  CHECK(std::fabs(n_pos - n_neg) < 5.0 * std::sqrt(static_cast<double>(ds.size())));
  const double se = 5.0 * spec.sigma / std::sqrt(n_pos);
  for (std::size_t j = 0; j < 5; ++j) {
    CHECK(std::fabs(mean_pos[j] / n_pos - mu[j]) < se);
    CHECK(std::fabs(mean_neg[j] / n_neg + mu[j]) < se);
  }
  const double var = var_acc / (5.0 * static_cast<double>(ds.size()));
  CHECK(var == doctest::Approx(spec.sigma * spec.sigma).epsilon(0.05));
}

TEST_CASE("near-degenerate sigma pins label-1 rows to the mean") {
  GaussianMixtureSpec spec{0.3, 1e-12, 2, MixtureVariant::Original};
  Rng rng(3);
  const Dataset ds = sample_mixture(spec, 50, rng);
  const std::vector<double> mu = spec.mean();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double y = ds.labels[i] == 1 ? 1.0 : -1.0;
    for (std::size_t j = 0; j < ds.dim(); ++j)
      CHECK(ds.features(i, j) == doctest::Approx(y * mu[j]).epsilon(1e-9));
  }
}

TEST_CASE("shared seed couples the delusive variants to the clean sample") {
  const double eta = 0.05;
  GaussianMixtureSpec orig{eta, 1.0, 10, MixtureVariant::Original};
  GaussianMixtureSpec d1 = orig;
  d1.variant = MixtureVariant::Delusive1;
  GaussianMixtureSpec d2 = orig;
  d2.variant = MixtureVariant::Delusive2;

  Rng r1(99), r2(99), r3(99);
  const Dataset clean = sample_mixture(orig, 300, r1);
  const Dataset ds1 = sample_mixture(d1, 300, r2);
  const Dataset ds2 = sample_mixture(d2, 300, r3);

  CHECK(clean.labels == ds1.labels);
  CHECK(clean.labels == ds2.labels);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    // robust coordinate identical, every non-robust coordinate moves by 2*eta
    CHECK(clean.features(i, 0) == ds1.features(i, 0));
    CHECK(clean.features(i, 0) == ds2.features(i, 0));
    for (std::size_t j = 1; j < clean.dim(); ++j) {
      CHECK(std::fabs(std::fabs(ds1.features(i, j) - clean.features(i, j)) - 2 * eta) < 1e-12);
      CHECK(std::fabs(std::fabs(ds2.features(i, j) - clean.features(i, j)) - 2 * eta) < 1e-12);
      // delusive-1 moves against the label, delusive-2 with it
      const double y = clean.labels[i] == 1 ? 1.0 : -1.0;
      CHECK(y * (ds1.features(i, j) - clean.features(i, j)) < 0.0);
      CHECK(y * (ds2.features(i, j) - clean.features(i, j)) > 0.0);
    }
  }
}

TEST_CASE("concat dataset layout: easy block then mixture block") {
  ConcatSpec spec;
  spec.simple_dims = 3;
  spec.simple_margin = 1.5;
  spec.complex_spec = {0.2, 1.0, 4, MixtureVariant::Original};
  CHECK(spec.dim() == 8);
  Rng rng(7);
  const Dataset ds = make_concat_dataset(spec, 5000, rng);
  validate(ds);
  CHECK(ds.dim() == 8);
  // the simple block sits within a few noise-sigmas of +/- margin
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double y = ds.labels[i] == 1 ? 1.0 : -1.0;
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(std::fabs(ds.features(i, j) - y * spec.simple_margin) <
            6.0 * ConcatSpec::kSimpleNoise);
  }
}

TEST_CASE("randomize_block shuffles columns label-independently") {
  ConcatSpec spec;
  Rng rng(13);
  const Dataset ds = make_concat_dataset(spec, 2000, rng);
  Rng shuffle_rng(17);
  const Dataset shuffled = randomize_block(ds, 0, spec.simple_dims, shuffle_rng);

  CHECK(shuffled.labels == ds.labels);
  CHECK(shuffled.size() == ds.size());
  // columns outside the block untouched
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = spec.simple_dims; j < ds.dim(); ++j)
      CHECK(shuffled.features(i, j) == ds.features(i, j));

  // multiset of block rows preserved: compare sorted first-column values
  std::vector<double> before, after;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    before.push_back(ds.features(i, 0));
    after.push_back(shuffled.features(i, 0));
  }
  std::sort(before.begin(), before.end());
  std::sort(after.begin(), after.end());
  CHECK(before == after);

  // the shuffle decouples the block from the labels: correlation dies
  double corr = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double y = shuffled.labels[i] == 1 ? 1.0 : -1.0;
    corr += y * shuffled.features(i, 0);
  }
  corr /= static_cast<double>(ds.size());
  CHECK(std::fabs(corr) < 0.1);  // was ~= margin = 1.0 before shuffling
}

TEST_CASE("split_holdout partitions the rows") {
  GaussianMixtureSpec spec{0.1, 1.0, 2, MixtureVariant::Original};
  Rng rng(5);
  const Dataset ds = sample_mixture(spec, 100, rng);
  Rng split_rng(6);
  const auto [train, hold] = split_holdout(ds, 25, split_rng);
  CHECK(train.size() == 75);
  CHECK(hold.size() == 25);
  CHECK(train.dim() == ds.dim());
  // row multisets partition the original: track via the first feature
  std::vector<double> all, parts;
  for (std::size_t i = 0; i < ds.size(); ++i) all.push_back(ds.features(i, 0));
  for (std::size_t i = 0; i < train.size(); ++i) parts.push_back(train.features(i, 0));
  for (std::size_t i = 0; i < hold.size(); ++i) parts.push_back(hold.features(i, 0));
  std::sort(all.begin(), all.end());
  std::sort(parts.begin(), parts.end());
  CHECK(all == parts);

  CHECK_THROWS_AS(split_holdout(ds, 100, split_rng), std::domain_error);
}

TEST_CASE("binary dataset io round-trips bit-exactly") {
  GaussianMixtureSpec spec{0.1, 2.0, 3, MixtureVariant::Delusive2};
  Rng rng(21);
  Dataset ds = sample_mixture(spec, 64, rng);
  ds.provenance = "roundtrip-check";
  const fs::path path = temp_file("delusive_test_roundtrip.ds");
  save_dataset(ds, path);
  const Dataset back = load_dataset(path);
  CHECK(back.features == ds.features);
  CHECK(back.labels == ds.labels);
  CHECK(back.class_count == ds.class_count);
  CHECK(back.provenance == ds.provenance);
  fs::remove(path);
}

TEST_CASE("csv io round-trips values") {
  GaussianMixtureSpec spec{0.1, 1.0, 2, MixtureVariant::Original};
  Rng rng(22);
  const Dataset ds = sample_mixture(spec, 20, rng);
  const fs::path path = temp_file("delusive_test_roundtrip.csv");
  save_dataset_csv(ds, path);
  const Dataset back = load_dataset_csv(path);
  REQUIRE(back.size() == ds.size());
  REQUIRE(back.dim() == ds.dim());
  CHECK(back.labels == ds.labels);
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < ds.dim(); ++j)
      CHECK(back.features(i, j) == doctest::Approx(ds.features(i, j)).epsilon(1e-15));
  fs::remove(path);
}

TEST_CASE("dataset io rejects broken files") {
  const fs::path missing = temp_file("delusive_test_missing.ds");
  fs::remove(missing);
  CHECK_THROWS_AS(load_dataset(missing), IoError);

  const fs::path junk = temp_file("delusive_test_junk.ds");
  {
    std::ofstream out(junk, std::ios::binary);
    out << "not a dataset";
  }
  CHECK_THROWS_AS(load_dataset(junk), IoError);
  fs::remove(junk);
}

TEST_CASE("dataset validation catches bad shapes") {
  Dataset ds;
  ds.features = Matrix(2, 2, 1.0);
  ds.labels = {0, 1};
  ds.class_count = 2;
  CHECK_NOTHROW(validate(ds));
  ds.labels = {0, 2};
  CHECK_THROWS_AS(validate(ds), std::domain_error);
  ds.labels = {0};
  CHECK_THROWS_AS(validate(ds), std::domain_error);
  ds.labels = {0, 1};
  ds.features(0, 0) = std::nan("");
  CHECK_THROWS_AS(validate(ds), std::domain_error);
}
