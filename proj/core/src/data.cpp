#include "delusive/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "binio.hpp"
#include "delusive/errors.hpp"

namespace delusive {

void validate(const Dataset& ds) {
  if (ds.size() == 0) throw std::domain_error("dataset: empty");
  if (ds.class_count < 2) throw std::domain_error("dataset: class_count must be >= 2");
  if (ds.features.rows() != ds.size())
    throw std::domain_error("dataset: feature rows != label count");
  for (int y : ds.labels)
    if (y < 0 || y >= ds.class_count) throw std::domain_error("dataset: label out of range");
  if (!ds.features.all_finite()) throw std::domain_error("dataset: non-finite feature");
}

void validate(const GaussianMixtureSpec& spec) {
  if (!(spec.eta > 0)) throw std::domain_error("mixture: eta must be > 0");
  if (!(spec.sigma > 0)) throw std::domain_error("mixture: sigma must be > 0");
}

std::vector<double> GaussianMixtureSpec::mean() const {
  double tail = eta;
  if (variant == MixtureVariant::Delusive1) tail = -eta;
  if (variant == MixtureVariant::Delusive2) tail = 3.0 * eta;
  std::vector<double> mu(d + 1, tail);
  mu[0] = 1.0;
  return mu;
}

Dataset sample_mixture(const GaussianMixtureSpec& spec, std::size_t n, Rng& rng) {
  validate(spec);
  if (n == 0) throw std::domain_error("sample_mixture: n must be >= 1");
  std::vector<double> mu = spec.mean();
  Dataset ds;
  ds.features = Matrix(n, spec.d + 1);
  ds.labels.resize(n);
  ds.class_count = 2;
  switch (spec.variant) {
    case MixtureVariant::Original: ds.provenance = "mixture"; break;
    case MixtureVariant::Delusive1: ds.provenance = "mixture-delusive1"; break;
    case MixtureVariant::Delusive2: ds.provenance = "mixture-delusive2"; break;
  }
  for (std::size_t i = 0; i < n; ++i) {
    // Same draw order for every variant: the variants differ only in the
    // mean, so a shared seed yields noise-coupled samples with
    // ||x_hat - x||inf = 2*eta up to float rounding.
    double y = rng.below(2) ? 1.0 : -1.0;
    double* row = ds.features.row(i);
    for (std::size_t j = 0; j <= spec.d; ++j)
      row[j] = y * mu[j] + spec.sigma * rng.next_gaussian();
    ds.labels[i] = y > 0 ? 1 : 0;
  }
  return ds;
}

Dataset make_concat_dataset(const ConcatSpec& spec, std::size_t n, Rng& rng) {
  validate(spec.complex_spec);
  if (n == 0) throw std::domain_error("make_concat_dataset: n must be >= 1");
  std::vector<double> mu = spec.complex_spec.mean();
  std::size_t sd = spec.simple_dims, cd = spec.complex_spec.d + 1;
  Dataset ds;
  ds.features = Matrix(n, sd + cd);
  ds.labels.resize(n);
  ds.class_count = 2;
  ds.provenance = "concat";
  for (std::size_t i = 0; i < n; ++i) {
    double y = rng.below(2) ? 1.0 : -1.0;
    double* row = ds.features.row(i);
    for (std::size_t j = 0; j < sd; ++j)
      row[j] = y * spec.simple_margin + ConcatSpec::kSimpleNoise * rng.next_gaussian();
    for (std::size_t j = 0; j < cd; ++j)
      row[sd + j] = y * mu[j] + spec.complex_spec.sigma * rng.next_gaussian();
    ds.labels[i] = y > 0 ? 1 : 0;
  }
  return ds;
}

Dataset randomize_block(const Dataset& ds, std::size_t begin, std::size_t end, Rng& rng) {
  if (begin > end || end > ds.dim()) throw std::domain_error("randomize_block: bad range");
  Dataset out = ds;
  if (begin == end) return out;
  std::vector<std::size_t> perm(ds.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = begin; j < end; ++j)
      out.features(i, j) = ds.features(perm[i], j);
  return out;
}

std::pair<Dataset, Dataset> split_holdout(const Dataset& ds, std::size_t holdout, Rng& rng) {
  if (holdout == 0 || holdout >= ds.size())
    throw std::domain_error("split_holdout: need 0 < holdout < n");
  std::vector<std::size_t> perm(ds.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);
  auto take = [&](std::size_t from, std::size_t count) {
    Dataset part;
    part.features = Matrix(count, ds.dim());
    part.labels.resize(count);
    part.class_count = ds.class_count;
    part.provenance = ds.provenance;
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t src = perm[from + i];
      std::memcpy(part.features.row(i), ds.features.row(src), ds.dim() * sizeof(double));
      part.labels[i] = ds.labels[src];
    }
    return part;
  };
  std::size_t train_n = ds.size() - holdout;
  return {take(0, train_n), take(train_n, holdout)};
}

namespace {

using binio::put_f64;
using binio::put_u32;
using binio::put_u64;
using binio::Reader;

constexpr char kMagic[4] = {'D', 'P', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  validate(ds);
  std::string buf;
  buf.reserve(32 + ds.provenance.size() + ds.features.size() * 8 + ds.size() * 4);
  buf.append(kMagic, 4);
  put_u32(buf, kVersion);
  put_u64(buf, ds.size());
  put_u64(buf, ds.dim());
  put_u32(buf, static_cast<std::uint32_t>(ds.class_count));
  put_u32(buf, static_cast<std::uint32_t>(ds.provenance.size()));
  buf.append(ds.provenance);
  for (std::size_t i = 0; i < ds.features.size(); ++i) put_f64(buf, ds.features.data()[i]);
  for (int y : ds.labels) put_u32(buf, static_cast<std::uint32_t>(y));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(IoError::Code::OpenOrRead, "cannot open for write: " + path.string());
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw IoError(IoError::Code::OpenOrRead, "write failed: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(IoError::Code::OpenOrRead, "cannot open: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  if (f.bad()) throw IoError(IoError::Code::OpenOrRead, "read failed: " + path.string());
  std::string buf = std::move(ss).str();
  Reader r{buf};
  if (!r.need(24) || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw IoError(IoError::Code::MalformedHeader, "not a dataset file: " + path.string());
  r.pos = 4;
  if (r.u32() != kVersion)
    throw IoError(IoError::Code::MalformedHeader, "unsupported dataset version: " + path.string());
  std::uint64_t n = r.u64(), m = r.u64();
  std::uint32_t k = r.u32();
  if (!r.need(4))
    throw IoError(IoError::Code::MalformedHeader, "truncated header: " + path.string());
  std::uint32_t tag_len = r.u32();
  if (!r.need(tag_len))
    throw IoError(IoError::Code::MalformedHeader, "truncated header: " + path.string());
  Dataset ds;
  ds.provenance.assign(buf, r.pos, tag_len);
  r.pos += tag_len;
  if (n == 0 || m == 0 || k < 2)
    throw IoError(IoError::Code::DimensionMismatch, "bad dataset shape: " + path.string());
  if (!r.need(n * m * 8 + n * 4))
    throw IoError(IoError::Code::DimensionMismatch,
                  "payload smaller than header promises: " + path.string());
  if (buf.size() != r.pos + n * m * 8 + n * 4)
    throw IoError(IoError::Code::DimensionMismatch,
                  "payload size mismatch: " + path.string());
  ds.features = Matrix(n, m);
  for (std::size_t i = 0; i < n * m; ++i) ds.features.data()[i] = r.f64();
  ds.labels.resize(n);
  ds.class_count = static_cast<int>(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t y = r.u32();
    if (y >= k)
      throw IoError(IoError::Code::DimensionMismatch, "label out of range: " + path.string());
    ds.labels[i] = static_cast<int>(y);
  }
  return ds;
}

void save_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
  validate(ds);
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError(IoError::Code::OpenOrRead, "cannot open for write: " + path.string());
  for (std::size_t j = 0; j < ds.dim(); ++j) f << 'f' << j << ',';
  f << "label\n";
  char num[40];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.dim(); ++j) {
      std::snprintf(num, sizeof num, "%.17g", ds.features(i, j));
      f << num << ',';
    }
    f << ds.labels[i] << '\n';
  }
  if (!f) throw IoError(IoError::Code::OpenOrRead, "write failed: " + path.string());
}

Dataset load_dataset_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError(IoError::Code::OpenOrRead, "cannot open: " + path.string());
  std::string line;
  if (!std::getline(f, line))
    throw IoError(IoError::Code::MalformedHeader, "empty csv: " + path.string());
  std::size_t m = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  if (m == 0 || line.substr(0, 2) != "f0")
    throw IoError(IoError::Code::MalformedHeader, "bad csv header: " + path.string());
  std::vector<double> feats;
  std::vector<int> labels;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::size_t col = 0;
    for (; std::getline(row, cell, ','); ++col) {
      char* end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str())
        throw IoError(IoError::Code::MalformedHeader, "bad csv cell: " + cell);
      if (col < m)
        feats.push_back(v);
      else
        labels.push_back(static_cast<int>(v));
    }
    if (col != m + 1)
      throw IoError(IoError::Code::DimensionMismatch, "csv row width mismatch: " + path.string());
  }
  if (labels.empty()) throw IoError(IoError::Code::DimensionMismatch, "csv has no rows");
  Dataset ds;
  ds.features = Matrix(labels.size(), m);
  std::copy(feats.begin(), feats.end(), ds.features.data());
  ds.labels = labels;
  ds.class_count = std::max(2, *std::max_element(labels.begin(), labels.end()) + 1);
  ds.provenance = "csv";
  validate(ds);
  return ds;
}

}  // namespace delusive
