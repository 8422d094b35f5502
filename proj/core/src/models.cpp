#include "delusive/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "binio.hpp"
#include "delusive/errors.hpp"

namespace delusive {

namespace {

// Uniform layer view over both model kinds: a list of (W, b) with ReLU
// between layers and raw logits at the end.
struct Layers {
  std::vector<const Matrix*> w;
  std::vector<const std::vector<double>*> b;
  std::size_t count() const { return w.size(); }
};

Layers layers_of(const Model& model) {
  Layers ls;
  if (const auto* lin = std::get_if<LinearModel>(&model)) {
    ls.w.push_back(&lin->weights);
    ls.b.push_back(&lin->bias);
  } else {
    const auto& mlp = std::get<MlpModel>(model);
    for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
      ls.w.push_back(&mlp.weights[l]);
      ls.b.push_back(&mlp.biases[l]);
    }
  }
  return ls;
}

void check_model(const Model& model) {
  Layers ls = layers_of(model);
  if (ls.count() == 0) throw std::domain_error("model has no layers");
  for (std::size_t l = 0; l < ls.count(); ++l) {
    if (ls.w[l]->rows() != ls.b[l]->size())
      throw std::domain_error("model layer weight/bias shape mismatch");
    if (!ls.w[l]->all_finite()) throw std::domain_error("model has non-finite weights");
    for (double v : *ls.b[l])
      if (!std::isfinite(v)) throw std::domain_error("model has non-finite bias");
    if (l + 1 < ls.count() && ls.w[l]->rows() != ls.w[l + 1]->cols())
      throw std::domain_error("model consecutive layer shapes incompatible");
  }
}

void axpy(double* out, double a, const double* x, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) out[j] += a * x[j];
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) s += a[j] * b[j];
  return s;
}

// z = a * W^T + b, one layer.
Matrix affine(const Matrix& a, const Matrix& w, const std::vector<double>& b) {
  Matrix z(a.rows(), w.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* in = a.row(i);
    double* out = z.row(i);
    for (std::size_t k = 0; k < w.rows(); ++k) out[k] = dot(in, w.row(k), w.cols()) + b[k];
  }
  return z;
}

void relu_inplace(Matrix& z) {
  double* p = z.data();
  for (std::size_t i = 0; i < z.size(); ++i) p[i] = p[i] > 0.0 ? p[i] : 0.0;
}

int argmax_row(const double* v, std::size_t k) {
  int best = 0;
  for (std::size_t j = 1; j < k; ++j)
    if (v[j] > v[best]) best = static_cast<int>(j);
  return best;
}

}  // namespace

std::size_t input_dim(const Model& model) {
  if (const auto* lin = std::get_if<LinearModel>(&model)) return lin->weights.cols();
  return std::get<MlpModel>(model).sizes.front();
}

std::size_t class_count(const Model& model) {
  if (const auto* lin = std::get_if<LinearModel>(&model)) return lin->weights.rows();
  return std::get<MlpModel>(model).sizes.back();
}

LinearModel make_linear(std::size_t classes, std::size_t dim) {
  if (classes < 2 || dim == 0) throw std::domain_error("make_linear: need classes >= 2, dim >= 1");
  return LinearModel{Matrix(classes, dim), std::vector<double>(classes, 0.0)};
}

MlpModel make_mlp(std::size_t dim, std::size_t hidden, std::size_t classes, Rng& rng) {
  if (classes < 2 || dim == 0 || hidden == 0)
    throw std::domain_error("make_mlp: need classes >= 2, dim >= 1, hidden >= 1");
  MlpModel m;
  m.sizes = {dim, hidden, classes};
  for (std::size_t l = 0; l + 1 < m.sizes.size(); ++l) {
    std::size_t fan_in = m.sizes[l], fan_out = m.sizes[l + 1];
    Matrix w(fan_out, fan_in);
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = scale * rng.next_gaussian();
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(fan_out, 0.0);
  }
  return m;
}

Grads zero_grads_like(const Model& model) {
  Layers ls = layers_of(model);
  Grads g;
  for (std::size_t l = 0; l < ls.count(); ++l) {
    g.weights.emplace_back(ls.w[l]->rows(), ls.w[l]->cols());
    g.biases.emplace_back(ls.b[l]->size(), 0.0);
  }
  return g;
}

Matrix forward_batch(const Model& model, const Matrix& x) {
  Layers ls = layers_of(model);
  if (x.cols() != ls.w[0]->cols()) throw std::domain_error("forward: input dim mismatch");
  Matrix a = affine(x, *ls.w[0], *ls.b[0]);
  for (std::size_t l = 1; l < ls.count(); ++l) {
    relu_inplace(a);
    a = affine(a, *ls.w[l], *ls.b[l]);
  }
  return a;
}

std::vector<double> forward(const Model& model, std::span<const double> x) {
  if (x.size() != input_dim(model)) throw std::domain_error("forward: input dim mismatch");
  Matrix row(1, x.size());
  std::copy(x.begin(), x.end(), row.data());
  Matrix logits = forward_batch(model, row);
  return {logits.row(0), logits.row(0) + logits.cols()};
}

double batch_loss_and_grads(const Model& model, const Matrix& x, std::span<const int> y,
                            LossKind kind, Grads* grads, Matrix* input_grads) {
  if (kind == LossKind::ZeroOne)
    throw std::invalid_argument("zero-one loss has no gradients; use accuracy()");
  Layers ls = layers_of(model);
  const std::size_t n = x.rows(), classes = ls.w.back()->rows(), layer_count = ls.count();
  if (x.cols() != ls.w[0]->cols()) throw std::domain_error("loss: input dim mismatch");
  if (y.size() != n) throw std::domain_error("loss: label count mismatch");
  for (int label : y)
    if (label < 0 || static_cast<std::size_t>(label) >= classes)
      throw std::domain_error("loss: label out of range");
  if (n == 0) throw std::domain_error("loss: empty batch");

  // Forward, keeping post-ReLU activations for the backward pass.
  std::vector<Matrix> acts;  // acts[l] = input of layer l+1, for l < last
  acts.reserve(layer_count);
  {
    Matrix a = affine(x, *ls.w[0], *ls.b[0]);
    for (std::size_t l = 1; l < layer_count; ++l) {
      relu_inplace(a);
      acts.push_back(std::move(a));
      a = affine(acts.back(), *ls.w[l], *ls.b[l]);
    }
    acts.push_back(std::move(a));  // logits
  }
  Matrix& logits = acts.back();

  // Mean cross-entropy and dL/dlogits (already divided by n).
  double loss = 0.0;
  Matrix dz = std::move(logits);  // reuse storage: overwritten row by row
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = dz.row(i);
    double mx = row[0];
    for (std::size_t k = 1; k < classes; ++k) mx = std::max(mx, row[k]);
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) sum += std::exp(row[k] - mx);
    loss += (std::log(sum) + mx - row[static_cast<std::size_t>(y[i])]) * inv_n;
    const double inv_sum = 1.0 / sum;
    for (std::size_t k = 0; k < classes; ++k) row[k] = std::exp(row[k] - mx) * inv_sum * inv_n;
    row[static_cast<std::size_t>(y[i])] -= inv_n;
  }

  if (grads) *grads = zero_grads_like(model);

  // Backward.
  for (std::size_t l = layer_count; l-- > 0;) {
    const Matrix& a_prev = (l == 0) ? x : acts[l - 1];
    const Matrix& w = *ls.w[l];
    if (grads) {
      Matrix& dw = grads->weights[l];
      std::vector<double>& db = grads->biases[l];
      for (std::size_t i = 0; i < n; ++i) {
        const double* dzi = dz.row(i);
        const double* ai = a_prev.row(i);
        for (std::size_t k = 0; k < w.rows(); ++k) {
          if (dzi[k] == 0.0) continue;
          axpy(dw.row(k), dzi[k], ai, w.cols());
          db[k] += dzi[k];
        }
      }
    }
    const bool need_da = l > 0 || input_grads != nullptr;
    if (!need_da) break;
    Matrix da(n, w.cols());
    for (std::size_t i = 0; i < n; ++i) {
      const double* dzi = dz.row(i);
      double* dai = da.row(i);
      for (std::size_t k = 0; k < w.rows(); ++k)
        if (dzi[k] != 0.0) axpy(dai, dzi[k], w.row(k), w.cols());
    }
    if (l == 0) {
      *input_grads = std::move(da);
      break;
    }
    // ReLU gate: derivative 0 where the activation was clipped.
    const Matrix& gate = acts[l - 1];
    for (std::size_t i = 0; i < da.size(); ++i)
      if (gate.data()[i] <= 0.0) da.data()[i] = 0.0;
    dz = std::move(da);
  }
  return loss;
}

LossGrads loss_and_grads(const Model& model, std::span<const double> x, int y, LossKind kind) {
  Matrix row(1, x.size());
  std::copy(x.begin(), x.end(), row.data());
  const int ys[1] = {y};
  LossGrads out;
  Matrix gin;
  out.loss = batch_loss_and_grads(model, row, ys, kind, &out.params, &gin);
  out.input.assign(gin.row(0), gin.row(0) + gin.cols());
  return out;
}

int predict(const Model& model, std::span<const double> x) {
  std::vector<double> logits = forward(model, x);
  return argmax_row(logits.data(), logits.size());
}

double accuracy(const Model& model, const Dataset& ds) {
  validate(ds);
  if (ds.dim() != input_dim(model)) throw std::domain_error("accuracy: input dim mismatch");
  if (static_cast<std::size_t>(ds.class_count) > class_count(model))
    throw std::domain_error("accuracy: dataset has more classes than model");
  Matrix logits = forward_batch(model, ds.features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (argmax_row(logits.row(i), logits.cols()) == ds.labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

namespace {

struct MutableLayers {
  std::vector<Matrix*> w;
  std::vector<std::vector<double>*> b;
};

MutableLayers mutable_layers_of(Model& model) {
  MutableLayers ls;
  if (auto* lin = std::get_if<LinearModel>(&model)) {
    ls.w.push_back(&lin->weights);
    ls.b.push_back(&lin->bias);
  } else {
    auto& mlp = std::get<MlpModel>(model);
    for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
      ls.w.push_back(&mlp.weights[l]);
      ls.b.push_back(&mlp.biases[l]);
    }
  }
  return ls;
}

void step_array(double* theta, const double* g, double* v, std::size_t n, double lr,
                double momentum, double weight_decay) {
  for (std::size_t j = 0; j < n; ++j) {
    v[j] = momentum * v[j] + (g[j] + weight_decay * theta[j]);
    theta[j] -= lr * v[j];
  }
}

}  // namespace

void sgd_step(Model& model, const Grads& grads, double lr, double momentum,
              double weight_decay, SgdState& state) {
  if (!(lr >= 0.0)) throw std::domain_error("sgd_step: lr must be >= 0");
  if (!(momentum >= 0.0) || !(weight_decay >= 0.0))
    throw std::domain_error("sgd_step: momentum and weight_decay must be >= 0");
  MutableLayers ls = mutable_layers_of(model);
  if (grads.weights.size() != ls.w.size()) throw std::domain_error("sgd_step: grads shape mismatch");
  if (state.velocity.weights.empty()) state.velocity = zero_grads_like(model);
  for (std::size_t l = 0; l < ls.w.size(); ++l) {
    Matrix& w = *ls.w[l];
    const Matrix& g = grads.weights[l];
    Matrix& v = state.velocity.weights[l];
    if (g.rows() != w.rows() || g.cols() != w.cols())
      throw std::domain_error("sgd_step: grads shape mismatch");
    step_array(w.data(), g.data(), v.data(), w.size(), lr, momentum, weight_decay);
    step_array(ls.b[l]->data(), grads.biases[l].data(), state.velocity.biases[l].data(),
               ls.b[l]->size(), lr, momentum, weight_decay);
  }
}

namespace {

constexpr char kModelMagic[4] = {'D', 'P', 'M', 'D'};
constexpr std::uint32_t kModelVersion = 1;

}  // namespace

void save_model(const Model& model, const std::filesystem::path& path) {
  check_model(model);
  Layers ls = layers_of(model);
  std::string buf;
  buf.append(kModelMagic, 4);
  binio::put_u32(buf, kModelVersion);
  binio::put_u32(buf, std::holds_alternative<LinearModel>(model) ? 0u : 1u);
  binio::put_u32(buf, static_cast<std::uint32_t>(ls.count()));
  binio::put_u64(buf, ls.w[0]->cols());
  for (std::size_t l = 0; l < ls.count(); ++l) binio::put_u64(buf, ls.w[l]->rows());
  for (std::size_t l = 0; l < ls.count(); ++l) {
    const Matrix& w = *ls.w[l];
    for (std::size_t i = 0; i < w.size(); ++i) binio::put_f64(buf, w.data()[i]);
    for (double v : *ls.b[l]) binio::put_f64(buf, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(IoError::Code::OpenOrRead, "cannot open for write: " + path.string());
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw IoError(IoError::Code::OpenOrRead, "write failed: " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(IoError::Code::OpenOrRead, "cannot open: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  if (f.bad()) throw IoError(IoError::Code::OpenOrRead, "read failed: " + path.string());
  std::string buf = std::move(ss).str();
  binio::Reader r{buf};
  if (!r.need(16) || std::memcmp(buf.data(), kModelMagic, 4) != 0)
    throw IoError(IoError::Code::MalformedHeader, "not a model file: " + path.string());
  r.pos = 4;
  if (r.u32() != kModelVersion)
    throw IoError(IoError::Code::MalformedHeader, "unsupported model version: " + path.string());
  const std::uint32_t kind = r.u32();
  const std::uint32_t layer_count = r.u32();
  if (kind > 1 || layer_count == 0 || layer_count > 64)
    throw IoError(IoError::Code::MalformedHeader, "bad model header: " + path.string());
  if (!r.need(8 * (layer_count + 1)))
    throw IoError(IoError::Code::MalformedHeader, "truncated model header: " + path.string());
  std::vector<std::size_t> sizes(layer_count + 1);
  for (auto& s : sizes) s = r.u64();
  std::size_t payload = 0;
  for (std::size_t l = 0; l < layer_count; ++l) payload += sizes[l + 1] * (sizes[l] + 1);
  for (std::size_t s : sizes)
    if (s == 0 || s > (1u << 24))
      throw IoError(IoError::Code::DimensionMismatch, "bad model shape: " + path.string());
  if (buf.size() != r.pos + payload * 8)
    throw IoError(IoError::Code::DimensionMismatch, "model payload size mismatch: " + path.string());
  if (kind == 0 && layer_count != 1)
    throw IoError(IoError::Code::DimensionMismatch, "linear model must have one layer");

  auto read_layer = [&](std::size_t in, std::size_t out, Matrix& w, std::vector<double>& b) {
    w = Matrix(out, in);
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = r.f64();
    b.resize(out);
    for (auto& v : b) v = r.f64();
  };

  Model model;
  if (kind == 0) {
    LinearModel lin;
    read_layer(sizes[0], sizes[1], lin.weights, lin.bias);
    model = std::move(lin);
  } else {
    MlpModel mlp;
    mlp.sizes = sizes;
    mlp.weights.resize(layer_count);
    mlp.biases.resize(layer_count);
    for (std::size_t l = 0; l < layer_count; ++l)
      read_layer(sizes[l], sizes[l + 1], mlp.weights[l], mlp.biases[l]);
    model = std::move(mlp);
  }
  try {
    check_model(model);
  } catch (const std::domain_error& e) {
    throw IoError(IoError::Code::DimensionMismatch, std::string(e.what()) + ": " + path.string());
  }
  return model;
}

}  // namespace delusive
