#pragma once

#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "delusive/data.hpp"
#include "delusive/numerics.hpp"

namespace delusive {

enum class LossKind { CrossEntropy, ZeroOne };

struct LinearModel {
  Matrix weights;            // K x m
  std::vector<double> bias;  // K
};

// Fully connected ReLU net. weights[l] has shape sizes[l+1] x sizes[l];
// the last layer is linear (logits).
struct MlpModel {
  std::vector<std::size_t> sizes;  // {m, hidden..., K}
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
};

using Model = std::variant<LinearModel, MlpModel>;

std::size_t input_dim(const Model& model);
std::size_t class_count(const Model& model);

// Zero-initialized K x m linear model.
LinearModel make_linear(std::size_t classes, std::size_t dim);

// One hidden ReLU layer, He-initialized weights, zero biases.
MlpModel make_mlp(std::size_t dim, std::size_t hidden, std::size_t classes, Rng& rng);

// Parameter-shaped container, one (weights, bias) pair per layer.
struct Grads {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
};

Grads zero_grads_like(const Model& model);

std::vector<double> forward(const Model& model, std::span<const double> x);
Matrix forward_batch(const Model& model, const Matrix& x);

struct LossGrads {
  double loss = 0.0;
  Grads params;
  std::vector<double> input;
};

// Softmax cross-entropy with exact gradients for parameters and the input.
// ZeroOne has no gradients and is rejected.
LossGrads loss_and_grads(const Model& model, std::span<const double> x, int y, LossKind kind);

// Mean loss over the rows of x. When grads is non-null the *mean* parameter
// gradients are written into it (overwritten, not accumulated); when
// input_grads is non-null the per-row input gradients of the mean loss
// land there, scaled by 1/n to match grads.
double batch_loss_and_grads(const Model& model, const Matrix& x, std::span<const int> y,
                            LossKind kind, Grads* grads, Matrix* input_grads);

// Argmax of the logits; ties go to the smaller class index.
int predict(const Model& model, std::span<const double> x);

double accuracy(const Model& model, const Dataset& ds);

struct SgdState {
  Grads velocity;  // zero-initialized on first use
};

// Classical SGD: v = momentum*v + (g + weight_decay*theta); theta -= lr*v.
void sgd_step(Model& model, const Grads& grads, double lr, double momentum,
              double weight_decay, SgdState& state);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace delusive
