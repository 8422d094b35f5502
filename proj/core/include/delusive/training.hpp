#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "delusive/data.hpp"
#include "delusive/models.hpp"
#include "delusive/threat_model.hpp"

namespace delusive {

enum class TrainMode { Standard, Adversarial, RandNoise };

struct PgdConfig {
  std::size_t steps = 7;
  std::optional<double> step_size;  // absent -> ball.radius / 5
  bool random_init = true;
};

struct LrSchedule {
  double initial = 0.1;
  std::vector<std::size_t> decay_epochs = {40, 50};  // 0-based; lr *= factor at epoch start
  double factor = 0.1;
};

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch = 128;
  LrSchedule lr;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  std::size_t holdout = 0;  // 0 -> no early stopping, last epoch wins
  TrainMode mode = TrainMode::Standard;
  std::optional<PgdConfig> pgd;    // Adversarial only; absent -> defaults
  std::optional<ThreatBall> ball;  // required for Adversarial and RandNoise
};

struct TrainReport {
  std::vector<double> train_loss;   // one entry per epoch
  std::vector<double> holdout_acc;  // natural accuracy; empty when holdout = 0
  std::size_t best_epoch = 0;       // index into the vectors; ties -> earlier
  Model model;                      // snapshot from best_epoch (early stopping)
  double wall_seconds = 0.0;
};

// Minibatch SGD per cfg.mode. Adversarial replaces each minibatch example by
// its PGD loss maximizer; RandNoise redraws a random in-ball shift for every
// example at each epoch start. Same config + seed -> identical report.
TrainReport train(const Model& model_init, const Dataset& ds, const TrainConfig& cfg);

// Loss ascent from a random in-ball start (or from x when random_init is
// false); every iterate is projected back into the ball.
std::vector<double> pgd_maximize(const Model& model, std::span<const double> x, int y,
                                 const ThreatBall& ball, std::size_t steps, double step_size,
                                 Rng& rng, bool random_init = true);

// Row-wise variant: row i ascends within the ball centered at x.row(i).
Matrix pgd_maximize_batch(const Model& model, const Matrix& x, std::span<const int> y,
                          const ThreatBall& ball, std::size_t steps, double step_size, Rng& rng,
                          bool random_init = true);

struct EvalResult {
  double natural_acc = 0.0;
  std::optional<double> adversarial_acc;
};

// Natural accuracy, plus adversarial accuracy when a ball is given. Linear
// models with an unclamped Linf ball use the exact closed-form inner max;
// everything else uses a deterministic PGD estimate (pgd_steps iterations,
// step radius/5, started at x). An example counts as adversarially correct
// only if its clean prediction is also correct.
EvalResult evaluate_suite(const Model& model, const Dataset& clean_test,
                          const std::optional<ThreatBall>& ball, std::size_t pgd_steps = 50);

// Rows `epoch,train_loss,holdout_acc` (1-based epochs; holdout column blank
// when early stopping is off).
void save_train_report_csv(const TrainReport& report, const std::filesystem::path& path);

}  // namespace delusive
