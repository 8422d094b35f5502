#include "delusive/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "delusive/errors.hpp"
#include "gradient_step.hpp"

namespace delusive {

Matrix pgd_maximize_batch(const Model& model, const Matrix& x, std::span<const int> y,
                          const ThreatBall& ball, std::size_t steps, double step_size, Rng& rng,
                          bool random_init) {
  if (steps == 0) throw std::domain_error("pgd_maximize: steps must be >= 1");
  if (!(step_size >= 0.0)) throw std::domain_error("pgd_maximize: step_size must be >= 0");
  if (x.rows() != y.size()) throw std::domain_error("pgd_maximize: label count mismatch");
  Matrix cur(x.rows(), x.cols());
  if (random_init) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
      std::vector<double> p = random_point(ball, x.row_span(i), rng);
      std::copy(p.begin(), p.end(), cur.row(i));
    }
  } else {
    cur = x;
  }
  Matrix gin;
  for (std::size_t step = 0; step < steps; ++step) {
    batch_loss_and_grads(model, cur, y, LossKind::CrossEntropy, nullptr, &gin);
    for (std::size_t i = 0; i < cur.rows(); ++i) {
      gradient_step(cur.row_span(i), gin.row_span(i), ball.norm, step_size);
      std::vector<double> p = project(ball, x.row_span(i), cur.row_span(i));
      std::copy(p.begin(), p.end(), cur.row(i));
    }
  }
  return cur;
}

std::vector<double> pgd_maximize(const Model& model, std::span<const double> x, int y,
                                 const ThreatBall& ball, std::size_t steps, double step_size,
                                 Rng& rng, bool random_init) {
  Matrix row(1, x.size());
  std::copy(x.begin(), x.end(), row.data());
  const int ys[1] = {y};
  Matrix adv = pgd_maximize_batch(model, row, ys, ball, steps, step_size, rng, random_init);
  return {adv.row(0), adv.row(0) + adv.cols()};
}

namespace {

void gather_rows(const Matrix& src, std::span<const std::size_t> which, Matrix& dst) {
  for (std::size_t i = 0; i < which.size(); ++i)
    std::memcpy(dst.row(i), src.row(which[i]), src.cols() * sizeof(double));
}

}  // namespace

TrainReport train(const Model& model_init, const Dataset& ds, const TrainConfig& cfg) {
  validate(ds);
  if (input_dim(model_init) != ds.dim()) throw std::domain_error("train: model/dataset dim mismatch");
  if (class_count(model_init) < static_cast<std::size_t>(ds.class_count))
    throw std::domain_error("train: model has fewer classes than dataset");
  if (cfg.batch == 0) throw ConfigError("train: batch must be >= 1");
  if (!(cfg.lr.initial > 0.0) || !(cfg.lr.factor > 0.0))
    throw ConfigError("train: lr and decay factor must be positive");
  if (cfg.holdout >= ds.size()) throw ConfigError("train: holdout must be < dataset size");
  const bool needs_ball = cfg.mode != TrainMode::Standard;
  if (needs_ball && !cfg.ball.has_value())
    throw ConfigError("train: Adversarial and RandNoise modes need a threat ball");

  std::size_t pgd_steps = 7;
  bool pgd_random_init = true;
  double pgd_step = needs_ball ? cfg.ball->radius / 5.0 : 0.0;
  if (cfg.pgd.has_value()) {
    pgd_steps = cfg.pgd->steps;
    pgd_random_init = cfg.pgd->random_init;
    if (cfg.pgd->step_size.has_value()) pgd_step = *cfg.pgd->step_size;
    if (pgd_steps == 0) throw ConfigError("train: pgd steps must be >= 1");
  }

  Rng master(cfg.seed);
  Rng rng_split = master.derive(1);
  Rng rng_order = master.derive(2);
  Rng rng_noise = master.derive(3);

  Dataset train_part;
  Dataset holdout_part;
  if (cfg.holdout > 0) {
    auto parts = split_holdout(ds, cfg.holdout, rng_split);
    train_part = std::move(parts.first);
    holdout_part = std::move(parts.second);
  } else {
    train_part = ds;
  }
  const std::size_t n = train_part.size(), m = train_part.dim();

  const auto t0 = std::chrono::steady_clock::now();
  TrainReport rep;
  Model model = model_init;
  Model best = model;
  double best_acc = -1.0;
  std::size_t best_epoch = 0;
  SgdState opt;
  Grads grads;
  double lr = cfg.lr.initial;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Matrix noisy;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t d : cfg.lr.decay_epochs)
      if (d == epoch) lr *= cfg.lr.factor;
    rng_order.shuffle(order);

    if (cfg.mode == TrainMode::RandNoise) {
      noisy = train_part.features;
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> p = random_point(*cfg.ball, train_part.features.row_span(i), rng_noise);
        std::copy(p.begin(), p.end(), noisy.row(i));
      }
    }
    const Matrix& source = cfg.mode == TrainMode::RandNoise ? noisy : train_part.features;

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch) {
      const std::size_t bs = std::min(cfg.batch, n - start);
      Matrix xb(bs, m);
      gather_rows(source, {order.data() + start, bs}, xb);
      std::vector<int> yb(bs);
      for (std::size_t i = 0; i < bs; ++i) yb[i] = train_part.labels[order[start + i]];
      if (cfg.mode == TrainMode::Adversarial)
        xb = pgd_maximize_batch(model, xb, yb, *cfg.ball, pgd_steps, pgd_step, rng_noise,
                                pgd_random_init);
      const double loss =
          batch_loss_and_grads(model, xb, yb, LossKind::CrossEntropy, &grads, nullptr);
      sgd_step(model, grads, lr, cfg.momentum, cfg.weight_decay, opt);
      loss_sum += loss * static_cast<double>(bs);
    }
    rep.train_loss.push_back(loss_sum / static_cast<double>(n));

    if (cfg.holdout > 0) {
      const double acc = accuracy(model, holdout_part);
      rep.holdout_acc.push_back(acc);
      if (acc > best_acc) {
        best_acc = acc;
        best = model;
        best_epoch = epoch;
      }
    }
  }

  if (cfg.holdout == 0 || cfg.epochs == 0) {
    best = std::move(model);
    best_epoch = cfg.epochs == 0 ? 0 : cfg.epochs - 1;
  }
  rep.model = std::move(best);
  rep.best_epoch = best_epoch;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

namespace {

int argmax_smallest(const double* v, std::size_t k) {
  int best = 0;
  for (std::size_t j = 1; j < k; ++j)
    if (v[j] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
  return best;
}

// Exact robust correctness for a linear model under an (optionally masked)
// Linf ball: the worst case shifts each pairwise margin by
// radius * sum_k mask_k * |w_yk - w_jk|. Tie handling mirrors argmax.
double linear_exact_adversarial_accuracy(const LinearModel& lin, const Dataset& ds,
                                         const ThreatBall& ball) {
  const std::size_t k = lin.weights.rows(), m = lin.weights.cols();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double* x = ds.features.row(i);
    const auto y = static_cast<std::size_t>(ds.labels[i]);
    const double* wy = lin.weights.row(y);
    bool ok = true;
    for (std::size_t j = 0; j < k && ok; ++j) {
      if (j == y) continue;
      const double* wj = lin.weights.row(j);
      double margin = lin.bias[y] - lin.bias[j];
      double shift = 0.0;
      for (std::size_t c = 0; c < m; ++c) {
        const double u = wy[c] - wj[c];
        margin += u * x[c];
        shift += (ball.mask ? (*ball.mask)[c] : 1.0) * std::abs(u);
      }
      margin -= ball.radius * shift;
      ok = margin > 0.0 || (margin == 0.0 && y < j);
    }
    if (ok) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

}  // namespace

EvalResult evaluate_suite(const Model& model, const Dataset& clean_test,
                          const std::optional<ThreatBall>& ball, std::size_t pgd_steps) {
  EvalResult r;
  r.natural_acc = accuracy(model, clean_test);
  if (!ball.has_value()) return r;
  if (ball->radius == 0.0) {
    r.adversarial_acc = r.natural_acc;  // the only feasible perturbation is zero
    return r;
  }
  const auto* lin = std::get_if<LinearModel>(&model);
  if (lin && ball->norm == NormKind::Linf && !ball->clamp.has_value()) {
    r.adversarial_acc = linear_exact_adversarial_accuracy(*lin, clean_test, *ball);
    return r;
  }
  if (pgd_steps == 0) throw std::domain_error("evaluate_suite: pgd_steps must be >= 1");
  Rng unused(0);  // deterministic eval: PGD starts at x, no random init
  Matrix adv = pgd_maximize_batch(model, clean_test.features, clean_test.labels, *ball, pgd_steps,
                                  ball->radius / 5.0, unused, false);
  Matrix clean_logits = forward_batch(model, clean_test.features);
  Matrix adv_logits = forward_batch(model, adv);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < clean_test.size(); ++i) {
    const int y = clean_test.labels[i];
    if (argmax_smallest(clean_logits.row(i), clean_logits.cols()) == y &&
        argmax_smallest(adv_logits.row(i), adv_logits.cols()) == y)
      ++hits;
  }
  r.adversarial_acc = static_cast<double>(hits) / static_cast<double>(clean_test.size());
  return r;
}

void save_train_report_csv(const TrainReport& report, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError(IoError::Code::OpenOrRead, "cannot open for write: " + path.string());
  f << "epoch,train_loss,holdout_acc\n";
  char buf[80];
  for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
    if (e < report.holdout_acc.size())
      std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f\n", e + 1, report.train_loss[e],
                    report.holdout_acc[e]);
    else
      std::snprintf(buf, sizeof buf, "%zu,%.6f,\n", e + 1, report.train_loss[e]);
    f << buf;
  }
  if (!f) throw IoError(IoError::Code::OpenOrRead, "write failed: " + path.string());
}

}  // namespace delusive
