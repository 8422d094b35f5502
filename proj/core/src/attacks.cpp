#include "delusive/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "delusive/errors.hpp"
#include "gradient_step.hpp"

namespace delusive {

TargetMap cyclic_target_map(int classes) {
  TargetMap map;
  map.to.resize(static_cast<std::size_t>(classes));
  for (int y = 0; y < classes; ++y) map.to[static_cast<std::size_t>(y)] = (y + 1) % classes;
  validate(map, classes);
  return map;
}

void validate(const TargetMap& map, int classes) {
  if (classes < 2) throw std::domain_error("target map needs >= 2 classes");
  if (map.to.size() != static_cast<std::size_t>(classes))
    throw std::domain_error("target map size != class count");
  std::vector<bool> hit(map.to.size(), false);
  for (int y = 0; y < classes; ++y) {
    int t = map.to[static_cast<std::size_t>(y)];
    if (t < 0 || t >= classes) throw std::domain_error("target map value out of range");
    if (t == y) throw std::domain_error("target map has a fixed point");
    if (hit[static_cast<std::size_t>(t)]) throw std::domain_error("target map not a bijection");
    hit[static_cast<std::size_t>(t)] = true;
  }
}

AttackConfig default_attack_config(AttackKind kind, const ThreatBall& ball) {
  AttackConfig cfg;
  cfg.kind = kind;
  cfg.ball = ball;
  cfg.step_size = ball.radius / 5.0;
  switch (kind) {
    case AttackKind::P1:
    case AttackKind::P2:
      cfg.steps = 100;
      break;
    case AttackKind::P3:
    case AttackKind::P4:
      cfg.steps = 500;
      break;
    case AttackKind::P5:
      cfg.steps = 1;
      break;
  }
  return cfg;
}

namespace {

void check_attack_inputs(const Dataset& ds, const Model* model, const AttackConfig& cfg,
                         AttackKind expected) {
  validate(ds);
  if (cfg.kind != expected) throw ConfigError("attack config kind does not match the attack");
  if (model && input_dim(*model) != ds.dim())
    throw std::domain_error("attack: model input dim != dataset dim");
  if (model && class_count(*model) < static_cast<std::size_t>(ds.class_count))
    throw std::domain_error("attack: model has fewer classes than dataset");
  if (!(cfg.step_size >= 0.0)) throw ConfigError("attack step_size must be >= 0");
  if (cfg.batch == 0) throw ConfigError("attack batch must be >= 1");
}

const TargetMap& require_target_map(const AttackConfig& cfg, int classes) {
  if (!cfg.target_map.has_value())
    throw ConfigError("this attack needs a target_map (fixed-point-free label permutation)");
  validate(*cfg.target_map, classes);
  return *cfg.target_map;
}

void descend(std::span<double> x, std::span<const double> g, NormKind norm, double step) {
  gradient_step(x, g, norm, -step);
}

// P1/P2 share everything but the per-example objective label.
Dataset per_example_attack(const Dataset& ds, const Model& model, const AttackConfig& cfg,
                           const std::vector<int>& objective, const char* tag) {
  Dataset out = ds;
  out.provenance = tag;
  Matrix cur = ds.features;
  Matrix gin;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    batch_loss_and_grads(model, cur, objective, LossKind::CrossEntropy, nullptr, &gin);
    for (std::size_t i = 0; i < cur.rows(); ++i) {
      descend(cur.row_span(i), gin.row_span(i), cfg.ball.norm, cfg.step_size);
      std::vector<double> p = project(cfg.ball, ds.features.row_span(i), cur.row_span(i));
      std::copy(p.begin(), p.end(), cur.row(i));
    }
  }
  // One final projection pass even for steps = 0, so a radius-0 ball always
  // returns the input bit-exactly.
  for (std::size_t i = 0; i < cur.rows(); ++i) {
    std::vector<double> p = project(cfg.ball, ds.features.row_span(i), cur.row_span(i));
    std::copy(p.begin(), p.end(), out.features.row(i));
  }
  return out;
}

std::vector<std::vector<std::size_t>> rows_by_class(const Dataset& ds) {
  std::vector<std::vector<std::size_t>> idx(static_cast<std::size_t>(ds.class_count));
  for (std::size_t i = 0; i < ds.size(); ++i)
    idx[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  return idx;
}

ThreatBall displacement_ball(const ThreatBall& ball) {
  ThreatBall b = ball;
  b.clamp.reset();  // clamps constrain absolute inputs, not displacements
  return b;
}

// Apply the class's vector and re-project row-wise; with no clamp this is
// exactly x + xi.
Dataset apply_universal(const Dataset& ds, const UniversalPerturbation& up,
                        const ThreatBall& ball, const char* tag) {
  Dataset out = ds;
  out.provenance = tag;
  std::vector<double> moved(ds.dim());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double* x = ds.features.row(i);
    const double* v = up.xi.row(static_cast<std::size_t>(ds.labels[i]));
    for (std::size_t j = 0; j < ds.dim(); ++j) moved[j] = x[j] + v[j];
    std::vector<double> p = project(ball, ds.features.row_span(i), moved);
    std::copy(p.begin(), p.end(), out.features.row(i));
  }
  return out;
}

// Optimize one vector per class toward `target_of(c)` over shuffled
// minibatches of that class's rows.
UniversalPerturbation optimize_universal(const Dataset& ds, const Model& model,
                                         const AttackConfig& cfg, Rng& rng,
                                         const std::vector<int>& target_of) {
  const std::size_t m = ds.dim();
  UniversalPerturbation up;
  up.ball = displacement_ball(cfg.ball);
  up.xi = Matrix(static_cast<std::size_t>(ds.class_count), m);
  const std::vector<double> zero(m, 0.0);
  auto by_class = rows_by_class(ds);

  for (int c = 0; c < ds.class_count; ++c) {
    auto& rows = by_class[static_cast<std::size_t>(c)];
    if (rows.empty()) {
      up.skipped_classes.push_back(c);
      continue;
    }
    const std::size_t batch = std::min(cfg.batch, rows.size());
    std::vector<int> tgt(batch, target_of[static_cast<std::size_t>(c)]);
    std::vector<double> xi(m, 0.0);
    Matrix x(batch, m);
    Matrix gin;
    std::vector<double> g(m);
    std::size_t cursor = rows.size();  // force initial shuffle
    for (std::size_t step = 0; step < cfg.steps; ++step) {
      if (cursor + batch > rows.size()) {
        rng.shuffle(rows);
        cursor = 0;
      }
      for (std::size_t i = 0; i < batch; ++i) {
        const double* src = ds.features.row(rows[cursor + i]);
        double* dst = x.row(i);
        for (std::size_t j = 0; j < m; ++j) dst[j] = src[j] + xi[j];
      }
      cursor += batch;
      batch_loss_and_grads(model, x, tgt, LossKind::CrossEntropy, nullptr, &gin);
      // Row sum of gin is the gradient of the minibatch-mean loss w.r.t. xi.
      std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t i = 0; i < batch; ++i) {
        const double* gi = gin.row(i);
        for (std::size_t j = 0; j < m; ++j) g[j] += gi[j];
      }
      descend(xi, g, cfg.ball.norm, cfg.step_size);
      xi = project(up.ball, zero, xi);
    }
    std::copy(xi.begin(), xi.end(), up.xi.row(static_cast<std::size_t>(c)));
  }
  return up;
}

}  // namespace

Dataset attack_p1(const Dataset& ds, const Model& model, const AttackConfig& cfg) {
  check_attack_inputs(ds, &model, cfg, AttackKind::P1);
  const TargetMap& map = require_target_map(cfg, ds.class_count);
  std::vector<int> objective(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    objective[i] = map.to[static_cast<std::size_t>(ds.labels[i])];
  return per_example_attack(ds, model, cfg, objective, "P1");
}

Dataset attack_p2(const Dataset& ds, const Model& model, const AttackConfig& cfg) {
  check_attack_inputs(ds, &model, cfg, AttackKind::P2);
  return per_example_attack(ds, model, cfg, ds.labels, "P2");
}

std::pair<Dataset, UniversalPerturbation> attack_p3(const Dataset& ds, const Model& model,
                                                    const AttackConfig& cfg, Rng& rng) {
  check_attack_inputs(ds, &model, cfg, AttackKind::P3);
  const TargetMap& map = require_target_map(cfg, ds.class_count);
  UniversalPerturbation up = optimize_universal(ds, model, cfg, rng, map.to);
  Dataset out = apply_universal(ds, up, cfg.ball, "P3");
  return {std::move(out), std::move(up)};
}

std::pair<Dataset, UniversalPerturbation> attack_p4(const Dataset& ds, const Model& model,
                                                    const AttackConfig& cfg, Rng& rng) {
  check_attack_inputs(ds, &model, cfg, AttackKind::P4);
  std::vector<int> self(static_cast<std::size_t>(ds.class_count));
  std::iota(self.begin(), self.end(), 0);
  UniversalPerturbation up = optimize_universal(ds, model, cfg, rng, self);
  Dataset out = apply_universal(ds, up, cfg.ball, "P4");
  return {std::move(out), std::move(up)};
}

std::pair<Dataset, UniversalPerturbation> attack_p5(const Dataset& ds, const AttackConfig& cfg,
                                                    Rng& rng) {
  check_attack_inputs(ds, nullptr, cfg, AttackKind::P5);
  const std::size_t m = ds.dim();
  UniversalPerturbation up;
  up.ball = displacement_ball(cfg.ball);
  up.xi = Matrix(static_cast<std::size_t>(ds.class_count), m);
  const std::vector<double> zero(m, 0.0);
  for (int c = 0; c < ds.class_count; ++c) {
    std::vector<double> r = random_point(up.ball, zero, rng);
    std::copy(r.begin(), r.end(), up.xi.row(static_cast<std::size_t>(c)));
  }
  Dataset out = apply_universal(ds, up, cfg.ball, "P5");
  return {std::move(out), std::move(up)};
}

Dataset run_attack(const Dataset& ds, const Model* model, const AttackConfig& cfg, Rng& rng,
                   UniversalPerturbation* xi_out) {
  auto need_model = [&]() -> const Model& {
    if (!model) throw ConfigError("this attack needs a reference model");
    return *model;
  };
  switch (cfg.kind) {
    case AttackKind::P1:
      return attack_p1(ds, need_model(), cfg);
    case AttackKind::P2:
      return attack_p2(ds, need_model(), cfg);
    case AttackKind::P3: {
      auto [out, up] = attack_p3(ds, need_model(), cfg, rng);
      if (xi_out) *xi_out = std::move(up);
      return std::move(out);
    }
    case AttackKind::P4: {
      auto [out, up] = attack_p4(ds, need_model(), cfg, rng);
      if (xi_out) *xi_out = std::move(up);
      return std::move(out);
    }
    case AttackKind::P5: {
      auto [out, up] = attack_p5(ds, cfg, rng);
      if (xi_out) *xi_out = std::move(up);
      return std::move(out);
    }
  }
  throw std::logic_error("unreachable attack kind");
}

bool verify_attack_legality(const Dataset& clean, const Dataset& perturbed,
                            const ThreatBall& ball) {
  validate(clean);
  validate(perturbed);
  if (clean.size() != perturbed.size() || clean.dim() != perturbed.dim() ||
      clean.class_count != perturbed.class_count)
    throw std::domain_error("legality check: shape mismatch");
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (clean.labels[i] != perturbed.labels[i]) return false;  // label change costs infinity
    if (!contains(ball, clean.features.row_span(i), perturbed.features.row_span(i))) return false;
  }
  return true;
}

void save_universal_csv(const UniversalPerturbation& up, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError(IoError::Code::OpenOrRead, "cannot open for write: " + path.string());
  f << "class";
  for (std::size_t j = 0; j < up.xi.cols(); ++j) f << ",xi" << j;
  f << '\n';
  char num[40];
  for (std::size_t c = 0; c < up.xi.rows(); ++c) {
    f << c;
    for (std::size_t j = 0; j < up.xi.cols(); ++j) {
      std::snprintf(num, sizeof num, "%.17g", up.xi(c, j));
      f << ',' << num;
    }
    f << '\n';
  }
  if (!f) throw IoError(IoError::Code::OpenOrRead, "write failed: " + path.string());
}

}  // namespace delusive
