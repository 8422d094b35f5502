#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "delusive/data.hpp"
#include "delusive/models.hpp"
#include "delusive/threat_model.hpp"

namespace delusive {

enum class AttackKind { P1, P2, P3, P4, P5 };

// Fixed-point-free permutation of {0..K-1} used to pick the target class.
struct TargetMap {
  std::vector<int> to;
};

TargetMap cyclic_target_map(int classes);  // y -> (y+1) mod K
void validate(const TargetMap& map, int classes);

// One perturbation vector per class, row c applied to class-c examples.
// For P3 the row applied to class y is the one the main objective names by
// its target class t(y); it is stored under the receiving class y here.
struct UniversalPerturbation {
  Matrix xi;        // K x m, built inside `ball` centered at 0
  ThreatBall ball;
  std::vector<int> skipped_classes;  // classes with no examples; their xi row stays 0
};

struct AttackConfig {
  AttackKind kind = AttackKind::P1;
  ThreatBall ball;
  std::size_t steps = 100;
  double step_size = 0.0;
  std::optional<TargetMap> target_map;
  std::size_t batch = 128;  // minibatch for the P3/P4 expectation estimate
};

// steps = 100 (P1/P2), 500 (P3/P4), 1 (P5); step_size = radius/5; batch 128.
AttackConfig default_attack_config(AttackKind kind, const ThreatBall& ball);

// Per-example descent on loss(f(x'), t(y)), projected to the ball each step.
Dataset attack_p1(const Dataset& ds, const Model& model, const AttackConfig& cfg);
// Same with the true label as the objective: helpful perturbations.
Dataset attack_p2(const Dataset& ds, const Model& model, const AttackConfig& cfg);

// Class-universal variants: one vector per class, optimized over shuffled
// minibatches of that class's examples, descending toward t(c) (P3) or
// c itself (P4).
std::pair<Dataset, UniversalPerturbation> attack_p3(const Dataset& ds, const Model& model,
                                                    const AttackConfig& cfg, Rng& rng);
std::pair<Dataset, UniversalPerturbation> attack_p4(const Dataset& ds, const Model& model,
                                                    const AttackConfig& cfg, Rng& rng);

// Class-universal random shift drawn from the ball.
std::pair<Dataset, UniversalPerturbation> attack_p5(const Dataset& ds, const AttackConfig& cfg,
                                                    Rng& rng);

// Dispatcher used by the CLI; model may be null for P5 only. When xi_out is
// non-null and the attack is universal, the per-class vectors are copied there.
Dataset run_attack(const Dataset& ds, const Model* model, const AttackConfig& cfg, Rng& rng,
                   UniversalPerturbation* xi_out = nullptr);

// True iff labels match row-wise and every perturbed row lies in the ball
// around its clean counterpart — the identity-coupling witness that the
// perturbed set is within distance `ball.radius` of the clean one.
bool verify_attack_legality(const Dataset& clean, const Dataset& perturbed,
                            const ThreatBall& ball);

// One CSV row per class: class index, then the xi coordinates.
void save_universal_csv(const UniversalPerturbation& up, const std::filesystem::path& path);

}  // namespace delusive
