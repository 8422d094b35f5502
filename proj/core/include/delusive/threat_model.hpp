#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "delusive/numerics.hpp"

namespace delusive {

enum class NormKind { L2, Linf };

// Perturbation budget around a center point: {x' : dist(x, x') <= radius},
// where dist divides each displacement coordinate by its mask multiplier
// (mask 0 = coordinate frozen) and an optional [lo, hi] box applies to the
// perturbed point itself.
struct ThreatBall {
  NormKind norm = NormKind::Linf;
  double radius = 0.0;
  std::optional<std::vector<double>> mask;
  std::optional<std::pair<double, double>> clamp;
};

// Membership tolerance; projection round-off must never flag a legal
// perturbation as illegal.
inline constexpr double kBallTol = 1e-9;
// Frozen (mask-0) coordinates must match the center this tightly.
inline constexpr double kFrozenTol = 1e-12;

bool contains(const ThreatBall& ball, std::span<const double> center,
              std::span<const double> point);

// Projection onto ball ∩ box. Linf: coordinatewise clip. L2: radial scaling,
// box clip, and a second radial pass if the clip re-violated the ball.
// Idempotent; points already inside come back unchanged.
std::vector<double> project(const ThreatBall& ball, std::span<const double> center,
                            std::span<const double> point);

// Linf: per-coordinate uniform; L2: isotropic Gaussian projected to the ball.
// radius 0 returns the center exactly and consumes no draws.
std::vector<double> random_point(const ThreatBall& ball, std::span<const double> center,
                                 Rng& rng);

}  // namespace delusive
