#include "delusive/threat_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace delusive {

namespace {

void check(const ThreatBall& ball, std::span<const double> center,
           std::span<const double> point) {
  if (center.size() != point.size())
    throw std::domain_error("threat ball: center/point length mismatch");
  if (!(ball.radius >= 0)) throw std::domain_error("threat ball: radius must be >= 0");
  if (ball.mask && ball.mask->size() != center.size())
    throw std::domain_error("threat ball: mask length mismatch");
  if (ball.mask)
    for (double m : *ball.mask)
      if (!(m >= 0)) throw std::domain_error("threat ball: mask entries must be >= 0");
  if (ball.clamp && !(ball.clamp->first <= ball.clamp->second))
    throw std::domain_error("threat ball: clamp lo > hi");
}

double mask_at(const ThreatBall& ball, std::size_t i) {
  return ball.mask ? (*ball.mask)[i] : 1.0;
}

// Masked distance over the unfrozen coordinates only; frozen ones are
// checked separately against kFrozenTol.
double masked_dist(const ThreatBall& ball, std::span<const double> center,
                   std::span<const double> point) {
  double acc = 0;
  for (std::size_t i = 0; i < center.size(); ++i) {
    double m = mask_at(ball, i);
    if (m == 0) continue;
    double u = (point[i] - center[i]) / m;
    if (ball.norm == NormKind::Linf)
      acc = std::max(acc, std::fabs(u));
    else
      acc += u * u;
  }
  return ball.norm == NormKind::Linf ? acc : std::sqrt(acc);
}

}  // namespace

bool contains(const ThreatBall& ball, std::span<const double> center,
              std::span<const double> point) {
  check(ball, center, point);
  for (std::size_t i = 0; i < center.size(); ++i) {
    if (mask_at(ball, i) == 0 && std::fabs(point[i] - center[i]) > kFrozenTol) return false;
    if (ball.clamp &&
        (point[i] < ball.clamp->first - kFrozenTol || point[i] > ball.clamp->second + kFrozenTol))
      return false;
  }
  return masked_dist(ball, center, point) <= ball.radius + kBallTol;
}

std::vector<double> project(const ThreatBall& ball, std::span<const double> center,
                            std::span<const double> point) {
  check(ball, center, point);
  std::vector<double> out(point.begin(), point.end());

  auto freeze_and_clamp = [&] {
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (mask_at(ball, i) == 0) out[i] = center[i];
      if (ball.clamp) out[i] = std::clamp(out[i], ball.clamp->first, ball.clamp->second);
    }
  };

  if (ball.norm == NormKind::Linf) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      double b = ball.radius * mask_at(ball, i);
      out[i] = std::clamp(out[i], center[i] - b, center[i] + b);
    }
    freeze_and_clamp();
    if (ball.clamp && !contains(ball, center, out))
      throw std::domain_error("threat ball: projection failed to reach the ball "
                              "(is the center inside the clamp box?)");
    return out;
  }

  // L2. Inside already (ball and box): hand the point back bit-identically so
  // projection is a retraction.
  if (contains(ball, center, out)) return out;
  auto radial = [&] {
    double dist = masked_dist(ball, center, out);
    if (dist > ball.radius) {
      double s = ball.radius / dist;
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = center[i] + (out[i] - center[i]) * s;
    }
  };
  radial();
  freeze_and_clamp();
  if (!contains(ball, center, out)) {
    radial();  // box clip re-grew the masked distance (center off-box); once more
    freeze_and_clamp();
    if (!contains(ball, center, out))
      throw std::domain_error("threat ball: projection failed to reach the ball "
                              "(is the center inside the clamp box?)");
  }
  return out;
}

std::vector<double> random_point(const ThreatBall& ball, std::span<const double> center,
                                 Rng& rng) {
  check(ball, center, center);
  if (ball.radius == 0) return {center.begin(), center.end()};
  std::vector<double> p(center.size());
  if (ball.norm == NormKind::Linf) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      double b = ball.radius * mask_at(ball, i);
      p[i] = center[i] + (b > 0 ? rng.uniform(-b, b) : 0.0);
    }
  } else {
    for (std::size_t i = 0; i < p.size(); ++i) {
      double m = mask_at(ball, i);
      p[i] = center[i] + (m > 0 ? m * rng.next_gaussian() : 0.0);
    }
  }
  return project(ball, center, p);
}

}  // namespace delusive
