#pragma once

// Shared PGD step: x += step * dir(g), where dir is the unit steepest-ascent
// direction in the ball geometry (sign for Linf, g/||g||2 for L2). Negative
// step descends. Zero gradient leaves x unchanged.

#include <cmath>
#include <span>

#include "delusive/threat_model.hpp"

namespace delusive {

inline void gradient_step(std::span<double> x, std::span<const double> g, NormKind norm,
                          double step) {
  if (norm == NormKind::Linf) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (g[j] > 0.0)
        x[j] += step;
      else if (g[j] < 0.0)
        x[j] -= step;
    }
  } else {
    double sq = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) sq += g[j] * g[j];
    if (sq == 0.0) return;
    const double scale = step / std::sqrt(sq);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] += scale * g[j];
  }
}

}  // namespace delusive
