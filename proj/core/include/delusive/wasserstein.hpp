#pragma once

#include <optional>
#include <vector>

#include "delusive/data.hpp"
#include "delusive/models.hpp"
#include "delusive/threat_model.hpp"

namespace delusive {

// Ground cost between labeled examples: the chosen feature metric, plus an
// infinite surcharge when labels differ. Infinity is represented by an empty
// optional everywhere in this module, never by a large float.
struct CostSpec {
  NormKind metric = NormKind::Linf;
};

struct MatchingResult {
  std::optional<double> value;          // empty = infinity
  std::vector<std::size_t> assignment;  // a-row i pairs with b-row assignment[i]
  bool certified = false;               // true when produced by exact matching
};

// Max over aligned rows of the ground cost (the identity coupling).
std::optional<double> coupled_winf(const Dataset& a, const Dataset& b, const CostSpec& cost);

// Exact infinity-Wasserstein between equal-size empirical distributions:
// min over label-respecting bijections of the max pair distance, found by
// binary search over the distinct pairwise distances with a perfect-matching
// feasibility test at each threshold. Unequal per-class counts give infinity.
MatchingResult exact_winf(const Dataset& a, const Dataset& b, const CostSpec& cost);

// One feasibility run at threshold epsilon + 1e-9; no binary search.
bool in_winf_ball(const Dataset& a, const Dataset& b, double epsilon, const CostSpec& cost);

struct LemmaB1Report {
  double exact = 0.0;        // risk at the closed-form worst-case perturbation
  double sampled_max = 0.0;  // best of `trials` random in-ball perturbations
  double gap = 0.0;          // exact - sampled_max, always >= 0
};

// The per-example worst case for a two-class linear model under an
// unmasked, unclamped Linf ball: each row moves by -radius * sign(u_y)
// where u_y is the margin weight vector of its true class.
Dataset lemma_b1_worst_case(const LinearModel& model, const Dataset& ds, const ThreatBall& ball);

// Compares the exact worst-case risk against random coupled perturbations of
// the whole dataset; the identity perturbation is always included as a
// baseline trial, so sampled_max >= natural risk. With include_worst_case
// the closed-form maximizer joins the candidate set and the gap closes to
// exactly zero; without it the random candidates only lower-bound `exact`.
LemmaB1Report lemma_b1_check(const LinearModel& model, const Dataset& ds, const ThreatBall& ball,
                             std::size_t trials, Rng& rng, bool include_worst_case = true);

}  // namespace delusive
