// Release gate: every product-level requirement gets one [PASS]/[FAIL] line
// with the measured numbers and its time budget. Exit code 0 only when all
// criteria hold.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "delusive/analytic.hpp"
#include "delusive/attacks.hpp"
#include "delusive/config.hpp"
#include "delusive/data.hpp"
#include "delusive/harness.hpp"
#include "delusive/models.hpp"
#include "delusive/numerics.hpp"
#include "delusive/threat_model.hpp"
#include "delusive/training.hpp"
#include "delusive/wasserstein.hpp"
#include "support/oracles.hpp"

using namespace delusive;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

int g_failures = 0;

void run_criterion(int index, const std::string& name, double limit_seconds,
                   const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("exception: ") + e.what();
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_budget = elapsed <= limit_seconds;
  const bool pass = out.pass && in_budget;
  if (!pass) ++g_failures;
  std::printf("[%s] %2d. %s -- %s (%.2fs%s of %.0fs budget)\n", pass ? "PASS" : "FAIL", index,
              name.c_str(), out.detail.c_str(), elapsed,
              in_budget ? "" : " OVER BUDGET", limit_seconds);
  std::fflush(stdout);
}

GaussianMixtureSpec random_spec(Rng& rng, MixtureVariant variant = MixtureVariant::Original) {
  GaussianMixtureSpec spec;
  spec.eta = rng.uniform(1e-4, 1.0 / 3.0 - 1e-9);
  spec.sigma = rng.uniform(0.1, 5.0);
  spec.d = 1 + rng.below(100000);
  spec.variant = variant;
  return spec;
}

// ---------------------------------------------------------------- 1 and 2

Outcome criterion_risk_ordering() {
  Rng rng(1001);
  double min_margin = 1e300;
  for (int i = 0; i < 1000; ++i) {
    const GaussianMixtureSpec spec = random_spec(rng);
    if (!theorem1_check(spec))
      return {false, "ordering violated at eta=" + fmt("%.6g", spec.eta) +
                         " sigma=" + fmt("%.6g", spec.sigma) +
                         " d=" + std::to_string(spec.d)};
    const double a_d = phi_argument(spec, ClassifierKind::BayesOriginal);
    const double a_d1 = phi_argument(spec, ClassifierKind::BayesDelusive1);
    const double a_d2 = phi_argument(spec, ClassifierKind::BayesDelusive2);
    min_margin = std::min({min_margin, a_d - a_d2, a_d2 - a_d1});
  }
  return {min_margin > 1e-12,
          "1000/1000 specs ordered; min argument margin " + fmt("%.3g", min_margin)};
}

Outcome criterion_robust_beats_bayes() {
  Rng rng(2002);
  double min_margin = 1e300;
  for (int i = 0; i < 1000; ++i) {
    const GaussianMixtureSpec spec = random_spec(rng);
    if (!theorem2_check(spec))
      return {false, "robust rule lost at eta=" + fmt("%.6g", spec.eta) +
                         " sigma=" + fmt("%.6g", spec.sigma) +
                         " d=" + std::to_string(spec.d)};
    const double m1 = phi_argument(spec, ClassifierKind::RobustDelusive1) -
                      phi_argument(spec, ClassifierKind::BayesDelusive1);
    const double m2 = phi_argument(spec, ClassifierKind::RobustDelusive2) -
                      phi_argument(spec, ClassifierKind::BayesDelusive2);
    min_margin = std::min({min_margin, m1, m2});
  }
  return {min_margin > 1e-12,
          "1000/1000 specs improved; min argument margin " + fmt("%.3g", min_margin)};
}

// --------------------------------------------------------------------- 3

Outcome criterion_accuracy_curves() {
  const std::vector<std::size_t> grid = default_figure2_grid();
  const std::vector<Figure2Row> rows = figure2_curves(0.01, 1.0, grid);
  if (rows.size() != grid.size()) return {false, "row count mismatch"};

  std::size_t argmin_d2 = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i].acc_bayes_d > rows[i - 1].acc_bayes_d))
      return {false, "clean Bayes accuracy not increasing at d=" + std::to_string(rows[i].d)};
    if (!(rows[i].acc_bayes_d1 < rows[i - 1].acc_bayes_d1))
      return {false, "poisoned-1 accuracy not decreasing at d=" + std::to_string(rows[i].d)};
    if (std::abs(rows[i].acc_rob_d1 - rows[0].acc_rob_d1) > 1e-12)
      return {false, "robust-1 accuracy not constant at d=" + std::to_string(rows[i].d)};
    if (!(rows[i].acc_rob_d2 >= rows[i - 1].acc_rob_d2))
      return {false, "robust-2 accuracy decreased at d=" + std::to_string(rows[i].d)};
    if (rows[i].acc_bayes_d2 < rows[argmin_d2].acc_bayes_d2) argmin_d2 = i;
  }
  const std::size_t dip = rows[argmin_d2].d;
  if (dip < 900 || dip > 1400)
    return {false, "poisoned-2 dip at d=" + std::to_string(dip) + ", expected near 1111"};

  const auto at = std::find_if(rows.begin(), rows.end(),
                               [](const Figure2Row& r) { return r.d == 10000; });
  if (at == rows.end()) return {false, "grid misses d=10000"};
  const double want[5] = {0.9214, 0.5000, 0.8971, 0.8413, 0.9214};
  const double got[5] = {at->acc_bayes_d, at->acc_bayes_d1, at->acc_bayes_d2, at->acc_rob_d1,
                         at->acc_rob_d2};
  double worst = 0.0;
  for (int k = 0; k < 5; ++k) worst = std::max(worst, std::abs(got[k] - want[k]));
  if (worst > 1e-4)
    return {false, "d=10000 accuracies off by " + fmt("%.2g", worst) + " (tolerance 1e-4)"};
  return {true, "all five curve shapes hold; d=10000 values within " + fmt("%.2g", worst) +
                    " of (0.9214, 0.5000, 0.8971, 0.8413, 0.9214); dip at d=" +
                    std::to_string(dip)};
}

// --------------------------------------------------------------------- 4

Outcome criterion_adversarial_lower_bound() {
  Rng rng(4004);
  const std::size_t n = 500;
  const double slack = 5.0 / std::sqrt(static_cast<double>(n));
  double worst_gap = -1e300, worst_mc = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    GaussianMixtureSpec delusive;
    delusive.eta = rng.uniform(0.01, 0.15);
    delusive.sigma = rng.uniform(0.3, 2.0);
    delusive.d = 1 + rng.below(20);
    delusive.variant = trial % 2 == 0 ? MixtureVariant::Delusive1 : MixtureVariant::Delusive2;
    GaussianMixtureSpec clean = delusive;
    clean.variant = MixtureVariant::Original;

    std::vector<double> w(delusive.d + 1);
    for (double& v : w) v = rng.uniform(-1.0, 1.0);
    const double b = rng.uniform(-0.2, 0.2);

    ThreatBall ball;
    ball.norm = NormKind::Linf;
    ball.radius = 2.0 * delusive.eta * (1.0 + rng.uniform(0.0, 1.0));

    // the poisoned set sits within W-infinity radius 2*eta <= ball.radius of
    // the clean one, so the adversary can undo the poisoning: adversarial
    // risk there can never drop below the clean natural risk
    const double adv = adversarial_risk_linear_exact(w, b, delusive, ball);
    const double nat_clean = natural_risk_linear(w, b, clean);
    if (adv + 1e-12 < nat_clean)
      return {false, "bound broken: adversarial " + fmt("%.6f", adv) + " < clean natural " +
                         fmt("%.6f", nat_clean)};
    worst_gap = std::max(worst_gap, nat_clean - adv);

    // empirical cross-check of both exact formulas on n = 500 samples
    Rng sample_rng(5000 + static_cast<std::uint64_t>(trial));
    const Dataset ds = sample_mixture(delusive, n, sample_rng);
    LinearModel lin = make_linear(2, delusive.d + 1);
    for (std::size_t j = 0; j <= delusive.d; ++j) lin.weights(1, j) = w[j];
    lin.bias[1] = b;
    const Model model(lin);
    const EvalResult ev = evaluate_suite(model, ds, ball);
    const double mc_adv = 1.0 - ev.adversarial_acc.value();
    const double mc_nat = 1.0 - ev.natural_acc;
    const double nat_delusive = natural_risk_linear(w, b, delusive);
    worst_mc = std::max({worst_mc, std::abs(mc_adv - adv), std::abs(mc_nat - nat_delusive)});
    if (std::abs(mc_adv - adv) > slack || std::abs(mc_nat - nat_delusive) > slack)
      return {false, "empirical risk strayed " +
                         fmt("%.4f", std::max(std::abs(mc_adv - adv),
                                              std::abs(mc_nat - nat_delusive))) +
                         " from the formula (slack " + fmt("%.4f", slack) + ")"};
  }
  return {true, "100/100 rules bounded (closest approach " + fmt("%.3g", -worst_gap) +
                    "); empirical risks within " + fmt("%.4f", worst_mc) + " of exact (slack " +
                    fmt("%.4f", slack) + ")"};
}

// ----------------------------------------------------------------- 5 and 7

struct PoisonRun {
  AttackKind kind;
  std::uint64_t seed;
  double clean_st, poisoned_st, poisoned_at;
  bool legal;  // artifact re-verification from disk
};

std::vector<PoisonRun> g_poison_runs;
std::string g_poison_error;

ExperimentConfig poisoning_config(AttackKind kind, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.data.kind = DataKind::Mixture;
  cfg.data.mixture = {0.05, 1.0, 50, MixtureVariant::Original};
  cfg.data.n = 4000;
  cfg.data.seed = seed;
  cfg.attack.kind = kind;
  cfg.attack.epsilon = 0.1;
  cfg.attack.norm = NormKind::Linf;
  cfg.attack.seed = seed + 1;
  cfg.defense.mode = TrainMode::Adversarial;
  cfg.defense.seed = seed + 2;
  cfg.model.linear = false;
  cfg.model.hidden = 64;
  cfg.eval.test_n = 2000;
  cfg.eval.seed = 99;
  return cfg;
}

Outcome criterion_poisoning_end_to_end() {
  g_poison_runs.clear();
  const fs::path root = fs::temp_directory_path() / "delusive_acceptance" / "poisoning";
  fs::remove_all(root);
  const AttackKind kinds[] = {AttackKind::P1, AttackKind::P2, AttackKind::P3, AttackKind::P4,
                              AttackKind::P5};
  const char* names[] = {"P1", "P2", "P3", "P4", "P5"};

  for (const std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const fs::path dir = root / ("seed" + std::to_string(seed));
    for (std::size_t k = 0; k < 5; ++k) {
      const ExperimentConfig cfg = poisoning_config(kinds[k], seed);
      const std::vector<ResultRow> rows = run_pipeline(cfg, dir);
      PoisonRun run;
      run.kind = kinds[k];
      run.seed = seed;
      run.clean_st = run.poisoned_st = run.poisoned_at = -1.0;
      for (const ResultRow& r : rows) {
        if (r.stage == "st-clean") run.clean_st = r.natural_acc;
        if (r.stage == "st-attacked") run.poisoned_st = r.natural_acc;
        if (r.stage == "at-attacked") run.poisoned_at = r.natural_acc;
      }
      // re-verify the on-disk artifacts before the next attack overwrites
      // them; criterion 7 reports on these checks
      const Dataset clean = load_dataset(dir / "clean.ds");
      const Dataset attacked = load_dataset(dir / "attacked.ds");
      ThreatBall ball;
      ball.norm = cfg.attack.norm;
      ball.radius = cfg.attack.epsilon;
      const CostSpec cost{cfg.attack.norm};
      const std::optional<double> moved = coupled_winf(clean, attacked, cost);
      run.legal = verify_attack_legality(clean, attacked, ball) && moved.has_value() &&
                  *moved <= ball.radius + kBallTol &&
                  in_winf_ball(clean, attacked, ball.radius, cost);
      g_poison_runs.push_back(run);
      std::printf("       %s seed %llu: clean ST %.4f, poisoned ST %.4f (drop %+.1f pts), "
                  "poisoned AT %.4f (gap to clean %+.1f pts)\n",
                  names[k], static_cast<unsigned long long>(seed), run.clean_st,
                  run.poisoned_st, 100.0 * (run.clean_st - run.poisoned_st), run.poisoned_at,
                  100.0 * (run.clean_st - run.poisoned_at));
      std::fflush(stdout);
    }
  }

  double min_drop = 1e300, max_at_gap = -1e300;
  bool p2_ok = true;
  for (const PoisonRun& run : g_poison_runs) {
    if (run.clean_st < 0 || run.poisoned_st < 0 || run.poisoned_at < 0)
      return {false, "pipeline rows missing a stage"};
    if (run.kind == AttackKind::P2) {
      p2_ok = p2_ok && run.poisoned_at >= run.poisoned_st;
    } else {
      min_drop = std::min(min_drop, run.clean_st - run.poisoned_st);
      max_at_gap = std::max(max_at_gap, run.clean_st - run.poisoned_at);
    }
  }
  const bool drops = min_drop >= 0.15;
  const bool recovers = max_at_gap <= 0.10;
  return {drops && recovers && p2_ok,
          std::string("P1/P3/P4/P5 min drop ") + fmt("%.1f", 100.0 * min_drop) +
              " pts (need >= 15), max AT gap " + fmt("%.1f", 100.0 * max_at_gap) +
              " pts (need <= 10), P2 AT >= ST " + (p2_ok ? "on every seed" : "VIOLATED")};
}

Outcome criterion_legality_gate() {
  if (g_poison_runs.empty())
    return {false, "no poisoning runs to audit (criterion 5 did not produce artifacts): " +
                       (g_poison_error.empty() ? std::string("see above") : g_poison_error)};
  std::size_t violations = 0;
  for (const PoisonRun& run : g_poison_runs)
    if (!run.legal) ++violations;
  return {violations == 0, std::to_string(g_poison_runs.size()) +
                               " attack artifacts re-audited from disk, " +
                               std::to_string(violations) + " legality violations"};
}

// --------------------------------------------------------------------- 6

Outcome criterion_exact_winf() {
  Rng rng(6006);
  std::size_t finite = 0, infinite = 0, membership = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(6);
    const std::size_t dim = 1 + rng.below(3);
    Dataset a;
    a.features = Matrix(n, dim);
    for (std::size_t i = 0; i < a.features.size(); ++i)
      a.features.data()[i] = rng.uniform(-1, 1);
    a.labels.resize(n);
    for (auto& y : a.labels) y = static_cast<int>(rng.below(2));
    a.class_count = 2;

    Dataset b = a;
    for (std::size_t i = 0; i < b.features.size(); ++i)
      b.features.data()[i] = rng.uniform(-1, 1);
    if (trial % 5 == 0)  // force a histogram mismatch sometimes
      b.labels[rng.below(n)] = 1 - b.labels[rng.below(n)];
    else if (trial % 3 == 0)
      for (auto& y : b.labels) y = static_cast<int>(rng.below(2));

    for (const NormKind metric : {NormKind::Linf, NormKind::L2}) {
      const CostSpec cost{metric};
      const MatchingResult got = exact_winf(a, b, cost);
      const std::optional<double> want = oracle::brute_winf(a, b, metric);
      if (got.value.has_value() != want.has_value())
        return {false, "finite/infinite disagreement with brute force"};
      if (!want.has_value()) {
        ++infinite;
        continue;
      }
      ++finite;
      if (std::abs(*got.value - *want) > 1e-9)
        return {false, "value off brute force by " + fmt("%.3g", std::abs(*got.value - *want))};
      if (*want > 2e-6) {
        ++membership;
        if (!in_winf_ball(a, b, *want + 1e-6, cost))
          return {false, "membership false just above the exact distance"};
        if (in_winf_ball(a, b, *want - 1e-6, cost))
          return {false, "membership true just below the exact distance"};
      }
    }
  }
  return {true, std::to_string(finite) + " finite + " + std::to_string(infinite) +
                    " infinite instances match brute force; " + std::to_string(membership) +
                    " ball-membership checks at value +/- 1e-6"};
}

// --------------------------------------------------------------------- 8

Outcome criterion_simplicity_bias() {
  const fs::path root = fs::temp_directory_path() / "delusive_acceptance" / "simplicity";
  fs::remove_all(root);
  double worst_st = 0.0, worst_at = 1.0;
  for (const std::uint64_t seed : {1ull, 2ull, 3ull}) {
    ExperimentConfig cfg;
    cfg.data.kind = DataKind::Concat;
    cfg.data.concat.simple_dims = 2;
    cfg.data.concat.simple_margin = 2.0;
    cfg.data.concat.complex_spec = {0.2, 1.0, 20, MixtureVariant::Original};
    cfg.data.n = 2000;
    cfg.data.seed = seed;
    cfg.attack.seed = seed + 1;
    cfg.defense.seed = seed + 2;
    cfg.defense.holdout = 500;
    cfg.eval.test_n = 1000;

    const std::vector<ResultRow> rows =
        run_simplicity_bias(cfg, root / ("seed" + std::to_string(seed)));
    double st_rand = -1.0, at_rand = -1.0;
    for (const ResultRow& r : rows) {
      if (r.stage == "st-randomized") st_rand = r.natural_acc;
      if (r.stage == "at-masked-randomized") at_rand = r.natural_acc;
    }
    if (st_rand < 0 || at_rand < 0) return {false, "missing randomized rows"};
    worst_st = std::max(worst_st, st_rand);
    worst_at = std::min(worst_at, at_rand);
  }
  return {worst_st <= 0.60 && worst_at >= 0.80,
          "shortcut-randomized accuracy: ST worst " + fmt("%.3f", worst_st) +
              " (need <= 0.60), masked AT worst " + fmt("%.3f", worst_at) +
              " (need >= 0.80), 3 seeds each"};
}

// --------------------------------------------------------------------- 9

Outcome criterion_gradient_check() {
  Rng rng(9009);
  double max_rel = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t dim = 2 + rng.below(5);
    const std::size_t classes = 2 + rng.below(3);
    const std::size_t n = 1 + rng.below(4);
    Model model;
    if (trial % 2 == 0) {
      LinearModel lin = make_linear(classes, dim);
      for (std::size_t i = 0; i < lin.weights.size(); ++i)
        lin.weights.data()[i] = rng.uniform(-1, 1);
      for (double& b : lin.bias) b = rng.uniform(-0.5, 0.5);
      model = lin;
    } else {
      Rng init(7000 + static_cast<std::uint64_t>(trial));
      model = make_mlp(dim, 3 + rng.below(4), classes, init);
    }
    Matrix x(n, dim);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-2, 2);
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(rng.below(classes));

    Grads grads = zero_grads_like(model);
    Matrix input_grads(n, dim);
    batch_loss_and_grads(model, x, y, LossKind::CrossEntropy, &grads, &input_grads);
    const oracle::FdGrads fd = oracle::fd_grads(model, x, y, 1e-5);

    Model scratch = model;
    const std::vector<double*> params = oracle::param_ptrs(scratch);
    const std::vector<const double*> analytic = oracle::grad_ptrs(grads);
    if (params.size() != fd.params.size() || analytic.size() != fd.params.size())
      return {false, "gradient layout mismatch"};
    for (std::size_t i = 0; i < fd.params.size(); ++i)
      max_rel = std::max(max_rel, oracle::rel_err(*analytic[i], fd.params[i]));
    for (std::size_t i = 0; i < input_grads.size(); ++i)
      max_rel = std::max(max_rel, oracle::rel_err(input_grads.data()[i], fd.inputs.data()[i]));
  }
  return {max_rel < 1e-6, "50 random models (linear and mlp), worst relative error " +
                              fmt("%.3g", max_rel) + " vs central differences (need < 1e-6)"};
}

// -------------------------------------------------------------------- 10

Outcome criterion_worst_case_attained() {
  Rng rng(1010);
  double max_abs_gap = 0.0, max_overshoot = -1e300;
  for (int instance = 0; instance < 10; ++instance) {
    GaussianMixtureSpec spec;
    spec.eta = rng.uniform(0.05, 0.3);
    spec.sigma = rng.uniform(0.3, 1.5);
    spec.d = 1 + rng.below(6);
    Rng data_rng(2000 + static_cast<std::uint64_t>(instance));
    const Dataset ds = sample_mixture(spec, 200, data_rng);

    LinearModel lin = make_linear(2, spec.d + 1);
    for (std::size_t j = 0; j <= spec.d; ++j) lin.weights(1, j) = rng.uniform(-1, 1);
    lin.bias[1] = rng.uniform(-0.2, 0.2);

    ThreatBall ball;
    ball.norm = NormKind::Linf;
    ball.radius = rng.uniform(0.05, 0.5);

    // the closed-form worst case must be a legal perturbation
    const Dataset worst = lemma_b1_worst_case(lin, ds, ball);
    if (!verify_attack_legality(ds, worst, ball)) return {false, "worst case left the ball"};

    Rng trial_rng(3000 + static_cast<std::uint64_t>(instance));
    const LemmaB1Report with = lemma_b1_check(lin, ds, ball, 100, trial_rng, true);
    max_abs_gap = std::max(max_abs_gap, std::abs(with.gap));
    if (with.gap != 0.0)
      return {false, "gap " + fmt("%.3g", with.gap) + " with the worst case included"};

    Rng trial_rng2(4000 + static_cast<std::uint64_t>(instance));
    const LemmaB1Report sampled = lemma_b1_check(lin, ds, ball, 100, trial_rng2, false);
    max_overshoot = std::max(max_overshoot, sampled.sampled_max - sampled.exact);
    if (sampled.sampled_max > sampled.exact)
      return {false, "a random perturbation beat the closed-form worst case by " +
                         fmt("%.3g", sampled.sampled_max - sampled.exact)};
  }
  return {true, "10 models x 100 random perturbations: worst-case risk attained exactly "
                "(gap 0), best random overshoot " +
                    fmt("%.3g", max_overshoot) + " (never positive)"};
}

}  // namespace

int main() {
  std::printf("acceptance gate: 10 criteria\n");
  run_criterion(1, "closed-form risk ordering: clean < delusive-2 < delusive-1 "
                   "(1000 random specs)", 1.0, criterion_risk_ordering);
  run_criterion(2, "robust linear weights beat the poisoned Bayes rules (1000 random specs)",
                1.0, criterion_robust_beats_bayes);
  run_criterion(3, "analytic accuracy curves: shapes and d=10^4 values", 1.0,
                criterion_accuracy_curves);
  run_criterion(4, "adversarial risk on poisoned data is bounded below by the clean natural "
                   "risk", 10.0, criterion_adversarial_lower_bound);
  run_criterion(5, "end-to-end: poisoning drops standard training; adversarial training "
                   "recovers", 300.0, criterion_poisoning_end_to_end);
  run_criterion(6, "exact W-infinity equals permutation brute force (200 instances)", 5.0,
                criterion_exact_winf);
  run_criterion(7, "every attack artifact passes the legality audit", 5.0,
                criterion_legality_gate);
  run_criterion(8, "standard training leans on the simple block; masked AT does not", 120.0,
                criterion_simplicity_bias);
  run_criterion(9, "analytic gradients match central finite differences", 5.0,
                criterion_gradient_check);
  run_criterion(10, "worst-case linear risk attained; random perturbations never exceed it",
                5.0, criterion_worst_case_attained);
  if (g_failures > 0) {
    std::printf("%d of 10 criteria failed\n", g_failures);
    return 1;
  }
  std::printf("all 10 criteria passed\n");
  return 0;
}
