#include "delusive/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "delusive/analytic.hpp"
#include "delusive/attacks.hpp"
#include "delusive/errors.hpp"
#include "delusive/models.hpp"
#include "delusive/svg.hpp"
#include "delusive/training.hpp"

namespace delusive {
namespace {

namespace fs = std::filesystem;

// Child-stream tags so the pipeline's independent random decisions never
// share a stream even when two seeds collide.
constexpr std::uint64_t kInitTag = 0x11;
constexpr std::uint64_t kAttackTag = 0x22;
constexpr std::uint64_t kRandomizeTag = 0x33;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex_of(std::uint64_t v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*llx", digits, static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmtg(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void atomic_write(const fs::path& path, const std::string& bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError(IoError::Code::OpenOrRead, "cannot open " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(IoError::Code::OpenOrRead, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoError::Code::OpenOrRead, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Runs fn(0..count-1) on up to `threads` workers; the first exception wins
// and is rethrown after all workers drain.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  std::size_t n = std::min(threads, count);
  pool.reserve(n);
  for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct Cache {
  fs::path dir;

  explicit Cache(const fs::path& out_dir) : dir(out_dir / "cache") { fs::create_directories(dir); }

  fs::path path(const std::string& key, const char* ext) const {
    return dir / (hex_of(fnv1a(key), 16) + ext);
  }
};

std::string arch_tag(const ModelSection& m) {
  if (m.linear) return "linear";
  return "mlp" + std::to_string(m.hidden);
}

std::string eval_key(const EvalSection& e, NormKind norm, double attacker_eps) {
  std::string s = "test_n=" + std::to_string(e.test_n) + "|seed=" + std::to_string(e.seed);
  if (e.adversarial) {
    s += "|adv_eps=" + fmtg(e.epsilon.value_or(attacker_eps));
    s += norm == NormKind::Linf ? "|linf" : "|l2";
  }
  return s;
}

std::optional<ThreatBall> eval_ball(const EvalSection& e, NormKind norm, double attacker_eps) {
  if (!e.adversarial) return std::nullopt;
  return ThreatBall{norm, e.epsilon.value_or(attacker_eps), {}, {}};
}

// Loads a model (and its recorded training time) from the cache, or trains
// it and stores both. `report_path`, when given, gets the per-epoch CSV on a
// fresh train; a cache hit leaves any existing file alone.
Model obtain_model(const Cache& cache, const std::string& key, const Model& init,
                   const Dataset& data, const TrainConfig& tc, double* wall_out,
                   const fs::path* report_path) {
  fs::path model_path = cache.path(key, ".model");
  fs::path wall_path = cache.path(key, ".wall");
  if (fs::exists(model_path) && fs::exists(wall_path)) {
    if (wall_out) *wall_out = std::strtod(read_file_bytes(wall_path).c_str(), nullptr);
    return load_model(model_path);
  }
  TrainReport report = train(init, data, tc);
  fs::path tmp = model_path;
  tmp += ".tmp";
  save_model(report.model, tmp);
  fs::rename(tmp, model_path);
  atomic_write(wall_path, fmtg(report.wall_seconds));
  if (report_path) save_train_report_csv(report, *report_path);
  if (wall_out) *wall_out = report.wall_seconds;
  return report.model;
}

void require_legal(const Dataset& clean, const Dataset& attacked, const ThreatBall& ball) {
  if (verify_attack_legality(clean, attacked, ball)) return;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (clean.labels[i] != attacked.labels[i])
      throw LegalityError("legality gate: row " + std::to_string(i) + " label changed from " +
                          std::to_string(clean.labels[i]) + " to " +
                          std::to_string(attacked.labels[i]));
    if (!contains(ball, clean.features.row_span(i), attacked.features.row_span(i))) {
      std::vector<double> delta(clean.dim());
      for (std::size_t j = 0; j < delta.size(); ++j)
        delta[j] = attacked.features(i, j) - clean.features(i, j);
      Norms nd = norms(delta);
      double moved = ball.norm == NormKind::Linf ? nd.linf : nd.l2;
      throw LegalityError("legality gate: row " + std::to_string(i) + " moved " + fmtg(moved) +
                          " > budget " + fmtg(ball.radius));
    }
  }
  throw LegalityError("legality gate: perturbed dataset shape mismatch");
}

// Everything the defender stages consume: clean pool, fresh test rows, the
// attacker's surrogate model, and the (gated) attacked dataset.
struct PipelineContext {
  std::string exp_id;
  Dataset clean;
  Dataset test;
  std::string clean_key;
  Model reference;
  std::string ref_key;
  Dataset attacked;
  std::string attacked_key;
  std::optional<ThreatBall> attack_ball;
};

std::string experiment_id(const ExperimentConfig& cfg) {
  std::string all = describe(cfg.data) + "|" + describe(cfg.attack) + "|" +
                    describe(cfg.defense, cfg.model) + "|" +
                    eval_key(cfg.eval, cfg.attack.norm, cfg.attack.epsilon);
  return "exp-" + hex_of(fnv1a(all), 8);
}

PipelineContext prepare_context(const ExperimentConfig& cfg, const Cache& cache,
                                const fs::path& out_dir) {
  PipelineContext ctx;
  ctx.exp_id = experiment_id(cfg);

  if (cfg.data.kind == DataKind::File) {
    Dataset whole = make_dataset(cfg.data);
    if (cfg.eval.test_n >= whole.size())
      throw ConfigError("[eval] test_n = " + std::to_string(cfg.eval.test_n) +
                        " must be smaller than the " + std::to_string(whole.size()) +
                        " rows in " + cfg.data.file.string());
    Rng carve(cfg.eval.seed);
    auto parts = split_holdout(whole, cfg.eval.test_n, carve);
    ctx.clean = std::move(parts.first);
    ctx.test = std::move(parts.second);
    ctx.clean_key = "v1|clean|file=" + hex_of(fnv1a(read_file_bytes(cfg.data.file)), 16) +
                    "|test_n=" + std::to_string(cfg.eval.test_n) +
                    "|carve_seed=" + std::to_string(cfg.eval.seed);
  } else {
    ctx.clean = make_dataset(cfg.data);
    ctx.test = make_dataset(cfg.data, cfg.eval.test_n, cfg.eval.seed);
    ctx.clean_key = "v1|clean|" + describe(cfg.data);
  }
  ctx.clean.provenance = "clean";
  ctx.test.provenance = "test";
  save_dataset(ctx.clean, out_dir / "clean.ds");

  // The attacker's surrogate: standard training on the full clean pool with
  // the attacker's seed, so attack quality does not depend on defender knobs.
  TrainConfig ref_cfg = defender_train_config(cfg.defense);
  ref_cfg.mode = TrainMode::Standard;
  ref_cfg.pgd.reset();
  ref_cfg.ball.reset();
  ref_cfg.holdout = 0;
  ref_cfg.seed = cfg.attack.seed;
  ctx.ref_key = "v1|ref|" + ctx.clean_key + "|" + arch_tag(cfg.model) +
                "|epochs=" + std::to_string(ref_cfg.epochs) +
                "|batch=" + std::to_string(ref_cfg.batch) + "|lr=" + fmtg(ref_cfg.lr.initial) +
                "|factor=" + fmtg(ref_cfg.lr.factor) + "|mom=" + fmtg(ref_cfg.momentum) +
                "|wd=" + fmtg(ref_cfg.weight_decay) + "|seed=" + std::to_string(ref_cfg.seed);
  Model ref_init = initial_model(cfg.model, ctx.clean.dim(),
                                 static_cast<std::size_t>(ctx.clean.class_count),
                                 cfg.attack.seed);
  ctx.reference = obtain_model(cache, ctx.ref_key, ref_init, ctx.clean, ref_cfg, nullptr, nullptr);

  if (!cfg.attack.kind) {
    ctx.attacked = ctx.clean;
    ctx.attacked_key = ctx.clean_key;
    return ctx;
  }

  ctx.attack_ball = ThreatBall{cfg.attack.norm, cfg.attack.epsilon, {}, {}};
  AttackConfig ac = default_attack_config(*cfg.attack.kind, *ctx.attack_ball);
  if (cfg.attack.steps) ac.steps = *cfg.attack.steps;
  if (cfg.attack.step_size) ac.step_size = *cfg.attack.step_size;
  ac.batch = cfg.attack.batch;
  if (*cfg.attack.kind == AttackKind::P1 || *cfg.attack.kind == AttackKind::P3)
    ac.target_map = cyclic_target_map(ctx.clean.class_count);

  ctx.attacked_key = "v1|attack|" + ctx.clean_key + "|" + ctx.ref_key + "|" + describe(cfg.attack);
  fs::path atk_path = cache.path(ctx.attacked_key, ".ds");
  if (fs::exists(atk_path)) {
    ctx.attacked = load_dataset(atk_path);
  } else {
    Rng attack_rng = Rng(cfg.attack.seed).derive(kAttackTag);
    UniversalPerturbation xi;
    ctx.attacked = run_attack(ctx.clean, &ctx.reference, ac, attack_rng, &xi);
    fs::path tmp = atk_path;
    tmp += ".tmp";
    save_dataset(ctx.attacked, tmp);
    fs::rename(tmp, atk_path);
    if (xi.xi.rows() > 0) save_universal_csv(xi, out_dir / "universal.csv");
  }
  // The gate runs on every pipeline invocation, cached attack or not.
  require_legal(ctx.clean, ctx.attacked, *ctx.attack_ball);
  save_dataset(ctx.attacked, out_dir / "attacked.ds");
  return ctx;
}

std::string sanitize_filename(std::string s) {
  for (char& c : s)
    if (c == ' ' || c == '/' || c == '=') c = '-';
  return s;
}

// One defender stage: train (or reuse) a model on `data`, score it on the
// shared test set, return the result row.
struct StageJob {
  std::string name;
  const Dataset* data = nullptr;
  std::string data_key;
  TrainMode mode = TrainMode::Standard;
  std::optional<ThreatBall> ball;  // training ball for at / randnoise
  std::string params;
};

ResultRow run_stage(const ExperimentConfig& cfg, const Cache& cache, const fs::path& out_dir,
                    const PipelineContext& ctx, const StageJob& job) {
  TrainConfig tc = defender_train_config(cfg.defense);
  tc.mode = job.mode;
  tc.ball = job.ball;
  if (job.mode != TrainMode::Adversarial) tc.pgd.reset();

  DefenseSection resolved = cfg.defense;
  resolved.mode = job.mode;
  resolved.epsilon = job.ball ? std::optional<double>(job.ball->radius) : std::nullopt;
  std::string mask_tag;
  if (job.ball && job.ball->mask) {
    mask_tag = "|mask=";
    for (double m : *job.ball->mask) mask_tag += fmtg(m) + ";";
  }
  std::string model_key = "v1|train|" + job.data_key + "|" + describe(resolved, cfg.model) +
                          (job.ball && job.ball->norm == NormKind::L2 ? "|l2" : "") + mask_tag;

  Model init = initial_model(cfg.model, job.data->dim(),
                             static_cast<std::size_t>(job.data->class_count), cfg.defense.seed);
  double wall = 0.0;
  fs::path report_path = out_dir / ("report-" + sanitize_filename(job.name) + ".csv");
  Model model = obtain_model(cache, model_key, init, *job.data, tc, &wall, &report_path);

  EvalResult ev =
      evaluate_suite(model, ctx.test, eval_ball(cfg.eval, cfg.attack.norm, cfg.attack.epsilon));
  ResultRow row;
  row.experiment = ctx.exp_id;
  row.stage = job.name;
  row.seed = cfg.defense.seed;
  row.natural_acc = ev.natural_acc;
  row.adversarial_acc = ev.adversarial_acc;
  row.wall_seconds = wall;
  row.params = job.params;
  return row;
}

std::string mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::Standard: return "st";
    case TrainMode::Adversarial: return "at";
    case TrainMode::RandNoise: return "randnoise";
  }
  return "?";
}

std::string attack_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::P1: return "P1";
    case AttackKind::P2: return "P2";
    case AttackKind::P3: return "P3";
    case AttackKind::P4: return "P4";
    case AttackKind::P5: return "P5";
  }
  return "?";
}

}  // namespace

void write_rows_csv(const std::vector<ResultRow>& rows, const fs::path& path) {
  std::string out = "experiment,stage,seed,natural_acc,adversarial_acc,wall_seconds,params\n";
  for (const ResultRow& r : rows) {
    if (r.stage.find(',') != std::string::npos || r.params.find(',') != std::string::npos)
      throw std::invalid_argument("result row fields must not contain commas");
    out += r.experiment + "," + r.stage + "," + std::to_string(r.seed) + "," +
           fmt6(r.natural_acc) + "," + (r.adversarial_acc ? fmt6(*r.adversarial_acc) : "") + "," +
           fmt6(r.wall_seconds) + "," + r.params + "\n";
  }
  atomic_write(path, out);
}

Dataset make_dataset(const DataConfig& data, std::optional<std::size_t> n_override,
                     std::optional<std::uint64_t> seed_override) {
  std::size_t n = n_override.value_or(data.n);
  std::uint64_t seed = seed_override.value_or(data.seed);
  switch (data.kind) {
    case DataKind::Mixture: {
      Rng rng(seed);
      return sample_mixture(data.mixture, n, rng);
    }
    case DataKind::Concat: {
      Rng rng(seed);
      return make_concat_dataset(data.concat, n, rng);
    }
    case DataKind::File: {
      Dataset ds = data.file.extension() == ".csv" ? load_dataset_csv(data.file)
                                                   : load_dataset(data.file);
      validate(ds);
      return ds;
    }
  }
  throw std::logic_error("unreachable data kind");
}

std::vector<ResultRow> run_pipeline(const ExperimentConfig& cfg, const fs::path& out_dir,
                                    std::size_t threads) {
  fs::create_directories(out_dir);
  Cache cache(out_dir);
  PipelineContext ctx = prepare_context(cfg, cache, out_dir);

  bool have_attack = cfg.attack.kind.has_value();
  std::string atk = have_attack ? attack_name(*cfg.attack.kind) : "clean";
  std::string common = "data=" + atk +
                       (have_attack ? " atk_eps=" + fmtg(cfg.attack.epsilon) : std::string());

  std::vector<StageJob> jobs;
  jobs.push_back({"st-clean", &ctx.clean, ctx.clean_key, TrainMode::Standard, std::nullopt,
                  "mode=st data=clean"});
  if (have_attack)
    jobs.push_back({"st-attacked", &ctx.attacked, ctx.attacked_key, TrainMode::Standard,
                    std::nullopt, "mode=st " + common});
  if (cfg.defense.mode != TrainMode::Standard) {
    ThreatBall dball{cfg.attack.norm, cfg.defense.epsilon.value_or(cfg.attack.epsilon), {}, {}};
    std::string name = mode_name(cfg.defense.mode) + (have_attack ? "-attacked" : "-clean");
    jobs.push_back({name, have_attack ? &ctx.attacked : &ctx.clean,
                    have_attack ? ctx.attacked_key : ctx.clean_key, cfg.defense.mode, dball,
                    "mode=" + mode_name(cfg.defense.mode) + " " +
                        (have_attack ? common : std::string("data=clean")) +
                        " train_eps=" + fmtg(dball.radius)});
  }

  std::vector<ResultRow> rows(jobs.size());
  parallel_for(jobs.size(), threads,
               [&](std::size_t i) { rows[i] = run_stage(cfg, cache, out_dir, ctx, jobs[i]); });
  write_rows_csv(rows, out_dir / "results.csv");
  return rows;
}

std::vector<ResultRow> run_budget_sweep(const ExperimentConfig& cfg, const fs::path& out_dir,
                                        std::size_t threads) {
  std::vector<double> grid = cfg.sweep.defender_epsilons;
  if (grid.empty())
    throw ConfigError("[sweep] defender_epsilons is required for the budget sweep");
  for (double e : grid)
    if (!(e >= 0.0) || !std::isfinite(e))
      throw ConfigError("[sweep] defender_epsilons must be finite and >= 0");
  std::sort(grid.begin(), grid.end());

  fs::create_directories(out_dir);
  Cache cache(out_dir);
  PipelineContext ctx = prepare_context(cfg, cache, out_dir);
  const Dataset& pool = ctx.attacked;
  const std::string& pool_key = ctx.attacked_key;
  std::string atk = cfg.attack.kind ? attack_name(*cfg.attack.kind) : "clean";

  std::vector<ResultRow> rows(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t i) {
    double eps = grid[i];
    StageJob job;
    job.name = "at-eps" + fmtg(eps);
    job.data = &pool;
    job.data_key = pool_key;
    job.mode = TrainMode::Adversarial;
    job.ball = ThreatBall{cfg.attack.norm, eps, {}, {}};
    job.params = "mode=at data=" + atk + " defender_eps=" + fmtg(eps);
    rows[i] = run_stage(cfg, cache, out_dir, ctx, job);
  });

  std::string csv = "defender_epsilon,natural_acc,adversarial_acc,wall_seconds\n";
  Series nat{"natural accuracy", {}};
  Series adv{"adversarial accuracy", {}};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    csv += fmtg(grid[i]) + "," + fmt6(rows[i].natural_acc) + "," +
           (rows[i].adversarial_acc ? fmt6(*rows[i].adversarial_acc) : "") + "," +
           fmt6(rows[i].wall_seconds) + "\n";
    nat.points.emplace_back(grid[i], rows[i].natural_acc);
    if (rows[i].adversarial_acc) adv.points.emplace_back(grid[i], *rows[i].adversarial_acc);
  }
  atomic_write(out_dir / "sweep.csv", csv);
  std::vector<Series> series{nat};
  if (!adv.points.empty()) series.push_back(adv);
  PlotSpec spec;
  spec.title = "Defender budget sweep (" + atk + "-poisoned data)";
  spec.xlabel = "defender epsilon";
  spec.ylabel = "accuracy";
  write_line_plot(out_dir / "sweep.svg", spec, series);
  return rows;
}

Figure2Files run_figure2(double eta, double sigma, const std::vector<std::size_t>& d_grid,
                         const fs::path& out_dir) {
  if (d_grid.empty()) throw ConfigError("figure2 needs a non-empty d grid");
  fs::create_directories(out_dir);
  std::vector<Figure2Row> curves = figure2_curves(eta, sigma, d_grid);

  std::string csv = "d,acc_bayes_D,acc_bayes_D1,acc_bayes_D2,acc_rob_D1,acc_rob_D2\n";
  std::vector<Series> series(5);
  series[0].label = "bayes-D";
  series[1].label = "bayes-D1";
  series[2].label = "bayes-D2";
  series[3].label = "robust-D1";
  series[4].label = "robust-D2";
  for (const Figure2Row& r : curves) {
    csv += std::to_string(r.d) + "," + fmt6(r.acc_bayes_d) + "," + fmt6(r.acc_bayes_d1) + "," +
           fmt6(r.acc_bayes_d2) + "," + fmt6(r.acc_rob_d1) + "," + fmt6(r.acc_rob_d2) + "\n";
    double d = static_cast<double>(r.d);
    series[0].points.emplace_back(d, r.acc_bayes_d);
    series[1].points.emplace_back(d, r.acc_bayes_d1);
    series[2].points.emplace_back(d, r.acc_bayes_d2);
    series[3].points.emplace_back(d, r.acc_rob_d1);
    series[4].points.emplace_back(d, r.acc_rob_d2);
  }
  Figure2Files files{out_dir / "figure2.csv", out_dir / "figure2.svg"};
  atomic_write(files.csv, csv);
  PlotSpec spec;
  spec.title = "Closed-form natural accuracy, eta=" + fmtg(eta) + " sigma=" + fmtg(sigma);
  spec.xlabel = "d (log scale)";
  spec.ylabel = "accuracy";
  spec.log_x = true;
  write_line_plot(files.svg, spec, series);
  return files;
}

std::vector<ResultRow> run_simplicity_bias(const ExperimentConfig& cfg, const fs::path& out_dir,
                                           std::size_t threads) {
  if (cfg.data.kind != DataKind::Concat)
    throw ConfigError("simplicity-bias needs [data] kind = concat");
  fs::create_directories(out_dir);
  Cache cache(out_dir);

  const ConcatSpec& spec = cfg.data.concat;
  std::size_t dim = spec.dim();
  std::vector<double> mask(dim, 0.0);
  for (std::size_t j = 0; j < spec.simple_dims; ++j) mask[j] = 1.0;
  double eps = cfg.defense.epsilon.value_or(2.0 * spec.simple_margin);
  ThreatBall ball{NormKind::Linf, eps, mask, {}};

  Dataset clean = make_dataset(cfg.data);
  clean.provenance = "clean";
  Dataset test = make_dataset(cfg.data, cfg.eval.test_n, cfg.eval.seed);
  Rng shuffle_rng = Rng(cfg.eval.seed).derive(kRandomizeTag);
  Dataset randomized = randomize_block(test, 0, spec.simple_dims, shuffle_rng);
  std::string clean_key = "v1|clean|" + describe(cfg.data);
  save_dataset(clean, out_dir / "clean.ds");

  std::string exp_id = experiment_id(cfg);
  struct SbJob {
    std::string label;
    TrainMode mode;
    std::optional<ThreatBall> ball;
  };
  std::vector<SbJob> jobs{{"st", TrainMode::Standard, std::nullopt},
                          {"at-masked", TrainMode::Adversarial, ball}};
  std::vector<std::array<ResultRow, 2>> per_job(jobs.size());

  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    const SbJob& job = jobs[i];
    TrainConfig tc = defender_train_config(cfg.defense);
    tc.mode = job.mode;
    tc.ball = job.ball;
    if (job.mode != TrainMode::Adversarial) tc.pgd.reset();

    DefenseSection resolved = cfg.defense;
    resolved.mode = job.mode;
    resolved.epsilon = job.ball ? std::optional<double>(job.ball->radius) : std::nullopt;
    std::string mask_tag = job.ball ? "|mask=simple" + std::to_string(spec.simple_dims) : "";
    std::string key = "v1|train|" + clean_key + "|" + describe(resolved, cfg.model) + mask_tag;

    Model init = initial_model(cfg.model, dim, static_cast<std::size_t>(clean.class_count),
                               cfg.defense.seed);
    double wall = 0.0;
    fs::path report_path = out_dir / ("report-" + job.label + ".csv");
    Model model = obtain_model(cache, key, init, clean, tc, &wall, &report_path);

    std::string eps_note = job.ball ? " train_eps=" + fmtg(job.ball->radius) : "";
    ResultRow plain;
    plain.experiment = exp_id;
    plain.stage = job.label + "-plain";
    plain.seed = cfg.defense.seed;
    plain.natural_acc = accuracy(model, test);
    plain.wall_seconds = wall;
    plain.params = "mode=" + mode_name(job.mode) + " eval=plain" + eps_note;

    ResultRow rand = plain;
    rand.stage = job.label + "-randomized";
    rand.natural_acc = accuracy(model, randomized);
    rand.wall_seconds = 0.0;
    rand.params = "mode=" + mode_name(job.mode) + " eval=randomized-simple-block" + eps_note;
    per_job[i] = {plain, rand};
  });

  std::vector<ResultRow> rows;
  for (auto& pair : per_job)
    for (ResultRow& r : pair) rows.push_back(std::move(r));
  write_rows_csv(rows, out_dir / "sb.csv");
  return rows;
}

std::vector<std::size_t> log_grid(std::size_t lo, std::size_t hi, std::size_t per_decade) {
  if (lo < 1 || hi < lo || per_decade < 1)
    throw std::domain_error("log_grid needs 1 <= lo <= hi and per_decade >= 1");
  std::vector<std::size_t> out;
  double step = 1.0 / static_cast<double>(per_decade);
  long long k = std::llround(std::floor(std::log10(static_cast<double>(lo)) / step)) - 1;
  for (;; ++k) {
    double v = std::pow(10.0, static_cast<double>(k) * step);
    auto rounded = static_cast<std::size_t>(std::llround(v));
    if (rounded < lo) continue;
    if (rounded > hi) break;
    if (out.empty() || out.back() != rounded) out.push_back(rounded);
  }
  return out;
}

std::vector<std::size_t> default_figure2_grid() { return log_grid(1, 100000, 10); }

Model initial_model(const ModelSection& m, std::size_t dim, std::size_t classes,
                    std::uint64_t seed) {
  if (m.linear) return make_linear(classes, dim);
  Rng rng = Rng(seed).derive(kInitTag);
  return make_mlp(dim, m.hidden, classes, rng);
}

TrainConfig defender_train_config(const DefenseSection& d) {
  TrainConfig tc;
  tc.epochs = d.epochs;
  tc.batch = d.batch;
  tc.lr.initial = d.lr;
  tc.lr.decay_epochs = d.decay_epochs;
  tc.lr.factor = d.decay_factor;
  tc.momentum = d.momentum;
  tc.weight_decay = d.weight_decay;
  tc.seed = d.seed;
  tc.holdout = d.holdout;
  tc.mode = d.mode;
  if (d.mode == TrainMode::Adversarial) {
    PgdConfig pgd;
    pgd.steps = d.pgd_steps;
    pgd.step_size = d.pgd_step_size;
    pgd.random_init = d.pgd_random_init;
    tc.pgd = pgd;
  }
  return tc;
}

Dataset run_attack_stage(const ExperimentConfig& cfg, const fs::path& out_dir) {
  if (!cfg.attack.kind) throw ConfigError("[attack] kind is required for the attack stage");
  fs::create_directories(out_dir);
  Cache cache(out_dir);
  return prepare_context(cfg, cache, out_dir).attacked;
}

}  // namespace delusive
