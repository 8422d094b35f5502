#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "delusive/attacks.hpp"
#include "delusive/config.hpp"
#include "delusive/data.hpp"
#include "delusive/errors.hpp"
#include "delusive/harness.hpp"
#include "delusive/models.hpp"
#include "delusive/training.hpp"
#include "delusive/wasserstein.hpp"

namespace fs = std::filesystem;
using namespace delusive;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_dir;  // --out-dir / DELUSIVE_OUT_DIR / config [output] / "out"
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
};

ExperimentConfig load_cfg(const GlobalOpts& g) {
  if (g.config_path.empty()) throw ConfigError("--config is required for this command");
  ExperimentConfig cfg = load_experiment_config_file(g.config_path);
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  if (cfg.out_dir.empty()) cfg.out_dir = "out";
  if (g.seed) {
    // One knob for repeated trials: stage seeds stay distinct but move together.
    cfg.data.seed = *g.seed;
    cfg.attack.seed = *g.seed + 1;
    cfg.defense.seed = *g.seed + 2;
  }
  return cfg;
}

Dataset load_any(const fs::path& path) {
  return path.extension() == ".csv" ? load_dataset_csv(path) : load_dataset(path);
}

void save_any(const Dataset& ds, const fs::path& path) {
  if (path.extension() == ".csv")
    save_dataset_csv(ds, path);
  else
    save_dataset(ds, path);
}

void print_rows(const std::vector<ResultRow>& rows) {
  for (const ResultRow& r : rows) {
    std::printf("%-22s natural=%.4f", r.stage.c_str(), r.natural_acc);
    if (r.adversarial_acc) std::printf(" adversarial=%.4f", *r.adversarial_acc);
    std::printf(" wall=%.1fs  %s\n", r.wall_seconds, r.params.c_str());
  }
}

ThreatBall defender_ball(const ExperimentConfig& cfg) {
  return ThreatBall{cfg.attack.norm, cfg.defense.epsilon.value_or(cfg.attack.epsilon), {}, {}};
}

int run_synth(const GlobalOpts& g, const std::string& out_file, bool and_csv) {
  ExperimentConfig cfg = load_cfg(g);
  Dataset ds = make_dataset(cfg.data);
  ds.provenance = "clean";
  fs::path out = out_file.empty() ? fs::path(cfg.out_dir) / "clean.ds" : fs::path(out_file);
  fs::create_directories(out.parent_path().empty() ? "." : out.parent_path());
  save_any(ds, out);
  if (and_csv && out.extension() != ".csv") {
    fs::path csv = out;
    csv.replace_extension(".csv");
    save_dataset_csv(ds, csv);
  }
  std::printf("wrote %s  (n=%zu dim=%zu classes=%d)\n", out.string().c_str(), ds.size(), ds.dim(),
              ds.class_count);
  return 0;
}

int run_attack_cmd(const GlobalOpts& g) {
  ExperimentConfig cfg = load_cfg(g);
  Dataset attacked = run_attack_stage(cfg, cfg.out_dir);
  std::printf("attack %s passed the legality gate (n=%zu, budget %.6g)\n",
              attacked.provenance.c_str(), attacked.size(), cfg.attack.epsilon);
  std::printf("wrote %s and %s\n", (fs::path(cfg.out_dir) / "clean.ds").string().c_str(),
              (fs::path(cfg.out_dir) / "attacked.ds").string().c_str());
  return 0;
}

int run_train_cmd(const GlobalOpts& g, const std::string& data_file, const std::string& out_file) {
  ExperimentConfig cfg = load_cfg(g);
  Dataset ds = data_file.empty() ? make_dataset(cfg.data) : load_any(data_file);
  TrainConfig tc = defender_train_config(cfg.defense);
  if (tc.mode != TrainMode::Standard) tc.ball = defender_ball(cfg);
  Model init = initial_model(cfg.model, ds.dim(), static_cast<std::size_t>(ds.class_count),
                             cfg.defense.seed);
  TrainReport report = train(init, ds, tc);
  fs::path out = out_file.empty() ? fs::path(cfg.out_dir) / "model.bin" : fs::path(out_file);
  fs::create_directories(out.parent_path().empty() ? "." : out.parent_path());
  save_model(report.model, out);
  save_train_report_csv(report, fs::path(cfg.out_dir) / "report-train.csv");
  std::printf("trained %zu epochs (best %zu), final loss %.6f, wall %.1fs\n",
              report.train_loss.size(), report.best_epoch + 1,
              report.train_loss.empty() ? 0.0 : report.train_loss.back(), report.wall_seconds);
  std::printf("wrote %s\n", out.string().c_str());
  return 0;
}

int run_eval_cmd(const GlobalOpts& g, const std::string& model_file, const std::string& data_file) {
  ExperimentConfig cfg = load_cfg(g);
  Model model = load_model(model_file);
  Dataset test = data_file.empty() ? make_dataset(cfg.data, cfg.eval.test_n, cfg.eval.seed)
                                   : load_any(data_file);
  std::optional<ThreatBall> ball;
  if (cfg.eval.adversarial)
    ball = ThreatBall{cfg.attack.norm, cfg.eval.epsilon.value_or(cfg.attack.epsilon), {}, {}};
  EvalResult r = evaluate_suite(model, test, ball);
  std::printf("natural accuracy     %.6f\n", r.natural_acc);
  if (r.adversarial_acc) std::printf("adversarial accuracy %.6f\n", *r.adversarial_acc);
  return 0;
}

int run_winf_cmd(const std::string& a_file, const std::string& b_file, const std::string& metric,
                 std::optional<double> epsilon) {
  Dataset a = load_any(a_file);
  Dataset b = load_any(b_file);
  CostSpec cost;
  cost.metric = metric == "l2" ? NormKind::L2 : NormKind::Linf;
  MatchingResult r = exact_winf(a, b, cost);
  if (r.value)
    std::printf("winf = %.9g\n", *r.value);
  else
    std::printf("winf = inf\n");
  if (epsilon) {
    bool inside = in_winf_ball(a, b, *epsilon, cost);
    std::printf("%s the radius-%.9g ball\n", inside ? "inside" : "outside", *epsilon);
    return inside ? 0 : 1;
  }
  return 0;
}

int run_figure2_cmd(const GlobalOpts& g, double eta, double sigma, std::size_t per_decade,
                    std::size_t d_max) {
  std::string out_dir = !g.out_dir.empty() ? g.out_dir : "out";
  Figure2Files files = run_figure2(eta, sigma, log_grid(1, d_max, per_decade), out_dir);
  std::printf("wrote %s and %s\n", files.csv.string().c_str(), files.svg.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"delusive: clean-label poisoning attacks, adversarial-training defense,\n"
               "exact infinity-Wasserstein legality checks, and closed-form mixture curves"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--out-dir", g.out_dir, "Output directory (overrides config [output])")
      ->envname("DELUSIVE_OUT_DIR");
  app.add_option("--seed", g.seed, "Master seed: sets data/attack/defense stage seeds");
  app.add_option("--threads", g.threads, "Worker threads for sweeps and paired stages");

  std::string out_file, data_file, model_file, a_file, b_file, metric = "linf";
  bool and_csv = false;
  std::optional<double> winf_epsilon;
  double eta = 0.01, sigma = 1.0;
  std::size_t per_decade = 10, d_max = 100000;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", g.config_path, "Experiment config file (INI sections)");
  };

  CLI::App* synth = app.add_subcommand("synth", "Sample the configured dataset to disk");
  add_config(synth);
  synth->add_option("-o,--out", out_file, "Output path (.ds binary or .csv)");
  synth->add_flag("--csv", and_csv, "Also write a CSV copy next to the binary");

  CLI::App* attack = app.add_subcommand(
      "attack", "Train the reference model, run the configured attack, verify legality");
  add_config(attack);

  CLI::App* train_cmd =
      app.add_subcommand("train", "Train the configured defender on a dataset");
  add_config(train_cmd);
  train_cmd->add_option("-d,--data", data_file, "Training dataset (default: synth from config)");
  train_cmd->add_option("-o,--out", out_file, "Model output path");

  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a saved model on clean test data");
  add_config(eval_cmd);
  eval_cmd->add_option("-m,--model", model_file, "Model checkpoint")->required();
  eval_cmd->add_option("-d,--data", data_file, "Test dataset (default: fresh sample per config)");

  CLI::App* winf = app.add_subcommand(
      "winf", "Exact label-respecting infinity-Wasserstein distance between two datasets");
  winf->add_option("-a", a_file, "First dataset")->required();
  winf->add_option("-b", b_file, "Second dataset")->required();
  winf->add_option("--metric", metric, "Ground metric: linf (default) or l2")
      ->check(CLI::IsMember({"linf", "l2"}));
  winf->add_option("--epsilon", winf_epsilon,
                   "Ball radius: exit 0 if b is within the ball around a, 1 otherwise");

  CLI::App* pipeline = app.add_subcommand(
      "pipeline", "Full run: synth, reference model, attack, legality gate, defenders, eval");
  add_config(pipeline);

  CLI::App* sweep = app.add_subcommand(
      "sweep-budget", "One adversarial run per defender budget against a fixed attacked set");
  add_config(sweep);

  CLI::App* fig2 = app.add_subcommand(
      "figure2", "Closed-form accuracy curves for the five mixture classifiers over d");
  fig2->add_option("--eta", eta, "Mixture eta (default 0.01)");
  fig2->add_option("--sigma", sigma, "Mixture sigma (default 1.0)");
  fig2->add_option("--per-decade", per_decade, "Grid points per decade (default 10)");
  fig2->add_option("--d-max", d_max, "Largest d (default 100000)");

  CLI::App* sb = app.add_subcommand(
      "simplicity-bias", "ST vs masked-ball AT on the concat dataset, plain and randomized eval");
  add_config(sb);

  // Let --out-dir / --seed / --threads appear after the subcommand name too.
  for (CLI::App* cmd : {synth, attack, train_cmd, eval_cmd, winf, pipeline, sweep, fig2, sb})
    cmd->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return run_synth(g, out_file, and_csv);
    if (attack->parsed()) return run_attack_cmd(g);
    if (train_cmd->parsed()) return run_train_cmd(g, data_file, out_file);
    if (eval_cmd->parsed()) return run_eval_cmd(g, model_file, data_file);
    if (winf->parsed()) return run_winf_cmd(a_file, b_file, metric, winf_epsilon);
    if (fig2->parsed()) return run_figure2_cmd(g, eta, sigma, per_decade, d_max);
    if (pipeline->parsed()) {
      ExperimentConfig cfg = load_cfg(g);
      print_rows(run_pipeline(cfg, cfg.out_dir, g.threads));
      std::printf("wrote %s\n", (fs::path(cfg.out_dir) / "results.csv").string().c_str());
      return 0;
    }
    if (sweep->parsed()) {
      ExperimentConfig cfg = load_cfg(g);
      print_rows(run_budget_sweep(cfg, cfg.out_dir, g.threads));
      std::printf("wrote %s and %s\n", (fs::path(cfg.out_dir) / "sweep.csv").string().c_str(),
                  (fs::path(cfg.out_dir) / "sweep.svg").string().c_str());
      return 0;
    }
    if (sb->parsed()) {
      ExperimentConfig cfg = load_cfg(g);
      print_rows(run_simplicity_bias(cfg, cfg.out_dir, g.threads));
      std::printf("wrote %s\n", (fs::path(cfg.out_dir) / "sb.csv").string().c_str());
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const LegalityError& e) {
    std::fprintf(stderr, "legality failure: %s\n", e.what());
    return 3;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
