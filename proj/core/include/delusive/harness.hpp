#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "delusive/config.hpp"
#include "delusive/data.hpp"
#include "delusive/models.hpp"
#include "delusive/training.hpp"

namespace delusive {

struct ResultRow {
  std::string experiment;  // deterministic id derived from the config
  std::string stage;       // e.g. "st-clean", "at-P1", "sweep eps=0.05"
  std::uint64_t seed = 0;
  double natural_acc = 0.0;
  std::optional<double> adversarial_acc;
  double wall_seconds = 0.0;
  std::string params;  // free text, no commas
};

// Header + one line per row, %.6f floats, written to a temp file and renamed
// into place so partial files never appear.
void write_rows_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path);

// Builds the dataset a config describes (sampling or loading). Overrides let
// the evaluation stage draw a fresh clean test set from the same spec.
Dataset make_dataset(const DataConfig& data, std::optional<std::size_t> n_override = {},
                     std::optional<std::uint64_t> seed_override = {});

// Deterministic initial weights for the configured architecture; `seed` is
// the owning stage's seed, substreamed internally so it never collides with
// that stage's other draws.
Model initial_model(const ModelSection& m, std::size_t dim, std::size_t classes,
                    std::uint64_t seed);

// Maps the [defense] section onto a TrainConfig. The ball is left empty;
// callers attach one for adversarial / randnoise modes.
TrainConfig defender_train_config(const DefenseSection& d);

// synth -> reference model -> attack -> legality gate, without defender
// training; persists clean.ds, attacked.ds (and universal.csv) in out_dir.
Dataset run_attack_stage(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

// synth -> reference model -> attack -> legality gate -> ST/AT training ->
// evaluation on fresh clean test data. Completed stages are reused from the
// on-disk cache keyed by a content hash of their inputs.
std::vector<ResultRow> run_pipeline(const ExperimentConfig& cfg,
                                    const std::filesystem::path& out_dir,
                                    std::size_t threads = 1);

// One adversarial run per defender budget in cfg.sweep.defender_epsilons
// against a fixed attacked dataset; rows keep the grid order.
std::vector<ResultRow> run_budget_sweep(const ExperimentConfig& cfg,
                                        const std::filesystem::path& out_dir,
                                        std::size_t threads = 1);

struct Figure2Files {
  std::filesystem::path csv;
  std::filesystem::path svg;
};

// Five closed-form accuracy curves over the d grid, as CSV and an SVG line
// plot with a log d axis.
Figure2Files run_figure2(double eta, double sigma, const std::vector<std::size_t>& d_grid,
                         const std::filesystem::path& out_dir);

// Trains ST and masked-ball AT on the concatenated dataset and scores both
// on plain and simple-block-randomized test data (four rows).
std::vector<ResultRow> run_simplicity_bias(const ExperimentConfig& cfg,
                                           const std::filesystem::path& out_dir,
                                           std::size_t threads = 1);

// Round(10^(k/per_decade)) values covering [lo, hi], deduplicated.
std::vector<std::size_t> log_grid(std::size_t lo, std::size_t hi, std::size_t per_decade);
std::vector<std::size_t> default_figure2_grid();  // log_grid(1, 1e5, 10)

}  // namespace delusive
