#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "delusive/attacks.hpp"
#include "delusive/data.hpp"
#include "delusive/threat_model.hpp"
#include "delusive/training.hpp"

namespace delusive {

// Flat INI-style text: [section] headers, key = value lines, # or ;
// comments. Duplicate keys and malformed lines are hard errors.
struct ConfigFile {
  std::map<std::string, std::map<std::string, std::string>> sections;

  static ConfigFile parse_string(const std::string& text, const std::string& origin = "<string>");
  static ConfigFile parse_file(const std::filesystem::path& path);
};

// Typed, consumption-tracked access to one section. Every key must be read
// exactly once; finish() rejects leftovers so config drift cannot pass
// silently.
class SectionReader {
 public:
  SectionReader(const ConfigFile& file, const std::string& section);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback);
  std::string require_string(const std::string& key);
  double get_double(const std::string& key, double fallback);
  std::int64_t get_int(const std::string& key, std::int64_t fallback);
  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback);
  std::vector<std::size_t> get_size_list(const std::string& key, std::vector<std::size_t> fallback);

  void finish();  // throws ConfigError on unconsumed keys

 private:
  const std::map<std::string, std::string>* kv_;  // null when section absent
  std::string section_;
  std::set<std::string> used_;
  const std::string* find(const std::string& key);
};

enum class DataKind { Mixture, Concat, File };

struct DataConfig {
  DataKind kind = DataKind::Mixture;
  GaussianMixtureSpec mixture{0.05, 1.0, 50, MixtureVariant::Original};
  ConcatSpec concat;
  std::filesystem::path file;
  std::size_t n = 4000;
  std::uint64_t seed = 7;
};

struct AttackSection {
  std::optional<AttackKind> kind;  // absent = no attack stage
  double epsilon = 0.1;
  NormKind norm = NormKind::Linf;
  std::uint64_t seed = 11;
  std::optional<std::size_t> steps;
  std::optional<double> step_size;
  std::size_t batch = 128;
};

struct DefenseSection {
  TrainMode mode = TrainMode::Adversarial;
  std::optional<double> epsilon;  // absent -> attacker's epsilon
  std::uint64_t seed = 13;
  std::size_t epochs = 60;
  std::size_t batch = 128;
  double lr = 0.1;
  std::vector<std::size_t> decay_epochs = {40, 50};
  double decay_factor = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t holdout = 500;
  std::size_t pgd_steps = 7;
  std::optional<double> pgd_step_size;
  bool pgd_random_init = true;
};

struct ModelSection {
  bool linear = false;  // default: one-hidden-layer MLP
  std::size_t hidden = 64;
};

struct EvalSection {
  std::size_t test_n = 2000;
  std::uint64_t seed = 99;  // fresh clean test data, never the training seed
  bool adversarial = false;
  std::optional<double> epsilon;  // adversarial eval budget; absent -> attacker's
};

struct SweepSection {
  std::vector<double> defender_epsilons;
};

struct ExperimentConfig {
  DataConfig data;
  AttackSection attack;
  DefenseSection defense;
  ModelSection model;
  EvalSection eval;
  SweepSection sweep;
  std::filesystem::path out_dir;
};

// Parses and validates the whole experiment file. Unknown sections or keys
// are ConfigErrors.
ExperimentConfig load_experiment_config(const ConfigFile& file);
ExperimentConfig load_experiment_config_file(const std::filesystem::path& path);

// Canonical one-line rendering of the parts that determine a stage's output;
// used for content-hash caching.
std::string describe(const DataConfig& d);
std::string describe(const AttackSection& a);
std::string describe(const DefenseSection& d, const ModelSection& m);

}  // namespace delusive
