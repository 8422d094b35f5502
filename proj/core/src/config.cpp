#include "delusive/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "delusive/errors.hpp"

namespace delusive {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

ConfigFile ConfigFile::parse_string(const std::string& text, const std::string& origin) {
  ConfigFile cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) {
    throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t cut = line.find_first_of("#;");
    if (cut != std::string::npos) line.resize(cut);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) fail("empty section name");
      if (cfg.sections.count(section)) fail("duplicate section [" + section + "]");
      cfg.sections[section];
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    if (section.empty()) fail("key outside any section");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail("empty key");
    if (value.empty()) fail("missing value for key '" + key + "'");
    auto [it, inserted] = cfg.sections[section].emplace(key, value);
    (void)it;
    if (!inserted) fail("duplicate key '" + key + "'");
  }
  return cfg;
}

ConfigFile ConfigFile::parse_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError(IoError::Code::OpenOrRead, "cannot open config: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  if (f.bad()) throw IoError(IoError::Code::OpenOrRead, "read failed: " + path.string());
  return parse_string(ss.str(), path.string());
}

SectionReader::SectionReader(const ConfigFile& file, const std::string& section)
    : kv_(nullptr), section_(section) {
  auto it = file.sections.find(section);
  if (it != file.sections.end()) kv_ = &it->second;
}

const std::string* SectionReader::find(const std::string& key) {
  if (!kv_) return nullptr;
  used_.insert(key);
  auto it = kv_->find(key);
  return it == kv_->end() ? nullptr : &it->second;
}

bool SectionReader::has(const std::string& key) const {
  return kv_ && kv_->count(key) > 0;
}

std::string SectionReader::get_string(const std::string& key, const std::string& fallback) {
  const std::string* v = find(key);
  return v ? *v : fallback;
}

std::string SectionReader::require_string(const std::string& key) {
  const std::string* v = find(key);
  if (!v) throw ConfigError("[" + section_ + "] missing required key '" + key + "'");
  return *v;
}

double SectionReader::get_double(const std::string& key, double fallback) {
  const std::string* v = find(key);
  if (!v) return fallback;
  char* end = nullptr;
  const double d = std::strtod(v->c_str(), &end);
  if (end != v->c_str() + v->size())
    throw ConfigError("[" + section_ + "] " + key + ": not a number: '" + *v + "'");
  return d;
}

std::int64_t SectionReader::get_int(const std::string& key, std::int64_t fallback) {
  const std::string* v = find(key);
  if (!v) return fallback;
  char* end = nullptr;
  const long long d = std::strtoll(v->c_str(), &end, 10);
  if (end != v->c_str() + v->size())
    throw ConfigError("[" + section_ + "] " + key + ": not an integer: '" + *v + "'");
  return d;
}

std::uint64_t SectionReader::get_seed(const std::string& key, std::uint64_t fallback) {
  const std::string* v = find(key);
  if (!v) return fallback;
  char* end = nullptr;
  const unsigned long long d = std::strtoull(v->c_str(), &end, 0);
  if (end != v->c_str() + v->size())
    throw ConfigError("[" + section_ + "] " + key + ": not a seed: '" + *v + "'");
  return d;
}

bool SectionReader::get_bool(const std::string& key, bool fallback) {
  const std::string* v = find(key);
  if (!v) return fallback;
  const std::string s = lower(*v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("[" + section_ + "] " + key + ": not a boolean: '" + *v + "'");
}

namespace {

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

}  // namespace

std::vector<double> SectionReader::get_double_list(const std::string& key,
                                                   std::vector<double> fallback) {
  const std::string* v = find(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const std::string& item : split_commas(*v)) {
    char* end = nullptr;
    const double d = std::strtod(item.c_str(), &end);
    if (item.empty() || end != item.c_str() + item.size())
      throw ConfigError("[" + section_ + "] " + key + ": bad list element '" + item + "'");
    out.push_back(d);
  }
  return out;
}

std::vector<std::size_t> SectionReader::get_size_list(const std::string& key,
                                                      std::vector<std::size_t> fallback) {
  const std::string* v = find(key);
  if (!v) return fallback;
  std::vector<std::size_t> out;
  for (const std::string& item : split_commas(*v)) {
    char* end = nullptr;
    const unsigned long long d = std::strtoull(item.c_str(), &end, 10);
    if (item.empty() || end != item.c_str() + item.size())
      throw ConfigError("[" + section_ + "] " + key + ": bad list element '" + item + "'");
    out.push_back(static_cast<std::size_t>(d));
  }
  return out;
}

void SectionReader::finish() {
  if (!kv_) return;
  for (const auto& [key, value] : *kv_) {
    (void)value;
    if (!used_.count(key))
      throw ConfigError("[" + section_ + "] unknown key '" + key + "'");
  }
}

namespace {

DataKind parse_data_kind(const std::string& s) {
  const std::string v = lower(s);
  if (v == "mixture") return DataKind::Mixture;
  if (v == "concat") return DataKind::Concat;
  if (v == "file") return DataKind::File;
  throw ConfigError("[data] kind must be mixture, concat, or file (got '" + s + "')");
}

NormKind parse_norm(const std::string& s, const std::string& where) {
  const std::string v = lower(s);
  if (v == "linf") return NormKind::Linf;
  if (v == "l2") return NormKind::L2;
  throw ConfigError(where + " norm must be linf or l2 (got '" + s + "')");
}

std::optional<AttackKind> parse_attack_kind(const std::string& s) {
  const std::string v = lower(s);
  if (v == "none") return std::nullopt;
  if (v == "p1") return AttackKind::P1;
  if (v == "p2") return AttackKind::P2;
  if (v == "p3") return AttackKind::P3;
  if (v == "p4") return AttackKind::P4;
  if (v == "p5") return AttackKind::P5;
  throw ConfigError("[attack] kind must be none or p1..p5 (got '" + s + "')");
}

TrainMode parse_mode(const std::string& s) {
  const std::string v = lower(s);
  if (v == "st" || v == "standard") return TrainMode::Standard;
  if (v == "at" || v == "adversarial") return TrainMode::Adversarial;
  if (v == "randnoise") return TrainMode::RandNoise;
  throw ConfigError("[defense] mode must be st, at, or randnoise (got '" + s + "')");
}

}  // namespace

ExperimentConfig load_experiment_config(const ConfigFile& file) {
  static const std::set<std::string> known = {"data",  "attack", "defense", "model",
                                              "eval",  "sweep",  "output"};
  for (const auto& [name, kv] : file.sections) {
    (void)kv;
    if (!known.count(name)) throw ConfigError("unknown config section [" + name + "]");
  }

  ExperimentConfig cfg;

  SectionReader data(file, "data");
  cfg.data.kind = parse_data_kind(data.get_string("kind", "mixture"));
  cfg.data.n = static_cast<std::size_t>(data.get_int("n", 4000));
  cfg.data.seed = data.get_seed("seed", cfg.data.seed);
  cfg.data.mixture.eta = data.get_double("eta", cfg.data.mixture.eta);
  cfg.data.mixture.sigma = data.get_double("sigma", cfg.data.mixture.sigma);
  cfg.data.mixture.d = static_cast<std::size_t>(
      data.get_int("d", static_cast<std::int64_t>(cfg.data.mixture.d)));
  cfg.data.concat.simple_dims = static_cast<std::size_t>(
      data.get_int("simple_dims", static_cast<std::int64_t>(cfg.data.concat.simple_dims)));
  cfg.data.concat.simple_margin =
      data.get_double("simple_margin", cfg.data.concat.simple_margin);
  cfg.data.concat.complex_spec.eta =
      data.get_double("complex_eta", cfg.data.concat.complex_spec.eta);
  cfg.data.concat.complex_spec.sigma =
      data.get_double("complex_sigma", cfg.data.concat.complex_spec.sigma);
  cfg.data.concat.complex_spec.d = static_cast<std::size_t>(
      data.get_int("complex_d", static_cast<std::int64_t>(cfg.data.concat.complex_spec.d)));
  if (cfg.data.kind == DataKind::File)
    cfg.data.file = data.require_string("path");
  else if (data.has("path"))
    throw ConfigError("[data] path is only valid with kind = file");
  data.finish();
  if (cfg.data.n == 0) throw ConfigError("[data] n must be >= 1");

  SectionReader attack(file, "attack");
  cfg.attack.kind = parse_attack_kind(attack.get_string("kind", "none"));
  cfg.attack.epsilon = attack.get_double("epsilon", cfg.attack.epsilon);
  cfg.attack.norm = parse_norm(attack.get_string("norm", "linf"), "[attack]");
  cfg.attack.seed = attack.get_seed("seed", cfg.attack.seed);
  if (attack.has("steps"))
    cfg.attack.steps = static_cast<std::size_t>(attack.get_int("steps", 0));
  else
    attack.get_int("steps", 0);
  if (attack.has("step_size"))
    cfg.attack.step_size = attack.get_double("step_size", 0.0);
  else
    attack.get_double("step_size", 0.0);
  cfg.attack.batch = static_cast<std::size_t>(
      attack.get_int("batch", static_cast<std::int64_t>(cfg.attack.batch)));
  attack.finish();
  if (cfg.attack.epsilon < 0.0) throw ConfigError("[attack] epsilon must be >= 0");

  SectionReader def(file, "defense");
  cfg.defense.mode = parse_mode(def.get_string("mode", "at"));
  if (def.has("epsilon")) cfg.defense.epsilon = def.get_double("epsilon", 0.0);
  else def.get_double("epsilon", 0.0);
  cfg.defense.seed = def.get_seed("seed", cfg.defense.seed);
  cfg.defense.epochs = static_cast<std::size_t>(
      def.get_int("epochs", static_cast<std::int64_t>(cfg.defense.epochs)));
  cfg.defense.batch = static_cast<std::size_t>(
      def.get_int("batch", static_cast<std::int64_t>(cfg.defense.batch)));
  cfg.defense.lr = def.get_double("lr", cfg.defense.lr);
  cfg.defense.decay_epochs = def.get_size_list("decay_epochs", cfg.defense.decay_epochs);
  cfg.defense.decay_factor = def.get_double("decay_factor", cfg.defense.decay_factor);
  cfg.defense.momentum = def.get_double("momentum", cfg.defense.momentum);
  cfg.defense.weight_decay = def.get_double("weight_decay", cfg.defense.weight_decay);
  cfg.defense.holdout = static_cast<std::size_t>(
      def.get_int("holdout", static_cast<std::int64_t>(cfg.defense.holdout)));
  cfg.defense.pgd_steps = static_cast<std::size_t>(
      def.get_int("pgd_steps", static_cast<std::int64_t>(cfg.defense.pgd_steps)));
  if (def.has("pgd_step_size")) cfg.defense.pgd_step_size = def.get_double("pgd_step_size", 0.0);
  else def.get_double("pgd_step_size", 0.0);
  cfg.defense.pgd_random_init = def.get_bool("pgd_random_init", cfg.defense.pgd_random_init);
  def.finish();

  SectionReader model(file, "model");
  const std::string mk = lower(model.get_string("kind", "mlp"));
  if (mk == "linear") cfg.model.linear = true;
  else if (mk == "mlp") cfg.model.linear = false;
  else throw ConfigError("[model] kind must be mlp or linear (got '" + mk + "')");
  cfg.model.hidden = static_cast<std::size_t>(
      model.get_int("hidden", static_cast<std::int64_t>(cfg.model.hidden)));
  model.finish();
  if (!cfg.model.linear && cfg.model.hidden == 0)
    throw ConfigError("[model] hidden must be >= 1 for mlp");

  SectionReader eval(file, "eval");
  cfg.eval.test_n = static_cast<std::size_t>(
      eval.get_int("test_n", static_cast<std::int64_t>(cfg.eval.test_n)));
  cfg.eval.seed = eval.get_seed("seed", cfg.eval.seed);
  cfg.eval.adversarial = eval.get_bool("adversarial", cfg.eval.adversarial);
  if (eval.has("epsilon")) cfg.eval.epsilon = eval.get_double("epsilon", 0.0);
  else eval.get_double("epsilon", 0.0);
  eval.finish();
  if (cfg.eval.test_n == 0) throw ConfigError("[eval] test_n must be >= 1");

  SectionReader sweep(file, "sweep");
  cfg.sweep.defender_epsilons = sweep.get_double_list("defender_epsilons", {});
  sweep.finish();

  SectionReader output(file, "output");
  cfg.out_dir = output.get_string("dir", "");
  output.finish();

  return cfg;
}

ExperimentConfig load_experiment_config_file(const std::filesystem::path& path) {
  return load_experiment_config(ConfigFile::parse_file(path));
}

namespace {

void put_num(std::string& s, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  s += buf;
}

}  // namespace

std::string describe(const DataConfig& d) {
  std::string s = "data:";
  switch (d.kind) {
    case DataKind::Mixture:
      s += "mixture eta=";
      put_num(s, d.mixture.eta);
      s += " sigma=";
      put_num(s, d.mixture.sigma);
      s += " d=" + std::to_string(d.mixture.d);
      break;
    case DataKind::Concat:
      s += "concat simple_dims=" + std::to_string(d.concat.simple_dims) + " margin=";
      put_num(s, d.concat.simple_margin);
      s += " ceta=";
      put_num(s, d.concat.complex_spec.eta);
      s += " csigma=";
      put_num(s, d.concat.complex_spec.sigma);
      s += " cd=" + std::to_string(d.concat.complex_spec.d);
      break;
    case DataKind::File:
      s += "file " + d.file.string();
      break;
  }
  s += " n=" + std::to_string(d.n) + " seed=" + std::to_string(d.seed);
  return s;
}

std::string describe(const AttackSection& a) {
  std::string s = "attack:";
  if (!a.kind.has_value()) return s + "none";
  switch (*a.kind) {
    case AttackKind::P1: s += "p1"; break;
    case AttackKind::P2: s += "p2"; break;
    case AttackKind::P3: s += "p3"; break;
    case AttackKind::P4: s += "p4"; break;
    case AttackKind::P5: s += "p5"; break;
  }
  s += " eps=";
  put_num(s, a.epsilon);
  s += a.norm == NormKind::Linf ? " linf" : " l2";
  s += " seed=" + std::to_string(a.seed);
  s += " steps=" + (a.steps ? std::to_string(*a.steps) : std::string("default"));
  s += " step_size=";
  if (a.step_size) put_num(s, *a.step_size); else s += "default";
  s += " batch=" + std::to_string(a.batch);
  return s;
}

std::string describe(const DefenseSection& d, const ModelSection& m) {
  std::string s = "defense:";
  switch (d.mode) {
    case TrainMode::Standard: s += "st"; break;
    case TrainMode::Adversarial: s += "at"; break;
    case TrainMode::RandNoise: s += "randnoise"; break;
  }
  s += " eps=";
  if (d.epsilon) put_num(s, *d.epsilon); else s += "attacker";
  s += " seed=" + std::to_string(d.seed);
  s += " epochs=" + std::to_string(d.epochs) + " batch=" + std::to_string(d.batch);
  s += " lr=";
  put_num(s, d.lr);
  s += " decay=";
  for (std::size_t i = 0; i < d.decay_epochs.size(); ++i)
    s += (i ? "/" : "") + std::to_string(d.decay_epochs[i]);
  s += " factor=";
  put_num(s, d.decay_factor);
  s += " momentum=";
  put_num(s, d.momentum);
  s += " wd=";
  put_num(s, d.weight_decay);
  s += " holdout=" + std::to_string(d.holdout);
  s += " pgd=" + std::to_string(d.pgd_steps);
  s += " pgd_step=";
  if (d.pgd_step_size) put_num(s, *d.pgd_step_size); else s += "default";
  s += d.pgd_random_init ? " rinit" : " norinit";
  s += m.linear ? " model=linear" : (" model=mlp" + std::to_string(m.hidden));
  return s;
}

}  // namespace delusive
