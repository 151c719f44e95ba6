#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "advpc/attack.hpp"
#include "advpc/classifier.hpp"
#include "advpc/defenses.hpp"
#include "advpc/diffusion_train.hpp"

namespace advpc::harness {

// Flat key/value store read from a TOML-like file:
//
//   # comment
//   [section.sub]
//   key = value          -> "section.sub.key"
//
// Values are bare or double-quoted strings; lists are comma separated.
class ConfigFile {
 public:
  static ConfigFile parse(std::string_view text);
  static ConfigFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;

  // Distinct names N for which some key starts with "<prefix>.N.".
  std::vector<std::string> subsections(const std::string& prefix) const;

  // Sorted "key = value" lines, skipping `exclude`; stable input for hashing.
  std::string canonical(const std::set<std::string>& exclude = {}) const;

  // Keys never read through a getter; used to reject misspelled settings.
  std::vector<std::string> unread_keys() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  const std::string* find(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> read_;
};

struct DatasetSpec {
  std::size_t classes = 4;
  std::size_t points = 256;
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 200;
  std::uint64_t seed = 1;
  double scale_lo = 0.9;
  double scale_hi = 1.1;
  double jitter_sigma = 0.01;
  double jitter_clip = 0.02;
};

struct ClassifierSpec {
  std::string name;
  std::string arch = "pointnet-lite";
  nn::TrainConfig train;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  DatasetSpec dataset;
  ClassifierSpec proxy;
  std::vector<ClassifierSpec> targets;
  // Also report the proxy itself as a (white-box) target.
  bool include_proxy_target = true;
  diffusion::DiffusionConfig diffusion;

  std::vector<std::string> attacks = {"none", "diffusion", "fgsm", "ifgsm", "pgd"};
  attack::AttackConfig diffusion_attack;
  attack::BaselineConfig fgsm;
  attack::BaselineConfig ifgsm;
  attack::BaselineConfig pgd;

  std::vector<std::string> defenses = {"none", "sor", "srs"};
  defenses::SorConfig sor;
  defenses::SrsConfig srs;

  // Number of test clouds attacked; 0 means the whole test set.
  std::size_t eval_count = 0;
  std::size_t workers = 1;
  std::filesystem::path out_dir = "out";

  // Canonical form of the source file without the keys that cannot change
  // results (out, workers); hashed into the report metadata.
  std::string config_text;
};

// Throws ConfigError on unknown enum values or violated invariants.
ExperimentConfig experiment_from(const ConfigFile& file);
void validate(const ExperimentConfig& cfg);

}  // namespace advpc::harness
