#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "advpc/config.hpp"
#include "advpc/report.hpp"

namespace advpc::harness {

// Train clouds are grouped by class; test clouds are interleaved
// (cloud i has class i mod classes) so every prefix is class-balanced.
struct Dataset {
  std::vector<PointCloud> train;
  std::vector<PointCloud> test;
};

Dataset generate_dataset(const DatasetSpec& spec, std::size_t workers = 1);

// Clouds are stored as <dir>/train/NNNNNN.pcd.txt and <dir>/test/NNNNNN.pcd.txt.
void save_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& dir);
std::vector<PointCloud> load_cloud_dir(const std::filesystem::path& dir);
void save_cloud_dir(const std::filesystem::path& dir, std::span<const PointCloud> clouds);

struct NamedClassifier {
  std::string name;
  nn::ClassifierParams params;
};

struct TrainedModels {
  NamedClassifier proxy;
  std::vector<NamedClassifier> targets;
  diffusion::DiffusionModel diffusion;
  std::vector<double> diffusion_eps_loss;
};

NamedClassifier train_named_classifier(const ClassifierSpec& spec, const ExperimentConfig& cfg,
                                       std::span<const PointCloud> train);
TrainedModels train_models(const ExperimentConfig& cfg, const Dataset& data);

// <dir>/<name>.nnp for each classifier and <dir>/diffusion.nnp.
void save_models(const std::filesystem::path& dir, const TrainedModels& models);
// Loads the models named by the config from `dir`.
TrainedModels load_models(const std::filesystem::path& dir, const ExperimentConfig& cfg);

struct AttackOutput {
  std::vector<PointCloud> adversarial;
  double ms_per_cloud = 0.0;
  // Classifier forward passes observed while this attack ran.
  std::uint64_t classifier_calls = 0;
};

// Runs one named attack over `clean`. The diffusion attack draws its guidance
// latents from `guidance` and never consults a classifier; baselines use the
// proxy's gradients only.
AttackOutput run_attack(const std::string& name, const ExperimentConfig& cfg,
                        const TrainedModels& models, std::span<const PointCloud> guidance,
                        std::span<const PointCloud> clean);

// `index` picks the random stream for sampling defenses.
PointCloud apply_defense(const std::string& name, const ExperimentConfig& cfg,
                         const PointCloud& cloud, std::size_t index);

// Rows for one attack: every configured defense x every evaluated target.
std::vector<ReportRow> evaluate_attack(const std::string& attack_name, const ExperimentConfig& cfg,
                                       const TrainedModels& models,
                                       std::span<const PointCloud> clean,
                                       const AttackOutput& attack);

// Classifiers reported as targets: configured targets, then optionally the proxy.
std::vector<const NamedClassifier*> evaluated_targets(const ExperimentConfig& cfg,
                                                      const TrainedModels& models);

// 64-bit FNV-1a of the canonical config text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

// Full pipeline: data, training, attacks, defenses, report. Writes
// report.csv, report.json and models/ under cfg.out_dir. If a stage throws,
// a "failed" row is appended, the partial report is written, and the error
// is rethrown.
EvaluationReport run_experiment(const ExperimentConfig& cfg);

}  // namespace advpc::harness
