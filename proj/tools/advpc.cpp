// advpc: desk-scale point-cloud attack/defense experiments.
//
// Every subcommand reads the same config and works inside one output tree:
//   <out>/data/{train,test}/       gen-data
//   <out>/models/*.nnp             train-clf, train-diff
//   <out>/adv/<attack>/            attack
//   <out>/defended/<attack>/<def>/ defend
//   <out>/eval.{csv,json}          eval
//   <out>/report.{csv,json}        run
//
// Exit codes: 0 success, 1 runtime failure, 2 config error, 3 divergence.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <optional>
#include <string>

#include "advpc/error.hpp"
#include "advpc/harness.hpp"
#include "advpc/params_io.hpp"

namespace fs = std::filesystem;
using namespace advpc;
using namespace advpc::harness;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Experiment config file (TOML-like)");
  cmd->add_option("--seed", f.seed, "Master seed; overrides the config");
  cmd->add_option("--workers", f.workers, "Worker threads; overrides the config");
  cmd->add_option("--out", f.out, "Output directory; overrides the config");
}

ExperimentConfig load_config(const CommonFlags& f) {
  auto file = f.config.empty() ? ConfigFile{} : ConfigFile::load(f.config);
  if (f.seed) file.set("seed", std::to_string(*f.seed));
  if (f.workers) file.set("workers", std::to_string(*f.workers));
  if (!f.out.empty()) file.set("out", f.out);
  return experiment_from(file);
}

std::vector<PointCloud> eval_clouds(const ExperimentConfig& cfg, const Dataset& data) {
  const std::size_t count = cfg.eval_count ? cfg.eval_count : data.test.size();
  if (count > data.test.size()) throw Error("test set holds fewer clouds than eval_count");
  return {data.test.begin(), data.test.begin() + static_cast<std::ptrdiff_t>(count)};
}

fs::path attack_dir(const ExperimentConfig& cfg, const std::string& attack) {
  return cfg.out_dir / "adv" / attack;
}

void write_attack_meta(const fs::path& dir, const AttackOutput& out) {
  std::ofstream meta(dir / "attack.meta");
  meta << "ms_per_cloud " << out.ms_per_cloud << "\nclassifier_calls " << out.classifier_calls << "\n";
  if (!meta) throw Error("cannot write '" + (dir / "attack.meta").string() + "'");
}

AttackOutput read_attack(const fs::path& dir) {
  AttackOutput out;
  out.adversarial = load_cloud_dir(dir);
  std::ifstream meta(dir / "attack.meta");
  std::string key;
  while (meta >> key) {
    if (key == "ms_per_cloud") meta >> out.ms_per_cloud;
    else if (key == "classifier_calls") meta >> out.classifier_calls;
    else break;
  }
  return out;
}

int cmd_gen_data(const ExperimentConfig& cfg) {
  const auto data = generate_dataset(cfg.dataset, cfg.workers);
  save_dataset(cfg.out_dir / "data", data);
  std::printf("wrote %zu train and %zu test clouds to %s\n", data.train.size(), data.test.size(),
              (cfg.out_dir / "data").string().c_str());
  return 0;
}

int cmd_train_clf(const ExperimentConfig& cfg) {
  const auto data = load_dataset(cfg.out_dir / "data");
  const auto test = eval_clouds(cfg, data);
  fs::create_directories(cfg.out_dir / "models");
  std::vector<ClassifierSpec> specs{cfg.proxy};
  specs.insert(specs.end(), cfg.targets.begin(), cfg.targets.end());
  for (const auto& spec : specs) {
    const auto clf = train_named_classifier(spec, cfg, data.train);
    nn::save_classifier(cfg.out_dir / "models" / (clf.name + ".nnp"), clf.params);
    std::printf("%s (%s): test accuracy %.2f%%\n", clf.name.c_str(), spec.arch.c_str(),
                100.0 * nn::accuracy(clf.params, test, cfg.workers));
  }
  return 0;
}

int cmd_train_diff(const ExperimentConfig& cfg) {
  const auto data = load_dataset(cfg.out_dir / "data");
  auto dc = cfg.diffusion;
  dc.workers = cfg.workers;
  const auto res = diffusion::train_diffusion(data.train, dc);
  fs::create_directories(cfg.out_dir / "models");
  diffusion::save_diffusion(cfg.out_dir / "models" / "diffusion.nnp", res.model);
  std::printf("noise-matching loss: first epoch %.4f, last epoch %.4f\n", res.eps_loss.front(),
              res.eps_loss.back());
  return 0;
}

int cmd_attack(const ExperimentConfig& cfg, const std::vector<std::string>& attacks) {
  const auto data = load_dataset(cfg.out_dir / "data");
  const auto models = load_models(cfg.out_dir / "models", cfg);
  const auto clean = eval_clouds(cfg, data);
  for (const auto& name : attacks) {
    const auto out = run_attack(name, cfg, models, data.train, clean);
    const auto dir = attack_dir(cfg, name);
    fs::remove_all(dir);
    save_cloud_dir(dir, out.adversarial);
    write_attack_meta(dir, out);
    std::printf("%s: %zu clouds, %.1f ms/cloud, %llu classifier calls\n", name.c_str(),
                out.adversarial.size(), out.ms_per_cloud,
                static_cast<unsigned long long>(out.classifier_calls));
  }
  return 0;
}

int cmd_defend(const ExperimentConfig& cfg, const std::vector<std::string>& attacks) {
  for (const auto& name : attacks) {
    const auto adv = load_cloud_dir(attack_dir(cfg, name));
    for (const auto& defense : cfg.defenses) {
      std::vector<PointCloud> out(adv.size());
      for (std::size_t i = 0; i < adv.size(); ++i) out[i] = apply_defense(defense, cfg, adv[i], i);
      const auto dir = cfg.out_dir / "defended" / name / defense;
      fs::remove_all(dir);
      save_cloud_dir(dir, out);
      std::printf("%s/%s: %zu clouds\n", name.c_str(), defense.c_str(), out.size());
    }
  }
  return 0;
}

int cmd_eval(const ExperimentConfig& cfg, const std::vector<std::string>& attacks) {
  const auto data = load_dataset(cfg.out_dir / "data");
  const auto models = load_models(cfg.out_dir / "models", cfg);
  const auto clean = eval_clouds(cfg, data);
  EvaluationReport report;
  report.metadata["version"] = std::string(kVersion);
  report.metadata["config_hash"] = config_hash(cfg);
  for (const auto& name : attacks) {
    const auto out = read_attack(attack_dir(cfg, name));
    for (auto& row : evaluate_attack(name, cfg, models, clean, out)) report.rows.push_back(std::move(row));
  }
  emit_report(report, cfg.out_dir / "eval.csv", ReportFormat::csv);
  emit_report(report, cfg.out_dir / "eval.json", ReportFormat::json);
  std::fputs(to_csv(report).c_str(), stdout);
  return 0;
}

int cmd_run(const ExperimentConfig& cfg) {
  const auto report = run_experiment(cfg);
  std::fputs(to_csv(report).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"advpc: diffusion-guided adversarial point clouds and baselines"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::vector<std::string> attacks;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic shape dataset");
  auto* tclf = app.add_subcommand("train-clf", "Train the proxy and target classifiers");
  auto* tdiff = app.add_subcommand("train-diff", "Train the latent diffusion model");
  auto* atk = app.add_subcommand("attack", "Generate adversarial clouds for the eval set");
  auto* dfd = app.add_subcommand("defend", "Apply the configured defenses to adversarial clouds");
  auto* ev = app.add_subcommand("eval", "Score adversarial clouds against every target");
  auto* run = app.add_subcommand("run", "Full pipeline: data, training, attacks, report");
  for (auto* cmd : {gen, tclf, tdiff, atk, dfd, ev, run}) add_common(cmd, flags);
  for (auto* cmd : {atk, dfd, ev})
    cmd->add_option("--attack", attacks, "Attack names (default: all configured)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    const auto cfg = load_config(flags);
    if (attacks.empty()) attacks = cfg.attacks;
    if (gen->parsed()) return cmd_gen_data(cfg);
    if (tclf->parsed()) return cmd_train_clf(cfg);
    if (tdiff->parsed()) return cmd_train_diff(cfg);
    if (atk->parsed()) return cmd_attack(cfg, attacks);
    if (dfd->parsed()) return cmd_defend(cfg, attacks);
    if (ev->parsed()) return cmd_eval(cfg, attacks);
    if (run->parsed()) return cmd_run(cfg);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "diverged: %s\n", e.what());
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitFailure;
}
