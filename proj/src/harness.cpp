#include "advpc/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>

#include "advpc/error.hpp"
#include "advpc/parallel.hpp"
#include "advpc/params_io.hpp"
#include "advpc/rng.hpp"

namespace advpc::harness {
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kTrainStream = 0x747261696e;
constexpr std::uint64_t kTestStream = 0x74657374;
constexpr std::uint64_t kAttackStream = 0x61747461636b;
constexpr std::uint64_t kDefenseStream = 0x646566656e7365;

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return Rng(seed, stream).split(index).next_u64();
}

PointCloud make_cloud(const DatasetSpec& spec, std::size_t kind, std::uint64_t seed) {
  auto c = generate_shape({static_cast<ShapeKind>(kind), spec.points, seed});
  c = random_scale(c, spec.scale_lo, spec.scale_hi, seed + 1);
  c = jitter(c, spec.jitter_sigma, spec.jitter_clip, seed + 2);
  return c;
}

std::string index_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return buf;
}

std::string number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

Dataset generate_dataset(const DatasetSpec& spec, std::size_t workers) {
  Dataset data;
  const std::size_t n_train = spec.classes * spec.train_per_class;
  const std::size_t n_test = spec.classes * spec.test_per_class;
  data.train.resize(n_train);
  data.test.resize(n_test);
  parallel_for(n_train, workers, [&](std::size_t i) {
    const std::size_t kind = i / spec.train_per_class;
    auto c = make_cloud(spec, kind, stream_seed(spec.seed, kTrainStream, i));
    c.id = "train-" + index_name(i);
    data.train[i] = std::move(c);
  });
  parallel_for(n_test, workers, [&](std::size_t i) {
    const std::size_t kind = i % spec.classes;
    auto c = make_cloud(spec, kind, stream_seed(spec.seed, kTestStream, i));
    c.id = "test-" + index_name(i);
    data.test[i] = std::move(c);
  });
  return data;
}

void save_cloud_dir(const fs::path& dir, std::span<const PointCloud> clouds) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < clouds.size(); ++i)
    save_cloud(dir / (index_name(i) + std::string(kCloudExtension)), clouds[i]);
}

std::vector<PointCloud> load_cloud_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("no cloud directory '" + dir.string() + "'");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.ends_with(kCloudExtension)) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<PointCloud> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(load_cloud(f));
  return out;
}

void save_dataset(const fs::path& dir, const Dataset& data) {
  save_cloud_dir(dir / "train", data.train);
  save_cloud_dir(dir / "test", data.test);
}

Dataset load_dataset(const fs::path& dir) {
  return {load_cloud_dir(dir / "train"), load_cloud_dir(dir / "test")};
}

NamedClassifier train_named_classifier(const ClassifierSpec& spec, const ExperimentConfig& cfg,
                                       std::span<const PointCloud> train) {
  auto tc = spec.train;
  tc.workers = cfg.workers;
  const auto arch = nn::Architecture::by_name(spec.arch, cfg.dataset.classes);
  return {spec.name, nn::train_classifier(train, arch, tc).params};
}

TrainedModels train_models(const ExperimentConfig& cfg, const Dataset& data) {
  TrainedModels m;
  m.proxy = train_named_classifier(cfg.proxy, cfg, data.train);
  for (const auto& t : cfg.targets) m.targets.push_back(train_named_classifier(t, cfg, data.train));
  auto dc = cfg.diffusion;
  dc.workers = cfg.workers;
  auto d = diffusion::train_diffusion(data.train, dc);
  m.diffusion = std::move(d.model);
  m.diffusion_eps_loss = std::move(d.eps_loss);
  return m;
}

void save_models(const fs::path& dir, const TrainedModels& models) {
  fs::create_directories(dir);
  nn::save_classifier(dir / (models.proxy.name + ".nnp"), models.proxy.params);
  for (const auto& t : models.targets) nn::save_classifier(dir / (t.name + ".nnp"), t.params);
  diffusion::save_diffusion(dir / "diffusion.nnp", models.diffusion);
}

TrainedModels load_models(const fs::path& dir, const ExperimentConfig& cfg) {
  TrainedModels m;
  m.proxy = {cfg.proxy.name, nn::load_classifier(dir / (cfg.proxy.name + ".nnp"))};
  for (const auto& t : cfg.targets) m.targets.push_back({t.name, nn::load_classifier(dir / (t.name + ".nnp"))});
  m.diffusion = diffusion::load_diffusion(dir / "diffusion.nnp");
  return m;
}

AttackOutput run_attack(const std::string& name, const ExperimentConfig& cfg,
                        const TrainedModels& models, std::span<const PointCloud> guidance,
                        std::span<const PointCloud> clean) {
  const std::size_t n = clean.size();
  AttackOutput out;
  out.adversarial.resize(n);
  std::vector<double> ms(n, 0.0);
  const auto calls_before = nn::classifier_forward_calls();

  auto per_cloud = [&](auto&& make) {
    parallel_for(n, cfg.workers, [&](std::size_t i) {
      const auto start = std::chrono::steady_clock::now();
      auto adv = make(i);
      ms[i] = elapsed_ms(start);
      adv.id = clean[i].id;
      out.adversarial[i] = std::move(adv);
    });
  };

  if (name == "none") {
    out.adversarial.assign(clean.begin(), clean.end());
  } else if (name == "diffusion") {
    const auto& dm = models.diffusion;
    per_cloud([&](std::size_t i) {
      if (!clean[i].label) throw Error("diffusion attack needs labelled clouds");
      const auto seed = stream_seed(cfg.diffusion_attack.seed, kAttackStream, i);
      const auto z = attack::select_guidance_latent(dm.enc, guidance, *clean[i].label,
                                                    diffusion::EncodeMode::deterministic, seed);
      auto ac = cfg.diffusion_attack;
      ac.seed = seed;
      return attack::diffusion_attack(clean[i], z, dm.den, dm.sched, ac);
    });
  } else if (name == "fgsm" || name == "ifgsm" || name == "pgd") {
    const auto& base = name == "fgsm" ? cfg.fgsm : name == "ifgsm" ? cfg.ifgsm : cfg.pgd;
    const auto fn = name == "fgsm" ? &attack::fgsm : name == "ifgsm" ? &attack::ifgsm : &attack::pgd;
    per_cloud([&](std::size_t i) {
      auto bc = base;
      bc.seed = stream_seed(base.seed, kAttackStream, i);
      return fn(models.proxy.params, clean[i], bc);
    });
  } else {
    throw ConfigError("unknown attack '" + name + "'");
  }

  out.classifier_calls = nn::classifier_forward_calls() - calls_before;
  double total = 0.0;
  for (double v : ms) total += v;
  out.ms_per_cloud = n ? total / static_cast<double>(n) : 0.0;
  return out;
}

PointCloud apply_defense(const std::string& name, const ExperimentConfig& cfg,
                         const PointCloud& cloud, std::size_t index) {
  if (name == "none") return cloud;
  if (name == "sor") return defenses::sor(cloud, cfg.sor);
  if (name == "srs") {
    auto sc = cfg.srs;
    sc.seed = stream_seed(cfg.srs.seed, kDefenseStream, index);
    return defenses::srs(cloud, sc);
  }
  throw ConfigError("unknown defense '" + name + "'");
}

std::vector<const NamedClassifier*> evaluated_targets(const ExperimentConfig& cfg,
                                                      const TrainedModels& models) {
  std::vector<const NamedClassifier*> out;
  for (const auto& t : models.targets) out.push_back(&t);
  if (cfg.include_proxy_target) out.push_back(&models.proxy);
  return out;
}

std::vector<ReportRow> evaluate_attack(const std::string& attack_name, const ExperimentConfig& cfg,
                                       const TrainedModels& models,
                                       std::span<const PointCloud> clean,
                                       const AttackOutput& attack) {
  const std::size_t n = clean.size();
  if (attack.adversarial.size() != n) throw Error("evaluate_attack: cloud count mismatch");
  std::vector<int> truth(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!clean[i].label) throw Error("evaluate_attack: unlabelled clean cloud");
    truth[i] = *clean[i].label;
  }
  const auto targets = evaluated_targets(cfg, models);
  std::vector<ReportRow> rows;
  for (const auto& defense : cfg.defenses) {
    std::vector<double> cd(n), hd(n);
    std::vector<std::vector<int>> pred(targets.size(), std::vector<int>(n));
    parallel_for(n, cfg.workers, [&](std::size_t i) {
      const auto defended = apply_defense(defense, cfg, attack.adversarial[i], i);
      cd[i] = metrics::chamfer(clean[i], defended);
      hd[i] = metrics::hausdorff(clean[i], defended);
      for (std::size_t t = 0; t < targets.size(); ++t) pred[t][i] = nn::predict(targets[t]->params, defended);
    });
    double cd_sum = 0.0, hd_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cd_sum += cd[i];
      hd_sum += hd[i];
    }
    for (std::size_t t = 0; t < targets.size(); ++t) {
      ReportRow r;
      r.proxy = models.proxy.name;
      r.attack = attack_name;
      r.defense = defense;
      r.target = targets[t]->name;
      r.asr = metrics::asr(pred[t], truth);
      r.cd = n ? cd_sum / static_cast<double>(n) : 0.0;
      r.hd = n ? hd_sum / static_cast<double>(n) : 0.0;
      r.ms_per_cloud = attack.ms_per_cloud;
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : cfg.config_text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

EvaluationReport run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  EvaluationReport report;
  auto& meta = report.metadata;
  meta["version"] = std::string(kVersion);
  meta["config_hash"] = config_hash(cfg);
  meta["seed"] = std::to_string(cfg.seed);
  meta["seed.dataset"] = std::to_string(cfg.dataset.seed);
  meta["seed.proxy"] = std::to_string(cfg.proxy.train.seed);
  for (const auto& t : cfg.targets) meta["seed.target." + t.name] = std::to_string(t.train.seed);
  meta["seed.diffusion"] = std::to_string(cfg.diffusion.seed);
  meta["seed.attack.diffusion"] = std::to_string(cfg.diffusion_attack.seed);
  meta["seed.attack.fgsm"] = std::to_string(cfg.fgsm.seed);
  meta["seed.attack.ifgsm"] = std::to_string(cfg.ifgsm.seed);
  meta["seed.attack.pgd"] = std::to_string(cfg.pgd.seed);
  meta["seed.defense.srs"] = std::to_string(cfg.srs.seed);

  fs::create_directories(cfg.out_dir);
  auto flush = [&] {
    emit_report(report, cfg.out_dir / "report.csv", ReportFormat::csv);
    emit_report(report, cfg.out_dir / "report.json", ReportFormat::json);
  };

  std::string stage = "data";
  try {
    const auto data = generate_dataset(cfg.dataset, cfg.workers);
    const std::size_t count = cfg.eval_count ? cfg.eval_count : data.test.size();
    const std::span<const PointCloud> clean(data.test.data(), count);
    meta["eval_count"] = std::to_string(count);

    stage = "train";
    const auto models = train_models(cfg, data);
    save_models(cfg.out_dir / "models", models);
    for (const auto* t : evaluated_targets(cfg, models))
      meta["accuracy." + t->name] = number(nn::accuracy(t->params, clean, cfg.workers));
    if (!models.diffusion_eps_loss.empty()) {
      meta["diffusion.eps_loss.first"] = number(models.diffusion_eps_loss.front());
      meta["diffusion.eps_loss.last"] = number(models.diffusion_eps_loss.back());
    }

    for (const auto& name : cfg.attacks) {
      stage = name;
      const auto out = run_attack(name, cfg, models, data.train, clean);
      if (name == "diffusion") {
        meta["diffusion.classifier_calls"] = std::to_string(out.classifier_calls);
        if (out.classifier_calls != 0)
          throw Error("diffusion attack evaluated a classifier during generation");
      }
      for (auto& row : evaluate_attack(name, cfg, models, clean, out)) report.rows.push_back(std::move(row));
    }
  } catch (const std::exception& e) {
    ReportRow marker;
    marker.proxy = cfg.proxy.name;
    marker.attack = stage;
    marker.defense = "-";
    marker.target = "-";
    marker.failed = true;
    marker.error = e.what();
    report.rows.push_back(std::move(marker));
    flush();
    throw;
  }
  flush();
  return report;
}

}  // namespace advpc::harness
