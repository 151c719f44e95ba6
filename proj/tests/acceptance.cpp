// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.
//
//   advpc_acceptance [models-dir]
//
// Trained default models are written to models-dir (default
// ./acceptance_models) so slower integration checks can reuse them.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <tuple>

#include "advpc/attack.hpp"
#include "advpc/error.hpp"
#include "advpc/harness.hpp"
#include "advpc/rng.hpp"
#include "oracles.hpp"

using namespace advpc;
using namespace advpc::harness;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const char* title, bool pass, double secs, double limit_secs,
            const std::string& detail) {
  const bool in_time = limit_secs <= 0.0 || secs <= limit_secs;
  const bool ok = pass && in_time;
  if (!ok) ++failures;
  std::printf("criterion %2d: %s  %-28s %s [%.2fs%s]\n", id, ok ? "PASS" : "FAIL", title,
              detail.c_str(), secs, in_time ? "" : " over time limit");
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Runs `body` and turns exceptions into a failed criterion.
void criterion(int id, const char* title, double limit_secs,
               const std::function<std::pair<bool, std::string>()>& body) {
  const auto t0 = Clock::now();
  try {
    const auto [pass, detail] = body();
    report(id, title, pass, seconds_since(t0), limit_secs, detail);
  } catch (const std::exception& e) {
    report(id, title, false, seconds_since(t0), limit_secs, std::string("exception: ") + e.what());
  }
}

nn::ClassifierParams random_classifier(const std::string& arch, std::uint64_t seed) {
  auto p = nn::init_classifier(nn::Architecture::by_name(arch, 4), seed);
  std::mt19937_64 gen(seed);
  for (std::size_t i = 1; i < p.params.size(); i += 2)
    for (auto& v : p.params.values[i].data) v = std::normal_distribution<double>(0.0, 0.1)(gen);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Report CSV with the wall-time column removed.
std::string strip_timing(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path models_dir = argc > 1 ? argv[1] : "acceptance_models";
  const fs::path source = ADVPC_SOURCE_DIR;
  const fs::path cli = ADVPC_CLI_PATH;

  criterion(1, "metric oracle equivalence", 1.0, [] {
    std::mt19937_64 gen(101);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const auto a = oracle::random_cloud(1 + gen() % 12, gen);
      const auto b = oracle::random_cloud(1 + gen() % 12, gen);
      worst = std::max(worst, std::abs(metrics::chamfer(a, b) - oracle::chamfer(a, b)));
      worst = std::max(worst, std::abs(metrics::hausdorff(a, b) - oracle::hausdorff(a, b)));
      worst = std::max(worst, std::abs(metrics::dcd(a, b) - oracle::dcd(a, b, 40.0)));
    }
    return std::pair{worst <= 1e-12, fmt("max |diff| %.3g over 100 pairs (tol 1e-12)", worst)};
  });

  criterion(2, "dcd bounds and identity", 1.0, [] {
    std::mt19937_64 gen(102);
    bool identity = true;
    double lo = 1.0, hi = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
      const auto a = oracle::random_cloud(1 + gen() % 32, gen);
      const auto b = oracle::random_cloud(1 + gen() % 32, gen);
      identity &= metrics::dcd(a, a) == 0.0;
      const double v = metrics::dcd(a, b);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return std::pair{identity && lo >= 0.0 && hi <= 1.0,
                     fmt("dcd(X,X)==0: %s, range [%.4f, %.4f] over 1000 pairs", identity ? "yes" : "no", lo, hi)};
  });

  criterion(3, "gradient suite", 10.0, [] {
    std::mt19937_64 gen(103);
    double worst = 0.0;
    int probes = 0;
    int skipped = 0;
    // Draws candidate coordinates until `want` of them lie where the objective
    // is smooth across the whole stencil, then compares analytic and numeric
    // derivatives there.
    constexpr double kKinkGap = 1e-3;
    auto run_group = [&](int want, auto&& draw) {
      for (int accepted = 0, tries = 0; accepted < want && tries < 50 * want; ++tries) {
        const auto [analytic, f, x0] = draw();
        if (oracle::kink_gap(f, x0) > kKinkGap) {
          ++skipped;
          continue;
        }
        worst = std::max(worst, oracle::relative_error(analytic, oracle::central_difference(f, x0)));
        ++probes;
        ++accepted;
      }
    };
    using Scalar = std::function<double(double)>;
    auto along = [](std::function<double(const PointCloud&)> f, const PointCloud& c, std::size_t i, int d) {
      return Scalar([f, c, i, d](double v) {
        PointCloud y = c;
        y.points[i][d] = v;
        return f(y);
      });
    };
    // Classifier input and parameter gradients.
    for (const char* arch : {"pointnet-lite", "pointnet-lite-wide"}) {
      const auto p = random_classifier(arch, 7);
      const auto c = generate_shape({ShapeKind::torus, 48, 3});
      const auto lg = nn::loss_and_grads(p, c, 2);
      const auto loss = [&p](const PointCloud& x) { return nn::loss_and_grads(p, x, 2).loss; };
      run_group(8, [&] {
        const std::size_t i = gen() % c.size();
        const int d = static_cast<int>(gen() % 3);
        return std::tuple{lg.input_grad[i][d], along(loss, c, i, d), c.points[i][d]};
      });
      run_group(8, [&] {
        const std::size_t t = gen() % p.params.size();
        const std::size_t j = gen() % p.params.values[t].size();
        return std::tuple{lg.param_grads[t].data[j], Scalar([&p, &c, t, j](double v) {
                            auto q = p;
                            q.params.values[t].data[j] = v;
                            return nn::loss_and_grads(q, c, 2).loss;
                          }),
                          p.params.values[t].data[j]};
      });
    }
    // Denoiser gradients in x_t and parameters.
    const auto den = diffusion::init_denoiser(16, 32, 5);
    std::vector<double> z(16);
    for (auto& v : z) v = std::normal_distribution<double>(0.0, 1.0)(gen);
    const auto x = generate_shape({ShapeKind::sphere, 16, 2});
    nn::Tensor w(x.size(), 3);
    for (auto& v : w.data) v = std::normal_distribution<double>(0.0, 1.0)(gen);
    auto den_loss = [&](const diffusion::DenoiserParams& d, const PointCloud& pts, std::vector<nn::Tensor>* pg,
                        nn::Tensor* xg) {
      nn::Graph g;
      const auto xt = g.input(nn::to_tensor(pts));
      const auto out = diffusion::denoiser_forward(g, d, xt, 42, g.input(nn::Tensor(1, z.size(), z)));
      const auto l = g.sum(g.mul(out, g.constant(w)));
      if (pg) {
        *pg = d.params.zeros_like();
        g.backward(l, pg);
        *xg = g.grad(xt);
      }
      return g.scalar(l);
    };
    std::vector<nn::Tensor> pg;
    nn::Tensor xg;
    den_loss(den, x, &pg, &xg);
    run_group(8, [&] {
      const std::size_t i = gen() % x.size();
      const int d = static_cast<int>(gen() % 3);
      return std::tuple{xg(i, d), along([&](const PointCloud& p) { return den_loss(den, p, nullptr, nullptr); }, x, i, d),
                        x.points[i][d]};
    });
    run_group(8, [&] {
      const std::size_t t = gen() % den.params.size();
      const std::size_t j = gen() % den.params.values[t].size();
      return std::tuple{pg[t].data[j], Scalar([&, t, j](double v) {
                          auto q = den;
                          q.params.values[t].data[j] = v;
                          return den_loss(q, x, nullptr, nullptr);
                        }),
                        den.params.values[t].data[j]};
    });
    // Suppression loss gradient.
    attack::AttackConfig ac;
    const auto clean = oracle::random_cloud(24, gen);
    auto adv = clean;
    for (auto& p : adv.points)
      for (auto& v : p) v += std::normal_distribution<double>(0.0, 0.05)(gen);
    const auto vg = attack::dis_loss_with_grad(adv, clean, ac);
    run_group(8, [&] {
      const std::size_t i = gen() % adv.size();
      const int d = static_cast<int>(gen() % 3);
      return std::tuple{vg.grad[i][d],
                        along([&](const PointCloud& p) { return oracle::dcd(p, clean, 40.0) + oracle::mse(p, clean); },
                              adv, i, d),
                        adv.points[i][d]};
    });
    const bool enough = probes == 56;
    return std::pair{enough && worst <= 1e-4,
                     fmt("max relative error %.3g over %d smooth probes, %d kinked skipped (tol 1e-4)", worst, probes,
                         skipped)};
  });

  criterion(4, "diffusion correctness", 10.0, [] {
    const auto sched = diffusion::make_schedule(100, 1e-4, 0.02);
    const auto x0 = generate_shape({ShapeKind::cube, 1024, 4});
    // (a) oracle-noise inversion at t = 1
    const auto n1 = diffusion::forward_diffuse(x0, 1, sched, 1);
    const auto back = diffusion::reverse_step_from_eps(n1.xt, n1.eps, 1, sched, 2);
    double inv_err = 0.0;
    for (std::size_t i = 0; i < x0.size(); ++i)
      for (int k = 0; k < 3; ++k) inv_err = std::max(inv_err, std::abs(back.points[i][k] - x0.points[i][k]));
    // (b) standardized residual at t = T
    const auto nT = diffusion::forward_diffuse(x0, 100, sched, 3);
    const double a = std::sqrt(sched.alpha_bar(100)), b = std::sqrt(1.0 - sched.alpha_bar(100));
    std::vector<double> r;
    for (std::size_t i = 0; i < x0.size(); ++i)
      for (int k = 0; k < 3; ++k) r.push_back((nT.xt.points[i][k] - a * x0.points[i][k]) / b);
    double mean = 0.0, var = 0.0;
    for (double v : r) mean += v / double(r.size());
    for (double v : r) var += (v - mean) * (v - mean) / double(r.size() - 1);
    // (c) flow round trip and log det at D = 4
    double trip = 0.0, logdet = 0.0;
    std::mt19937_64 gen(104);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto f = diffusion::init_flow(4, 4, 8, seed, false);
      for (auto& t : f.params.values)
        for (auto& v : t.data) v += std::normal_distribution<double>(0.0, 0.3)(gen);
      std::vector<double> w(4);
      for (auto& v : w) v = std::normal_distribution<double>(0.0, 1.0)(gen);
      const auto fw = diffusion::flow_forward(f, w);
      const auto inv = diffusion::flow_inverse(f, fw.value);
      for (int i = 0; i < 4; ++i) trip = std::max(trip, std::abs(inv.value[i] - w[i]));
      const auto jac = oracle::jacobian([&](const std::vector<double>& v) { return diffusion::flow_forward(f, v).value; }, w);
      logdet = std::max(logdet, std::abs(oracle::log_abs_det(jac) - fw.log_det));
    }
    const bool ok = inv_err <= 1e-9 && var >= 0.9 && var <= 1.1 && r.size() >= 3000 && trip <= 1e-9 && logdet <= 1e-4;
    return std::pair{ok, fmt("inversion %.2g, var %.4f over %zu coords, flow trip %.2g, logdet err %.2g", inv_err, var,
                             r.size(), trip, logdet)};
  });

  // Shared state for the trained-model criteria.
  const auto cfg = experiment_from(ConfigFile{});
  Dataset data;
  TrainedModels models;
  bool trained = false;

  criterion(5, "training sanity", 600.0, [&] {
    data = generate_dataset(cfg.dataset, cfg.workers);
    models = train_models(cfg, data);
    trained = true;
    save_models(models_dir, models);
    const double acc_proxy = nn::accuracy(models.proxy.params, data.test);
    const double acc_target = nn::accuracy(models.targets[0].params, data.test);
    const double ratio = models.diffusion_eps_loss.back() / models.diffusion_eps_loss.front();
    // Class consistency: a sample generated from a class-k latent is closest
    // to the ideal class-k primitive.
    int consistent = 0;
    std::string dists;
    for (int k = 0; k < static_cast<int>(cfg.dataset.classes); ++k) {
      const auto& src = data.test[static_cast<std::size_t>(k)];
      const auto z = diffusion::encode_latent(models.diffusion.enc, src, 0);
      const auto gen = diffusion::generate(models.diffusion.den, z, models.diffusion.sched, 256, 5 + k);
      int best = -1;
      double best_d = 1e300;
      for (int j = 0; j < static_cast<int>(cfg.dataset.classes); ++j) {
        const double d = metrics::chamfer(generate_shape({static_cast<ShapeKind>(j), 1024, 99}), gen);
        if (d < best_d) best_d = d, best = j;
      }
      consistent += best == k;
      dists += fmt(" %d->%d", k, best);
    }
    const bool ok = acc_proxy >= 0.9 && acc_target >= 0.9 && ratio <= 0.5 &&
                    consistent == static_cast<int>(cfg.dataset.classes);
    return std::pair{ok, fmt("acc proxy %.1f%% target %.1f%%, eps-loss ratio %.3f, generation%s", 100 * acc_proxy,
                             100 * acc_target, ratio, dists.c_str())};
  });

  // 200 held-out clouds, class-balanced by construction of the test split.
  const std::size_t n_eval = 200;
  std::vector<PointCloud> clean;
  AttackOutput diff_out, fgsm_out;
  std::vector<ReportRow> diff_rows, fgsm_rows;
  auto row = [](const std::vector<ReportRow>& rows, const std::string& defense, const std::string& target) {
    for (const auto& r : rows)
      if (r.defense == defense && r.target == target) return r;
    throw Error("missing row " + defense + "/" + target);
  };
  const std::string target = cfg.targets[0].name;

  criterion(6, "attack efficacy", 600.0, [&] {
    if (!trained) throw Error("models unavailable");
    clean.assign(data.test.begin(), data.test.begin() + n_eval);
    diff_out = run_attack("diffusion", cfg, models, data.train, clean);
    diff_rows = evaluate_attack("diffusion", cfg, models, clean, diff_out);
    const auto r = row(diff_rows, "none", target);
    return std::pair{r.asr >= 60.0 && r.cd <= 5e-2,
                     fmt("ASR %.1f%% on unseen '%s' (>= 60), mean CD %.4f (<= 0.05), %zu clouds", r.asr,
                         target.c_str(), r.cd, clean.size())};
  });

  criterion(7, "defense robustness (SOR)", 300.0, [&] {
    if (diff_rows.empty()) throw Error("diffusion attack unavailable");
    fgsm_out = run_attack("fgsm", cfg, models, data.train, clean);
    fgsm_rows = evaluate_attack("fgsm", cfg, models, clean, fgsm_out);
    const double before = row(diff_rows, "none", target).asr;
    const double after = row(diff_rows, "sor", target).asr;
    const double fgsm_after = row(fgsm_rows, "sor", target).asr;
    const bool ok = before - after <= 15.0 && after > fgsm_after;
    return std::pair{ok, fmt("diffusion %.1f%% -> %.1f%% after SOR(k=%zu, a=%.1f) (drop %.1f <= 15); fgsm eps=%.2f after SOR %.1f%%",
                             before, after, cfg.sor.k, cfg.sor.alpha, before - after, cfg.fgsm.eps, fgsm_after)};
  });

  criterion(8, "budget-matched superiority", 300.0, [&] {
    if (diff_rows.empty()) throw Error("diffusion attack unavailable");
    const double target_cd = row(diff_rows, "none", target).cd;
    const auto* tgt = &models.targets[0].params;
    auto run_fgsm = [&](double eps, double* asr) {
      std::vector<int> pred(clean.size()), truth(clean.size());
      double cd = 0.0;
      for (std::size_t i = 0; i < clean.size(); ++i) {
        attack::BaselineConfig bc = cfg.fgsm;
        bc.eps = eps;
        const auto adv = attack::fgsm(models.proxy.params, clean[i], bc);
        cd += metrics::chamfer(clean[i], adv) / double(clean.size());
        pred[i] = nn::predict(*tgt, adv);
        truth[i] = *clean[i].label;
      }
      *asr = metrics::asr(pred, truth);
      return cd;
    };
    // Mean CD grows with eps; bracket the diffusion attack's CD, then bisect.
    double lo = 0.0, hi = 0.05, asr = 0.0;
    while (run_fgsm(hi, &asr) < target_cd && hi < 4.0) lo = hi, hi *= 2.0;
    double eps = hi, cd = 0.0;
    for (int it = 0; it < 40; ++it) {
      eps = 0.5 * (lo + hi);
      cd = run_fgsm(eps, &asr);
      if (std::abs(cd / target_cd - 1.0) < 0.01) break;
      (cd < target_cd ? lo : hi) = eps;
    }
    const double diff_asr = row(diff_rows, "none", target).asr;
    const bool matched = std::abs(cd / target_cd - 1.0) <= 0.10;
    return std::pair{matched && diff_asr >= asr,
                     fmt("fgsm eps=%.4f CD %.4f vs diffusion CD %.4f (%+.1f%%): ASR fgsm %.1f%% vs diffusion %.1f%%",
                         eps, cd, target_cd, 100 * (cd / target_cd - 1.0), asr, diff_asr)};
  });

  criterion(9, "black-box contract", 0.0, [&] {
    if (diff_rows.empty()) throw Error("diffusion attack unavailable");
    // The counter is live: one prediction moves it by one.
    const auto before = nn::classifier_forward_calls();
    nn::predict(models.proxy.params, clean[0]);
    const bool live = nn::classifier_forward_calls() - before == 1;
    return std::pair{live && diff_out.classifier_calls == 0,
                     fmt("%llu classifier forward calls during %zu diffusion generations (counter live: %s); fgsm made %llu",
                         static_cast<unsigned long long>(diff_out.classifier_calls), clean.size(),
                         live ? "yes" : "no", static_cast<unsigned long long>(fgsm_out.classifier_calls))};
  });

  criterion(10, "determinism", 0.0, [&] {
    const auto root = fs::temp_directory_path() / "advpc_acceptance_determinism";
    fs::remove_all(root);
    const auto config = (source / "configs" / "smoke.toml").string();
    std::string csv[2], json[2];
    for (int i = 0; i < 2; ++i) {
      const auto out = root / ("run" + std::to_string(i));
      const auto cmd = cli.string() + " run --config " + config + " --out " + out.string() + " > /dev/null";
      if (std::system(cmd.c_str()) != 0) throw Error("advpc run failed");
      csv[i] = strip_timing(slurp(out / "report.csv"));
      json[i] = to_json(without_timing(report_from_json(slurp(out / "report.json"))));
    }
    fs::remove_all(root);
    const bool ok = csv[0] == csv[1] && json[0] == json[1] && csv[0].size() > kCsvHeader.size() + 1;
    return std::pair{ok, fmt("two 'advpc run' reports identical without wall time: csv %s, json %s",
                             csv[0] == csv[1] ? "yes" : "no", json[0] == json[1] ? "yes" : "no")};
  });

  std::printf("%s: %d criterion(s) failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
