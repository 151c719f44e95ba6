// Properties that need trained models. Uses the models written by the
// acceptance run (ctest fixture "trained_models").

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>

#include "advpc/attack.hpp"
#include "advpc/harness.hpp"
#include "advpc/rng.hpp"

using namespace advpc;
using namespace advpc::harness;

namespace {

struct Trained {
  ExperimentConfig cfg = experiment_from(ConfigFile{});
  Dataset data = generate_dataset(cfg.dataset, 1);
  TrainedModels models = load_models(ADVPC_MODELS_DIR, cfg);

  std::vector<PointCloud> held_out(std::size_t n) const {
    return {data.test.begin(), data.test.begin() + static_cast<std::ptrdiff_t>(n)};
  }
};

const Trained& trained() {
  static const Trained t;
  return t;
}

double l2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double baseline_asr(const Trained& t, const std::vector<PointCloud>& clouds,
                    const std::function<PointCloud(const PointCloud&, std::size_t)>& make) {
  std::vector<int> pred, truth;
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    pred.push_back(nn::predict(t.models.proxy.params, make(clouds[i], i)));
    truth.push_back(*clouds[i].label);
  }
  return metrics::asr(pred, truth);
}

}  // namespace

TEST_CASE("trained encoder groups latents by class") {
  const auto& t = trained();
  const auto clouds = t.held_out(80);
  std::vector<std::vector<double>> z;
  for (const auto& c : clouds) z.push_back(diffusion::encode_latent(t.models.diffusion.enc, c, 0).z);
  double intra = 0.0, inter = 0.0;
  int n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < z.size(); ++i)
    for (std::size_t j = i + 1; j < z.size(); ++j) {
      const double d = l2(z[i], z[j]);
      if (clouds[i].label == clouds[j].label) intra += d, ++n_intra;
      else inter += d, ++n_inter;
    }
  MESSAGE("mean intra-class latent distance ", intra / n_intra, ", inter-class ", inter / n_inter);
  CHECK(intra / n_intra < inter / n_inter);
}

TEST_CASE("sphere latent generates a sphere rather than a cube") {
  const auto& t = trained();
  const auto& sphere = t.data.test[0];
  REQUIRE(sphere.label == 0);
  const auto z = diffusion::encode_latent(t.models.diffusion.enc, sphere, 0);
  const auto gen = diffusion::generate(t.models.diffusion.den, z, t.models.diffusion.sched, 256, 11);
  CHECK(gen.size() == 256);
  CHECK(metrics::chamfer(generate_shape({ShapeKind::sphere, 1024, 1}), gen) <
        metrics::chamfer(generate_shape({ShapeKind::cube, 1024, 1}), gen));
}

TEST_CASE("more suppression iterations do not increase distortion") {
  const auto& t = trained();
  const auto clouds = t.held_out(50);
  auto mean_cd = [&](std::size_t m) {
    double total = 0.0;
    for (std::size_t i = 0; i < clouds.size(); ++i) {
      auto cfg = t.cfg.diffusion_attack;
      cfg.opt_iters = m;
      cfg.seed = i;
      const auto z = attack::select_guidance_latent(t.models.diffusion.enc, t.data.train, *clouds[i].label,
                                                    diffusion::EncodeMode::deterministic, i);
      total += metrics::chamfer(clouds[i], attack::diffusion_attack(clouds[i], z, t.models.diffusion.den,
                                                                     t.models.diffusion.sched, cfg));
    }
    return total / double(clouds.size());
  };
  const double m1 = mean_cd(1), m5 = mean_cd(5);
  MESSAGE("mean chamfer m=1 ", m1, ", m=5 ", m5);
  CHECK(m5 <= m1);
}

TEST_CASE("overwhelming suppression is the no-attack limit") {
  const auto& t = trained();
  const auto clouds = t.held_out(8);
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    auto cfg = t.cfg.diffusion_attack;
    cfg.lambda_dcd = 0.0;
    cfg.opt_iters = 5;
    cfg.opt_lr = static_cast<double>(clouds[i].size()) / 2.0;
    const auto z = attack::select_guidance_latent(t.models.diffusion.enc, t.data.train, *clouds[i].label,
                                                  diffusion::EncodeMode::deterministic, i);
    const auto out = attack::diffusion_attack(clouds[i], z, t.models.diffusion.den, t.models.diffusion.sched, cfg);
    CHECK(metrics::chamfer(clouds[i], out) < 1e-20);
    for (const auto& target : t.models.targets)
      CHECK(nn::predict(target.params, out) == nn::predict(target.params, clouds[i]));
  }
}

TEST_CASE("white-box baselines on the proxy") {
  const auto& t = trained();
  const auto clouds = t.held_out(200);
  const auto& clf = t.models.proxy.params;
  const double eps = t.cfg.fgsm.eps;
  const double a_fgsm = baseline_asr(t, clouds, [&](const PointCloud& c, std::size_t) { return attack::fgsm(clf, c, t.cfg.fgsm); });
  const double a_noise = baseline_asr(t, clouds, [&](const PointCloud& c, std::size_t i) {
    Rng rng(17, i);
    PointCloud x = c;
    for (auto& p : x.points)
      for (auto& v : p) v += rng.uniform() < 0.5 ? -eps : eps;
    return x;
  });
  const double a_ifgsm = baseline_asr(t, clouds, [&](const PointCloud& c, std::size_t) { return attack::ifgsm(clf, c, t.cfg.ifgsm); });
  const double a_pgd = baseline_asr(t, clouds, [&](const PointCloud& c, std::size_t i) {
    auto cfg = t.cfg.pgd;
    cfg.seed = i;
    return attack::pgd(clf, c, cfg);
  });
  MESSAGE("proxy ASR: fgsm ", a_fgsm, ", random sign ", a_noise, ", ifgsm ", a_ifgsm, ", pgd ", a_pgd);
  CHECK(a_fgsm > a_noise);
  CHECK(a_ifgsm >= a_fgsm);
  CHECK(a_pgd >= a_fgsm - 2.0);
}
