#include <doctest.h>

#include <cmath>
#include <random>

#include "advpc/attack.hpp"
#include "advpc/error.hpp"
#include "oracles.hpp"

using namespace advpc;
using namespace advpc::attack;

namespace {

PointCloud labelled(ShapeKind kind, std::size_t n, std::uint64_t seed) {
  return generate_shape({kind, n, seed});
}

nn::ClassifierParams small_classifier(std::uint64_t seed) {
  auto p = nn::init_classifier(nn::Architecture::by_name("pointnet-lite", 4), seed);
  std::mt19937_64 gen(seed);
  for (std::size_t i = 1; i < p.params.size(); i += 2)
    for (auto& v : p.params.values[i].data) v = std::normal_distribution<double>(0.0, 0.1)(gen);
  return p;
}

}  // namespace

TEST_CASE("suppression loss gradient matches central differences") {
  std::mt19937_64 gen(1);
  AttackConfig cfg;
  cfg.lambda_dcd = 0.7;
  cfg.lambda_mse = 1.3;
  for (int trial = 0; trial < 4; ++trial) {
    const auto clean = oracle::random_cloud(12, gen);
    auto x = clean;
    for (auto& p : x.points)
      for (auto& v : p) v += std::normal_distribution<double>(0.0, 0.05)(gen);
    const auto vg = dis_loss_with_grad(x, clean, cfg);
    auto f = [&](const PointCloud& p) {
      return 0.7 * oracle::dcd(p, clean, cfg.dcd_alpha) + 1.3 * oracle::mse(p, clean);
    };
    CHECK(vg.value == doctest::Approx(f(x)).epsilon(1e-13));
    CHECK(dis_loss(x, clean, cfg) == doctest::Approx(f(x)).epsilon(1e-13));
    for (int probe = 0; probe < 8; ++probe) {
      const std::size_t i = gen() % x.size();
      const int k = static_cast<int>(gen() % 3);
      CHECK(oracle::relative_error(vg.grad[i][k], oracle::central_difference(f, x, i, k)) <= 1e-4);
    }
  }
}

TEST_CASE("guidance latent comes from another class") {
  const auto enc = diffusion::init_encoder(8, 1);
  std::vector<PointCloud> data;
  for (std::uint64_t s = 0; s < 5; ++s) {
    data.push_back(labelled(ShapeKind::sphere, 32, s));
    data.push_back(labelled(ShapeKind::cube, 32, s + 10));
  }
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto z = select_guidance_latent(enc, data, 0, diffusion::EncodeMode::deterministic, seed);
    CHECK(z.source_label == 1);
    CHECK(select_guidance_latent(enc, data, 0, diffusion::EncodeMode::deterministic, seed).z == z.z);
    bool matches_a_cube = false;
    for (const auto& c : data)
      if (c.label == 1 && diffusion::encode_latent(enc, c, 0).z == z.z) matches_a_cube = true;
    CHECK(matches_a_cube);
  }
  std::vector<PointCloud> spheres(data.begin(), data.begin() + 1);
  CHECK_THROWS_AS(select_guidance_latent(enc, spheres, 0, diffusion::EncodeMode::deterministic, 1), Error);
}

TEST_CASE("diffusion attack with a zero denoiser is a pure rescaling") {
  const auto clean = labelled(ShapeKind::torus, 64, 2);
  const auto den = diffusion::zero_denoiser(8, 16);
  const auto sched = diffusion::make_schedule(30, 1e-4, 0.02);
  diffusion::LatentCode z{std::vector<double>(8, 0.3), 0};
  AttackConfig cfg;
  cfg.t_attack = 30;
  cfg.opt_iters = 0;
  cfg.noise_scale = 0.0;
  const auto out = diffusion_attack(clean, z, den, sched, cfg);
  double factor = 1.0;
  for (std::size_t t = 1; t <= 30; ++t) factor /= std::sqrt(sched.alpha(t));
  REQUIRE(out.size() == clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i)
    for (int k = 0; k < 3; ++k) CHECK(out.points[i][k] == doctest::Approx(clean.points[i][k] * factor).epsilon(1e-12));
  CHECK(out.label == clean.label);
}

TEST_CASE("strong suppression returns the clean cloud") {
  const auto clean = labelled(ShapeKind::cube, 64, 3);
  const auto den = diffusion::init_denoiser(8, 16, 4);
  const auto sched = diffusion::make_schedule(20, 1e-4, 0.02);
  diffusion::LatentCode z{std::vector<double>(8, -0.2), 0};
  AttackConfig cfg;
  cfg.t_attack = 20;
  cfg.lambda_dcd = 0.0;
  cfg.lambda_mse = 1.0;
  cfg.opt_iters = 5;
  // grad of the mean squared error is 2 (x - c) / n, so lr = n / 2 lands on c.
  cfg.opt_lr = static_cast<double>(clean.size()) / 2.0;
  cfg.noise_scale = 1.0;
  cfg.noise_mode = NoiseMode::constant;
  const auto out = diffusion_attack(clean, z, den, sched, cfg);
  CHECK(metrics::chamfer(clean, out) < 1e-20);
  const auto clf = small_classifier(5);
  CHECK(nn::predict(clf, out) == nn::predict(clf, clean));
}

TEST_CASE("diffusion attack keeps alignment, never raises the per-step loss and is seeded") {
  const auto clean = labelled(ShapeKind::sphere, 64, 4);
  const auto den = diffusion::init_denoiser(8, 16, 5);
  const auto sched = diffusion::make_schedule(25, 1e-4, 0.02);
  diffusion::LatentCode z{std::vector<double>(8, 0.1), 2};
  AttackConfig cfg;
  cfg.t_attack = 25;
  cfg.opt_iters = 2;
  cfg.seed = 9;
  AttackTrace trace;
  const auto out = diffusion_attack(clean, z, den, sched, cfg, &trace);
  CHECK(out.size() == clean.size());
  CHECK(std::isfinite(metrics::mse_aligned(out, clean)));
  CHECK(trace.steps.size() == 25);
  for (const auto& s : trace.steps) CHECK(s.loss_after <= s.loss_before);
  CHECK(trace.steps.front().t == 25);
  CHECK(trace.steps.back().t == 1);
  CHECK(diffusion_attack(clean, z, den, sched, cfg) == out);
  cfg.seed = 10;
  CHECK_FALSE(diffusion_attack(clean, z, den, sched, cfg) == out);
}

TEST_CASE("diffusion attack rejects bad inputs and reports divergence") {
  const auto clean = labelled(ShapeKind::sphere, 32, 4);
  auto den = diffusion::init_denoiser(8, 16, 5);
  const auto sched = diffusion::make_schedule(10, 1e-4, 0.02);
  AttackConfig cfg;
  cfg.t_attack = 10;
  diffusion::LatentCode same{std::vector<double>(8, 0.1), 0};
  CHECK_THROWS_AS(diffusion_attack(clean, same, den, sched, cfg), Error);
  diffusion::LatentCode other{std::vector<double>(8, 0.1), 1};
  cfg.t_attack = 11;
  CHECK_THROWS_AS(diffusion_attack(clean, other, den, sched, cfg), Error);
  cfg.t_attack = 10;
  cfg.lambda_mse = -1.0;
  CHECK_THROWS_AS(diffusion_attack(clean, other, den, sched, cfg), Error);
  cfg.lambda_mse = 1.0;
  for (auto& t : den.params.values)
    for (auto& v : t.data) v *= 1e120;
  CHECK_THROWS_WITH_AS(diffusion_attack(clean, other, den, sched, cfg), doctest::Contains("diverged at step"),
                       DivergenceError);
}

TEST_CASE("fgsm moves every coordinate by exactly eps or not at all") {
  const auto clf = small_classifier(1);
  const auto c = labelled(ShapeKind::cylinder, 64, 1);
  BaselineConfig cfg;
  cfg.eps = 0.0;
  CHECK(fgsm(clf, c, cfg) == c);
  cfg.eps = 0.32;
  const auto x = fgsm(clf, c, cfg);
  const auto lg = nn::loss_and_grads(clf, c, *c.label);
  for (std::size_t i = 0; i < c.size(); ++i)
    for (int k = 0; k < 3; ++k) {
      const double d = x.points[i][k] - c.points[i][k];
      const double g = lg.input_grad[i][k];
      if (g == 0.0) CHECK(d == 0.0);
      else CHECK(std::abs(std::abs(d) - 0.32) < 1e-12);
      if (g != 0.0) CHECK((d > 0) == (g > 0));
    }
  // A small signed step is an ascent direction for the loss.
  cfg.eps = 1e-4;
  CHECK(nn::loss_and_grads(clf, fgsm(clf, c, cfg), *c.label).loss > lg.loss);
  PointCloud unlabelled = c;
  unlabelled.label.reset();
  CHECK_THROWS_AS(fgsm(clf, unlabelled, cfg), Error);
}

TEST_CASE("ifgsm and pgd stay in the eps ball") {
  const auto clf = small_classifier(2);
  const auto c = labelled(ShapeKind::torus, 64, 2);
  BaselineConfig one;
  one.eps = 0.1;
  one.steps = 1;
  one.step_size = 0.1;
  CHECK(ifgsm(clf, c, one) == fgsm(clf, c, one));

  BaselineConfig cfg;
  cfg.eps = 0.05;
  cfg.steps = 6;
  cfg.step_size = 0.02;
  cfg.seed = 3;
  for (const auto& x : {ifgsm(clf, c, cfg), pgd(clf, c, cfg)})
    for (std::size_t i = 0; i < c.size(); ++i)
      for (int k = 0; k < 3; ++k) CHECK(std::abs(x.points[i][k] - c.points[i][k]) <= 0.05 + 1e-15);
  CHECK(pgd(clf, c, cfg) == pgd(clf, c, cfg));
  auto other = cfg;
  other.seed = 4;
  CHECK_FALSE(pgd(clf, c, other) == pgd(clf, c, cfg));
}
