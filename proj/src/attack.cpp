#include "advpc/attack.hpp"

#include <algorithm>
#include <cmath>

#include "advpc/error.hpp"
#include "advpc/rng.hpp"

namespace advpc::attack {

metrics::ValueGrad dis_loss_with_grad(const PointCloud& x, const PointCloud& clean,
                                      const AttackConfig& cfg) {
  metrics::ValueGrad out;
  out.grad.assign(x.size(), Vec3{0.0, 0.0, 0.0});
  if (cfg.lambda_dcd != 0.0) {
    const auto d = metrics::dcd_with_grad(x, clean, {cfg.dcd_alpha});
    out.value += cfg.lambda_dcd * d.value;
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (int k = 0; k < 3; ++k) out.grad[i][k] += cfg.lambda_dcd * d.grad[i][k];
    }
  }
  if (cfg.lambda_mse != 0.0) {
    const auto m = metrics::mse_with_grad(x, clean);
    out.value += cfg.lambda_mse * m.value;
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (int k = 0; k < 3; ++k) out.grad[i][k] += cfg.lambda_mse * m.grad[i][k];
    }
  }
  return out;
}

double dis_loss(const PointCloud& x, const PointCloud& clean, const AttackConfig& cfg) {
  double v = 0.0;
  if (cfg.lambda_dcd != 0.0) v += cfg.lambda_dcd * metrics::dcd(x, clean, {cfg.dcd_alpha});
  if (cfg.lambda_mse != 0.0) v += cfg.lambda_mse * metrics::mse_aligned(x, clean);
  return v;
}

diffusion::LatentCode select_guidance_latent(const diffusion::EncoderParams& enc,
                                             std::span<const PointCloud> dataset, int source_label,
                                             diffusion::EncodeMode mode, std::uint64_t seed) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset[i].label && *dataset[i].label != source_label) candidates.push_back(i);
  }
  if (candidates.empty()) throw Error("select_guidance_latent: no cloud of another class");
  Rng rng(seed, 0x6775696465);
  const std::size_t pick = candidates[static_cast<std::size_t>(rng.below(candidates.size()))];
  return diffusion::encode_latent(enc, dataset[pick], rng.next_u64(), mode);
}

namespace {

PointCloud descend(const PointCloud& x, const PointCloud& clean, const AttackConfig& cfg, double lr) {
  PointCloud y = x;
  for (std::size_t it = 0; it < cfg.opt_iters; ++it) {
    const auto vg = dis_loss_with_grad(y, clean, cfg);
    for (std::size_t i = 0; i < y.size(); ++i) {
      for (int k = 0; k < 3; ++k) y.points[i][k] -= lr * vg.grad[i][k];
    }
  }
  return y;
}

}  // namespace

PointCloud diffusion_attack(const PointCloud& clean, const diffusion::LatentCode& z_adv,
                            const diffusion::DenoiserParams& den,
                            const diffusion::DiffusionSchedule& sched, const AttackConfig& cfg,
                            AttackTrace* trace) {
  check_valid(clean, "diffusion_attack");
  if (cfg.t_attack < 1 || cfg.t_attack > sched.steps) {
    throw Error("diffusion_attack: t_attack must lie in [1, T]");
  }
  if (cfg.lambda_dcd < 0.0 || cfg.lambda_mse < 0.0 || cfg.noise_scale < 0.0) {
    throw Error("diffusion_attack: weights and noise scale must be >= 0");
  }
  if (z_adv.source_label && clean.label && *z_adv.source_label == *clean.label) {
    throw Error("diffusion_attack: guidance latent has the same label as the input");
  }

  const Rng root(cfg.seed, 0x61747461636b);
  PointCloud x = clean;
  for (std::size_t t = cfg.t_attack; t >= 1; --t) {
    double scale = cfg.noise_scale;
    if (cfg.noise_mode == NoiseMode::per_step_linear) {
      scale *= static_cast<double>(t);
    }
    x = diffusion::reverse_step(den, x, t, z_adv, sched, root.split(t).key(), scale);
    if (!all_finite(x)) throw DivergenceError("diffusion_attack: diverged at step " + std::to_string(t));

    if (cfg.opt_iters == 0) continue;
    StepRecord rec;
    rec.t = t;
    rec.lr = cfg.opt_lr;
    rec.loss_before = dis_loss(x, clean, cfg);
    PointCloud y = descend(x, clean, cfg, rec.lr);
    rec.loss_after = dis_loss(y, clean, cfg);
    if (rec.loss_after > rec.loss_before) {
      rec.lr = 0.5 * cfg.opt_lr;
      y = descend(x, clean, cfg, rec.lr);
      rec.loss_after = dis_loss(y, clean, cfg);
      if (rec.loss_after > rec.loss_before) {
        // DCD jumps when neighbour counts change, so no step size is safe;
        // keep the reverse-step output for this t.
        rec.lr = 0.0;
        y = x;
        rec.loss_after = rec.loss_before;
      }
    }
    if (!all_finite(y)) throw DivergenceError("diffusion_attack: diverged at step " + std::to_string(t));
    x = std::move(y);
    if (trace) trace->steps.push_back(rec);
  }
  x.label = clean.label;
  x.id = clean.id;
  return x;
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

int true_label(const PointCloud& cloud) {
  if (!cloud.label) throw Error("baseline attack: cloud has no label");
  return *cloud.label;
}

PointCloud sign_iterations(const nn::ClassifierParams& clf, const PointCloud& clean, PointCloud x,
                           const BaselineConfig& cfg) {
  const int y = true_label(clean);
  for (std::size_t s = 0; s < cfg.steps; ++s) {
    const auto lg = nn::loss_and_grads(clf, x, y);
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (int k = 0; k < 3; ++k) {
        const double c = clean.points[i][k];
        const double v = x.points[i][k] + cfg.step_size * sign(lg.input_grad[i][k]);
        x.points[i][k] = std::clamp(v, c - cfg.eps, c + cfg.eps);
      }
    }
  }
  return x;
}

void check_eps(const BaselineConfig& cfg) {
  if (!(cfg.eps >= 0.0)) throw Error("baseline attack: eps must be >= 0");
}

}  // namespace

PointCloud fgsm(const nn::ClassifierParams& clf, const PointCloud& cloud, const BaselineConfig& cfg) {
  check_eps(cfg);
  const auto lg = nn::loss_and_grads(clf, cloud, true_label(cloud));
  PointCloud x = cloud;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (int k = 0; k < 3; ++k) x.points[i][k] += cfg.eps * sign(lg.input_grad[i][k]);
  }
  return x;
}

PointCloud ifgsm(const nn::ClassifierParams& clf, const PointCloud& cloud, const BaselineConfig& cfg) {
  check_eps(cfg);
  return sign_iterations(clf, cloud, cloud, cfg);
}

PointCloud pgd(const nn::ClassifierParams& clf, const PointCloud& cloud, const BaselineConfig& cfg) {
  check_eps(cfg);
  Rng rng(cfg.seed, 0x706764);
  PointCloud x = cloud;
  for (auto& p : x.points) {
    for (auto& v : p) v += rng.uniform(-cfg.eps, cfg.eps);
  }
  return sign_iterations(clf, cloud, std::move(x), cfg);
}

}  // namespace advpc::attack
