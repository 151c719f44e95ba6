#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "advpc/classifier.hpp"
#include "advpc/core.hpp"
#include "advpc/diffusion.hpp"
#include "advpc/metrics.hpp"

namespace advpc::attack {

// How the reverse-step noise multiplier evolves over the attack.
//   constant:        noise_scale at every step
//   per_step_linear: noise_scale * t, the literal reading of "0.05t"
enum class NoiseMode { constant, per_step_linear };

struct AttackConfig {
  std::size_t t_attack = 100;
  // Suppression iterations per reverse step ("1t" .. "5t").
  std::size_t opt_iters = 1;
  double lambda_dcd = 1.0;
  double lambda_mse = 1.0;
  double opt_lr = 0.2;
  double noise_scale = 0.05;
  NoiseMode noise_mode = NoiseMode::per_step_linear;
  double dcd_alpha = 40.0;
  std::uint64_t seed = 0;
};

struct BaselineConfig {
  double eps = 0.32;
  std::size_t steps = 10;
  double step_size = 0.04;
  std::uint64_t seed = 0;
};

// lambda_dcd * dcd(x, clean) + lambda_mse * mse(x, clean) and its gradient in x.
metrics::ValueGrad dis_loss_with_grad(const PointCloud& x, const PointCloud& clean,
                                      const AttackConfig& cfg);
double dis_loss(const PointCloud& x, const PointCloud& clean, const AttackConfig& cfg);

// Encodes a uniformly chosen cloud whose label differs from source_label.
diffusion::LatentCode select_guidance_latent(const diffusion::EncoderParams& enc,
                                             std::span<const PointCloud> dataset, int source_label,
                                             diffusion::EncodeMode mode, std::uint64_t seed);

struct StepRecord {
  std::size_t t = 0;
  double loss_before = 0.0;
  double loss_after = 0.0;
  double lr = 0.0;
};

struct AttackTrace {
  std::vector<StepRecord> steps;
};

// Treats the clean cloud as x_{t_attack} and runs the latent-conditioned
// reverse chain down to step 1. After every reverse step the cloud is pulled
// back toward the clean input by opt_iters gradient steps on the suppression
// loss. If those steps raise the loss, they are redone once at half the
// learning rate; if the loss still rises the update is rejected for that
// step. Uses no classifier.
PointCloud diffusion_attack(const PointCloud& clean, const diffusion::LatentCode& z_adv,
                            const diffusion::DenoiserParams& den,
                            const diffusion::DiffusionSchedule& sched, const AttackConfig& cfg,
                            AttackTrace* trace = nullptr);

// x + eps * sign(grad_x CE(F(x), y)); coordinates with zero gradient stay put.
PointCloud fgsm(const nn::ClassifierParams& clf, const PointCloud& cloud, const BaselineConfig& cfg);
// Iterated sign steps, each iterate clipped to the L-inf ball around the input.
PointCloud ifgsm(const nn::ClassifierParams& clf, const PointCloud& cloud, const BaselineConfig& cfg);
// ifgsm from a uniform random start inside the ball.
PointCloud pgd(const nn::ClassifierParams& clf, const PointCloud& cloud, const BaselineConfig& cfg);

}  // namespace advpc::attack
