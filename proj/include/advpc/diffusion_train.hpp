#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "advpc/diffusion.hpp"
#include "advpc/flow.hpp"

namespace advpc::diffusion {

struct DiffusionConfig {
  std::size_t steps = 100;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::size_t latent_dim = 64;
  std::size_t denoiser_hidden = 128;
  std::size_t flow_layers = 4;
  std::size_t flow_hidden = 64;

  std::size_t epochs = 40;
  std::size_t batch_size = 16;
  double lr = 2e-3;
  // Linear learning-rate warmup over this many optimizer steps.
  std::size_t warmup_steps = 100;
  // Weight of the latent prior term (flow NLL minus posterior entropy, per dimension).
  double prior_weight = 1e-3;
  // Points drawn from each cloud for the noise-matching loss.
  std::size_t points_per_sample = 128;
  std::uint64_t seed = 7;
  std::size_t workers = 1;
};

struct DiffusionModel {
  DiffusionSchedule sched;
  EncoderParams enc;
  DenoiserParams den;
  FlowParams flow;
};

DiffusionModel init_diffusion_model(const DiffusionConfig& cfg);

struct DiffusionTrainResult {
  DiffusionModel model;
  std::vector<double> eps_loss;    // per-epoch mean noise-matching loss
  std::vector<double> prior_loss;  // per-epoch mean prior term
};

struct SampleLoss {
  double eps = 0.0;
  double prior = 0.0;
};

// Loss of one cloud with gradients added into the three buffers.
SampleLoss diffusion_sample_loss(const DiffusionModel& m, const DiffusionConfig& cfg,
                                 const PointCloud& cloud, std::uint64_t seed,
                                 std::vector<nn::Tensor>* enc_grads,
                                 std::vector<nn::Tensor>* den_grads,
                                 std::vector<nn::Tensor>* flow_grads);

// Joint Adam training of encoder, denoiser and flow prior on
//   |eps - eps_hat(x_t, t, z)|^2 + prior_weight * (-log p_flow(z) - H[q(z|x)]) / D
// Throws DivergenceError on non-finite loss.
DiffusionTrainResult train_diffusion(std::span<const PointCloud> dataset, const DiffusionConfig& cfg);

// nnp1 container with sections enc, den, flow, sched.
void save_diffusion(const std::filesystem::path& path, const DiffusionModel& m);
DiffusionModel load_diffusion(const std::filesystem::path& path);

}  // namespace advpc::diffusion
