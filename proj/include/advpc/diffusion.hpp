#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "advpc/core.hpp"
#include "advpc/graph.hpp"
#include "advpc/tensor.hpp"

namespace advpc::diffusion {

// Noise schedule; steps are 1-based, index 0 of each vector is step 1.
struct DiffusionSchedule {
  std::size_t steps = 0;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;

  double beta(std::size_t t) const { return betas.at(t - 1); }
  double alpha(std::size_t t) const { return alphas.at(t - 1); }
  double alpha_bar(std::size_t t) const { return alpha_bars.at(t - 1); }
};

// Linear betas from beta_start to beta_end over `steps` steps.
DiffusionSchedule make_schedule(std::size_t steps, double beta_start, double beta_end);
DiffusionSchedule schedule_from_betas(std::vector<double> betas);

struct NoisedCloud {
  PointCloud xt;
  std::vector<Vec3> eps;
};

// Closed-form marginal x_t = sqrt(abar_t) x_0 + sqrt(1 - abar_t) eps.
NoisedCloud forward_diffuse(const PointCloud& x0, std::size_t t, const DiffusionSchedule& sched,
                            std::uint64_t seed);
// Same, with caller-supplied noise.
PointCloud forward_diffuse_with(const PointCloud& x0, std::size_t t, const DiffusionSchedule& sched,
                                const std::vector<Vec3>& eps);

struct LatentCode {
  std::vector<double> z;
  std::optional<int> source_label;
};

// PointNet trunk 3 -> 64 -> 128, max pool, linear heads for mean and
// log-variance of q(z | x).
struct EncoderParams {
  std::size_t latent_dim = 64;
  nn::ParamSet params;
};

EncoderParams init_encoder(std::size_t latent_dim, std::uint64_t seed);

struct EncoderOutput {
  nn::Var mean;
  nn::Var logvar;
};

EncoderOutput encoder_forward(nn::Graph& g, const EncoderParams& enc, nn::Var points,
                              std::size_t group = 0);

enum class EncodeMode { deterministic, stochastic };

LatentCode encode_latent(const EncoderParams& enc, const PointCloud& cloud, std::uint64_t seed,
                         EncodeMode mode = EncodeMode::deterministic);

inline constexpr std::size_t kTimeEmbeddingDim = 32;

// Sinusoidal embedding of the step index, [1 x 32].
nn::Tensor time_embedding(std::size_t t);

// Pointwise noise predictor over (x, time embedding, z). The context
// (time embedding and z) is fed to every layer:
//   h1  = silu(x W1x + c W1c + b1)
//   h2  = silu(h1 W2h + c W2c + b2)
//   eps = h2 W3h + c W3c + b3
struct DenoiserParams {
  std::size_t latent_dim = 64;
  std::size_t hidden = 128;
  nn::ParamSet params;
};

DenoiserParams init_denoiser(std::size_t latent_dim, std::size_t hidden, std::uint64_t seed);
DenoiserParams zero_denoiser(std::size_t latent_dim, std::size_t hidden);

nn::Var denoiser_forward(nn::Graph& g, const DenoiserParams& den, nn::Var xt, std::size_t t,
                         nn::Var z, std::size_t group = 0);

std::vector<Vec3> predict_noise(const DenoiserParams& den, const PointCloud& xt, std::size_t t,
                                const LatentCode& z);

// One ancestral step x_t -> x_{t-1} with eps-parameterised mean
//   mu = (x_t - beta_t / sqrt(1 - abar_t) * eps_hat) / sqrt(alpha_t)
// plus noise_scale * sqrt(beta_t) * N(0, I) for t > 1.
PointCloud reverse_step(const DenoiserParams& den, const PointCloud& xt, std::size_t t,
                        const LatentCode& z, const DiffusionSchedule& sched, std::uint64_t seed,
                        double noise_scale = 1.0);

// Same step from an already computed noise prediction.
PointCloud reverse_step_from_eps(const PointCloud& xt, const std::vector<Vec3>& eps_hat,
                                 std::size_t t, const DiffusionSchedule& sched, std::uint64_t seed,
                                 double noise_scale = 1.0);

// Full ancestral sampling from x_T ~ N(0, I).
PointCloud generate(const DenoiserParams& den, const LatentCode& z, const DiffusionSchedule& sched,
                    std::size_t n_points, std::uint64_t seed);

}  // namespace advpc::diffusion
