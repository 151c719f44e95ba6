#include "advpc/diffusion.hpp"

#include <cmath>

#include "advpc/classifier.hpp"
#include "advpc/error.hpp"
#include "advpc/rng.hpp"

namespace advpc::diffusion {

using nn::Graph;
using nn::Tensor;
using nn::Var;

DiffusionSchedule make_schedule(std::size_t steps, double beta_start, double beta_end) {
  if (steps < 1) throw Error("make_schedule: need at least one step");
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
    throw Error("make_schedule: need 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> betas(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    betas[i] = beta_start + (beta_end - beta_start) * frac;
  }
  return schedule_from_betas(std::move(betas));
}

DiffusionSchedule schedule_from_betas(std::vector<double> betas) {
  if (betas.empty()) throw Error("schedule: empty betas");
  DiffusionSchedule s;
  s.steps = betas.size();
  s.alphas.resize(s.steps);
  s.alpha_bars.resize(s.steps);
  double prod = 1.0;
  for (std::size_t i = 0; i < s.steps; ++i) {
    if (!(betas[i] > 0.0 && betas[i] < 1.0)) throw Error("schedule: beta outside (0, 1)");
    s.alphas[i] = 1.0 - betas[i];
    prod *= s.alphas[i];
    s.alpha_bars[i] = prod;
  }
  s.betas = std::move(betas);
  return s;
}

namespace {

void check_step(std::size_t t, const DiffusionSchedule& sched, const char* op) {
  if (t < 1 || t > sched.steps) {
    throw Error(std::string(op) + ": step " + std::to_string(t) + " outside [1, " +
                std::to_string(sched.steps) + "]");
  }
}

}  // namespace

PointCloud forward_diffuse_with(const PointCloud& x0, std::size_t t, const DiffusionSchedule& sched,
                                const std::vector<Vec3>& eps) {
  check_step(t, sched, "forward_diffuse");
  if (eps.size() != x0.size()) throw Error("forward_diffuse: noise size mismatch");
  const double a = std::sqrt(sched.alpha_bar(t));
  const double b = std::sqrt(1.0 - sched.alpha_bar(t));
  PointCloud xt = x0;
  for (std::size_t i = 0; i < xt.size(); ++i) {
    for (int d = 0; d < 3; ++d) xt.points[i][d] = a * x0.points[i][d] + b * eps[i][d];
  }
  return xt;
}

NoisedCloud forward_diffuse(const PointCloud& x0, std::size_t t, const DiffusionSchedule& sched,
                            std::uint64_t seed) {
  check_step(t, sched, "forward_diffuse");
  Rng rng(seed, 0x66776400 + t);
  NoisedCloud out;
  out.eps.resize(x0.size());
  for (auto& e : out.eps) e = {rng.normal(), rng.normal(), rng.normal()};
  out.xt = forward_diffuse_with(x0, t, sched, out.eps);
  return out;
}

EncoderParams init_encoder(std::size_t latent_dim, std::uint64_t seed) {
  Rng rng(seed, 0x656e63);
  const double he = std::sqrt(2.0);
  EncoderParams e;
  e.latent_dim = latent_dim;
  e.params.add("w1", nn::init_weight(3, 64, he, rng));
  e.params.add("b1", Tensor(1, 64));
  e.params.add("w2", nn::init_weight(64, 128, he, rng));
  e.params.add("b2", Tensor(1, 128));
  e.params.add("wm", nn::init_weight(128, latent_dim, 1.0, rng));
  e.params.add("bm", Tensor(1, latent_dim));
  e.params.add("wv", nn::init_weight(128, latent_dim, 0.1, rng));
  e.params.add("bv", Tensor(1, latent_dim, -2.0));
  return e;
}

EncoderOutput encoder_forward(Graph& g, const EncoderParams& enc, Var points, std::size_t group) {
  const auto& ps = enc.params;
  auto P = [&](std::size_t i) { return g.param(ps, i, group); };
  Var h = g.relu(g.add_row(g.matmul(points, P(0)), P(1)));
  h = g.relu(g.add_row(g.matmul(h, P(2)), P(3)));
  Var f = g.max_rows(h);
  return {g.add_row(g.matmul(f, P(4)), P(5)), g.add_row(g.matmul(f, P(6)), P(7))};
}

LatentCode encode_latent(const EncoderParams& enc, const PointCloud& cloud, std::uint64_t seed,
                         EncodeMode mode) {
  check_valid(cloud, "encode_latent");
  Graph g;
  const auto out = encoder_forward(g, enc, g.constant(nn::to_tensor(cloud)));
  LatentCode code;
  code.source_label = cloud.label;
  code.z = g.value(out.mean).data;
  if (mode == EncodeMode::stochastic) {
    Rng rng(seed, 0x7a);
    const auto& lv = g.value(out.logvar).data;
    for (std::size_t i = 0; i < code.z.size(); ++i) code.z[i] += std::exp(0.5 * lv[i]) * rng.normal();
  }
  return code;
}

Tensor time_embedding(std::size_t t) {
  Tensor e(1, kTimeEmbeddingDim);
  const std::size_t half = kTimeEmbeddingDim / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    e.data[i] = std::sin(static_cast<double>(t) * freq);
    e.data[half + i] = std::cos(static_cast<double>(t) * freq);
  }
  return e;
}

DenoiserParams init_denoiser(std::size_t latent_dim, std::size_t hidden, std::uint64_t seed) {
  Rng rng(seed, 0x64656e);
  const std::size_t ctx = kTimeEmbeddingDim + latent_dim;
  DenoiserParams d;
  d.latent_dim = latent_dim;
  d.hidden = hidden;
  d.params.add("w1x", nn::init_weight(3, hidden, 1.0, rng));
  d.params.add("w1c", nn::init_weight(ctx, hidden, 1.0, rng));
  d.params.add("b1", Tensor(1, hidden));
  d.params.add("w2h", nn::init_weight(hidden, hidden, 1.0, rng));
  d.params.add("w2c", nn::init_weight(ctx, hidden, 1.0, rng));
  d.params.add("b2", Tensor(1, hidden));
  d.params.add("w3h", nn::init_weight(hidden, 3, 0.1, rng));
  d.params.add("w3c", nn::init_weight(ctx, 3, 0.1, rng));
  d.params.add("b3", Tensor(1, 3));
  return d;
}

DenoiserParams zero_denoiser(std::size_t latent_dim, std::size_t hidden) {
  DenoiserParams d = init_denoiser(latent_dim, hidden, 0);
  for (auto& v : d.params.values) std::fill(v.data.begin(), v.data.end(), 0.0);
  return d;
}

Var denoiser_forward(Graph& g, const DenoiserParams& den, Var xt, std::size_t t, Var z,
                     std::size_t group) {
  if (g.value(z).cols != den.latent_dim) throw Error("denoiser: latent dimension mismatch");
  const auto& ps = den.params;
  auto P = [&](std::size_t i) { return g.param(ps, i, group); };
  Var ctx = g.concat_cols(g.constant(time_embedding(t)), z);
  Var h = g.silu(g.add_row(g.matmul(xt, P(0)), g.add(g.matmul(ctx, P(1)), P(2))));
  h = g.silu(g.add_row(g.matmul(h, P(3)), g.add(g.matmul(ctx, P(4)), P(5))));
  return g.add_row(g.matmul(h, P(6)), g.add(g.matmul(ctx, P(7)), P(8)));
}

std::vector<Vec3> predict_noise(const DenoiserParams& den, const PointCloud& xt, std::size_t t,
                                const LatentCode& z) {
  Graph g;
  Var out = denoiser_forward(g, den, g.constant(nn::to_tensor(xt)), t,
                             g.constant(Tensor(1, z.z.size(), z.z)));
  const Tensor& e = g.value(out);
  std::vector<Vec3> eps(xt.size());
  for (std::size_t i = 0; i < xt.size(); ++i) eps[i] = {e(i, 0), e(i, 1), e(i, 2)};
  return eps;
}

PointCloud reverse_step_from_eps(const PointCloud& xt, const std::vector<Vec3>& eps_hat,
                                 std::size_t t, const DiffusionSchedule& sched, std::uint64_t seed,
                                 double noise_scale) {
  check_step(t, sched, "reverse_step");
  if (eps_hat.size() != xt.size()) throw Error("reverse_step: noise size mismatch");
  const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha(t));
  const double coef = sched.beta(t) / std::sqrt(1.0 - sched.alpha_bar(t));
  const double sigma = t > 1 ? noise_scale * std::sqrt(sched.beta(t)) : 0.0;
  Rng rng(seed, 0x72657600 + t);
  PointCloud out = xt;
  for (std::size_t i = 0; i < xt.size(); ++i) {
    for (int d = 0; d < 3; ++d) {
      double v = inv_sqrt_alpha * (xt.points[i][d] - coef * eps_hat[i][d]);
      if (sigma > 0.0) v += sigma * rng.normal();
      out.points[i][d] = v;
    }
  }
  return out;
}

PointCloud reverse_step(const DenoiserParams& den, const PointCloud& xt, std::size_t t,
                        const LatentCode& z, const DiffusionSchedule& sched, std::uint64_t seed,
                        double noise_scale) {
  check_step(t, sched, "reverse_step");
  return reverse_step_from_eps(xt, predict_noise(den, xt, t, z), t, sched, seed, noise_scale);
}

PointCloud generate(const DenoiserParams& den, const LatentCode& z, const DiffusionSchedule& sched,
                    std::size_t n_points, std::uint64_t seed) {
  if (n_points == 0) throw Error("generate: need at least one point");
  const Rng root(seed, 0x67656e);
  Rng init = root.split(0);
  PointCloud x;
  x.points.resize(n_points);
  for (auto& p : x.points) p = {init.normal(), init.normal(), init.normal()};
  for (std::size_t t = sched.steps; t >= 1; --t) {
    x = reverse_step(den, x, t, z, sched, root.split(t).key());
  }
  x.label = z.source_label;
  return x;
}

}  // namespace advpc::diffusion
