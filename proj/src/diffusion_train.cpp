#include "advpc/diffusion_train.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "advpc/classifier.hpp"
#include "advpc/error.hpp"
#include "advpc/parallel.hpp"
#include "advpc/params_io.hpp"
#include "advpc/rng.hpp"

namespace advpc::diffusion {

using nn::Graph;
using nn::Tensor;
using nn::Var;

DiffusionModel init_diffusion_model(const DiffusionConfig& cfg) {
  DiffusionModel m;
  m.sched = make_schedule(cfg.steps, cfg.beta_start, cfg.beta_end);
  m.enc = init_encoder(cfg.latent_dim, cfg.seed);
  m.den = init_denoiser(cfg.latent_dim, cfg.denoiser_hidden, cfg.seed);
  m.flow = init_flow(cfg.latent_dim, cfg.flow_layers, cfg.flow_hidden, cfg.seed, true);
  return m;
}

SampleLoss diffusion_sample_loss(const DiffusionModel& m, const DiffusionConfig& cfg,
                                 const PointCloud& cloud, std::uint64_t seed,
                                 std::vector<Tensor>* enc_grads, std::vector<Tensor>* den_grads,
                                 std::vector<Tensor>* flow_grads) {
  enum Group : std::size_t { kEnc, kDen, kFlow };
  Rng rng(seed, 0x646c6f7373);
  const std::size_t D = m.enc.latent_dim;

  Graph g;
  const auto enc = encoder_forward(g, m.enc, g.constant(nn::to_tensor(cloud)), kEnc);
  Tensor eps_z(1, D);
  for (auto& v : eps_z.data) v = rng.normal();
  Var std_z = g.exp(g.scale(enc.logvar, 0.5));
  Var z = g.add(enc.mean, g.mul(std_z, g.constant(eps_z)));

  // noise-matching on a random subset of points
  const std::size_t n = std::min(cfg.points_per_sample, cloud.size());
  std::vector<std::size_t> idx(cloud.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(idx[i], idx[i + static_cast<std::size_t>(rng.below(cloud.size() - i))]);
  }
  const std::size_t t = 1 + static_cast<std::size_t>(rng.below(m.sched.steps));
  const double a = std::sqrt(m.sched.alpha_bar(t));
  const double b = std::sqrt(1.0 - m.sched.alpha_bar(t));
  Tensor xt(n, 3), eps(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < 3; ++d) {
      eps(i, d) = rng.normal();
      xt(i, d) = a * cloud.points[idx[i]][d] + b * eps(i, d);
    }
  }
  Var eps_hat = denoiser_forward(g, m.den, g.constant(std::move(xt)), t, z, kDen);
  Var eps_loss = g.mean(g.square(g.sub(eps_hat, g.constant(std::move(eps)))));

  // -log p_flow(z) - H[q], dropping constants of H
  Var log_pz = flow_log_prob_graph(g, m.flow, z, kFlow);
  Var half_logvar = g.scale(g.sum(enc.logvar), 0.5);
  Var prior = g.scale(g.add(log_pz, half_logvar), -1.0 / static_cast<double>(D));

  Var total = g.add(eps_loss, g.scale(prior, cfg.prior_weight));
  std::vector<Tensor>* groups[3] = {enc_grads, den_grads, flow_grads};
  if (enc_grads || den_grads || flow_grads) {
    g.backward(total, std::span<std::vector<Tensor>* const>(groups, 3));
  }
  return {g.scalar(eps_loss), g.scalar(prior)};
}

DiffusionTrainResult train_diffusion(std::span<const PointCloud> dataset, const DiffusionConfig& cfg) {
  if (dataset.empty()) throw Error("train_diffusion: empty dataset");
  if (cfg.batch_size == 0) throw Error("train_diffusion: batch size must be positive");
  DiffusionTrainResult result;
  result.model = init_diffusion_model(cfg);
  DiffusionModel& m = result.model;
  nn::Adam opt_enc(m.enc.params, cfg.lr);
  nn::Adam opt_den(m.den.params, cfg.lr);
  nn::Adam opt_flow(m.flow.params, cfg.lr);
  const Rng root(cfg.seed, 0x6474726e);

  struct PerSample {
    std::vector<Tensor> enc, den, flow;
    SampleLoss loss;
  };

  std::vector<std::size_t> order(dataset.size());
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = root.split(2 * epoch);
    const Rng noise = root.split(2 * epoch + 1);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.below(i))]);
    }

    double eps_sum = 0.0, prior_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::size_t bs = end - start;
      std::vector<PerSample> per(bs);
      parallel_for(bs, cfg.workers, [&](std::size_t k) {
        const std::size_t idx = order[start + k];
        PerSample& s = per[k];
        s.enc = m.enc.params.zeros_like();
        s.den = m.den.params.zeros_like();
        s.flow = m.flow.params.zeros_like();
        s.loss = diffusion_sample_loss(m, cfg, dataset[idx], noise.split(idx).key(), &s.enc, &s.den,
                                       &s.flow);
      });
      m.enc.params.zero_grad();
      m.den.params.zero_grad();
      m.flow.params.zero_grad();
      const double w = 1.0 / static_cast<double>(bs);
      for (const auto& s : per) {
        m.enc.params.accumulate_grads(s.enc, w);
        m.den.params.accumulate_grads(s.den, w);
        m.flow.params.accumulate_grads(s.flow, w);
        eps_sum += s.loss.eps;
        prior_sum += s.loss.prior;
      }
      ++step;
      const double lr = step < cfg.warmup_steps
                            ? cfg.lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps)
                            : cfg.lr;
      opt_enc.set_lr(lr);
      opt_den.set_lr(lr);
      opt_flow.set_lr(lr);
      opt_enc.step(m.enc.params);
      opt_den.step(m.den.params);
      opt_flow.step(m.flow.params);
    }
    const double eps_mean = eps_sum / static_cast<double>(dataset.size());
    const double prior_mean = prior_sum / static_cast<double>(dataset.size());
    if (!std::isfinite(eps_mean) || !std::isfinite(prior_mean) || !m.den.params.all_finite() ||
        !m.enc.params.all_finite() || !m.flow.params.all_finite()) {
      throw DivergenceError("train_diffusion: divergence at epoch " + std::to_string(epoch + 1));
    }
    result.eps_loss.push_back(eps_mean);
    result.prior_loss.push_back(prior_mean);
  }
  return result;
}

void save_diffusion(const std::filesystem::path& path, const DiffusionModel& m) {
  std::vector<nn::ParamSection> sections;
  sections.push_back({"enc", std::to_string(m.enc.latent_dim), m.enc.params});
  sections.push_back({"den", std::to_string(m.den.latent_dim) + " " + std::to_string(m.den.hidden),
                      m.den.params});
  {
    std::ostringstream meta;
    meta << m.flow.dim << ' ' << m.flow.layers << ' ' << m.flow.hidden << ' ';
    meta.precision(17);
    meta << m.flow.scale_bound;
    sections.push_back({"flow", meta.str(), m.flow.params});
  }
  nn::ParamSet sched;
  sched.add("betas", Tensor(1, m.sched.steps, m.sched.betas));
  sections.push_back({"sched", std::to_string(m.sched.steps), std::move(sched)});
  nn::write_params(path, sections);
}

DiffusionModel load_diffusion(const std::filesystem::path& path) {
  const auto sections = nn::read_params(path);
  DiffusionModel m;
  {
    const auto& s = nn::find_section(sections, "enc");
    m.enc.latent_dim = std::stoul(s.meta);
    m.enc.params = s.params;
  }
  {
    const auto& s = nn::find_section(sections, "den");
    std::istringstream meta(s.meta);
    if (!(meta >> m.den.latent_dim >> m.den.hidden)) throw Error("nnp1: bad denoiser metadata");
    m.den.params = s.params;
  }
  {
    const auto& s = nn::find_section(sections, "flow");
    std::istringstream meta(s.meta);
    if (!(meta >> m.flow.dim >> m.flow.layers >> m.flow.hidden >> m.flow.scale_bound)) {
      throw Error("nnp1: bad flow metadata");
    }
    m.flow.params = s.params;
  }
  {
    const auto& s = nn::find_section(sections, "sched");
    m.sched = schedule_from_betas(s.params.values.at(0).data);
  }
  return m;
}

}  // namespace advpc::diffusion
