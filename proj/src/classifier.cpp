#include "advpc/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "advpc/error.hpp"
#include "advpc/parallel.hpp"
#include "advpc/rng.hpp"

namespace advpc::nn {

namespace {

std::atomic<std::uint64_t> g_forward_calls{0};

enum Slot : std::size_t { W1, B1, W2, B2, W3, B3, W4, B4 };

}  // namespace

Architecture Architecture::by_name(const std::string& name, std::size_t classes) {
  Architecture a;
  a.name = name;
  a.classes = classes;
  if (name == "pointnet-lite") {
    a.trunk1 = 64;
    a.trunk2 = 128;
  } else if (name == "pointnet-lite-wide") {
    a.trunk1 = 128;
    a.trunk2 = 256;
  } else {
    throw Error("unknown classifier architecture: " + name);
  }
  a.head = 64;
  return a;
}

ClassifierParams init_classifier(const Architecture& arch, std::uint64_t seed) {
  Rng rng(seed, 0x636c6600);
  const double he = std::sqrt(2.0);
  ClassifierParams p;
  p.arch = arch;
  p.params.add("w1", init_weight(3, arch.trunk1, he, rng));
  p.params.add("b1", Tensor(1, arch.trunk1));
  p.params.add("w2", init_weight(arch.trunk1, arch.trunk2, he, rng));
  p.params.add("b2", Tensor(1, arch.trunk2));
  p.params.add("w3", init_weight(arch.trunk2, arch.head, he, rng));
  p.params.add("b3", Tensor(1, arch.head));
  p.params.add("w4", init_weight(arch.head, arch.classes, 1.0, rng));
  p.params.add("b4", Tensor(1, arch.classes));
  return p;
}

ClassifierParams zero_classifier(const Architecture& arch) {
  ClassifierParams p = init_classifier(arch, 0);
  for (auto& v : p.params.values) std::fill(v.data.begin(), v.data.end(), 0.0);
  return p;
}

Tensor to_tensor(const PointCloud& cloud) {
  Tensor t(cloud.size(), 3);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (std::size_t d = 0; d < 3; ++d) t(i, d) = cloud.points[i][d];
  }
  return t;
}

PointCloud from_tensor(const Tensor& t, const PointCloud& like) {
  if (t.cols != 3) throw Error("from_tensor: expected n x 3");
  PointCloud out;
  out.label = like.label;
  out.id = like.id;
  out.points.resize(t.rows);
  for (std::size_t i = 0; i < t.rows; ++i) out.points[i] = {t(i, 0), t(i, 1), t(i, 2)};
  return out;
}

Var classifier_forward(Graph& g, const ClassifierParams& p, Var points) {
  g_forward_calls.fetch_add(1, std::memory_order_relaxed);
  const auto& ps = p.params;
  Var h = g.relu(g.add_row(g.matmul(points, g.param(ps, W1)), g.param(ps, B1)));
  h = g.relu(g.add_row(g.matmul(h, g.param(ps, W2)), g.param(ps, B2)));
  Var global = g.max_rows(h);
  Var f = g.relu(g.add_row(g.matmul(global, g.param(ps, W3)), g.param(ps, B3)));
  return g.add_row(g.matmul(f, g.param(ps, W4)), g.param(ps, B4));
}

std::uint64_t classifier_forward_calls() { return g_forward_calls.load(); }

std::vector<double> classify(const ClassifierParams& p, const PointCloud& cloud) {
  check_valid(cloud, "classify");
  Graph g;
  Var logits = classifier_forward(g, p, g.constant(to_tensor(cloud)));
  return g.value(logits).data;
}

int predict(const ClassifierParams& p, const PointCloud& cloud) {
  const auto logits = classify(p, cloud);
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

LossGrads loss_and_grads(const ClassifierParams& p, const PointCloud& cloud, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= p.arch.classes) {
    throw Error("loss_and_grads: label out of range");
  }
  check_valid(cloud, "loss_and_grads");
  Graph g;
  Var x = g.input(to_tensor(cloud));
  Var loss = g.softmax_cross_entropy(classifier_forward(g, p, x), label);
  LossGrads out;
  out.param_grads = p.params.zeros_like();
  g.backward(loss, &out.param_grads);
  out.loss = g.scalar(loss);
  const Tensor& gx = g.grad(x);
  out.input_grad.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) out.input_grad[i] = {gx(i, 0), gx(i, 1), gx(i, 2)};
  return out;
}

TrainResult train_classifier(std::span<const PointCloud> dataset, const Architecture& arch,
                             const TrainConfig& cfg) {
  if (dataset.empty()) throw Error("train_classifier: empty dataset");
  if (cfg.batch_size == 0) throw Error("train_classifier: batch size must be positive");
  std::vector<int> labels;
  for (const auto& c : dataset) {
    if (!c.label) throw Error("train_classifier: unlabeled cloud");
    labels.push_back(*c.label);
  }
  {
    auto uniq = labels;
    std::sort(uniq.begin(), uniq.end());
    if (std::unique(uniq.begin(), uniq.end()) - uniq.begin() < 2) {
      throw Error("train_classifier: dataset needs at least 2 classes");
    }
  }

  TrainResult result;
  result.params = init_classifier(arch, cfg.seed);
  ParamSet& ps = result.params.params;
  SgdMomentum opt(ps, cfg.lr, cfg.momentum, cfg.weight_decay);
  const Rng root(cfg.seed, 0x747261696e);

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = root.split(epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.below(i))]);
    }

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::size_t bs = end - start;
      std::vector<LossGrads> per(bs);
      parallel_for(bs, cfg.workers, [&](std::size_t k) {
        const std::size_t idx = order[start + k];
        per[k] = loss_and_grads(result.params, dataset[idx], labels[idx]);
      });
      ps.zero_grad();
      for (const auto& lg : per) {
        ps.accumulate_grads(lg.param_grads, 1.0 / static_cast<double>(bs));
        epoch_loss += lg.loss;
      }
      opt.step(ps);
    }
    epoch_loss /= static_cast<double>(dataset.size());
    if (!std::isfinite(epoch_loss) || !ps.all_finite()) {
      throw DivergenceError("train_classifier: divergence at epoch " + std::to_string(epoch + 1));
    }
    result.epoch_loss.push_back(epoch_loss);
  }
  return result;
}

double accuracy(const ClassifierParams& p, std::span<const PointCloud> clouds, std::size_t workers) {
  if (clouds.empty()) throw Error("accuracy: empty set");
  std::vector<int> correct(clouds.size(), 0);
  parallel_for(clouds.size(), workers, [&](std::size_t i) {
    correct[i] = clouds[i].label && predict(p, clouds[i]) == *clouds[i].label ? 1 : 0;
  });
  return static_cast<double>(std::accumulate(correct.begin(), correct.end(), 0)) /
         static_cast<double>(clouds.size());
}

}  // namespace advpc::nn
