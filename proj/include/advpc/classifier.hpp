#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "advpc/core.hpp"
#include "advpc/graph.hpp"
#include "advpc/tensor.hpp"

namespace advpc::nn {

// PointNet-lite: shared per-point MLP, column-wise max pool, MLP head.
//   "pointnet-lite"       trunk 3 -> 64 -> 128,  head 128 -> 64 -> C
//   "pointnet-lite-wide"  trunk 3 -> 128 -> 256, head 256 -> 64 -> C
struct Architecture {
  std::string name = "pointnet-lite";
  std::size_t trunk1 = 64;
  std::size_t trunk2 = 128;
  std::size_t head = 64;
  std::size_t classes = 4;

  static Architecture by_name(const std::string& name, std::size_t classes);
};

struct ClassifierParams {
  Architecture arch;
  ParamSet params;  // w1 b1 w2 b2 w3 b3 w4 b4

  bool operator==(const ClassifierParams& o) const {
    return arch.name == o.arch.name && arch.classes == o.arch.classes && params == o.params;
  }
};

ClassifierParams init_classifier(const Architecture& arch, std::uint64_t seed);
// All weights and biases zero.
ClassifierParams zero_classifier(const Architecture& arch);

// Cloud as an n x 3 tensor and back.
Tensor to_tensor(const PointCloud& cloud);
PointCloud from_tensor(const Tensor& t, const PointCloud& like);

// Builds the forward pass on `g`; returns logits [1 x C].
Var classifier_forward(Graph& g, const ClassifierParams& p, Var points);

// Counts every forward evaluation of any classifier, process-wide.
std::uint64_t classifier_forward_calls();

std::vector<double> classify(const ClassifierParams& p, const PointCloud& cloud);
int predict(const ClassifierParams& p, const PointCloud& cloud);

struct LossGrads {
  double loss = 0.0;
  std::vector<Tensor> param_grads;
  std::vector<Vec3> input_grad;
};

LossGrads loss_and_grads(const ClassifierParams& p, const PointCloud& cloud, int label);

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
};

struct TrainResult {
  ClassifierParams params;
  std::vector<double> epoch_loss;
};

// Minibatch SGD with momentum. Each cloud must carry a label. Throws
// DivergenceError naming the epoch if the loss becomes non-finite.
TrainResult train_classifier(std::span<const PointCloud> dataset, const Architecture& arch,
                             const TrainConfig& cfg);

double accuracy(const ClassifierParams& p, std::span<const PointCloud> clouds,
                std::size_t workers = 1);

}  // namespace advpc::nn
