#pragma once

#include <cstdint>
#include <vector>

#include "advpc/graph.hpp"
#include "advpc/tensor.hpp"

namespace advpc::diffusion {

// Stack of affine coupling layers. Layer l conditions on one half of the
// vector and transforms the other, alternating halves:
//   y_b = x_b * exp(s(x_a)) + t(x_a),   s = bound * tanh(raw / bound)
// The conditioner is a one-hidden-layer tanh MLP. The bounded scale keeps
// the inverse defined everywhere.
struct FlowParams {
  std::size_t dim = 64;
  std::size_t layers = 4;
  std::size_t hidden = 64;
  double scale_bound = 2.0;
  nn::ParamSet params;  // per layer: w1 b1 ws bs wt bt
};

// identity = true zeroes the output layers so the flow starts as the identity.
FlowParams init_flow(std::size_t dim, std::size_t layers, std::size_t hidden, std::uint64_t seed,
                     bool identity = true);

struct FlowResult {
  std::vector<double> value;
  double log_det = 0.0;
};

// w -> z and its log|det J|.
FlowResult flow_forward(const FlowParams& flow, const std::vector<double>& w);
// z -> w and log|det J| of the inverse map (the negative of the forward one).
FlowResult flow_inverse(const FlowParams& flow, const std::vector<double>& z);

// log p(z) = log N(A^{-1}(z); 0, I) - log|det J_A(A^{-1}(z))|
double flow_log_prob(const FlowParams& flow, const std::vector<double>& z);

struct FlowVars {
  nn::Var value;
  nn::Var log_det;
};

FlowVars flow_forward_graph(nn::Graph& g, const FlowParams& flow, nn::Var w, std::size_t group = 0);
FlowVars flow_inverse_graph(nn::Graph& g, const FlowParams& flow, nn::Var z, std::size_t group = 0);
nn::Var flow_log_prob_graph(nn::Graph& g, const FlowParams& flow, nn::Var z, std::size_t group = 0);

}  // namespace advpc::diffusion
