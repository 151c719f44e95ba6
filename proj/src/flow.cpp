#include "advpc/flow.hpp"

#include <cmath>
#include <numbers>

#include "advpc/error.hpp"
#include "advpc/rng.hpp"

namespace advpc::diffusion {

using nn::Graph;
using nn::Tensor;
using nn::Var;

FlowParams init_flow(std::size_t dim, std::size_t layers, std::size_t hidden, std::uint64_t seed,
                     bool identity) {
  if (dim < 2 || dim % 2 != 0) throw Error("init_flow: dimension must be even and >= 2");
  Rng rng(seed, 0x666c6f77);
  FlowParams f;
  f.dim = dim;
  f.layers = layers;
  f.hidden = hidden;
  const std::size_t half = dim / 2;
  const double out_gain = identity ? 0.0 : 0.5;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string p = "l" + std::to_string(l) + ".";
    f.params.add(p + "w1", nn::init_weight(half, hidden, 1.0, rng));
    f.params.add(p + "b1", Tensor(1, hidden));
    f.params.add(p + "ws", nn::init_weight(hidden, half, out_gain, rng));
    f.params.add(p + "bs", Tensor(1, half));
    f.params.add(p + "wt", nn::init_weight(hidden, half, out_gain, rng));
    f.params.add(p + "bt", Tensor(1, half));
  }
  return f;
}

namespace {

struct Coupling {
  Var scale;  // bounded log-scale
  Var shift;
};

Coupling conditioner(Graph& g, const FlowParams& f, std::size_t layer, Var cond, std::size_t group) {
  const std::size_t base = layer * 6;
  auto P = [&](std::size_t i) { return g.param(f.params, base + i, group); };
  Var h = g.tanh(g.add_row(g.matmul(cond, P(0)), P(1)));
  Var raw = g.add_row(g.matmul(h, P(2)), P(3));
  Var s = g.scale(g.tanh(g.scale(raw, 1.0 / f.scale_bound)), f.scale_bound);
  return {s, g.add_row(g.matmul(h, P(4)), P(5))};
}

void check_dim(const Graph& g, const FlowParams& f, Var v) {
  const Tensor& t = g.value(v);
  if (t.rows != 1 || t.cols != f.dim) throw Error("flow: dimension mismatch");
}

}  // namespace

FlowVars flow_forward_graph(Graph& g, const FlowParams& f, Var w, std::size_t group) {
  check_dim(g, f, w);
  const std::size_t half = f.dim / 2;
  Var x = w;
  Var log_det = g.constant(Tensor(1, 1));
  for (std::size_t l = 0; l < f.layers; ++l) {
    const bool first_conditions = l % 2 == 0;
    Var a = g.slice_cols(x, first_conditions ? 0 : half, half);
    Var b = g.slice_cols(x, first_conditions ? half : 0, half);
    const Coupling c = conditioner(g, f, l, a, group);
    Var y = g.add(g.mul(b, g.exp(c.scale)), c.shift);
    x = first_conditions ? g.concat_cols(a, y) : g.concat_cols(y, a);
    log_det = g.add(log_det, g.sum(c.scale));
  }
  return {x, log_det};
}

FlowVars flow_inverse_graph(Graph& g, const FlowParams& f, Var z, std::size_t group) {
  check_dim(g, f, z);
  const std::size_t half = f.dim / 2;
  Var x = z;
  Var log_det = g.constant(Tensor(1, 1));
  for (std::size_t l = f.layers; l-- > 0;) {
    const bool first_conditions = l % 2 == 0;
    Var a = g.slice_cols(x, first_conditions ? 0 : half, half);
    Var y = g.slice_cols(x, first_conditions ? half : 0, half);
    const Coupling c = conditioner(g, f, l, a, group);
    Var b = g.mul(g.sub(y, c.shift), g.exp(g.scale(c.scale, -1.0)));
    x = first_conditions ? g.concat_cols(a, b) : g.concat_cols(b, a);
    log_det = g.sub(log_det, g.sum(c.scale));
  }
  return {x, log_det};
}

Var flow_log_prob_graph(Graph& g, const FlowParams& f, Var z, std::size_t group) {
  const FlowVars inv = flow_inverse_graph(g, f, z, group);
  const double norm = -0.5 * static_cast<double>(f.dim) * std::log(2.0 * std::numbers::pi);
  Var base = g.add_scalar(g.scale(g.sum(g.square(inv.value)), -0.5), norm);
  return g.add(base, inv.log_det);
}

FlowResult flow_forward(const FlowParams& f, const std::vector<double>& w) {
  Graph g;
  const FlowVars out = flow_forward_graph(g, f, g.constant(Tensor(1, w.size(), w)));
  return {g.value(out.value).data, g.scalar(out.log_det)};
}

FlowResult flow_inverse(const FlowParams& f, const std::vector<double>& z) {
  Graph g;
  const FlowVars out = flow_inverse_graph(g, f, g.constant(Tensor(1, z.size(), z)));
  return {g.value(out.value).data, g.scalar(out.log_det)};
}

double flow_log_prob(const FlowParams& f, const std::vector<double>& z) {
  Graph g;
  return g.scalar(flow_log_prob_graph(g, f, g.constant(Tensor(1, z.size(), z))));
}

}  // namespace advpc::diffusion
