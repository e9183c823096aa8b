// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>

#include "faultline/nn.hpp"
#include "faultline/rng.hpp"

namespace faultline::nn {

FloatNetwork initialize(const Topology& topology, std::uint64_t seed) {
  topology.validate();
  Rng rng(seed);
  FloatNetwork net;
  net.topology = topology;
  for (std::size_t j = 0; j < topology.matrices(); ++j) {
    FloatLayer layer;
    layer.inputs = topology.layer_sizes[j];
    layer.outputs = topology.layer_sizes[j + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.inputs + layer.outputs));
    layer.weights.resize(layer.inputs * layer.outputs);
    for (auto& w : layer.weights) w = rng.uniform(-limit, limit);
    layer.biases.assign(layer.outputs, 0.0);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Satlin derivative with a small leak outside (0, 1) so saturated units can
// still recover during training.
double satlin_slope(double z) { return (z > 0.0 && z < 1.0) ? 1.0 : 0.01; }

}  // namespace

FloatNetwork train(const Topology& topology, const Dataset& data, const TrainOptions& options) {
  auto net = initialize(topology, options.seed);
  if (options.epochs == 0) return net;
  if (data.empty()) throw ContractError("train: dataset is empty");
  data.validate(topology.inputs());
  if (data.class_count > topology.outputs()) {
    throw ContractError("train: dataset has more classes than output neurons");
  }

  const bool logsig = topology.activation == Activation::logsig;
  const std::size_t depth = net.layers.size();
  std::vector<std::vector<double>> pre(depth);   // z per layer
  std::vector<std::vector<double>> post(depth);  // a per layer
  std::vector<std::vector<double>> delta(depth);
  for (std::size_t j = 0; j < depth; ++j) {
    pre[j].resize(net.layers[j].outputs);
    post[j].resize(net.layers[j].outputs);
    delta[j].resize(net.layers[j].outputs);
  }

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed(options.seed, 0x5eedull));

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t n = order.size(); n > 1; --n) {
      std::swap(order[n - 1], order[shuffle_rng.below(n)]);
    }
    double loss = 0.0;
    for (auto idx : order) {
      const auto& item = data.items[idx];
      // Forward.
      for (std::size_t j = 0; j < depth; ++j) {
        const auto& layer = net.layers[j];
        const std::vector<double>& x = j == 0 ? item.input : post[j - 1];
        auto& z = pre[j];
        std::copy(layer.biases.begin(), layer.biases.end(), z.begin());
        for (std::size_t i = 0; i < layer.inputs; ++i) {
          const double xi = x[i];
          if (xi == 0.0) continue;
          const double* row = &layer.weights[i * layer.outputs];
          for (std::size_t o = 0; o < layer.outputs; ++o) z[o] += xi * row[o];
        }
        for (std::size_t o = 0; o < layer.outputs; ++o) {
          post[j][o] = logsig ? sigmoid(z[o]) : satlin_real(z[o]);
        }
      }
      // Output error.
      auto& out = post[depth - 1];
      for (std::size_t o = 0; o < out.size(); ++o) {
        const double target = o == item.label ? 1.0 : 0.0;
        if (logsig) {
          const double a = std::clamp(out[o], 1e-12, 1.0 - 1e-12);
          loss -= target * std::log(a) + (1.0 - target) * std::log(1.0 - a);
          delta[depth - 1][o] = out[o] - target;
        } else {
          const double e = out[o] - target;
          loss += 0.5 * e * e;
          delta[depth - 1][o] = e * satlin_slope(pre[depth - 1][o]);
        }
      }
      // Backward.
      for (std::size_t j = depth - 1; j > 0; --j) {
        const auto& layer = net.layers[j];
        for (std::size_t i = 0; i < layer.inputs; ++i) {
          double s = 0.0;
          const double* row = &layer.weights[i * layer.outputs];
          for (std::size_t o = 0; o < layer.outputs; ++o) s += row[o] * delta[j][o];
          const double a = post[j - 1][i];
          delta[j - 1][i] = s * (logsig ? a * (1.0 - a) : satlin_slope(pre[j - 1][i]));
        }
      }
      // Update.
      for (std::size_t j = 0; j < depth; ++j) {
        auto& layer = net.layers[j];
        const std::vector<double>& x = j == 0 ? item.input : post[j - 1];
        const double lr = options.learning_rate;
        if (options.weight_decay > 0.0) {
          const double shrink = 1.0 - lr * options.weight_decay;
          for (auto& w : layer.weights) w *= shrink;
        }
        for (std::size_t i = 0; i < layer.inputs; ++i) {
          const double xi = x[i];
          if (xi == 0.0) continue;
          double* row = &layer.weights[i * layer.outputs];
          for (std::size_t o = 0; o < layer.outputs; ++o) row[o] -= lr * xi * delta[j][o];
        }
        for (std::size_t o = 0; o < layer.outputs; ++o) layer.biases[o] -= lr * delta[j][o];
      }
    }
    if (!std::isfinite(loss)) {
      throw TrainingError("training diverged at epoch " + std::to_string(epoch) +
                          " (non-finite loss); lower the learning rate");
    }
  }
  return net;
}

}  // namespace faultline::nn
