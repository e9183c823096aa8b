// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures: data paths, the desk-scale digits network, and small
// random networks for exhaustive checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <string>

#include "faultline/io.hpp"
#include "faultline/nn.hpp"
#include "faultline/rng.hpp"

namespace faultline::fixtures {

inline std::filesystem::path data_dir() { return FAULTLINE_TEST_DATA; }

inline const nn::Dataset& digits() {
  static const nn::Dataset d = io::read_csv_dataset(data_dir() / "digits.csv", 17.0, 10);
  return d;
}

// First 1437 digits for training, the remaining 360 held out.
inline nn::Dataset digits_train() {
  nn::Dataset d = digits();
  d.items.resize(1437);
  return d;
}

inline nn::Dataset digits_test() {
  nn::Dataset d = digits();
  d.items.erase(d.items.begin(), d.items.begin() + 1437);
  return d;
}

inline nn::TrainOptions desk_train_options() {
  nn::TrainOptions o;
  o.epochs = 100;
  o.learning_rate = 0.1;
  o.weight_decay = 1e-4;
  o.seed = 7;
  return o;
}

/// 64-32-10 logsig network trained on the digits training split.
inline std::shared_ptr<const nn::WeightArchive> desk_archive() {
  static const auto archive = [] {
    const auto train = digits_train();
    const nn::Topology topology{{64, 32, 10}, nn::Activation::logsig};
    const auto net = nn::train(topology, train, desk_train_options());
    return std::make_shared<const nn::WeightArchive>(nn::quantize_network(net, nn::calibrate(net, train)));
  }();
  return archive;
}

/// Two well-separated Gaussian blobs in [0,1)^dims.
inline nn::Dataset blobs(std::size_t n, std::size_t dims, std::uint64_t seed) {
  Rng rng(seed);
  nn::Dataset d;
  d.class_count = 2;
  for (std::size_t i = 0; i < n; ++i) {
    nn::DataItem item;
    item.label = i % 2;
    const double centre = item.label == 0 ? 0.25 : 0.75;
    for (std::size_t k = 0; k < dims; ++k) {
      // Box-Muller with sigma 0.08, clamped into [0, 1).
      const double u1 = std::max(rng.uniform(), 1e-12);
      const double u2 = rng.uniform();
      const double g = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
      item.input.push_back(std::clamp(centre + 0.08 * g, 0.0, 0.999));
    }
    d.items.push_back(std::move(item));
  }
  return d;
}

/// Uniform random inputs in [0, 1) with random labels.
inline nn::Dataset random_inputs(std::size_t n, std::size_t dims, std::size_t classes, std::uint64_t seed) {
  Rng rng(seed);
  nn::Dataset d;
  d.class_count = classes;
  for (std::size_t i = 0; i < n; ++i) {
    nn::DataItem item;
    item.label = static_cast<std::size_t>(rng.below(classes));
    for (std::size_t k = 0; k < dims; ++k) item.input.push_back(rng.uniform());
    d.items.push_back(std::move(item));
  }
  return d;
}

/// Untrained network with Xavier weights, calibrated on random inputs.
inline nn::WeightArchive random_archive(const nn::Topology& topology, std::uint64_t seed, int width = 16) {
  const auto net = nn::initialize(topology, seed);
  const auto data = random_inputs(32, topology.inputs(), topology.outputs(), derive_seed(seed, 1));
  nn::CalibrationOptions options;
  options.total_width = width;
  return nn::quantize_network(net, nn::calibrate(net, data, options));
}

}  // namespace faultline::fixtures
