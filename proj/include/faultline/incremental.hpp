// SPDX-License-Identifier: Apache-2.0
//
// Fast single-fault evaluation against a cached fault-free run.
//
// A fault touches one register, so within a cycle every other register holds
// its fault-free value, and every adder-tree node and accumulator adds modulo
// 2^W in one IMR format. A faulty inference therefore equals the fault-free
// accumulators plus, for each corrupted write, the wrapped difference it
// makes at its neuron's accumulator. Layers whose inputs differ from the
// fault-free run are recomputed in full. Results are bit-identical to
// Accelerator::run.
#pragma once

#include <span>
#include <vector>

#include "faultline/accel.hpp"

namespace faultline::accel {

class IncrementalEvaluator {
 public:
  /// Runs and caches the fault-free inference of every item.
  IncrementalEvaluator(AcceleratorConfig config, const nn::WeightArchive& archive,
                       std::span<const nn::DataItem> items);

  const AcceleratorConfig& config() const { return config_; }
  std::size_t items() const { return golden_.size(); }

  InferenceResult run(std::size_t item, const faults::FaultSpec* fault,
                      mitigate::Technique mitigation = mitigate::Technique::none) const;

 private:
  struct Golden {
    // inputs[j] are Layer_j's input activations; inputs.back() the outputs.
    std::vector<std::vector<fxp::Value>> inputs;
    std::vector<std::vector<fxp::Value>> acc;
  };

  struct Lane {
    fxp::Value x, w;
    std::size_t tag = 0;
  };

  Lane lane(std::size_t j, std::span<const fxp::Value> acts, std::size_t chunk, std::size_t l) const;
  void accumulate(std::size_t j, std::span<const fxp::Value> acts, std::vector<fxp::Value>& acc) const;
  void correct_layer(std::size_t j, std::span<const fxp::Value> acts, const faults::FaultSpec& fault,
                     CycleWindow active, mitigate::Technique mitigation, std::vector<fxp::Value>& acc,
                     std::size_t& corrupted) const;

  AcceleratorConfig config_;
  const nn::WeightArchive& archive_;
  std::vector<CycleWindow> windows_;
  std::vector<Golden> golden_;
};

}  // namespace faultline::accel
