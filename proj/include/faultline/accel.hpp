// SPDX-License-Identifier: Apache-2.0
//
// Cycle-accurate model of the streaming accelerator: P multiplier lanes fed
// by input (IR) and weight (WR) registers, an adder tree of intermediate
// registers (IMR), and per-neuron accumulators.
//
// Schedule. The products of Layer_j are ordered output-neuron-major,
// input-index-minor and cut into chunks of exactly P products, one chunk per
// cycle; the last chunk of a layer may be partial and its idle lanes latch
// zeros. A chunk never spans two layers, so Layer_j takes
// ceil(|L_j|*|L_{j+1}| / P) cycles.
//
// Register file. IMR indices follow a binary-heap layout: internal adder
// nodes are 0..P-2 (children of k are 2k+1 and 2k+2) and lane l's
// multiplier output is leaf P-1+l. Lanes carry a neuron tag; a tree node is
// written only when both children carry the same tag, and every maximal
// same-tag subtree root is added into that neuron's accumulator. Idle lanes
// share the tag of the chunk's last active lane. Accumulators start at the
// neuron's bias, use the layer's IMR format, and are not part of the
// fault-targetable register set.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "faultline/faults.hpp"
#include "faultline/mitigate.hpp"
#include "faultline/nn.hpp"
#include "faultline/registers.hpp"
#include "faultline/trace.hpp"

namespace faultline::accel {

struct AcceleratorConfig {
  nn::Topology topology;
  std::size_t num_pes = 64;
  std::vector<nn::LayerFormats> formats;  // one entry per weight matrix

  /// Throws ContractError: P must be a positive power of two, formats must
  /// match the topology, and every layer must use the same width per class.
  void validate() const;

  std::size_t register_count(RegisterClass cls) const;
  int register_width(RegisterClass cls) const;
  const fxp::Format& format(RegisterClass cls, std::size_t layer) const;
};

AcceleratorConfig make_config(const nn::WeightArchive& archive, std::size_t num_pes);

/// T = sum_j ceil(|L_j|*|L_{j+1}| / P).
std::uint64_t cycles_for_inference(const AcceleratorConfig& config);
std::uint64_t cycles_for_inference(std::span<const std::size_t> layer_sizes, std::size_t num_pes);

/// Cycle window of Layer_j. Throws ContractError when j is out of range.
CycleWindow layer_window(const AcceleratorConfig& config, std::size_t j);

/// Window in which a fault with the given scope is active.
CycleWindow scope_window(const AcceleratorConfig& config, const faults::FaultScope& scope);

/// S = sum over classes of register count * register width.
std::uint64_t total_fault_bits(const AcceleratorConfig& config);
std::uint64_t total_fault_bits(std::size_t num_pes, int ir_width, int wr_width, int imr_width);

struct InferenceOptions {
  const faults::FaultSpec* fault = nullptr;
  mitigate::Technique mitigation = mitigate::Technique::none;
  RegisterTrace* trace = nullptr;
};

struct InferenceResult {
  std::size_t predicted_class = 0;
  std::vector<fxp::Value> outputs;
  // Register writes where the fault changed at least one bit.
  std::size_t corrupted_writes = 0;
};

/// Reusable simulator bound to one configuration and archive. Holds scratch
/// buffers, so one instance must not be shared between threads.
class Accelerator {
 public:
  Accelerator(AcceleratorConfig config, const nn::WeightArchive& archive);

  const AcceleratorConfig& config() const { return config_; }
  std::uint64_t cycles() const { return total_cycles_; }

  InferenceResult run(std::span<const double> input, const InferenceOptions& options = {});

 private:
  AcceleratorConfig config_;
  const nn::WeightArchive& archive_;
  std::uint64_t total_cycles_ = 0;
  std::vector<std::uint64_t> layer_start_;

  std::vector<fxp::Value> ir_, wr_, imr_;
  std::vector<std::int32_t> tag_;
  std::vector<fxp::Value> activations_, next_, acc_;
};

/// One-shot convenience wrapper around Accelerator::run.
InferenceResult run_inference(const AcceleratorConfig& config, const nn::WeightArchive& archive,
                              std::span<const double> input, const InferenceOptions& options = {});

}  // namespace faultline::accel
