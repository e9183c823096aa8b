// SPDX-License-Identifier: Apache-2.0
//
// Fully-connected network model: topology, activation functions, the
// floating-point and quantized golden references, per-layer precision
// calibration, and a small SGD trainer.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faultline/fxp.hpp"

namespace faultline::nn {

enum class Activation { logsig, satlin };

std::string to_string(Activation a);
Activation parse_activation(std::string_view text);

struct Topology {
  std::vector<std::size_t> layer_sizes;
  Activation activation = Activation::logsig;

  // Number of weight matrices (Layer_0 .. Layer_{N-2}).
  std::size_t matrices() const { return layer_sizes.empty() ? 0 : layer_sizes.size() - 1; }
  std::size_t inputs() const { return layer_sizes.front(); }
  std::size_t outputs() const { return layer_sizes.back(); }
  void validate() const;

  friend bool operator==(const Topology&, const Topology&) = default;
};

/// Register formats used while computing one weight matrix.
struct LayerFormats {
  fxp::Format ir;   // inputs latched into IRs
  fxp::Format wr;   // weights (and biases) latched into WRs
  fxp::Format imr;  // products, adder-tree nodes, accumulators

  friend bool operator==(const LayerFormats&, const LayerFormats&) = default;
};

/// Float parameters of one weight matrix. Weights are stored input-major:
/// weight(i, o) = weights[i * outputs + o].
struct FloatLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;
  std::vector<double> biases;

  double weight(std::size_t i, std::size_t o) const { return weights[i * outputs + o]; }
  double& weight(std::size_t i, std::size_t o) { return weights[i * outputs + o]; }
};

struct FloatNetwork {
  Topology topology;
  std::vector<FloatLayer> layers;
  void validate() const;
};

struct QuantizedLayer {
  LayerFormats formats;
  std::vector<fxp::Value> weights;  // input-major, WR format
  std::vector<fxp::Value> biases;   // WR format

  std::size_t inputs() const { return outputs() == 0 ? 0 : weights.size() / outputs(); }
  std::size_t outputs() const { return biases.size(); }
  const fxp::Value& weight(std::size_t i, std::size_t o) const { return weights[i * outputs() + o]; }
};

/// Quantized trained parameters plus the per-layer register formats.
struct WeightArchive {
  Topology topology;
  std::vector<QuantizedLayer> layers;
  // Format of the output layer's activations (argmax operands).
  fxp::Format output_format{0, 0, 16};

  /// Format that layer j's activations are produced in: the next layer's IR
  /// format, or output_format for the last layer.
  const fxp::Format& activation_format(std::size_t j) const {
    return j + 1 < layers.size() ? layers[j + 1].formats.ir : output_format;
  }
  void validate() const;
};

struct DataItem {
  std::vector<double> input;
  std::size_t label = 0;
};

struct Dataset {
  std::vector<DataItem> items;
  std::size_t class_count = 0;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  /// Throws ContractError unless every input has `input_size` features and
  /// every label is below class_count.
  void validate(std::size_t input_size) const;
  /// First `n` items (all of them when n is 0 or exceeds the size).
  Dataset head(std::size_t n) const;
};

// ---- activation functions -------------------------------------------------

inline constexpr double kLogsigRange = 8.0;
inline constexpr int kLogsigSegments = 32;

/// Real-valued piecewise-linear sigmoid: 32 uniform segments over [-8, 8]
/// with exact-sigmoid knots, clamped to 0 / 1 outside.
double logsig_pwl(double x);
double satlin_real(double x);
double activate_real(Activation a, double x);

fxp::Value logsig(fxp::Value x, fxp::Format out);
fxp::Value satlin(fxp::Value x, fxp::Format out);
fxp::Value activate(Activation a, fxp::Value x, fxp::Format out);

// ---- golden references -----------------------------------------------------

enum class Mode { floating, quantized };

/// Index of the largest element; ties go to the lowest index.
template <typename T, typename Less>
std::size_t argmax(std::span<const T> values, Less less) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (less(values[best], values[i])) best = i;
  }
  return best;
}
std::size_t argmax(std::span<const double> values);
std::size_t argmax(std::span<const fxp::Value> values);

/// Real-valued forward pass (PWL activations, no quantization).
std::vector<double> forward_float(const FloatNetwork& net, std::span<const double> input);
std::vector<double> forward_float(const WeightArchive& archive, std::span<const double> input);

struct QuantizedOutput {
  std::vector<fxp::Value> outputs;
  // Multiplies or accumulations whose exact result left the IMR range.
  std::size_t wrap_events = 0;
};

/// Bit-exact fixed-point forward pass with flat (sequential) accumulation:
/// the accumulator starts at the bias, each product is narrowed to the IMR
/// format, activations saturate into the next layer's IR format.
QuantizedOutput forward_quantized(const WeightArchive& archive, std::span<const double> input);

std::size_t classify_reference(const WeightArchive& archive, std::span<const double> input,
                               Mode mode);

/// Percentage of misclassified items under the quantized reference.
double reference_error(const WeightArchive& archive, const Dataset& data, Mode mode);

// ---- calibration -----------------------------------------------------------

struct CalibrationOptions {
  int total_width = 16;
  // IMR width; 0 means total_width.
  int imr_width = 0;
};

struct Calibration {
  std::vector<LayerFormats> layers;
  fxp::Format output_format;
};

/// Minimum sign/digit widths per layer and register class from a fault-free
/// pass over `data`; the remaining bits of each word go to the fraction.
/// Throws CalibrationError when a class needs more digits than fit.
Calibration calibrate(const FloatNetwork& net, const Dataset& data,
                      const CalibrationOptions& options = {});

/// Quantizes float parameters under the given formats.
WeightArchive quantize_network(const FloatNetwork& net, const Calibration& calibration);

// ---- training --------------------------------------------------------------

struct TrainOptions {
  std::size_t epochs = 100;
  double learning_rate = 0.1;
  // L2 penalty on weights (not biases), applied every step.
  double weight_decay = 0.0;
  std::uint64_t seed = 1;
};

/// Xavier-uniform initial parameters drawn from `seed`.
FloatNetwork initialize(const Topology& topology, std::uint64_t seed);

/// Plain per-item SGD with cross-entropy on sigmoid outputs (logsig) or
/// squared error (satlin). Deterministic for a given seed. Throws
/// TrainingError when the loss becomes non-finite.
FloatNetwork train(const Topology& topology, const Dataset& data, const TrainOptions& options);

/// Percentage of misclassified items under the real-valued forward pass.
double float_error(const FloatNetwork& net, const Dataset& data);

}  // namespace faultline::nn
