// SPDX-License-Identifier: Apache-2.0

#include "faultline/nn.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace faultline::nn {

std::string to_string(Activation a) { return a == Activation::logsig ? "logsig" : "satlin"; }

Activation parse_activation(std::string_view text) {
  if (text == "logsig") return Activation::logsig;
  if (text == "satlin") return Activation::satlin;
  throw FormatError("unknown activation '" + std::string(text) + "' (expected logsig or satlin)");
}

void Topology::validate() const {
  if (layer_sizes.size() < 2) throw ContractError("topology needs at least two layers");
  for (auto s : layer_sizes) {
    if (s == 0) throw ContractError("topology layer sizes must be positive");
  }
}

void FloatNetwork::validate() const {
  topology.validate();
  if (layers.size() != topology.matrices()) throw ContractError("float network: wrong layer count");
  for (std::size_t j = 0; j < layers.size(); ++j) {
    const auto& l = layers[j];
    if (l.inputs != topology.layer_sizes[j] || l.outputs != topology.layer_sizes[j + 1] ||
        l.weights.size() != l.inputs * l.outputs || l.biases.size() != l.outputs) {
      throw ContractError("float network: layer " + std::to_string(j) + " dimensions mismatch");
    }
  }
}

void WeightArchive::validate() const {
  topology.validate();
  output_format.validate();
  if (layers.size() != topology.matrices()) throw ContractError("weight archive: wrong layer count");
  for (std::size_t j = 0; j < layers.size(); ++j) {
    const auto& l = layers[j];
    const auto in = topology.layer_sizes[j];
    const auto out = topology.layer_sizes[j + 1];
    l.formats.ir.validate();
    l.formats.wr.validate();
    l.formats.imr.validate();
    if (l.biases.size() != out || l.weights.size() != in * out) {
      throw ContractError("weight archive: layer " + std::to_string(j) + " dimensions mismatch");
    }
    for (const auto& v : l.weights) {
      if (!(v.format() == l.formats.wr)) throw ContractError("weight archive: weight not in WR format");
    }
    for (const auto& v : l.biases) {
      if (!(v.format() == l.formats.wr)) throw ContractError("weight archive: bias not in WR format");
    }
  }
}

void Dataset::validate(std::size_t input_size) const {
  for (std::size_t n = 0; n < items.size(); ++n) {
    if (items[n].input.size() != input_size) {
      throw ContractError("dataset item " + std::to_string(n) + " has " +
                          std::to_string(items[n].input.size()) + " features, expected " +
                          std::to_string(input_size));
    }
    if (items[n].label >= class_count) {
      throw ContractError("dataset item " + std::to_string(n) + " label out of range");
    }
  }
}

Dataset Dataset::head(std::size_t n) const {
  Dataset out;
  out.class_count = class_count;
  const auto count = (n == 0 || n > items.size()) ? items.size() : n;
  out.items.assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

// ---- activations ------------------------------------------------------------

namespace {

struct LogsigKnots {
  std::array<double, kLogsigSegments + 1> y{};
  LogsigKnots() {
    const double step = 2 * kLogsigRange / kLogsigSegments;
    for (int k = 0; k <= kLogsigSegments; ++k) {
      const double t = -kLogsigRange + step * k;
      y[static_cast<std::size_t>(k)] = 1.0 / (1.0 + std::exp(-t));
    }
  }
};

const LogsigKnots& knots() {
  static const LogsigKnots table;
  return table;
}

}  // namespace

double logsig_pwl(double x) {
  if (x <= -kLogsigRange) return 0.0;
  if (x >= kLogsigRange) return 1.0;
  const double step = 2 * kLogsigRange / kLogsigSegments;
  const double pos = (x + kLogsigRange) / step;
  auto seg = static_cast<int>(std::floor(pos));
  seg = std::clamp(seg, 0, kLogsigSegments - 1);
  const double frac = pos - seg;
  const auto& y = knots().y;
  const double y0 = y[static_cast<std::size_t>(seg)];
  const double y1 = y[static_cast<std::size_t>(seg) + 1];
  return y0 * (1.0 - frac) + y1 * frac;
}

double satlin_real(double x) { return std::clamp(x, 0.0, 1.0); }

double activate_real(Activation a, double x) {
  return a == Activation::logsig ? logsig_pwl(x) : satlin_real(x);
}

fxp::Value logsig(fxp::Value x, fxp::Format out) { return fxp::quantize(logsig_pwl(x.to_real()), out); }

fxp::Value satlin(fxp::Value x, fxp::Format out) { return fxp::quantize(satlin_real(x.to_real()), out); }

fxp::Value activate(Activation a, fxp::Value x, fxp::Format out) {
  return a == Activation::logsig ? logsig(x, out) : satlin(x, out);
}

// ---- references ---------------------------------------------------------------

std::size_t argmax(std::span<const double> values) {
  return argmax(values, [](double a, double b) { return a < b; });
}

std::size_t argmax(std::span<const fxp::Value> values) {
  return argmax(values, [](const fxp::Value& a, const fxp::Value& b) { return a.to_real() < b.to_real(); });
}

namespace {

void check_input(const Topology& t, std::span<const double> input) {
  if (input.size() != t.inputs()) {
    throw ContractError("input has " + std::to_string(input.size()) + " features, network expects " +
                        std::to_string(t.inputs()));
  }
}

}  // namespace

std::vector<double> forward_float(const FloatNetwork& net, std::span<const double> input) {
  check_input(net.topology, input);
  std::vector<double> x(input.begin(), input.end());
  for (const auto& layer : net.layers) {
    std::vector<double> y(layer.biases);
    for (std::size_t i = 0; i < layer.inputs; ++i) {
      const double xi = x[i];
      if (xi == 0.0) continue;
      const double* row = &layer.weights[i * layer.outputs];
      for (std::size_t o = 0; o < layer.outputs; ++o) y[o] += xi * row[o];
    }
    for (auto& v : y) v = activate_real(net.topology.activation, v);
    x = std::move(y);
  }
  return x;
}

std::vector<double> forward_float(const WeightArchive& archive, std::span<const double> input) {
  FloatNetwork net;
  net.topology = archive.topology;
  for (const auto& q : archive.layers) {
    FloatLayer l;
    l.inputs = q.inputs();
    l.outputs = q.outputs();
    for (const auto& w : q.weights) l.weights.push_back(w.to_real());
    for (const auto& b : q.biases) l.biases.push_back(b.to_real());
    net.layers.push_back(std::move(l));
  }
  return forward_float(net, input);
}

QuantizedOutput forward_quantized(const WeightArchive& archive, std::span<const double> input) {
  check_input(archive.topology, input);
  QuantizedOutput result;
  std::vector<fxp::Value> x;
  x.reserve(input.size());
  for (double v : input) x.push_back(fxp::quantize(v, archive.layers.front().formats.ir));

  for (std::size_t j = 0; j < archive.layers.size(); ++j) {
    const auto& layer = archive.layers[j];
    const auto imr = layer.formats.imr;
    const auto act_format = archive.activation_format(j);
    std::vector<fxp::Value> y;
    y.reserve(layer.outputs());
    for (std::size_t o = 0; o < layer.outputs(); ++o) {
      auto start = fxp::resize_checked(layer.biases[o], imr);
      result.wrap_events += start.wrapped;
      fxp::Value acc = start.value;
      for (std::size_t i = 0; i < layer.inputs(); ++i) {
        const auto p = fxp::multiply_checked(x[i], layer.weight(i, o), imr);
        const auto s = fxp::add_checked(acc, p.value);
        result.wrap_events += p.wrapped + s.wrapped;
        acc = s.value;
      }
      y.push_back(activate(archive.topology.activation, acc, act_format));
    }
    x = std::move(y);
  }
  result.outputs = std::move(x);
  return result;
}

std::size_t classify_reference(const WeightArchive& archive, std::span<const double> input, Mode mode) {
  if (mode == Mode::floating) {
    const auto out = forward_float(archive, input);
    return argmax(std::span<const double>(out));
  }
  const auto out = forward_quantized(archive, input);
  return argmax(std::span<const fxp::Value>(out.outputs));
}

double reference_error(const WeightArchive& archive, const Dataset& data, Mode mode) {
  if (data.empty()) throw ContractError("reference_error: empty dataset");
  std::size_t wrong = 0;
  for (const auto& item : data.items) wrong += classify_reference(archive, item.input, mode) != item.label;
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(data.size());
}

double float_error(const FloatNetwork& net, const Dataset& data) {
  if (data.empty()) throw ContractError("float_error: empty dataset");
  std::size_t wrong = 0;
  for (const auto& item : data.items) {
    const auto out = forward_float(net, item.input);
    wrong += argmax(std::span<const double>(out)) != item.label;
  }
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(data.size());
}

// ---- calibration ----------------------------------------------------------------

namespace {

// Smallest d with magnitude < 2^d.
int digits_for(double magnitude) {
  int d = 0;
  while (magnitude >= std::ldexp(1.0, d)) ++d;
  return d;
}

fxp::Format fit_format(bool negative, int digits, int width, const char* what, std::size_t layer) {
  const int sign = negative ? 1 : 0;
  if (sign + digits > width) {
    throw CalibrationError(std::string(what) + " of layer " + std::to_string(layer) + " needs " +
                           std::to_string(sign + digits) + " sign+digit bits but the word has " +
                           std::to_string(width));
  }
  return fxp::Format{sign, digits, width - sign - digits};
}

}  // namespace

Calibration calibrate(const FloatNetwork& net, const Dataset& data, const CalibrationOptions& options) {
  net.validate();
  if (data.empty()) throw ContractError("calibrate: dataset is empty");
  data.validate(net.topology.inputs());
  const int width = options.total_width;
  const int imr_width = options.imr_width == 0 ? options.total_width : options.imr_width;
  if (width < 1 || width > fxp::kMaxWidth || imr_width < 1 || imr_width > fxp::kMaxWidth) {
    throw ContractError("calibrate: register widths must be in [1, 32]");
  }

  Calibration cal;
  cal.output_format = fxp::Format{0, 0, width};

  // Layer 0 inputs straight from the data.
  bool input_negative = false;
  double input_max = 0.0;
  for (const auto& item : data.items) {
    for (double v : item.input) {
      input_negative |= v < 0.0;
      input_max = std::max(input_max, std::fabs(v));
    }
  }
  fxp::Format ir0 = fit_format(input_negative, digits_for(input_max), width, "IR", 0);

  std::vector<std::vector<fxp::Value>> inputs;
  inputs.reserve(data.size());
  for (const auto& item : data.items) {
    std::vector<fxp::Value> x;
    for (double v : item.input) x.push_back(fxp::quantize(v, ir0));
    inputs.push_back(std::move(x));
  }

  for (std::size_t j = 0; j < net.layers.size(); ++j) {
    const auto& layer = net.layers[j];
    LayerFormats formats;
    // Hidden-layer IRs hold activation outputs, which saturate into [0, 1).
    formats.ir = j == 0 ? ir0 : fxp::Format{0, 0, width};

    bool w_negative = false;
    double w_max = 0.0;
    for (double w : layer.weights) {
      w_negative |= w < 0.0;
      w_max = std::max(w_max, std::fabs(w));
    }
    for (double b : layer.biases) {
      w_negative |= b < 0.0;
      w_max = std::max(w_max, std::fabs(b));
    }
    formats.wr = fit_format(w_negative, digits_for(w_max), width, "WR", j);

    std::vector<fxp::Value> wq;
    wq.reserve(layer.weights.size());
    for (double w : layer.weights) wq.push_back(fxp::quantize(w, formats.wr));
    std::vector<fxp::Value> bq;
    for (double b : layer.biases) bq.push_back(fxp::quantize(b, formats.wr));

    // Every IMR value (product, tree node, accumulator) is bounded by
    // |bias| + sum |product| of its neuron; truncation adds < 1 ulp per term.
    bool imr_negative = false;
    double imr_bound = 0.0;
    for (const auto& x : inputs) {
      for (std::size_t o = 0; o < layer.outputs; ++o) {
        const double b = bq[o].to_real();
        imr_negative |= b < 0.0;
        double bound = std::fabs(b);
        for (std::size_t i = 0; i < layer.inputs; ++i) {
          const double p = x[i].to_real() * wq[i * layer.outputs + o].to_real();
          imr_negative |= p < 0.0;
          bound += std::fabs(p);
        }
        imr_bound = std::max(imr_bound, bound);
      }
    }
    const int sign = imr_negative ? 1 : 0;
    const auto terms = static_cast<double>(layer.inputs + 1);
    int digits = 0;
    while (true) {
      if (sign + digits > imr_width) {
        throw CalibrationError("IMR of layer " + std::to_string(j) + " needs more than " +
                               std::to_string(imr_width) + " sign+digit bits");
      }
      const int frac = imr_width - sign - digits;
      if (imr_bound + terms * std::ldexp(1.0, -frac) < std::ldexp(1.0, digits)) break;
      ++digits;
    }
    formats.imr = fxp::Format{sign, digits, imr_width - sign - digits};
    cal.layers.push_back(formats);

    // Advance the quantized activations to the next layer.
    const auto act_format = j + 1 < net.layers.size() ? fxp::Format{0, 0, width} : cal.output_format;
    for (auto& x : inputs) {
      std::vector<fxp::Value> y;
      y.reserve(layer.outputs);
      for (std::size_t o = 0; o < layer.outputs; ++o) {
        fxp::Value acc = fxp::resize(bq[o], formats.imr);
        for (std::size_t i = 0; i < layer.inputs; ++i) {
          acc = fxp::add(acc, fxp::multiply(x[i], wq[i * layer.outputs + o], formats.imr));
        }
        y.push_back(activate(net.topology.activation, acc, act_format));
      }
      x = std::move(y);
    }
  }
  return cal;
}

WeightArchive quantize_network(const FloatNetwork& net, const Calibration& calibration) {
  net.validate();
  if (calibration.layers.size() != net.layers.size()) {
    throw ContractError("quantize_network: calibration does not match the network");
  }
  WeightArchive archive;
  archive.topology = net.topology;
  archive.output_format = calibration.output_format;
  for (std::size_t j = 0; j < net.layers.size(); ++j) {
    const auto& layer = net.layers[j];
    QuantizedLayer q;
    q.formats = calibration.layers[j];
    q.weights.reserve(layer.weights.size());
    for (double w : layer.weights) q.weights.push_back(fxp::quantize(w, q.formats.wr));
    for (double b : layer.biases) q.biases.push_back(fxp::quantize(b, q.formats.wr));
    archive.layers.push_back(std::move(q));
  }
  archive.validate();
  return archive;
}

}  // namespace faultline::nn
