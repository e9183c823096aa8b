// SPDX-License-Identifier: Apache-2.0

#include "faultline/accel.hpp"

#include <algorithm>
#include <bit>

namespace faultline::accel {

void AcceleratorConfig::validate() const {
  topology.validate();
  if (num_pes == 0 || !std::has_single_bit(num_pes)) {
    throw ContractError("number of PEs must be a positive power of two, got " + std::to_string(num_pes));
  }
  if (formats.size() != topology.matrices()) {
    throw ContractError("accelerator config needs one format set per weight matrix");
  }
  for (const auto& f : formats) {
    f.ir.validate();
    f.wr.validate();
    f.imr.validate();
    if (f.ir.width() != formats[0].ir.width() || f.wr.width() != formats[0].wr.width() ||
        f.imr.width() != formats[0].imr.width()) {
      throw ContractError("register widths must be identical across layers for each register class");
    }
  }
}

std::size_t AcceleratorConfig::register_count(RegisterClass cls) const {
  return cls == RegisterClass::imr ? 2 * num_pes - 1 : num_pes;
}

const fxp::Format& AcceleratorConfig::format(RegisterClass cls, std::size_t layer) const {
  const auto& f = formats.at(layer);
  switch (cls) {
    case RegisterClass::ir: return f.ir;
    case RegisterClass::wr: return f.wr;
    case RegisterClass::imr: return f.imr;
  }
  return f.imr;
}

int AcceleratorConfig::register_width(RegisterClass cls) const { return format(cls, 0).width(); }

AcceleratorConfig make_config(const nn::WeightArchive& archive, std::size_t num_pes) {
  AcceleratorConfig c;
  c.topology = archive.topology;
  c.num_pes = num_pes;
  for (const auto& l : archive.layers) c.formats.push_back(l.formats);
  c.validate();
  return c;
}

std::uint64_t cycles_for_inference(std::span<const std::size_t> layer_sizes, std::size_t num_pes) {
  if (num_pes == 0) throw ContractError("number of PEs must be positive");
  std::uint64_t total = 0;
  for (std::size_t j = 0; j + 1 < layer_sizes.size(); ++j) {
    const std::uint64_t products = static_cast<std::uint64_t>(layer_sizes[j]) * layer_sizes[j + 1];
    total += (products + num_pes - 1) / num_pes;
  }
  return total;
}

std::uint64_t cycles_for_inference(const AcceleratorConfig& config) {
  return cycles_for_inference(config.topology.layer_sizes, config.num_pes);
}

CycleWindow layer_window(const AcceleratorConfig& config, std::size_t j) {
  const auto& sizes = config.topology.layer_sizes;
  if (j + 1 >= sizes.size()) {
    throw ContractError("layer index " + std::to_string(j) + " out of range (network has " +
                        std::to_string(config.topology.matrices()) + " weight matrices)");
  }
  const auto start = cycles_for_inference(std::span(sizes).first(j + 1), config.num_pes);
  const auto end = cycles_for_inference(std::span(sizes).first(j + 2), config.num_pes);
  return {start, end};
}

CycleWindow scope_window(const AcceleratorConfig& config, const faults::FaultScope& scope) {
  if (scope.layer) return layer_window(config, *scope.layer);
  return {0, cycles_for_inference(config)};
}

std::uint64_t total_fault_bits(std::size_t num_pes, int ir_width, int wr_width, int imr_width) {
  const std::uint64_t p = num_pes;
  return p * static_cast<std::uint64_t>(ir_width) + p * static_cast<std::uint64_t>(wr_width) +
         (2 * p - 1) * static_cast<std::uint64_t>(imr_width);
}

std::uint64_t total_fault_bits(const AcceleratorConfig& config) {
  return total_fault_bits(config.num_pes, config.register_width(RegisterClass::ir),
                          config.register_width(RegisterClass::wr),
                          config.register_width(RegisterClass::imr));
}

// ---- simulator ----------------------------------------------------------------

Accelerator::Accelerator(AcceleratorConfig config, const nn::WeightArchive& archive)
    : config_(std::move(config)), archive_(archive) {
  config_.validate();
  archive_.validate();
  if (!(config_.topology == archive_.topology)) {
    throw ContractError("accelerator topology does not match the weight archive");
  }
  for (std::size_t j = 0; j < archive_.layers.size(); ++j) {
    if (!(config_.formats[j] == archive_.layers[j].formats)) {
      throw ContractError("accelerator formats do not match the weight archive at layer " +
                          std::to_string(j));
    }
  }
  total_cycles_ = cycles_for_inference(config_);
  for (std::size_t j = 0; j < config_.topology.matrices(); ++j) {
    layer_start_.push_back(layer_window(config_, j).start);
  }
  const auto p = config_.num_pes;
  ir_.resize(p);
  wr_.resize(p);
  imr_.resize(2 * p - 1);
  tag_.resize(2 * p - 1);
}

InferenceResult Accelerator::run(std::span<const double> input, const InferenceOptions& options) {
  if (input.size() != config_.topology.inputs()) {
    throw ContractError("input has " + std::to_string(input.size()) + " features, network expects " +
                        std::to_string(config_.topology.inputs()));
  }
  const faults::FaultSpec* fault = options.fault;
  CycleWindow active{};
  if (fault != nullptr) {
    fault->validate(config_);
    active = scope_window(config_, fault->scope);
  }
  RegisterTrace* trace = options.trace;
  InferenceResult result;

  auto latch = [&](RegisterClass cls, std::size_t index, fxp::Value v, std::uint64_t cycle) {
    if (fault != nullptr && fault->target.cls == cls && fault->target.index == index) {
      const auto hit = faults::apply(*fault, active, v, cycle);
      v = hit.value;
      if (hit.flipped != 0) {
        ++result.corrupted_writes;
        v = mitigate::correct(options.mitigation, {hit.value, hit.flipped});
      }
    }
    if (trace != nullptr) trace->record(cycle, cls, index, v);
    return v;
  };

  const std::size_t p = config_.num_pes;
  const std::size_t first_leaf = p - 1;
  const std::size_t nodes = 2 * p - 1;

  activations_.clear();
  for (double x : input) activations_.push_back(fxp::quantize(x, config_.formats[0].ir));

  for (std::size_t j = 0; j < archive_.layers.size(); ++j) {
    const auto& layer = archive_.layers[j];
    const auto& fmt = config_.formats[j];
    const std::size_t in = layer.inputs();
    const std::size_t out = layer.outputs();
    const std::size_t products = in * out;
    const std::size_t chunks = (products + p - 1) / p;

    acc_.clear();
    for (const auto& b : layer.biases) acc_.push_back(fxp::resize(b, fmt.imr));
    const fxp::Value zero_ir(fmt.ir);
    const fxp::Value zero_wr(fmt.wr);

    for (std::size_t c = 0; c < chunks; ++c) {
      const std::uint64_t cycle = layer_start_[j] + c;
      const std::size_t q0 = c * p;
      const std::size_t active_lanes = std::min(p, products - q0);
      std::size_t neuron = q0 / in;
      std::size_t input_index = q0 % in;

      for (std::size_t l = 0; l < p; ++l) {
        fxp::Value x = zero_ir;
        fxp::Value w = zero_wr;
        std::int32_t tag = 0;
        if (l < active_lanes) {
          x = activations_[input_index];
          w = layer.weight(input_index, neuron);
          tag = static_cast<std::int32_t>(neuron);
          if (++input_index == in) {
            input_index = 0;
            ++neuron;
          }
        } else {
          tag = tag_[first_leaf + active_lanes - 1];
        }
        ir_[l] = latch(RegisterClass::ir, l, x, cycle);
        wr_[l] = latch(RegisterClass::wr, l, w, cycle);
        const std::size_t leaf = first_leaf + l;
        imr_[leaf] = latch(RegisterClass::imr, leaf, fxp::multiply(ir_[l], wr_[l], fmt.imr), cycle);
        tag_[leaf] = tag;
      }

      for (std::size_t k = first_leaf; k-- > 0;) {
        const std::size_t left = 2 * k + 1;
        const std::size_t right = left + 1;
        if (tag_[left] >= 0 && tag_[left] == tag_[right]) {
          imr_[k] = latch(RegisterClass::imr, k, fxp::add(imr_[left], imr_[right]), cycle);
          tag_[k] = tag_[left];
        } else {
          tag_[k] = -1;
        }
      }

      for (std::size_t k = 0; k < nodes; ++k) {
        const auto t = tag_[k];
        if (t < 0) continue;
        if (k != 0 && tag_[(k - 1) / 2] >= 0) continue;
        auto& acc = acc_[static_cast<std::size_t>(t)];
        acc = fxp::add(acc, imr_[k]);
      }
    }

    const auto act_format = archive_.activation_format(j);
    next_.clear();
    for (const auto& a : acc_) next_.push_back(nn::activate(config_.topology.activation, a, act_format));
    std::swap(activations_, next_);
  }

  result.outputs = activations_;
  result.predicted_class = nn::argmax(std::span<const fxp::Value>(result.outputs));
  return result;
}

InferenceResult run_inference(const AcceleratorConfig& config, const nn::WeightArchive& archive,
                              std::span<const double> input, const InferenceOptions& options) {
  Accelerator sim(config, archive);
  return sim.run(input, options);
}

}  // namespace faultline::accel
