// SPDX-License-Identifier: Apache-2.0

#include "faultline/incremental.hpp"

#include <algorithm>

namespace faultline::accel {

IncrementalEvaluator::IncrementalEvaluator(AcceleratorConfig config, const nn::WeightArchive& archive,
                                           std::span<const nn::DataItem> items)
    : config_(std::move(config)), archive_(archive) {
  // Reuse the simulator's consistency checks.
  const Accelerator check(config_, archive_);
  for (std::size_t j = 0; j < config_.topology.matrices(); ++j) windows_.push_back(layer_window(config_, j));

  golden_.reserve(items.size());
  for (const auto& item : items) {
    if (item.input.size() != config_.topology.inputs()) {
      throw ContractError("input has " + std::to_string(item.input.size()) + " features, network expects " +
                          std::to_string(config_.topology.inputs()));
    }
    Golden g;
    std::vector<fxp::Value> acts;
    for (double x : item.input) acts.push_back(fxp::quantize(x, config_.formats[0].ir));
    for (std::size_t j = 0; j < archive_.layers.size(); ++j) {
      std::vector<fxp::Value> acc;
      accumulate(j, acts, acc);
      std::vector<fxp::Value> next;
      for (const auto& a : acc) {
        next.push_back(nn::activate(config_.topology.activation, a, archive_.activation_format(j)));
      }
      g.inputs.push_back(std::move(acts));
      g.acc.push_back(std::move(acc));
      acts = std::move(next);
    }
    g.inputs.push_back(std::move(acts));
    golden_.push_back(std::move(g));
  }
}

IncrementalEvaluator::Lane IncrementalEvaluator::lane(std::size_t j, std::span<const fxp::Value> acts,
                                                      std::size_t chunk, std::size_t l) const {
  const auto& layer = archive_.layers[j];
  const auto& fmt = config_.formats[j];
  const std::size_t p = config_.num_pes;
  const std::size_t in = layer.inputs();
  const std::size_t q0 = chunk * p;
  const std::size_t active = std::min(p, in * layer.outputs() - q0);
  if (l < active) {
    const std::size_t q = q0 + l;
    return {acts[q % in], layer.weight(q % in, q / in), q / in};
  }
  return {fxp::Value(fmt.ir), fxp::Value(fmt.wr), (q0 + active - 1) / in};
}

void IncrementalEvaluator::accumulate(std::size_t j, std::span<const fxp::Value> acts,
                                      std::vector<fxp::Value>& acc) const {
  const auto& layer = archive_.layers[j];
  const auto& imr = config_.formats[j].imr;
  acc.clear();
  for (std::size_t n = 0; n < layer.outputs(); ++n) {
    std::int64_t sum = fxp::resize(layer.biases[n], imr).integer();
    for (std::size_t i = 0; i < layer.inputs(); ++i) sum += fxp::multiply(acts[i], layer.weight(i, n), imr).integer();
    acc.push_back(fxp::Value::from_integer(sum, imr));
  }
}

void IncrementalEvaluator::correct_layer(std::size_t j, std::span<const fxp::Value> acts,
                                         const faults::FaultSpec& fault, CycleWindow active,
                                         mitigate::Technique mitigation, std::vector<fxp::Value>& acc,
                                         std::size_t& corrupted) const {
  const auto window = windows_[j];
  std::uint64_t lo = std::max(window.start, active.start);
  std::uint64_t hi = std::min(window.end, active.end);
  if (fault.kind == faults::FaultKind::transient) {
    if (!fault.cycle || *fault.cycle < lo || *fault.cycle >= hi) return;
    lo = *fault.cycle;
    hi = lo + 1;
  }

  const auto& imr = config_.formats[j].imr;
  const std::size_t p = config_.num_pes;
  const auto cls = fault.target.cls;
  const std::size_t index = fault.target.index;

  auto latch = [&](fxp::Value written, std::uint64_t cycle) {
    const auto hit = faults::apply(fault, active, written, cycle);
    if (hit.flipped == 0) return written;
    ++corrupted;
    return mitigate::correct(mitigation, {hit.value, hit.flipped});
  };
  auto shift = [&](std::size_t tag, fxp::Value faulty, fxp::Value clean) {
    acc[tag] = fxp::Value::from_integer(acc[tag].integer() + faulty.integer() - clean.integer(), imr);
  };

  for (std::uint64_t c = lo; c < hi; ++c) {
    const std::size_t chunk = c - window.start;
    if (cls != RegisterClass::imr) {
      const auto ln = lane(j, acts, chunk, index);
      const auto written = cls == RegisterClass::ir ? ln.x : ln.w;
      const auto v = latch(written, c);
      if (v == written) continue;
      const auto x = cls == RegisterClass::ir ? v : ln.x;
      const auto w = cls == RegisterClass::wr ? v : ln.w;
      shift(ln.tag, fxp::multiply(x, w, imr), fxp::multiply(ln.x, ln.w, imr));
    } else if (index >= p - 1) {
      const auto ln = lane(j, acts, chunk, index - (p - 1));
      const auto written = fxp::multiply(ln.x, ln.w, imr);
      shift(ln.tag, latch(written, c), written);
    } else {
      // Internal node: written only when every leaf below carries one tag.
      // Lane tags never decrease, so comparing the outer leaves suffices.
      std::size_t first = index;
      std::size_t count = 1;
      while (first < p - 1) {
        first = 2 * first + 1;
        count *= 2;
      }
      first -= p - 1;
      const auto tag = lane(j, acts, chunk, first).tag;
      if (lane(j, acts, chunk, first + count - 1).tag != tag) continue;
      std::int64_t sum = 0;
      for (std::size_t l = first; l < first + count; ++l) {
        const auto ln = lane(j, acts, chunk, l);
        sum += fxp::multiply(ln.x, ln.w, imr).integer();
      }
      const auto written = fxp::Value::from_integer(sum, imr);
      shift(tag, latch(written, c), written);
    }
  }
}

InferenceResult IncrementalEvaluator::run(std::size_t item, const faults::FaultSpec* fault,
                                          mitigate::Technique mitigation) const {
  const auto& g = golden_.at(item);
  InferenceResult result;
  if (fault == nullptr) {
    result.outputs = g.inputs.back();
  } else {
    fault->validate(config_);
    const auto active = scope_window(config_, fault->scope);
    std::vector<fxp::Value> acts = g.inputs[0];
    std::vector<fxp::Value> acc;
    bool diverged = false;
    for (std::size_t j = 0; j < archive_.layers.size(); ++j) {
      if (diverged) {
        accumulate(j, acts, acc);
      } else {
        acc = g.acc[j];
      }
      correct_layer(j, acts, *fault, active, mitigation, acc, result.corrupted_writes);
      if (!diverged && acc == g.acc[j]) {
        acts = g.inputs[j + 1];
        continue;
      }
      std::vector<fxp::Value> next;
      next.reserve(acc.size());
      for (const auto& a : acc) {
        next.push_back(nn::activate(config_.topology.activation, a, archive_.activation_format(j)));
      }
      diverged = next != g.inputs[j + 1];
      acts = std::move(next);
    }
    result.outputs = std::move(acts);
  }
  result.predicted_class = nn::argmax(std::span<const fxp::Value>(result.outputs));
  return result;
}

}  // namespace faultline::accel
