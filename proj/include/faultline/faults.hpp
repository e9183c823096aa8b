// SPDX-License-Identifier: Apache-2.0
//
// Register faults: what a fault is, how campaigns draw them at random, and
// what a fault does to a word when the register is written.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "faultline/fxp.hpp"
#include "faultline/registers.hpp"

namespace faultline::accel {
struct AcceleratorConfig;
}

namespace faultline::faults {

enum class FaultKind { stuck_at_0, stuck_at_1, transient };

std::string to_string(FaultKind k);
FaultKind parse_fault_kind(std::string_view text);
inline bool is_permanent(FaultKind k) { return k != FaultKind::transient; }

/// Cycle span in which a fault is active: the whole inference, or the
/// matrix-multiplication window of one layer.
struct FaultScope {
  std::optional<std::size_t> layer;

  static FaultScope whole() { return {}; }
  static FaultScope of_layer(std::size_t j) { return {j}; }
  std::string to_string() const;
  static FaultScope parse(std::string_view text);

  friend bool operator==(const FaultScope&, const FaultScope&) = default;
};

/// One fault confined to a single register. `bits` is a mask of the affected
/// bit positions; `cycle` is set for transient faults only.
struct FaultSpec {
  FaultKind kind = FaultKind::stuck_at_0;
  RegisterId target;
  std::uint32_t bits = 0;
  FaultScope scope;
  std::optional<std::uint64_t> cycle;

  std::vector<int> bit_list() const;
  int bit_count() const;

  /// Throws ContractError if the fault does not fit the configuration
  /// (unknown register, bit beyond the register width, cycle out of scope).
  void validate(const accel::AcceleratorConfig& config) const;

  friend bool operator==(const FaultSpec&, const FaultSpec&) = default;
};

nlohmann::json to_json(const FaultSpec& f);
FaultSpec fault_from_json(const nlohmann::json& j);

enum class BitComponent { sign, digit, fraction };

std::string to_string(BitComponent c);
BitComponent parse_bit_component(std::string_view text);
fxp::BitRange component_range(BitComponent c, fxp::Format f);

/// Constraints on randomly generated faults. Unset fields are unconstrained.
struct FaultFilter {
  std::optional<RegisterClass> cls;
  std::optional<std::size_t> layer;  // also sets the fault scope
  std::optional<BitComponent> component;
  int count = 1;  // number of distinct bits

  friend bool operator==(const FaultFilter&, const FaultFilter&) = default;
};

/// Format that `cls` registers carry inside the filter's scope (the scoped
/// layer, or Layer_0 for whole-inference faults); component bit ranges
/// resolve under it.
fxp::Format scope_format(const accel::AcceleratorConfig& config, RegisterClass cls,
                         std::optional<std::size_t> layer);

/// Bit positions eligible under the filter for a register class.
std::uint32_t eligible_bits(const accel::AcceleratorConfig& config, RegisterClass cls,
                            const FaultFilter& filter);

/// Draws a register uniformly among the eligible ones, then `filter.count`
/// distinct bits uniformly among its eligible positions, then (transient) a
/// uniform cycle inside the scope window. A pure function of
/// (seed, trial, kind, filter, config). Throws UnsatisfiableFilter.
FaultSpec generate_fault(std::uint64_t seed, std::uint64_t trial, FaultKind kind,
                         const FaultFilter& filter, const accel::AcceleratorConfig& config);

/// Word after a write plus the bits whose value the fault actually changed.
struct Applied {
  fxp::Value value;
  std::uint32_t flipped = 0;
};

/// Effect of `fault` on a value written at `cycle`, where `active` is the
/// fault's scope window. Stuck-at forces its bits on every write inside the
/// window; a transient inverts its bits only at its own cycle.
inline Applied apply(const FaultSpec& fault, CycleWindow active, fxp::Value written,
                     std::uint64_t cycle) {
  const std::uint32_t bits = fault.bits & written.format().mask();
  std::uint32_t raw = written.raw();
  switch (fault.kind) {
    case FaultKind::stuck_at_0:
      if (active.contains(cycle)) raw &= ~bits;
      break;
    case FaultKind::stuck_at_1:
      if (active.contains(cycle)) raw |= bits;
      break;
    case FaultKind::transient:
      if (fault.cycle && *fault.cycle == cycle) raw ^= bits;
      break;
  }
  return {fxp::Value::from_raw(raw, written.format()), raw ^ written.raw()};
}

}  // namespace faultline::faults
