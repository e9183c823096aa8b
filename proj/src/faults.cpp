// SPDX-License-Identifier: Apache-2.0

#include "faultline/faults.hpp"

#include <bit>
#include <charconv>

#include "faultline/accel.hpp"
#include "faultline/rng.hpp"

namespace faultline {

std::string to_string(RegisterClass c) {
  switch (c) {
    case RegisterClass::ir: return "IR";
    case RegisterClass::wr: return "WR";
    case RegisterClass::imr: return "IMR";
  }
  return "IR";
}

RegisterClass parse_register_class(std::string_view text) {
  if (text == "IR" || text == "ir") return RegisterClass::ir;
  if (text == "WR" || text == "wr") return RegisterClass::wr;
  if (text == "IMR" || text == "imr") return RegisterClass::imr;
  throw FormatError("unknown register class '" + std::string(text) + "' (IR, WR, IMR)");
}

}  // namespace faultline

namespace faultline::faults {

std::string to_string(FaultKind k) {
  switch (k) {
    case FaultKind::stuck_at_0: return "stuck_at_0";
    case FaultKind::stuck_at_1: return "stuck_at_1";
    case FaultKind::transient: return "transient";
  }
  return "transient";
}

FaultKind parse_fault_kind(std::string_view text) {
  if (text == "stuck_at_0" || text == "sa0") return FaultKind::stuck_at_0;
  if (text == "stuck_at_1" || text == "sa1") return FaultKind::stuck_at_1;
  if (text == "transient") return FaultKind::transient;
  throw FormatError("unknown fault kind '" + std::string(text) + "' (stuck_at_0, stuck_at_1, transient)");
}

std::string FaultScope::to_string() const {
  return layer ? "layer:" + std::to_string(*layer) : "inference";
}

FaultScope FaultScope::parse(std::string_view text) {
  if (text == "inference") return whole();
  constexpr std::string_view prefix = "layer:";
  if (text.substr(0, prefix.size()) == prefix) {
    const auto digits = text.substr(prefix.size());
    std::size_t j = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), j);
    if (ec == std::errc{} && ptr == digits.data() + digits.size() && !digits.empty()) return of_layer(j);
  }
  throw FormatError("bad fault scope '" + std::string(text) + "' (inference or layer:<j>)");
}

std::vector<int> FaultSpec::bit_list() const {
  std::vector<int> out;
  for (int i = 0; i < 32; ++i) {
    if ((bits >> i) & 1u) out.push_back(i);
  }
  return out;
}

int FaultSpec::bit_count() const { return std::popcount(bits); }

void FaultSpec::validate(const accel::AcceleratorConfig& config) const {
  if (target.index >= config.register_count(target.cls)) {
    throw ContractError("fault targets " + faultline::to_string(target.cls) + "[" +
                        std::to_string(target.index) + "] but only " +
                        std::to_string(config.register_count(target.cls)) + " exist");
  }
  const int width = config.register_width(target.cls);
  const std::uint32_t mask = width == 32 ? 0xffffffffu : ((1u << width) - 1u);
  if (bits == 0 || (bits & ~mask) != 0) {
    throw ContractError("fault bits must be a non-empty subset of the register's " + std::to_string(width) +
                        " bits");
  }
  const auto window = accel::scope_window(config, scope);  // throws on a bad layer
  if (kind == FaultKind::transient) {
    if (!cycle || !window.contains(*cycle)) {
      throw ContractError("transient fault cycle must lie in its scope window [" +
                          std::to_string(window.start) + ", " + std::to_string(window.end) + ")");
    }
  } else if (cycle) {
    throw ContractError("permanent faults carry no cycle");
  }
}

nlohmann::json to_json(const FaultSpec& f) {
  nlohmann::json j{{"kind", to_string(f.kind)},
                   {"class", faultline::to_string(f.target.cls)},
                   {"index", f.target.index},
                   {"bits", f.bit_list()},
                   {"scope", f.scope.to_string()}};
  if (f.cycle) j["cycle"] = *f.cycle;
  return j;
}

FaultSpec fault_from_json(const nlohmann::json& j) {
  try {
    FaultSpec f;
    f.kind = parse_fault_kind(j.at("kind").get<std::string>());
    f.target.cls = parse_register_class(j.at("class").get<std::string>());
    f.target.index = j.at("index").get<std::size_t>();
    for (int b : j.at("bits").get<std::vector<int>>()) {
      if (b < 0 || b >= 32) throw FormatError("fault bit index out of range");
      f.bits |= 1u << b;
    }
    f.scope = FaultScope::parse(j.value("scope", std::string("inference")));
    if (j.contains("cycle")) f.cycle = j.at("cycle").get<std::uint64_t>();
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed fault JSON: ") + e.what());
  }
}

std::string to_string(BitComponent c) {
  switch (c) {
    case BitComponent::sign: return "sign";
    case BitComponent::digit: return "digit";
    case BitComponent::fraction: return "fraction";
  }
  return "fraction";
}

BitComponent parse_bit_component(std::string_view text) {
  if (text == "sign") return BitComponent::sign;
  if (text == "digit") return BitComponent::digit;
  if (text == "fraction") return BitComponent::fraction;
  throw FormatError("unknown bit component '" + std::string(text) + "' (sign, digit, fraction)");
}

fxp::BitRange component_range(BitComponent c, fxp::Format f) {
  switch (c) {
    case BitComponent::sign: return fxp::sign_range(f);
    case BitComponent::digit: return fxp::digit_range(f);
    case BitComponent::fraction: return fxp::fraction_range(f);
  }
  return {};
}

fxp::Format scope_format(const accel::AcceleratorConfig& config, RegisterClass cls,
                         std::optional<std::size_t> layer) {
  if (layer && *layer >= config.topology.matrices()) {
    throw ContractError("fault filter layer " + std::to_string(*layer) + " out of range");
  }
  return config.format(cls, layer.value_or(0));
}

std::uint32_t eligible_bits(const accel::AcceleratorConfig& config, RegisterClass cls,
                            const FaultFilter& filter) {
  const auto format = scope_format(config, cls, filter.layer);
  return filter.component ? component_range(*filter.component, format).mask() : format.mask();
}

FaultSpec generate_fault(std::uint64_t seed, std::uint64_t trial, FaultKind kind, const FaultFilter& filter,
                         const accel::AcceleratorConfig& config) {
  if (filter.count < 1) throw UnsatisfiableFilter("a fault needs at least one bit");

  struct Candidate {
    RegisterClass cls;
    std::size_t registers;
    std::uint32_t bits;
  };
  std::vector<Candidate> candidates;
  std::uint64_t total = 0;
  for (auto cls : kRegisterClasses) {
    if (filter.cls && *filter.cls != cls) continue;
    const auto bits = eligible_bits(config, cls, filter);
    if (std::popcount(bits) < filter.count) continue;
    candidates.push_back({cls, config.register_count(cls), bits});
    total += config.register_count(cls);
  }
  if (total == 0) {
    throw UnsatisfiableFilter("no register offers " + std::to_string(filter.count) +
                              " eligible bits under the filter");
  }

  const FaultScope scope{filter.layer};
  const auto window = accel::scope_window(config, scope);
  if (kind == FaultKind::transient && window.length() == 0) {
    throw UnsatisfiableFilter("transient fault scope has no cycles");
  }

  Rng rng(derive_seed(seed, trial));
  FaultSpec f;
  f.kind = kind;
  f.scope = scope;

  auto pick = rng.below(total);
  const Candidate* chosen = nullptr;
  for (const auto& c : candidates) {
    if (pick < c.registers) {
      chosen = &c;
      break;
    }
    pick -= c.registers;
  }
  f.target = {chosen->cls, static_cast<std::size_t>(pick)};

  std::vector<int> positions;
  for (int i = 0; i < 32; ++i) {
    if ((chosen->bits >> i) & 1u) positions.push_back(i);
  }
  for (int n = 0; n < filter.count; ++n) {
    const auto remaining = positions.size() - static_cast<std::size_t>(n);
    const auto r = static_cast<std::size_t>(n) + rng.below(remaining);
    std::swap(positions[static_cast<std::size_t>(n)], positions[r]);
    f.bits |= 1u << positions[static_cast<std::size_t>(n)];
  }

  if (kind == FaultKind::transient) f.cycle = window.start + rng.below(window.length());
  return f;
}

}  // namespace faultline::faults
