// SPDX-License-Identifier: Apache-2.0

#include "faultline/mitigate.hpp"

namespace faultline::mitigate {

std::string to_string(Technique t) {
  switch (t) {
    case Technique::none: return "none";
    case Technique::word: return "word";
    case Technique::bit: return "bit";
    case Technique::hybrid: return "hybrid";
  }
  return "none";
}

Technique parse_technique(std::string_view text) {
  if (text == "none") return Technique::none;
  if (text == "word") return Technique::word;
  if (text == "bit") return Technique::bit;
  if (text == "hybrid") return Technique::hybrid;
  throw FormatError("unknown mitigation '" + std::string(text) + "' (none, word, bit, hybrid)");
}

namespace {

void require_sign_and_msb(const fxp::Value& v, const char* what) {
  if (v.width() < 2) throw ContractError(std::string(what) + " needs a register at least 2 bits wide");
}

// Sets every bit of `mask` in raw to `level`.
std::uint32_t fill(std::uint32_t raw, std::uint32_t mask, bool level) {
  return level ? (raw | mask) : (raw & ~mask);
}

}  // namespace

fxp::Value word_masking(const DetectionReport& report) {
  return report.flipped == 0 ? report.value : fxp::Value(report.value.format());
}

fxp::Value bit_masking(const DetectionReport& report) {
  if (report.flipped == 0) return report.value;
  const auto& v = report.value;
  require_sign_and_msb(v, "bit masking");
  const int sign = v.width() - 1;
  const std::uint32_t below_sign = report.flipped & ~(1u << sign) & v.format().mask();
  return fxp::Value::from_raw(fill(v.raw(), below_sign, v.bit(sign)), v.format());
}

fxp::Value hybrid(const DetectionReport& report) {
  if (report.flipped == 0) return report.value;
  const auto& v = report.value;
  require_sign_and_msb(v, "hybrid masking");
  const int sign = v.width() - 1;
  const int msb = v.width() - 2;
  const std::uint32_t sign_bit = 1u << sign;
  const std::uint32_t msb_bit = 1u << msb;

  if ((report.flipped & sign_bit) && (report.flipped & msb_bit)) return fxp::Value(v.format());

  std::uint32_t raw = v.raw();
  if (report.flipped & sign_bit) raw = fill(raw, sign_bit, (raw & msb_bit) != 0);
  const std::uint32_t below_sign = report.flipped & ~sign_bit & v.format().mask();
  raw = fill(raw, below_sign, (raw & sign_bit) != 0);
  return fxp::Value::from_raw(raw, v.format());
}

fxp::Value correct(Technique t, const DetectionReport& report) {
  switch (t) {
    case Technique::none: return report.value;
    case Technique::word: return word_masking(report);
    case Technique::bit: return bit_masking(report);
    case Technique::hybrid: return hybrid(report);
  }
  return report.value;
}

double sign_msb_agreement(const RegisterTrace& trace, std::optional<RegisterClass> cls) {
  std::size_t total = 0;
  std::size_t agree = 0;
  for (const auto& e : trace.entries()) {
    if (cls && e.cls != *cls) continue;
    const auto& v = e.value;
    if (!v.format().is_signed() || v.width() < 2) continue;
    ++total;
    agree += v.bit(v.width() - 1) == v.bit(v.width() - 2);
  }
  if (total == 0) throw ContractError("sign_msb_agreement: trace holds no signed values");
  return static_cast<double>(agree) / static_cast<double>(total);
}

}  // namespace faultline::mitigate
