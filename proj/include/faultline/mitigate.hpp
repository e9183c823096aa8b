// SPDX-License-Identifier: Apache-2.0
//
// Masking-based fault mitigation. Each technique sees the word as written
// after the fault plus the set of bits the fault flipped (a perfect
// detector), and returns the corrected word. Bit positions are taken from
// the top of the register: bit N-1 is the sign, bit N-2 the MSB.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "faultline/fxp.hpp"
#include "faultline/trace.hpp"

namespace faultline::mitigate {

enum class Technique { none, word, bit, hybrid };

std::string to_string(Technique t);
Technique parse_technique(std::string_view text);

struct DetectionReport {
  fxp::Value value;            // register contents after the fault
  std::uint32_t flipped = 0;   // mask of bits whose value changed
};

/// Any detected flip zeroes the whole word.
fxp::Value word_masking(const DetectionReport& report);

/// Every flipped non-sign bit takes the current sign bit. A flipped sign bit
/// is left as is.
fxp::Value bit_masking(const DetectionReport& report);

/// Sign and MSB both flipped: zero the word. Otherwise a flipped sign bit
/// takes the MSB, then every flipped bit below the sign takes the sign.
fxp::Value hybrid(const DetectionReport& report);

fxp::Value correct(Technique t, const DetectionReport& report);

/// Fraction of signed latched values whose sign bit equals bit N-2.
/// Unsigned entries are skipped; `cls` restricts to one register class.
/// Throws ContractError when no signed entry remains.
double sign_msb_agreement(const RegisterTrace& trace, std::optional<RegisterClass> cls = std::nullopt);

}  // namespace faultline::mitigate
