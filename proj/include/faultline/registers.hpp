// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace faultline {

/// The three fault-targetable register classes of the datapath.
enum class RegisterClass : std::uint8_t { ir = 0, wr = 1, imr = 2 };

inline constexpr std::array<RegisterClass, 3> kRegisterClasses{RegisterClass::ir, RegisterClass::wr,
                                                              RegisterClass::imr};

std::string to_string(RegisterClass c);
RegisterClass parse_register_class(std::string_view text);

struct RegisterId {
  RegisterClass cls = RegisterClass::ir;
  std::size_t index = 0;

  friend bool operator==(const RegisterId&, const RegisterId&) = default;
};

/// Half-open cycle interval [start, end).
struct CycleWindow {
  std::uint64_t start = 0;
  std::uint64_t end = 0;

  std::uint64_t length() const { return end - start; }
  bool contains(std::uint64_t cycle) const { return cycle >= start && cycle < end; }

  friend bool operator==(const CycleWindow&, const CycleWindow&) = default;
};

}  // namespace faultline
