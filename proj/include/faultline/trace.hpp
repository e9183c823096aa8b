// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "faultline/fxp.hpp"
#include "faultline/registers.hpp"

namespace faultline {

struct TraceEntry {
  std::uint64_t cycle = 0;
  RegisterClass cls = RegisterClass::ir;
  std::uint32_t index = 0;
  fxp::Value value;  // as latched (after any fault and mitigation)
};

/// Every register write of one or more inference runs, in write order.
class RegisterTrace {
 public:
  void record(std::uint64_t cycle, RegisterClass cls, std::size_t index, fxp::Value value) {
    entries_.push_back({cycle, cls, static_cast<std::uint32_t>(index), value});
  }
  void append(const RegisterTrace& other) {
    entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
  }
  void clear() { entries_.clear(); }

  const std::vector<TraceEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// CSV with header "cycle,class,index,raw"; raw is 0x-prefixed hex.
  void write_csv(std::ostream& out) const;

 private:
  std::vector<TraceEntry> entries_;
};

}  // namespace faultline
