// SPDX-License-Identifier: Apache-2.0
//
// Reports derived from register traces and campaign results, written as
// plot-ready CSV and JSON.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "faultline/campaign.hpp"
#include "faultline/trace.hpp"

namespace faultline::analysis {

struct BitCounts {
  std::uint64_t zeros = 0;
  std::uint64_t ones = 0;
  std::uint64_t values = 0;

  /// zeros / ones; infinity when no one bit was seen.
  double ratio() const;
  BitCounts& operator+=(const BitCounts& other);
  friend bool operator==(const BitCounts&, const BitCounts&) = default;
};

inline constexpr std::size_t kHistogramBuckets = 10;

struct SparsityReport {
  std::array<BitCounts, 3> by_class;  // indexed by RegisterClass
  // IR values over [0, 1) in buckets of width 0.1; values outside the range
  // are clamped into the first or last bucket.
  std::array<std::uint64_t, kHistogramBuckets> ir_histogram{};

  const BitCounts& of(RegisterClass cls) const { return by_class[static_cast<std::size_t>(cls)]; }
  BitCounts total() const;
  SparsityReport& operator+=(const SparsityReport& other);
  friend bool operator==(const SparsityReport&, const SparsityReport&) = default;
};

/// Throws ContractError on an empty trace.
SparsityReport sparsity(const RegisterTrace& trace);

nlohmann::json to_json(const SparsityReport& report);
/// CSV "class,zeros,ones,values,ratio" followed by "bucket_lo,bucket_hi,count".
std::string sparsity_csv(const SparsityReport& report);

struct SweepRow {
  int k = 0;
  double median = 0;
  double stddev = 0;
  std::size_t trials = 0;
  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

std::vector<SweepRow> sweep_rows(const campaign::CampaignResult& result);

/// CSV "k,median,stddev,trials", k ascending; decimals round-trip exactly.
std::string sweep_table(const campaign::CampaignResult& result);
std::vector<SweepRow> parse_sweep_table(const std::string& csv);

}  // namespace faultline::analysis
