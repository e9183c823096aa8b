// SPDX-License-Identifier: Apache-2.0

#include "faultline/analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>

#include "faultline/io.hpp"

namespace faultline::analysis {

double BitCounts::ratio() const {
  if (ones == 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(zeros) / static_cast<double>(ones);
}

BitCounts& BitCounts::operator+=(const BitCounts& other) {
  zeros += other.zeros;
  ones += other.ones;
  values += other.values;
  return *this;
}

BitCounts SparsityReport::total() const {
  BitCounts t;
  for (const auto& c : by_class) t += c;
  return t;
}

SparsityReport& SparsityReport::operator+=(const SparsityReport& other) {
  for (std::size_t i = 0; i < by_class.size(); ++i) by_class[i] += other.by_class[i];
  for (std::size_t i = 0; i < ir_histogram.size(); ++i) ir_histogram[i] += other.ir_histogram[i];
  return *this;
}

SparsityReport sparsity(const RegisterTrace& trace) {
  if (trace.empty()) throw ContractError("sparsity analysis needs a non-empty trace");
  SparsityReport r;
  for (const auto& e : trace.entries()) {
    auto& c = r.by_class[static_cast<std::size_t>(e.cls)];
    const int ones = std::popcount(e.value.raw());
    c.ones += static_cast<std::uint64_t>(ones);
    c.zeros += static_cast<std::uint64_t>(e.value.width() - ones);
    ++c.values;
    if (e.cls == RegisterClass::ir) {
      const double x = e.value.to_real();
      const auto bucket = static_cast<long>(std::floor(x * static_cast<double>(kHistogramBuckets)));
      ++r.ir_histogram[static_cast<std::size_t>(std::clamp<long>(bucket, 0, kHistogramBuckets - 1))];
    }
  }
  return r;
}

namespace {

std::string bucket_edge(std::size_t i) {
  return io::format_double(static_cast<double>(i) / static_cast<double>(kHistogramBuckets));
}

}  // namespace

nlohmann::json to_json(const SparsityReport& report) {
  nlohmann::json classes = nlohmann::json::object();
  for (auto cls : kRegisterClasses) {
    const auto& c = report.of(cls);
    nlohmann::json entry{{"zeros", c.zeros}, {"ones", c.ones}, {"values", c.values}};
    // JSON has no infinity; a missing ratio means no one bit was observed.
    entry["ratio"] = c.ones == 0 ? nlohmann::json(nullptr) : nlohmann::json(c.ratio());
    classes[to_string(cls)] = entry;
  }
  nlohmann::json buckets = nlohmann::json::array();
  for (std::size_t i = 0; i < kHistogramBuckets; ++i) {
    buckets.push_back({{"lo", static_cast<double>(i) / kHistogramBuckets},
                       {"hi", static_cast<double>(i + 1) / kHistogramBuckets},
                       {"count", report.ir_histogram[i]}});
  }
  return {{"classes", classes}, {"ir_histogram", buckets}};
}

std::string sparsity_csv(const SparsityReport& report) {
  std::ostringstream out;
  out << "class,zeros,ones,values,ratio\n";
  for (auto cls : kRegisterClasses) {
    const auto& c = report.of(cls);
    out << to_string(cls) << ',' << c.zeros << ',' << c.ones << ',' << c.values << ','
        << (c.ones == 0 ? std::string("inf") : io::format_double(c.ratio())) << '\n';
  }
  out << "bucket_lo,bucket_hi,count\n";
  for (std::size_t i = 0; i < kHistogramBuckets; ++i) {
    out << bucket_edge(i) << ',' << bucket_edge(i + 1) << ',' << report.ir_histogram[i] << '\n';
  }
  return out.str();
}

std::vector<SweepRow> sweep_rows(const campaign::CampaignResult& result) {
  std::vector<SweepRow> rows;
  for (const auto& p : result.points) rows.push_back({p.k, p.median, p.stddev, p.errors.size()});
  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) { return a.k < b.k; });
  return rows;
}

std::string sweep_table(const campaign::CampaignResult& result) {
  std::ostringstream out;
  out << "k,median,stddev,trials\n";
  for (const auto& r : sweep_rows(result)) {
    out << r.k << ',' << io::format_double(r.median) << ',' << io::format_double(r.stddev) << ',' << r.trials
        << '\n';
  }
  return out.str();
}

std::vector<SweepRow> parse_sweep_table(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "k,median,stddev,trials") {
    throw FormatError("sweep table must start with the header k,median,stddev,trials");
  }
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string k, median, stddev, trials;
    if (!std::getline(fields, k, ',') || !std::getline(fields, median, ',') ||
        !std::getline(fields, stddev, ',') || !std::getline(fields, trials)) {
      throw FormatError("sweep table row needs four fields: '" + line + "'");
    }
    try {
      rows.push_back({std::stoi(k), std::stod(median), std::stod(stddev), std::stoul(trials)});
    } catch (const std::logic_error&) {
      throw FormatError("bad number in sweep table row '" + line + "'");
    }
  }
  return rows;
}

}  // namespace faultline::analysis
