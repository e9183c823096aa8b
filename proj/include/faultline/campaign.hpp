// SPDX-License-Identifier: Apache-2.0
//
// Statistical fault-injection campaigns. A campaign sweeps a list of fault
// counts k; for every k it runs a number of trials, each drawing one random
// fault and injecting it into the inference of every dataset item. Trial
// errors are aggregated by their median.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "faultline/faults.hpp"
#include "faultline/mitigate.hpp"
#include "faultline/nn.hpp"

namespace faultline::campaign {

/// How trials evaluate a fault. Both engines produce bit-identical outputs;
/// `incremental` replays only what the fault changes (see incremental.hpp).
enum class Engine { cycle, incremental };

std::string to_string(Engine e);
Engine parse_engine(std::string_view text);

struct CampaignConfig {
  std::string name = "campaign";
  std::shared_ptr<const nn::WeightArchive> archive;
  std::shared_ptr<const nn::Dataset> dataset;
  std::size_t num_pes = 64;
  faults::FaultKind kind = faults::FaultKind::stuck_at_1;
  faults::FaultFilter filter;  // filter.count is replaced by each sweep point's k
  std::vector<int> fault_counts{0, 1, 2, 4, 8, 16};
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
  mitigate::Technique mitigation = mitigate::Technique::none;
  Engine engine = Engine::incremental;  // not part of the config hash

  /// Throws ContractError on a missing archive or dataset, trials == 0, a
  /// negative fault count, or an archive/dataset mismatch.
  void validate() const;
};

/// Everything that determines a campaign's numbers, including digests of the
/// archive and dataset contents.
nlohmann::json config_to_json(const CampaignConfig& config);
std::string config_hash(const CampaignConfig& config);

struct SweepPoint {
  int k = 0;
  double median = 0;
  double mean = 0;
  double stddev = 0;  // sample standard deviation
  std::vector<double> errors;          // per trial, in trial order
  std::vector<double> running_median;  // median of errors[0..n] for each n
};

struct CampaignResult {
  std::string name;
  std::uint64_t seed = 0;
  std::string config_hash;
  nlohmann::json config;
  std::vector<SweepPoint> points;  // ascending k

  /// Throws ContractError when k was not swept.
  const SweepPoint& at(int k) const;
};

double median(std::span<const double> values);
double mean(std::span<const double> values);
double sample_stddev(std::span<const double> values);
std::vector<double> running_medians(std::span<const double> values);

/// Aggregates one sweep point from its per-trial errors.
SweepPoint summarize(int k, std::vector<double> errors);

/// Inference error (%) of one trial. k == 0 runs fault-free.
double run_trial(const CampaignConfig& config, std::size_t trial, int k);

/// The fault used by trial `trial` at fault count k (k >= 1).
faults::FaultSpec trial_fault(const CampaignConfig& config, std::size_t trial, int k);

struct RunOptions {
  // 0 means FAULTLINE_THREADS, or the hardware concurrency when unset.
  unsigned threads = 0;
};

/// Worker count: `requested` when nonzero, else FAULTLINE_THREADS, else the
/// hardware concurrency; never more than `work` and never less than one.
unsigned resolve_threads(unsigned requested, std::size_t work);

/// Runs every (k, trial) pair. Results do not depend on the thread count.
CampaignResult run_campaign(const CampaignConfig& config, const RunOptions& options = {});

struct Convergence {
  // Smallest n such that every running median from trial n on is within
  // the margin of the final median (1-based).
  std::size_t trials_needed = 0;
  // Sample standard deviation of the running median over trials n..N.
  double trailing_stddev = 0;
  double final_median = 0;
};

/// Throws ContractError for fewer than two trials.
Convergence convergence_report(const SweepPoint& point, double margin);

nlohmann::json to_json(const CampaignResult& result);
CampaignResult result_from_json(const nlohmann::json& j);

/// CSV "k,trial,running_median" over every sweep point.
std::string convergence_csv(const CampaignResult& result);

// ---- presets ---------------------------------------------------------------

struct NamedWorkload {
  std::string name;
  std::shared_ptr<const nn::WeightArchive> archive;
  std::shared_ptr<const nn::Dataset> dataset;
};

struct PresetOptions {
  std::vector<std::size_t> pe_counts{64, 256, 1024};
  // One archive per activation function for the activation axis; the
  // dataset is the base campaign's.
  std::map<nn::Activation, std::shared_ptr<const nn::WeightArchive>> activation_archives;
  std::vector<NamedWorkload> datasets;
};

inline constexpr std::string_view kPresetAxes[] = {"fault-kind",   "nn-data",  "nn-layer", "activation",
                                                   "fp-component", "pe-count", "dataset"};

/// Expands `base` along one axis, everything else fixed. Throws
/// ContractError for an unknown axis or an axis lacking its inputs.
std::vector<CampaignConfig> preset_experiments(std::string_view axis, const CampaignConfig& base,
                                               const PresetOptions& options = {});

// ---- mitigation comparison -------------------------------------------------

struct MitigationComparison {
  std::vector<mitigate::Technique> techniques;
  std::vector<CampaignResult> results;  // parallel to techniques
};

/// Runs `base` once per technique with identical seeds.
MitigationComparison compare_mitigations(const CampaignConfig& base, const RunOptions& options = {});

/// CSV "k,none,word,bit,hybrid,<t>_improvement..." where improvement is the
/// relative reduction (%) of the median against the none column.
std::string mitigation_csv(const MitigationComparison& comparison);

}  // namespace faultline::campaign
