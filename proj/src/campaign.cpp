// SPDX-License-Identifier: Apache-2.0

#include "faultline/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "faultline/accel.hpp"
#include "faultline/incremental.hpp"
#include "faultline/io.hpp"
#include "faultline/rng.hpp"

namespace faultline::campaign {

namespace {

std::string archive_digest(const nn::WeightArchive& a) {
  std::string text;
  for (auto s : a.topology.layer_sizes) text += std::to_string(s) + ",";
  text += nn::to_string(a.topology.activation) + ";" + a.output_format.to_string() + ";";
  for (const auto& l : a.layers) {
    text += l.formats.ir.to_string() + l.formats.wr.to_string() + l.formats.imr.to_string() + ":";
    for (const auto& w : l.weights) text += std::to_string(w.raw()) + ",";
    for (const auto& b : l.biases) text += std::to_string(b.raw()) + ",";
  }
  return io::fnv1a_hex(text);
}

std::string dataset_digest(const nn::Dataset& d) {
  std::string text = std::to_string(d.class_count) + ";";
  for (const auto& item : d.items) {
    text += std::to_string(item.label) + ":";
    for (double x : item.input) text += io::format_double(x) + ",";
  }
  return io::fnv1a_hex(text);
}

nlohmann::json filter_to_json(const faults::FaultFilter& f) {
  nlohmann::json j = nlohmann::json::object();
  if (f.cls) j["class"] = to_string(*f.cls);
  if (f.layer) j["layer"] = *f.layer;
  if (f.component) j["component"] = to_string(*f.component);
  return j;
}

// Evaluates trials with whichever engine the campaign selected. The
// incremental evaluator is shared read-only; the cycle simulator is not, so
// each worker owns its Trials instance.
class Trials {
 public:
  Trials(const CampaignConfig& config, const accel::AcceleratorConfig& hw,
         const accel::IncrementalEvaluator* shared)
      : config_(config), shared_(shared) {
    if (shared_ == nullptr) sim_.emplace(hw, *config.archive);
  }

  double error(const faults::FaultSpec* fault) {
    std::size_t wrong = 0;
    const auto& items = config_.dataset->items;
    for (std::size_t i = 0; i < items.size(); ++i) {
      std::size_t predicted = 0;
      if (shared_ != nullptr) {
        predicted = shared_->run(i, fault, config_.mitigation).predicted_class;
      } else {
        accel::InferenceOptions options;
        options.fault = fault;
        options.mitigation = config_.mitigation;
        predicted = sim_->run(items[i].input, options).predicted_class;
      }
      if (predicted != items[i].label) ++wrong;
    }
    return 100.0 * static_cast<double>(wrong) / static_cast<double>(items.size());
  }

 private:
  const CampaignConfig& config_;
  const accel::IncrementalEvaluator* shared_;
  std::optional<accel::Accelerator> sim_;
};

std::optional<accel::IncrementalEvaluator> make_evaluator(const CampaignConfig& config,
                                                          const accel::AcceleratorConfig& hw) {
  if (config.engine != Engine::incremental) return std::nullopt;
  return std::make_optional<accel::IncrementalEvaluator>(hw, *config.archive, config.dataset->items);
}

}  // namespace

std::string to_string(Engine e) { return e == Engine::cycle ? "cycle" : "incremental"; }

Engine parse_engine(std::string_view text) {
  if (text == "cycle") return Engine::cycle;
  if (text == "incremental") return Engine::incremental;
  throw FormatError("unknown engine '" + std::string(text) + "' (cycle, incremental)");
}

void CampaignConfig::validate() const {
  if (!archive) throw ContractError("campaign '" + name + "' has no weight archive");
  if (!dataset || dataset->empty()) throw ContractError("campaign '" + name + "' has no dataset items");
  if (trials == 0) throw ContractError("campaign '" + name + "' needs at least one trial");
  for (int k : fault_counts) {
    if (k < 0) throw ContractError("fault counts must be non-negative");
  }
  archive->validate();
  dataset->validate(archive->topology.inputs());
  if (dataset->class_count > archive->topology.outputs()) {
    throw ContractError("dataset has more classes than the network has outputs");
  }
}

nlohmann::json config_to_json(const CampaignConfig& config) {
  config.validate();
  std::vector<int> counts = config.fault_counts;
  std::sort(counts.begin(), counts.end());
  counts.erase(std::unique(counts.begin(), counts.end()), counts.end());
  return {{"name", config.name},
          {"archive_digest", archive_digest(*config.archive)},
          {"dataset_digest", dataset_digest(*config.dataset)},
          {"dataset_items", config.dataset->size()},
          {"num_pes", config.num_pes},
          {"kind", faults::to_string(config.kind)},
          {"filter", filter_to_json(config.filter)},
          {"fault_counts", counts},
          {"trials", config.trials},
          {"seed", config.seed},
          {"mitigation", mitigate::to_string(config.mitigation)}};
}

std::string config_hash(const CampaignConfig& config) { return io::fnv1a_hex(config_to_json(config).dump()); }

const SweepPoint& CampaignResult::at(int k) const {
  for (const auto& p : points) {
    if (p.k == k) return p;
  }
  throw ContractError("campaign '" + name + "' has no sweep point k=" + std::to_string(k));
}

double median(std::span<const double> values) {
  if (values.empty()) throw ContractError("median of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  if (v.size() % 2 == 1) return v[mid];
  const double upper = v[mid];
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lower + upper) / 2;
}

double mean(std::span<const double> values) {
  if (values.empty()) throw ContractError("mean of an empty sample");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_stddev(std::span<const double> values) {
  if (values.size() < 2) return 0;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) return 0;  // avoid rounding noise from the mean
  const double m = mean(values);
  double ss = 0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

std::vector<double> running_medians(std::span<const double> values) {
  std::vector<double> sorted;
  std::vector<double> out;
  sorted.reserve(values.size());
  out.reserve(values.size());
  for (double v : values) {
    sorted.insert(std::upper_bound(sorted.begin(), sorted.end(), v), v);
    const auto n = sorted.size();
    out.push_back(n % 2 == 1 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2);
  }
  return out;
}

SweepPoint summarize(int k, std::vector<double> errors) {
  SweepPoint p;
  p.k = k;
  p.median = median(errors);
  p.mean = mean(errors);
  p.stddev = sample_stddev(errors);
  p.running_median = running_medians(errors);
  p.errors = std::move(errors);
  return p;
}

faults::FaultSpec trial_fault(const CampaignConfig& config, std::size_t trial, int k) {
  if (k < 1) throw ContractError("trial_fault needs k >= 1");
  auto filter = config.filter;
  filter.count = k;
  const auto hw = accel::make_config(*config.archive, config.num_pes);
  return faults::generate_fault(derive_seed(config.seed, static_cast<std::uint64_t>(k)), trial, config.kind,
                                filter, hw);
}

double run_trial(const CampaignConfig& config, std::size_t trial, int k) {
  config.validate();
  const auto hw = accel::make_config(*config.archive, config.num_pes);
  const auto evaluator = make_evaluator(config, hw);
  Trials trials(config, hw, evaluator ? &*evaluator : nullptr);
  if (k == 0) return trials.error(nullptr);
  const auto fault = trial_fault(config, trial, k);
  return trials.error(&fault);
}

unsigned resolve_threads(unsigned requested, std::size_t work) {
  unsigned n = requested;
  if (n == 0) {
    if (const char* env = std::getenv("FAULTLINE_THREADS"); env != nullptr && *env != '\0') {
      const std::string_view text(env);
      unsigned parsed = 0;
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), parsed);
      if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ContractError("FAULTLINE_THREADS must be a non-negative integer, got '" + std::string(text) + "'");
      }
      n = parsed;
    }
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  if (work < n) n = static_cast<unsigned>(std::max<std::size_t>(work, 1));
  return n;
}

CampaignResult run_campaign(const CampaignConfig& config, const RunOptions& options) {
  CampaignResult result;
  result.name = config.name;
  result.seed = config.seed;
  result.config = config_to_json(config);  // validates
  result.config_hash = io::fnv1a_hex(result.config.dump());

  const std::vector<int> counts = result.config.at("fault_counts").get<std::vector<int>>();
  const auto hw = accel::make_config(*config.archive, config.num_pes);

  // Draw every fault up front so generation errors surface before any work.
  std::vector<std::vector<faults::FaultSpec>> planned(counts.size());
  for (std::size_t p = 0; p < counts.size(); ++p) {
    if (counts[p] == 0) continue;
    auto filter = config.filter;
    filter.count = counts[p];
    const auto seed = derive_seed(config.seed, static_cast<std::uint64_t>(counts[p]));
    for (std::size_t t = 0; t < config.trials; ++t) {
      planned[p].push_back(faults::generate_fault(seed, t, config.kind, filter, hw));
    }
  }

  // A fault-free trial is identical for every trial index.
  std::vector<std::vector<double>> errors(counts.size(), std::vector<double>(config.trials, 0.0));
  std::vector<std::pair<std::size_t, std::size_t>> work;
  for (std::size_t p = 0; p < counts.size(); ++p) {
    if (counts[p] == 0) {
      work.emplace_back(p, 0);
    } else {
      for (std::size_t t = 0; t < config.trials; ++t) work.emplace_back(p, t);
    }
  }

  const auto evaluator = make_evaluator(config, hw);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    try {
      Trials trials(config, hw, evaluator ? &*evaluator : nullptr);
      for (std::size_t i = next++; i < work.size(); i = next++) {
        const auto [p, t] = work[i];
        const faults::FaultSpec* fault = counts[p] == 0 ? nullptr : &planned[p][t];
        errors[p][t] = trials.error(fault);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = work.size();
    }
  };

  const unsigned threads = resolve_threads(options.threads, work.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t p = 0; p < counts.size(); ++p) {
    if (counts[p] == 0) std::fill(errors[p].begin(), errors[p].end(), errors[p][0]);
    result.points.push_back(summarize(counts[p], std::move(errors[p])));
  }
  return result;
}

Convergence convergence_report(const SweepPoint& point, double margin) {
  const auto& rm = point.running_median;
  if (rm.size() < 2) throw ContractError("convergence report needs at least two trials");
  Convergence c;
  c.final_median = rm.back();
  std::size_t n = rm.size();
  while (n > 1 && std::abs(rm[n - 2] - c.final_median) <= margin) --n;
  c.trials_needed = n;
  c.trailing_stddev = sample_stddev(std::span(rm).subspan(n - 1));
  return c;
}

nlohmann::json to_json(const CampaignResult& result) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : result.points) {
    points.push_back({{"k", p.k},
                      {"median", p.median},
                      {"mean", p.mean},
                      {"stddev", p.stddev},
                      {"trials", p.errors.size()},
                      {"errors", p.errors},
                      {"running_median", p.running_median}});
  }
  return {{"name", result.name},
          {"seed", result.seed},
          {"config_hash", result.config_hash},
          {"config", result.config},
          {"points", points}};
}

CampaignResult result_from_json(const nlohmann::json& j) {
  try {
    CampaignResult r;
    r.name = j.at("name").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.config = j.value("config", nlohmann::json::object());
    for (const auto& p : j.at("points")) {
      SweepPoint s;
      s.k = p.at("k").get<int>();
      s.median = p.at("median").get<double>();
      s.mean = p.at("mean").get<double>();
      s.stddev = p.at("stddev").get<double>();
      s.errors = p.at("errors").get<std::vector<double>>();
      s.running_median = p.at("running_median").get<std::vector<double>>();
      r.points.push_back(std::move(s));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed campaign result: ") + e.what());
  }
}

std::string convergence_csv(const CampaignResult& result) {
  std::ostringstream out;
  out << "k,trial,running_median\n";
  for (const auto& p : result.points) {
    for (std::size_t n = 0; n < p.running_median.size(); ++n) {
      out << p.k << ',' << n + 1 << ',' << io::format_double(p.running_median[n]) << '\n';
    }
  }
  return out.str();
}

// ---- presets ---------------------------------------------------------------

namespace {

std::vector<int> zero_to(int k) {
  std::vector<int> v(static_cast<std::size_t>(k) + 1);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

CampaignConfig variant(const CampaignConfig& base, const std::string& suffix) {
  CampaignConfig c = base;
  c.name = base.name + "." + suffix;
  return c;
}

}  // namespace

std::vector<CampaignConfig> preset_experiments(std::string_view axis, const CampaignConfig& base,
                                               const PresetOptions& options) {
  base.validate();
  std::vector<CampaignConfig> out;
  if (axis == "fault-kind") {
    for (auto k : {faults::FaultKind::stuck_at_0, faults::FaultKind::stuck_at_1, faults::FaultKind::transient}) {
      auto c = variant(base, faults::to_string(k));
      c.kind = k;
      out.push_back(std::move(c));
    }
  } else if (axis == "nn-data") {
    for (auto cls : kRegisterClasses) {
      auto c = variant(base, to_string(cls));
      c.filter.cls = cls;
      out.push_back(std::move(c));
    }
  } else if (axis == "nn-layer") {
    for (std::size_t j = 0; j < base.archive->topology.matrices(); ++j) {
      auto c = variant(base, "layer" + std::to_string(j));
      c.filter.layer = j;
      out.push_back(std::move(c));
    }
  } else if (axis == "activation") {
    if (options.activation_archives.empty()) {
      throw ContractError("the activation preset needs one archive per activation function");
    }
    for (const auto& [act, archive] : options.activation_archives) {
      if (!archive || archive->topology.activation != act) {
        throw ContractError("activation preset archive for " + nn::to_string(act) + " uses another activation");
      }
      auto c = variant(base, nn::to_string(act));
      c.archive = archive;
      out.push_back(std::move(c));
    }
  } else if (axis == "fp-component") {
    const auto hw = accel::make_config(*base.archive, base.num_pes);
    for (auto comp : {faults::BitComponent::sign, faults::BitComponent::digit, faults::BitComponent::fraction}) {
      auto c = variant(base, faults::to_string(comp));
      c.filter.component = comp;
      int width = 0;
      for (auto cls : kRegisterClasses) {
        if (c.filter.cls && *c.filter.cls != cls) continue;
        width = std::max(width, std::popcount(faults::eligible_bits(hw, cls, c.filter)));
      }
      if (width == 0) continue;  // no register has bits of this component
      c.fault_counts = zero_to(width);
      out.push_back(std::move(c));
    }
  } else if (axis == "pe-count") {
    if (options.pe_counts.empty()) throw ContractError("the pe-count preset needs at least one PE count");
    for (auto p : options.pe_counts) {
      auto c = variant(base, "P" + std::to_string(p));
      c.num_pes = p;
      out.push_back(std::move(c));
    }
  } else if (axis == "dataset") {
    if (options.datasets.empty()) throw ContractError("the dataset preset needs at least one named workload");
    for (const auto& w : options.datasets) {
      auto c = variant(base, w.name);
      c.archive = w.archive;
      c.dataset = w.dataset;
      out.push_back(std::move(c));
    }
  } else {
    std::string known;
    for (auto a : kPresetAxes) known += (known.empty() ? "" : ", ") + std::string(a);
    throw ContractError("unknown preset axis '" + std::string(axis) + "' (" + known + ")");
  }
  for (const auto& c : out) c.validate();
  return out;
}

// ---- mitigation comparison -------------------------------------------------

MitigationComparison compare_mitigations(const CampaignConfig& base, const RunOptions& options) {
  MitigationComparison m;
  for (auto t : {mitigate::Technique::none, mitigate::Technique::word, mitigate::Technique::bit,
                 mitigate::Technique::hybrid}) {
    auto c = variant(base, mitigate::to_string(t));
    c.mitigation = t;
    m.techniques.push_back(t);
    m.results.push_back(run_campaign(c, options));
  }
  return m;
}

std::string mitigation_csv(const MitigationComparison& comparison) {
  std::ostringstream out;
  const auto& ts = comparison.techniques;
  const auto none_it = std::find(ts.begin(), ts.end(), mitigate::Technique::none);
  const bool has_none = none_it != ts.end();
  const auto none_index = static_cast<std::size_t>(none_it - ts.begin());

  out << 'k';
  for (auto t : ts) out << ',' << mitigate::to_string(t);
  if (has_none) {
    for (auto t : ts) {
      if (t != mitigate::Technique::none) out << ',' << mitigate::to_string(t) << "_improvement";
    }
  }
  out << '\n';
  if (comparison.results.empty()) return out.str();

  for (const auto& point : comparison.results.front().points) {
    out << point.k;
    for (const auto& r : comparison.results) out << ',' << io::format_double(r.at(point.k).median);
    if (has_none) {
      const double base = comparison.results[none_index].at(point.k).median;
      for (std::size_t i = 0; i < ts.size(); ++i) {
        if (ts[i] == mitigate::Technique::none) continue;
        const double m = comparison.results[i].at(point.k).median;
        out << ',' << io::format_double(base > 0 ? 100.0 * (base - m) / base : 0.0);
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace faultline::campaign
