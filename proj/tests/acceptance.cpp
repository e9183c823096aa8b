// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per criterion. Campaigns use the
// 64-32-10 digits network on the 360 held-out items with 1000 trials per
// sweep point. Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "faultline/accel.hpp"
#include "faultline/campaign.hpp"
#include "faultline/cli.hpp"
#include "faultline/incremental.hpp"
#include "faultline/io.hpp"
#include "reference_sim.hpp"
#include "support.hpp"

using namespace faultline;
namespace fs = std::filesystem;
using campaign::CampaignConfig;
using campaign::CampaignResult;
using faults::FaultKind;
using mitigate::Technique;

namespace {

constexpr std::size_t kTrials = 1000;
constexpr std::uint64_t kSeed = 2024;
constexpr double kTolerance = 1.0;  // percentage points on medians

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

class Report {
 public:
  void record(int id, bool pass, const std::string& title, const std::string& detail) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << title << " | " << detail << " ("
              << fmt(secs) << " s)" << std::endl;
    failures_ += pass ? 0 : 1;
    start_ = std::chrono::steady_clock::now();
  }
  int failures() const { return failures_; }

 private:
  int failures_ = 0;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::shared_ptr<const nn::Dataset> held_out() {
  static const auto d = std::make_shared<const nn::Dataset>(fixtures::digits_test());
  return d;
}

CampaignConfig desk_campaign(FaultKind kind, std::size_t pes = 64) {
  CampaignConfig c;
  c.name = "desk";
  c.archive = fixtures::desk_archive();
  c.dataset = held_out();
  c.num_pes = pes;
  c.kind = kind;
  c.fault_counts.clear();
  for (int k = 0; k <= 16; ++k) c.fault_counts.push_back(k);
  c.trials = kTrials;
  c.seed = kSeed;
  return c;
}

// Campaign results shared between criteria.
const CampaignResult& desk_result(FaultKind kind, std::size_t pes = 64) {
  static std::map<std::pair<FaultKind, std::size_t>, CampaignResult> cache;
  const auto key = std::make_pair(kind, pes);
  if (!cache.count(key)) cache.emplace(key, campaign::run_campaign(desk_campaign(kind, pes)));
  return cache.at(key);
}

std::string medians_line(const CampaignResult& r, int from = 1) {
  std::string s;
  for (const auto& p : r.points) {
    if (p.k >= from) s += (s.empty() ? "" : " ") + fmt(p.median);
  }
  return "[" + s + "]";
}

// ---- 1, 2, 12: closed-form counts -----------------------------------------

void cycle_counts(Report& report) {
  const auto baseline = accel::cycles_for_inference(std::vector<std::size_t>{784, 128, 10}, 64);
  const auto tiny = accel::cycles_for_inference(std::vector<std::size_t>{4, 2, 1}, 2);
  report.record(1, baseline == 1588 && tiny == 5, "cycles per inference",
                "784-128-10 P=64 -> " + std::to_string(baseline) + " (want 1588); 4-2-1 P=2 -> " +
                    std::to_string(tiny) + " (want 5)");
}

void fault_bits(Report& report) {
  const auto s = accel::total_fault_bits(64, 16, 16, 23);
  // The same count from a calibrated configuration with 23-bit intermediates.
  const auto net = nn::initialize({{784, 128, 10}, nn::Activation::logsig}, 1);
  nn::Dataset one;
  one.class_count = 10;
  one.items.push_back({std::vector<double>(784, 0.5), 0});
  nn::CalibrationOptions options;
  options.imr_width = 23;
  const auto archive = nn::quantize_network(net, nn::calibrate(net, one, options));
  const auto from_config = accel::total_fault_bits(accel::make_config(archive, 64));
  report.record(2, s == 4969 && from_config == 4969, "total fault-targetable bits",
                "P=64 IR/WR 16-bit IMR 23-bit -> " + std::to_string(s) + ", from calibrated config " +
                    std::to_string(from_config) + " (want 4969)");
}

void footnote(Report& report) {
  const auto t = accel::cycles_for_inference(std::vector<std::size_t>{784, 1024, 512, 256, 128, 10}, 64);
  const auto readme = io::read_text(FAULTLINE_README);
  const bool documented = readme.find("1,490,944") != std::string::npos && readme.find("23,316") != std::string::npos;
  report.record(12, t == 23316 && documented, "six-layer cycle count and documented footnote discrepancy",
                "784-1024-512-256-128-10 P=64 -> " + std::to_string(t) + " (want 23316); README records 1,490,944: " +
                    (documented ? "yes" : "no"));
}

// ---- 3: zero-fault equivalence ---------------------------------------------

void zero_fault(Report& report) {
  struct Net {
    std::string name;
    nn::WeightArchive archive;
    nn::Dataset data;
  };
  std::vector<Net> nets;
  nets.push_back({"digits 64-32-10 logsig", *fixtures::desk_archive(), fixtures::digits()});
  {
    const auto data = fixtures::blobs(400, 8, 5);
    nn::TrainOptions o;
    o.epochs = 50;
    o.seed = 2;
    const auto net = nn::train({{8, 6, 2}, nn::Activation::logsig}, data, o);
    nets.push_back({"blobs 8-6-2 logsig", nn::quantize_network(net, nn::calibrate(net, data)), data});
  }
  {
    const auto train = fixtures::digits_train();
    nn::TrainOptions o;
    o.epochs = 20;
    o.learning_rate = 0.05;
    o.seed = 4;
    const auto net = nn::train({{64, 16, 10}, nn::Activation::satlin}, train, o);
    nets.push_back({"digits 64-16-10 satlin", nn::quantize_network(net, nn::calibrate(net, train)), fixtures::digits()});
  }
  std::string detail;
  bool all = true;
  for (const auto& n : nets) {
    accel::Accelerator sim(accel::make_config(n.archive, 64), n.archive);
    std::size_t agree = 0;
    for (const auto& item : n.data.items) {
      agree += sim.run(item.input).predicted_class ==
               nn::classify_reference(n.archive, item.input, nn::Mode::quantized);
    }
    all = all && agree == n.data.size();
    detail += (detail.empty() ? "" : "; ") + n.name + " " + std::to_string(agree) + "/" + std::to_string(n.data.size());
  }
  report.record(3, all, "zero-fault simulator equals quantized reference", detail);
}

// ---- 4: exhaustive single-bit faults ---------------------------------------

void exhaustive(Report& report) {
  struct Case {
    nn::Topology topology;
    std::size_t pes;
  };
  std::size_t checked = 0;
  std::size_t agree = 0;
  std::string detail;
  for (const auto& c : {Case{{{8, 4, 2}, nn::Activation::logsig}, 2}, Case{{{3, 3, 2}, nn::Activation::satlin}, 4}}) {
    const auto archive = fixtures::random_archive(c.topology, 17);
    const auto config = accel::make_config(archive, c.pes);
    const auto inputs = fixtures::random_inputs(4, c.topology.inputs(), c.topology.outputs(), 9);
    accel::Accelerator sim(config, archive);
    fixtures::ReferenceSim ref(archive, c.pes);
    const auto t = accel::cycles_for_inference(config);
    std::vector<faults::FaultSpec> all;
    for (auto cls : kRegisterClasses) {
      for (std::size_t index = 0; index < config.register_count(cls); ++index) {
        for (int b = 0; b < config.register_width(cls); ++b) {
          const faults::FaultSpec base{FaultKind::stuck_at_0, {cls, index}, 1u << b, {}, {}};
          all.push_back(base);
          all.push_back({FaultKind::stuck_at_1, base.target, base.bits, {}, {}});
          for (std::uint64_t cycle = 0; cycle < t; ++cycle) {
            all.push_back({FaultKind::transient, base.target, base.bits, {}, cycle});
          }
        }
      }
    }
    for (const auto& f : all) {
      for (auto tech : {Technique::none, Technique::word, Technique::bit, Technique::hybrid}) {
        for (const auto& item : inputs.items) {
          const auto got = sim.run(item.input, {&f, tech});
          const auto want = ref.run(item.input, &f, tech);
          std::vector<std::uint32_t> raws;
          for (const auto& v : got.outputs) raws.push_back(v.raw());
          ++checked;
          agree += raws == want.outputs && got.predicted_class == want.predicted;
        }
      }
    }
    detail += (detail.empty() ? "" : "; ") + std::to_string(c.topology.layer_sizes[0]) + "-" +
              std::to_string(c.topology.layer_sizes[1]) + "-" + std::to_string(c.topology.layer_sizes[2]) +
              " P=" + std::to_string(c.pes) + ": " + std::to_string(all.size()) + " faults";
  }
  report.record(4, checked == agree, "exhaustive single-bit faults match the brute-force reference",
                detail + "; " + std::to_string(agree) + "/" + std::to_string(checked) +
                    " runs agree (4 inputs x 4 mitigation modes)");
}

// ---- 5: ordering -------------------------------------------------------------

void ordering(Report& report) {
  const auto& sa1 = desk_result(FaultKind::stuck_at_1);
  const auto& sa0 = desk_result(FaultKind::stuck_at_0);
  const auto& tr = desk_result(FaultKind::transient);
  bool ok = true;
  std::string violations;
  for (int k = 1; k <= 16; ++k) {
    const double m1 = sa1.at(k).median, m0 = sa0.at(k).median, mt = tr.at(k).median;
    if (m1 < m0 - kTolerance) violations += " sa1<sa0@k" + std::to_string(k);
    if (m1 < mt - kTolerance) violations += " sa1<transient@k" + std::to_string(k);
    if (m0 < mt - kTolerance) violations += " sa0<transient@k" + std::to_string(k);
  }
  ok = violations.empty();
  report.record(5, ok, "stuck-at-1 >= stuck-at-0 and permanent >= transient (medians, +-1 pt)",
                "P=64 k=1..16 sa1 " + medians_line(sa1) + " sa0 " + medians_line(sa0) + " transient " +
                    medians_line(tr) + (ok ? "" : "; violations:" + violations));
}

// ---- 6: PE scaling -----------------------------------------------------------

void pe_scaling(Report& report) {
  const std::size_t pes[] = {16, 64, 256};
  std::string violations;
  std::string detail;
  for (auto kind : {FaultKind::stuck_at_1, FaultKind::transient}) {
    for (auto p : pes) detail += " " + faults::to_string(kind) + "@P" + std::to_string(p) + " " + medians_line(desk_result(kind, p));
  }
  for (int k = 1; k <= 16; ++k) {
    for (std::size_t i = 0; i + 1 < 3; ++i) {
      const double a = desk_result(FaultKind::stuck_at_1, pes[i]).at(k).median;
      const double b = desk_result(FaultKind::stuck_at_1, pes[i + 1]).at(k).median;
      if (b > a + kTolerance) violations += " sa1 rises P" + std::to_string(pes[i]) + "->" + std::to_string(pes[i + 1]) + "@k" + std::to_string(k);
    }
    double lo = 100, hi = 0;
    for (auto p : pes) {
      const double m = desk_result(FaultKind::transient, p).at(k).median;
      lo = std::min(lo, m);
      hi = std::max(hi, m);
    }
    if (hi - lo > kTolerance) violations += " transient spread " + fmt(hi - lo) + "@k" + std::to_string(k);
  }
  report.record(6, violations.empty(), "permanent medians non-increasing in P, transient medians flat across P",
                "P in {16,64,256}:" + detail + (violations.empty() ? "" : "; violations:" + violations));
}

// ---- 7: floating-point components ---------------------------------------------

void components(Report& report) {
  std::map<faults::BitComponent, double> m;
  for (auto comp : {faults::BitComponent::sign, faults::BitComponent::digit, faults::BitComponent::fraction}) {
    auto c = desk_campaign(FaultKind::stuck_at_1);
    c.filter.component = comp;
    c.fault_counts = {1};
    m[comp] = campaign::run_campaign(c).at(1).median;
  }
  const double s = m[faults::BitComponent::sign], d = m[faults::BitComponent::digit],
               f = m[faults::BitComponent::fraction];
  report.record(7, s >= d - kTolerance && d >= f - kTolerance, "k=1 median sign >= digit >= fraction (+-1 pt)",
                "stuck_at_1 P=64: sign " + fmt(s) + ", digit " + fmt(d) + ", fraction " + fmt(f));
}

// ---- 8: mitigation -------------------------------------------------------------

void mitigation(Report& report) {
  std::map<Technique, CampaignResult> r;
  r.emplace(Technique::none, desk_result(FaultKind::stuck_at_1));
  for (auto t : {Technique::word, Technique::bit, Technique::hybrid}) {
    auto c = desk_campaign(FaultKind::stuck_at_1);
    c.mitigation = t;
    r.emplace(t, campaign::run_campaign(c));
  }
  const double baseline = nn::reference_error(*fixtures::desk_archive(), *held_out(), nn::Mode::quantized);
  std::string violations;
  const double word1 = r.at(Technique::word).at(1).median;
  for (int k = 1; k <= 16; ++k) {
    const double h = r.at(Technique::hybrid).at(k).median;
    if (h > r.at(Technique::bit).at(k).median) violations += " hybrid>bit@k" + std::to_string(k);
    if (h > r.at(Technique::word).at(k).median) violations += " hybrid>word@k" + std::to_string(k);
    if (r.at(Technique::word).at(k).median != word1) violations += " word varies@k" + std::to_string(k);
  }
  if (r.at(Technique::hybrid).at(0).median != baseline) violations += " hybrid k=0 != baseline";
  report.record(8, violations.empty(), "hybrid <= bit and word at every k, word constant, hybrid k=0 = baseline",
                "stuck_at_1 P=64 baseline " + fmt(baseline) + "; none " + medians_line(r.at(Technique::none)) +
                    " word " + medians_line(r.at(Technique::word)) + " bit " + medians_line(r.at(Technique::bit)) +
                    " hybrid " + medians_line(r.at(Technique::hybrid)) +
                    (violations.empty() ? "" : "; violations:" + violations));
}

// ---- 9: sign/MSB agreement ---------------------------------------------------------

void agreement(Report& report) {
  const auto archive = fixtures::desk_archive();
  accel::Accelerator sim(accel::make_config(*archive, 64), *archive);
  RegisterTrace trace;
  for (std::size_t i = 0; i < 100; ++i) sim.run(held_out()->items[i].input, {nullptr, Technique::none, &trace});
  const double wr = mitigate::sign_msb_agreement(trace, RegisterClass::wr);
  const double imr = mitigate::sign_msb_agreement(trace, RegisterClass::imr);
  const double both = mitigate::sign_msb_agreement(trace);
  report.record(9, both >= 0.99, "sign/MSB agreement over WR and IMR traces >= 99%",
                "100 held-out items, P=64: WR+IMR " + fmt(100 * both) + "% (WR " + fmt(100 * wr) + "%, IMR " +
                    fmt(100 * imr) + "%)");
}

// ---- 10: convergence ------------------------------------------------------------------

void convergence(Report& report) {
  const auto& r = desk_result(FaultKind::stuck_at_1);
  std::size_t worst = 0;
  std::string detail;
  for (const auto& p : r.points) {
    const auto c = campaign::convergence_report(p, kTolerance);
    worst = std::max(worst, c.trials_needed);
    if (p.k == 1 || p.k == 8 || p.k == 16) {
      detail += " k=" + std::to_string(p.k) + ": n=" + std::to_string(c.trials_needed) + " sd=" + fmt(c.trailing_stddev);
    }
  }
  const auto csv = campaign::convergence_csv(r);
  const auto rows = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) - 1;
  const bool emitted = rows == r.points.size() * kTrials;
  report.record(10, worst < kTrials && emitted, "running median settles within 1 pt before trial 1000",
                "stuck_at_1 P=64 worst n=" + std::to_string(worst) + ";" + detail + "; series rows " +
                    std::to_string(rows));
}

// ---- 11: determinism --------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = io::read_text(e.path());
  }
  return files;
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "faultline");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int status = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
  if (status != 0) std::cerr << err.str();
  return status;
}

void determinism(Report& report) {
  const auto root = fs::temp_directory_path() / "faultline_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const auto data = [](std::size_t offset, std::size_t limit) {
    return nlohmann::json{{"path", (fixtures::data_dir() / "digits.csv").string()},
                          {"divisor", 17}, {"classes", 10}, {"offset", offset}, {"limit", limit}};
  };
  const auto write = [&](const std::string& name, const nlohmann::json& j) {
    io::write_text(root / name, io::dump_json(j));
    return (root / name).string();
  };
  const auto campaign_cfg = nlohmann::json{{"name", "det"}, {"archive", "train/archive"}, {"dataset", data(1437, 40)},
                                           {"num_pes", 16}, {"fault_counts", {0, 1, 4, 16}}, {"trials", 25},
                                           {"seed", 3}, {"kind", "transient"}};
  const std::vector<std::vector<std::string>> commands = {
      {"train", "--config",
       write("train.json", {{"dataset", data(0, 400)}, {"topology", {64, 16, 10}}, {"epochs", 10}, {"seed", 5}}),
       "--out", (root / "train").string()},
      {"infer", "--config", write("infer.json", {{"archive", "train/archive"}, {"dataset", data(1437, 20)}}), "--out",
       (root / "infer").string(), "--trace"},
      {"campaign", "--config", write("campaign.json", campaign_cfg), "--out", (root / "campaign").string()},
      {"campaign", "--config", (root / "campaign.json").string(), "--out", (root / "preset").string(), "--preset",
       "nn-data", "--trials", "10"},
      {"mitigate-eval", "--config", (root / "campaign.json").string(), "--out", (root / "mitigate").string()},
      {"analyze", "--config",
       write("analyze.json", {{"archive", "train/archive"}, {"dataset", data(1437, 10)},
                              {"results", {"campaign/result.json"}}}),
       "--out", (root / "analyze").string()},
  };
  std::size_t identical = 0;
  std::size_t files = 0;
  std::string detail;
  for (const auto& cmd : commands) {
    const fs::path out = cmd[4];
    if (run_cli(cmd) != 0) {
      detail += " " + cmd[0] + " failed;";
      continue;
    }
    const auto first = snapshot(out);
    if (run_cli(cmd) != 0) {
      detail += " " + cmd[0] + " rerun failed;";
      continue;
    }
    const auto second = snapshot(out);
    files += first.size();
    identical += first == second;
    if (first != second) detail += " " + cmd[0] + " differs;";
  }
  // Thread count must not matter either.
  auto c = desk_campaign(FaultKind::stuck_at_1);
  c.trials = 50;
  c.fault_counts = {0, 3};
  const bool threads_ok = campaign::to_json(campaign::run_campaign(c, {1})).dump() ==
                          campaign::to_json(campaign::run_campaign(c, {4})).dump();
  fs::remove_all(root);
  report.record(11, identical == commands.size() && threads_ok, "re-runs produce byte-identical result files",
                std::to_string(identical) + "/" + std::to_string(commands.size()) + " commands identical over " +
                    std::to_string(files) + " files; 1 vs 4 threads identical: " + (threads_ok ? "yes" : "no") +
                    detail);
}

}  // namespace

int main() {
  Report report;
  const std::vector<std::function<void(Report&)>> criteria = {
      cycle_counts, fault_bits, zero_fault, exhaustive, ordering,   pe_scaling,
      components,   mitigation, agreement,  convergence, determinism, footnote};
  for (const auto& c : criteria) c(report);
  std::cout << (report.failures() == 0 ? "ALL PASS" : std::to_string(report.failures()) + " FAILED") << std::endl;
  return report.failures() == 0 ? 0 : 1;
}
