// SPDX-License-Identifier: Apache-2.0

#include "faultline/cli.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "faultline/accel.hpp"
#include "faultline/analysis.hpp"
#include "faultline/campaign.hpp"
#include "faultline/errors.hpp"
#include "faultline/io.hpp"

namespace faultline::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path base_dir(const Options& o) { return o.config.parent_path(); }

fs::path resolve(const Options& o, const std::string& p) {
  return fs::path(p).is_absolute() ? fs::path(p) : base_dir(o) / p;
}

template <typename T>
T field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("config field '") + key + "': " + e.what());
  }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? field<T>(j, key) : fallback;
}

std::shared_ptr<const nn::WeightArchive> archive_at(const Options& o, const std::string& path) {
  return std::make_shared<const nn::WeightArchive>(io::read_archive(resolve(o, path)));
}

std::shared_ptr<const nn::Dataset> dataset_from(const Options& o, const json& spec) {
  auto data = io::load_dataset(io::DatasetSpec::from_json(spec, base_dir(o)));
  if (data.empty()) throw ContractError("dataset is empty");
  return std::make_shared<const nn::Dataset>(std::move(data));
}

void write_manifest(const Options& o, const json& config) {
  json m{{"command", o.command},
         {"config", o.config.string()},
         {"seed", config.contains("seed") ? config.at("seed") : json(nullptr)},
         {"out", o.out.string()},
         {"config_hash", io::fnv1a_hex(config.dump())},
         {"version", std::string(kVersion)}};
  io::write_text(o.out / "manifest.json", io::dump_json(m));
}

// ---- train -----------------------------------------------------------------

void cmd_train(const Options& o, const json& cfg) {
  const auto data = dataset_from(o, field<json>(cfg, "dataset"));
  nn::Topology topology{field<std::vector<std::size_t>>(cfg, "topology"),
                        nn::parse_activation(field_or<std::string>(cfg, "activation", "logsig"))};
  topology.validate();

  nn::TrainOptions train;
  train.epochs = field_or<std::size_t>(cfg, "epochs", train.epochs);
  train.learning_rate = field_or<double>(cfg, "learning_rate", train.learning_rate);
  train.weight_decay = field_or<double>(cfg, "weight_decay", train.weight_decay);
  train.seed = field_or<std::uint64_t>(cfg, "seed", train.seed);
  const auto net = nn::train(topology, *data, train);

  nn::CalibrationOptions cal_options;
  cal_options.total_width = field_or<int>(cfg, "width", cal_options.total_width);
  cal_options.imr_width = field_or<int>(cfg, "imr_width", cal_options.imr_width);
  const auto calibration_data = cfg.contains("calibration") ? dataset_from(o, cfg.at("calibration")) : data;
  const auto calibration = nn::calibrate(net, *calibration_data, cal_options);
  const auto archive = nn::quantize_network(net, calibration);

  io::write_archive(archive, o.out / "archive");
  json formats = json::array();
  for (const auto& l : calibration.layers) {
    formats.push_back({{"ir", l.ir.to_string()}, {"wr", l.wr.to_string()}, {"imr", l.imr.to_string()}});
  }
  json report{{"items", data->size()},
              {"float_error", nn::float_error(net, *data)},
              {"quantized_error", nn::reference_error(archive, *data, nn::Mode::quantized)},
              {"formats", formats},
              {"output_format", calibration.output_format.to_string()}};
  io::write_text(o.out / "train.json", io::dump_json(report));
}

// ---- infer -----------------------------------------------------------------

void cmd_infer(const Options& o, const json& cfg) {
  const auto archive = archive_at(o, field<std::string>(cfg, "archive"));
  const auto data = dataset_from(o, field<json>(cfg, "dataset"));
  data->validate(archive->topology.inputs());
  const auto hw = accel::make_config(*archive, field_or<std::size_t>(cfg, "num_pes", 64));
  accel::Accelerator sim(hw, *archive);

  RegisterTrace trace;
  accel::InferenceOptions options;
  if (o.trace) options.trace = &trace;
  std::size_t wrong = 0;
  for (const auto& item : data->items) {
    if (sim.run(item.input, options).predicted_class != item.label) ++wrong;
  }
  const double error = 100.0 * static_cast<double>(wrong) / static_cast<double>(data->size());
  json report{{"items", data->size()},
              {"misclassified", wrong},
              {"error", error},
              {"reference_error", nn::reference_error(*archive, *data, nn::Mode::quantized)},
              {"num_pes", hw.num_pes},
              {"cycles_per_inference", accel::cycles_for_inference(hw)},
              {"fault_bits", accel::total_fault_bits(hw)}};
  io::write_text(o.out / "infer.json", io::dump_json(report));
  if (o.trace) {
    std::ofstream f(o.out / "trace.csv", std::ios::binary);
    trace.write_csv(f);
    if (!f) throw Error("could not write " + (o.out / "trace.csv").string());
  }
}

// ---- campaign --------------------------------------------------------------

std::vector<int> parse_counts(const json& j) {
  if (j.is_array()) return j.get<std::vector<int>>();
  const int from = field<int>(j, "from");
  const int to = field<int>(j, "to");
  if (to < from) throw FormatError("fault_counts range has to < from");
  std::vector<int> v;
  for (int k = from; k <= to; ++k) v.push_back(k);
  return v;
}

campaign::CampaignConfig campaign_from(const Options& o, const json& cfg) {
  campaign::CampaignConfig c;
  c.name = field_or<std::string>(cfg, "name", c.name);
  c.archive = archive_at(o, field<std::string>(cfg, "archive"));
  c.dataset = dataset_from(o, field<json>(cfg, "dataset"));
  c.num_pes = field_or<std::size_t>(cfg, "num_pes", c.num_pes);
  c.kind = faults::parse_fault_kind(field_or<std::string>(cfg, "kind", faults::to_string(c.kind)));
  if (cfg.contains("filter")) {
    const auto& f = cfg.at("filter");
    if (f.contains("class")) c.filter.cls = parse_register_class(field<std::string>(f, "class"));
    if (f.contains("layer")) c.filter.layer = field<std::size_t>(f, "layer");
    if (f.contains("component")) c.filter.component = faults::parse_bit_component(field<std::string>(f, "component"));
  }
  if (cfg.contains("fault_counts")) {
    try {
      c.fault_counts = parse_counts(cfg.at("fault_counts"));
    } catch (const json::exception& e) {
      throw FormatError(std::string("config field 'fault_counts': ") + e.what());
    }
  }
  c.trials = field_or<std::size_t>(cfg, "trials", c.trials);
  c.seed = field_or<std::uint64_t>(cfg, "seed", c.seed);
  c.mitigation = mitigate::parse_technique(field_or<std::string>(cfg, "mitigation", "none"));
  c.engine = campaign::parse_engine(field_or<std::string>(cfg, "engine", "incremental"));
  c.validate();
  return c;
}

campaign::PresetOptions presets_from(const Options& o, const json& cfg, const campaign::CampaignConfig& base) {
  campaign::PresetOptions p;
  if (!cfg.contains("presets")) return p;
  const auto& j = cfg.at("presets");
  p.pe_counts = field_or<std::vector<std::size_t>>(j, "pe_counts", p.pe_counts);
  if (j.contains("activation_archives")) {
    for (const auto& [name, path] : j.at("activation_archives").items()) {
      p.activation_archives[nn::parse_activation(name)] = archive_at(o, path.get<std::string>());
    }
  }
  if (j.contains("datasets")) {
    for (const auto& w : j.at("datasets")) {
      campaign::NamedWorkload nw;
      nw.name = field<std::string>(w, "name");
      nw.archive = w.contains("archive") ? archive_at(o, field<std::string>(w, "archive")) : base.archive;
      nw.dataset = dataset_from(o, field<json>(w, "dataset"));
      p.datasets.push_back(std::move(nw));
    }
  }
  return p;
}

void write_result(const fs::path& dir, const campaign::CampaignResult& r) {
  fs::create_directories(dir);
  io::write_text(dir / "result.json", io::dump_json(campaign::to_json(r)));
  io::write_text(dir / "sweep.csv", analysis::sweep_table(r));
  io::write_text(dir / "convergence.csv", campaign::convergence_csv(r));
}

json medians(const campaign::CampaignResult& r) {
  json m = json::object();
  for (const auto& p : r.points) m[std::to_string(p.k)] = p.median;
  return m;
}

void cmd_campaign(const Options& o, const json& cfg) {
  const auto base = campaign_from(o, cfg);
  const auto axis = field_or<std::string>(cfg, "preset", "");
  if (axis.empty()) {
    write_result(o.out, campaign::run_campaign(base));
    return;
  }
  json index = json::array();
  for (const auto& c : campaign::preset_experiments(axis, base, presets_from(o, cfg, base))) {
    const auto r = campaign::run_campaign(c);
    write_result(o.out / c.name, r);
    index.push_back({{"name", c.name},
                     {"dir", c.name},
                     {"config_hash", r.config_hash},
                     {"fault_counts", r.config.at("fault_counts")},
                     {"medians", medians(r)}});
  }
  io::write_text(o.out / "presets.json", io::dump_json({{"axis", axis}, {"campaigns", index}}));
}

void cmd_mitigate_eval(const Options& o, const json& cfg) {
  const auto base = campaign_from(o, cfg);
  const auto comparison = campaign::compare_mitigations(base);
  json techniques = json::object();
  for (std::size_t i = 0; i < comparison.techniques.size(); ++i) {
    const auto name = mitigate::to_string(comparison.techniques[i]);
    write_result(o.out / name, comparison.results[i]);
    techniques[name] = medians(comparison.results[i]);
  }
  io::write_text(o.out / "mitigation.csv", campaign::mitigation_csv(comparison));
  io::write_text(o.out / "mitigation.json", io::dump_json({{"medians", techniques}}));
}

// ---- analyze ---------------------------------------------------------------

void cmd_analyze(const Options& o, const json& cfg) {
  if (!cfg.contains("archive") && !cfg.contains("results")) {
    throw FormatError("analyze config needs 'archive' (sparsity) and/or 'results' (sweeps)");
  }
  json report = json::object();
  if (cfg.contains("archive")) {
    const auto archive = archive_at(o, field<std::string>(cfg, "archive"));
    const auto data = dataset_from(o, field<json>(cfg, "dataset"));
    data->validate(archive->topology.inputs());
    accel::Accelerator sim(accel::make_config(*archive, field_or<std::size_t>(cfg, "num_pes", 64)), *archive);
    RegisterTrace trace;
    accel::InferenceOptions options;
    options.trace = &trace;
    for (const auto& item : data->items) sim.run(item.input, options);

    const auto sparsity = analysis::sparsity(trace);
    io::write_text(o.out / "sparsity.csv", analysis::sparsity_csv(sparsity));
    report["sparsity"] = analysis::to_json(sparsity);
    json agreement = json::object();
    for (auto cls : {RegisterClass::wr, RegisterClass::imr}) {
      agreement[to_string(cls)] = mitigate::sign_msb_agreement(trace, cls);
    }
    agreement["WR+IMR"] = mitigate::sign_msb_agreement(trace, std::nullopt);
    report["sign_msb_agreement"] = agreement;
    if (o.trace) {
      std::ofstream f(o.out / "trace.csv", std::ios::binary);
      trace.write_csv(f);
      if (!f) throw Error("could not write " + (o.out / "trace.csv").string());
    }
  }
  if (cfg.contains("results")) {
    const double margin = field_or<double>(cfg, "margin", 1.0);
    json convergence = json::array();
    for (const auto& path : field<std::vector<std::string>>(cfg, "results")) {
      const auto r = campaign::result_from_json(io::read_json(resolve(o, path)));
      io::write_text(o.out / (r.name + ".sweep.csv"), analysis::sweep_table(r));
      for (const auto& p : r.points) {
        if (p.running_median.size() < 2) continue;
        const auto c = campaign::convergence_report(p, margin);
        convergence.push_back({{"name", r.name},
                               {"k", p.k},
                               {"trials", p.errors.size()},
                               {"trials_needed", c.trials_needed},
                               {"trailing_stddev", c.trailing_stddev},
                               {"final_median", c.final_median}});
      }
    }
    report["margin"] = margin;
    report["convergence"] = convergence;
  }
  io::write_text(o.out / "analysis.json", io::dump_json(report));
}

}  // namespace

json effective_config(const Options& o) {
  json cfg = io::read_json(o.config);
  if (!cfg.is_object()) throw FormatError("config file must hold a JSON object");
  if (o.seed) cfg["seed"] = *o.seed;
  if (o.trials) cfg["trials"] = *o.trials;
  if (!o.preset.empty()) cfg["preset"] = o.preset;
  return cfg;
}

void run_command(const Options& o) {
  const json cfg = effective_config(o);
  fs::create_directories(o.out);
  if (o.command == "train") {
    cmd_train(o, cfg);
  } else if (o.command == "infer") {
    cmd_infer(o, cfg);
  } else if (o.command == "campaign") {
    cmd_campaign(o, cfg);
  } else if (o.command == "mitigate-eval") {
    cmd_mitigate_eval(o, cfg);
  } else if (o.command == "analyze") {
    cmd_analyze(o, cfg);
  } else {
    throw ContractError("unknown command '" + o.command + "'");
  }
  write_manifest(o, cfg);
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fault injection and mitigation on a cycle-accurate fixed-point NN accelerator", "faultline"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Options o;
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  const struct {
    const char* name;
    const char* help;
  } commands[] = {
      {"train", "Train a network, calibrate its formats, and write a weight archive"},
      {"infer", "Fault-free simulator run over a dataset"},
      {"campaign", "Statistical fault-injection campaign (optionally a preset sweep)"},
      {"mitigate-eval", "Run one campaign under every mitigation technique"},
      {"analyze", "Sparsity statistics and sweep/convergence reports"},
  };
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", o.config, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory")->required();
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--trials", trials, "Override trials per sweep point")->check(CLI::PositiveNumber);
    sub->add_option("--preset", o.preset, "Preset axis for campaign");
    sub->add_flag("--trace", o.trace, "Also write the register trace CSV");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  for (const auto* sub : app.get_subcommands()) o.command = sub->get_name();
  const auto* sub = app.get_subcommand(o.command);
  if (sub->count("--seed") > 0) o.seed = seed;
  if (sub->count("--trials") > 0) o.trials = trials;

  try {
    run_command(o);
  } catch (const std::exception& e) {
    err << "faultline: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace faultline::cli
