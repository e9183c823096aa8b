// SPDX-License-Identifier: Apache-2.0

#include "faultline/io.hpp"

#include <zlib.h>

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace faultline::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::array<char, 17> buf{};
  std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(h));
  return buf.data();
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

// ---- weight archive -----------------------------------------------------------

namespace {

void write_words(const fs::path& path, const std::vector<fxp::Value>& values) {
  std::string bytes;
  bytes.reserve(values.size() * 2);
  for (const auto& v : values) {
    if (v.width() > 16) {
      throw ContractError("archive words are 16-bit; format " + v.format().to_string() + " is wider");
    }
    // Signed formats are sign-extended so each word reads back as the value's
    // integer encoding.
    const auto word = v.format().is_signed() ? static_cast<std::uint16_t>(v.integer())
                                             : static_cast<std::uint16_t>(v.raw());
    bytes.push_back(static_cast<char>(word & 0xff));
    bytes.push_back(static_cast<char>(word >> 8));
  }
  write_text(path, bytes);
}

std::vector<fxp::Value> read_words(const fs::path& path, std::size_t count, fxp::Format format) {
  const auto bytes = read_text(path);
  if (bytes.size() != count * 2) {
    throw FormatError("'" + path.string() + "' holds " + std::to_string(bytes.size()) +
                      " bytes, expected " + std::to_string(count * 2));
  }
  std::vector<fxp::Value> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const auto lo = static_cast<unsigned char>(bytes[2 * n]);
    const auto hi = static_cast<unsigned char>(bytes[2 * n + 1]);
    const auto word = static_cast<std::uint16_t>(lo | (hi << 8));
    const auto v = fxp::Value::from_raw(word, format);
    // Bits above the format width must be a sign extension (or zero).
    const std::uint32_t above = static_cast<std::uint32_t>(word) & ~format.mask() & 0xffffu;
    const std::uint32_t expect = (format.is_signed() && v.bit(format.width() - 1)) ? (~format.mask() & 0xffffu) : 0u;
    if (above != expect) {
      throw FormatError("'" + path.string() + "' word " + std::to_string(n) + " does not fit " +
                        format.to_string());
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

void write_archive(const nn::WeightArchive& archive, const fs::path& dir) {
  archive.validate();
  fs::create_directories(dir);
  json manifest;
  manifest["version"] = kArchiveVersion;
  manifest["topology"] = archive.topology.layer_sizes;
  manifest["activation"] = nn::to_string(archive.topology.activation);
  manifest["byte_order"] = "little";
  manifest["word"] = "int16";
  manifest["output_format"] = archive.output_format.to_string();
  json layers = json::array();
  for (std::size_t j = 0; j < archive.layers.size(); ++j) {
    const auto& l = archive.layers[j];
    const std::string wname = "W" + std::to_string(j) + ".bin";
    const std::string bname = "b" + std::to_string(j) + ".bin";
    write_words(dir / wname, l.weights);
    write_words(dir / bname, l.biases);
    layers.push_back({{"ir", l.formats.ir.to_string()},
                      {"wr", l.formats.wr.to_string()},
                      {"imr", l.formats.imr.to_string()},
                      {"weights", wname},
                      {"biases", bname}});
  }
  manifest["layers"] = layers;
  write_text(dir / "manifest.json", dump_json(manifest));
}

nn::WeightArchive read_archive(const fs::path& dir) {
  const auto manifest = read_json(dir / "manifest.json");
  try {
    if (manifest.at("version").get<int>() != kArchiveVersion) {
      throw FormatError("unsupported archive version in '" + dir.string() + "'");
    }
    if (manifest.at("byte_order").get<std::string>() != "little" ||
        manifest.at("word").get<std::string>() != "int16") {
      throw FormatError("archive '" + dir.string() + "' must declare little-endian int16 words");
    }
    nn::WeightArchive archive;
    archive.topology.layer_sizes = manifest.at("topology").get<std::vector<std::size_t>>();
    archive.topology.activation = nn::parse_activation(manifest.at("activation").get<std::string>());
    archive.topology.validate();
    archive.output_format = fxp::Format::parse(manifest.at("output_format").get<std::string>());
    const auto& layers = manifest.at("layers");
    if (layers.size() != archive.topology.matrices()) {
      throw FormatError("archive '" + dir.string() + "' layer list does not match topology");
    }
    for (std::size_t j = 0; j < layers.size(); ++j) {
      const auto& l = layers[j];
      nn::QuantizedLayer q;
      q.formats.ir = fxp::Format::parse(l.at("ir").get<std::string>());
      q.formats.wr = fxp::Format::parse(l.at("wr").get<std::string>());
      q.formats.imr = fxp::Format::parse(l.at("imr").get<std::string>());
      const auto in = archive.topology.layer_sizes[j];
      const auto out = archive.topology.layer_sizes[j + 1];
      q.weights = read_words(dir / l.at("weights").get<std::string>(), in * out, q.formats.wr);
      q.biases = read_words(dir / l.at("biases").get<std::string>(), out, q.formats.wr);
      archive.layers.push_back(std::move(q));
    }
    archive.validate();
    return archive;
  } catch (const json::exception& e) {
    throw FormatError("malformed archive manifest in '" + dir.string() + "': " + e.what());
  }
}

// ---- datasets ---------------------------------------------------------------------

namespace {

void finish_classes(nn::Dataset& d, std::size_t class_count) {
  std::size_t max_label = 0;
  for (const auto& item : d.items) max_label = std::max(max_label, item.label);
  d.class_count = class_count != 0 ? class_count : (d.items.empty() ? 0 : max_label + 1);
  if (!d.items.empty() && max_label >= d.class_count) {
    throw FormatError("dataset label " + std::to_string(max_label) + " exceeds declared class count " +
                      std::to_string(d.class_count));
  }
}

double parse_number(std::string_view text, const fs::path& path, std::size_t line) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw FormatError("'" + path.string() + "' line " + std::to_string(line) + ": bad number '" +
                      std::string(text) + "'");
  }
  return v;
}

}  // namespace

nn::Dataset read_csv_dataset(const fs::path& path, double divisor, std::size_t class_count) {
  if (!(divisor > 0.0)) throw ContractError("CSV divisor must be positive");
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset '" + path.string() + "'");
  nn::Dataset d;
  std::string line;
  std::size_t line_no = 0;
  std::size_t features = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::string_view rest(line);
    nn::DataItem item;
    bool first = true;
    while (true) {
      const auto comma = rest.find(',');
      const auto field = rest.substr(0, comma);
      const double v = parse_number(field, path, line_no);
      if (first) {
        if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
          throw FormatError("'" + path.string() + "' line " + std::to_string(line_no) +
                            ": label must be a non-negative integer");
        }
        item.label = static_cast<std::size_t>(v);
        first = false;
      } else {
        item.input.push_back(v / divisor);
      }
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (d.items.empty()) {
      features = item.input.size();
      if (features == 0) throw FormatError("'" + path.string() + "': rows need at least one feature");
    } else if (item.input.size() != features) {
      throw FormatError("'" + path.string() + "' line " + std::to_string(line_no) + ": expected " +
                        std::to_string(features) + " features");
    }
    d.items.push_back(std::move(item));
  }
  finish_classes(d, class_count);
  return d;
}

namespace {

std::string read_maybe_gzip(const fs::path& path) {
  std::unique_ptr<gzFile_s, int (*)(gzFile)> file(gzopen(path.string().c_str(), "rb"), gzclose);
  if (!file) throw Error("cannot open '" + path.string() + "'");
  std::string data;
  std::array<char, 1 << 16> buf{};
  while (true) {
    const int n = gzread(file.get(), buf.data(), static_cast<unsigned>(buf.size()));
    if (n < 0) throw FormatError("'" + path.string() + "': decompression failed");
    if (n == 0) break;
    data.append(buf.data(), static_cast<std::size_t>(n));
  }
  return data;
}

std::uint32_t be32(const std::string& data, std::size_t offset) {
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(data[offset])) << 24) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(data[offset + 1])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(data[offset + 2])) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(data[offset + 3]));
}

}  // namespace

nn::Dataset read_idx_dataset(const fs::path& images, const fs::path& labels, std::size_t class_count) {
  const auto img = read_maybe_gzip(images);
  const auto lab = read_maybe_gzip(labels);
  if (img.size() < 16 || be32(img, 0) != 0x00000803u) {
    throw FormatError("'" + images.string() + "' is not an IDX image file (magic 0x00000803)");
  }
  if (lab.size() < 8 || be32(lab, 0) != 0x00000801u) {
    throw FormatError("'" + labels.string() + "' is not an IDX label file (magic 0x00000801)");
  }
  const std::size_t count = be32(img, 4);
  const std::size_t pixels = static_cast<std::size_t>(be32(img, 8)) * be32(img, 12);
  if (be32(lab, 4) != count) throw FormatError("IDX image and label counts differ");
  if (img.size() != 16 + count * pixels || lab.size() != 8 + count) {
    throw FormatError("IDX payload size does not match its header");
  }
  nn::Dataset d;
  d.items.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    nn::DataItem item;
    item.label = static_cast<unsigned char>(lab[8 + n]);
    item.input.resize(pixels);
    for (std::size_t p = 0; p < pixels; ++p) {
      item.input[p] = static_cast<unsigned char>(img[16 + n * pixels + p]) / 256.0;
    }
    d.items.push_back(std::move(item));
  }
  finish_classes(d, class_count);
  return d;
}

DatasetSpec DatasetSpec::from_json(const json& j, const fs::path& base) {
  DatasetSpec s;
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  try {
    s.format = j.value("format", std::string("csv"));
    s.path = resolve(j.at("path").get<std::string>());
    if (j.contains("labels")) s.labels = resolve(j.at("labels").get<std::string>());
    s.divisor = j.value("divisor", 1.0);
    s.class_count = j.value("classes", std::size_t{0});
    s.offset = j.value("offset", std::size_t{0});
    s.limit = j.value("limit", std::size_t{0});
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed dataset reference: ") + e.what());
  }
  if (s.format != "csv" && s.format != "idx") throw FormatError("dataset format must be csv or idx");
  if (s.format == "idx" && s.labels.empty()) throw FormatError("idx datasets need a 'labels' path");
  return s;
}

json DatasetSpec::to_json() const {
  json j{{"format", format}, {"path", path.string()}, {"divisor", divisor}, {"classes", class_count},
         {"offset", offset}, {"limit", limit}};
  if (!labels.empty()) j["labels"] = labels.string();
  return j;
}

nn::Dataset load_dataset(const DatasetSpec& spec) {
  nn::Dataset d = spec.format == "idx" ? read_idx_dataset(spec.path, spec.labels, spec.class_count)
                                       : read_csv_dataset(spec.path, spec.divisor, spec.class_count);
  if (spec.offset > 0) {
    const auto skip = std::min(spec.offset, d.items.size());
    d.items.erase(d.items.begin(), d.items.begin() + static_cast<std::ptrdiff_t>(skip));
  }
  if (spec.limit > 0 && d.items.size() > spec.limit) {
    d.items.resize(spec.limit);
  }
  return d;
}

}  // namespace faultline::io
