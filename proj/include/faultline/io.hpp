// SPDX-License-Identifier: Apache-2.0
//
// On-disk formats for weight archives and datasets.
//
// Weight archive: a directory holding manifest.json plus one raw file per
// weight matrix (W<j>.bin) and bias vector (b<j>.bin). Each raw file is a
// row-major, input-index-major sequence of little-endian 16-bit words, one per
// parameter, holding the WR-format raw encoding (sign-extended when the
// format is signed and narrower than 16 bits).

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "faultline/nn.hpp"

namespace faultline::io {

inline constexpr int kArchiveVersion = 1;

void write_archive(const nn::WeightArchive& archive, const std::filesystem::path& dir);
nn::WeightArchive read_archive(const std::filesystem::path& dir);

/// Deterministic JSON text (sorted keys, two-space indent, trailing newline).
std::string dump_json(const nlohmann::json& j);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

// CSV rows "label,f0,f1,...". Features are divided by `divisor`.
// class_count 0 means 1 + the largest label seen.
nn::Dataset read_csv_dataset(const std::filesystem::path& path, double divisor,
                             std::size_t class_count = 0);

// IDX image/label pair (MNIST layout; gzip-compressed files accepted).
// Pixels are mapped to [0,1) by dividing by 256.
nn::Dataset read_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                             std::size_t class_count = 0);

/// Declarative dataset reference as used in config files:
/// {"path": ..., "format": "csv"|"idx", "labels": ..., "divisor": ..., "classes": ...,
///  "offset": ..., "limit": ...}. Relative paths resolve against `base`.
struct DatasetSpec {
  std::string format = "csv";
  std::filesystem::path path;
  std::filesystem::path labels;
  double divisor = 1.0;
  std::size_t class_count = 0;
  std::size_t offset = 0;
  std::size_t limit = 0;

  static DatasetSpec from_json(const nlohmann::json& j, const std::filesystem::path& base);
  nlohmann::json to_json() const;
};

nn::Dataset load_dataset(const DatasetSpec& spec);

/// 64-bit FNV-1a of text, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace faultline::io
