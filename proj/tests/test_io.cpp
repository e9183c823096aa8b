// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <zlib.h>

#include <filesystem>
#include <fstream>
#include <limits>

#include "faultline/errors.hpp"
#include "faultline/io.hpp"
#include "support.hpp"

using namespace faultline;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("faultline_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string be32(std::uint32_t v) {
  return {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8), static_cast<char>(v)};
}

// Two 2x2 images with labels 3 and 7.
std::pair<std::string, std::string> idx_pair() {
  std::string images = be32(0x803) + be32(2) + be32(2) + be32(2);
  for (int p : {0, 64, 128, 255, 255, 0, 0, 32}) images.push_back(static_cast<char>(p));
  std::string labels = be32(0x801) + be32(2) + std::string{3, 7};
  return {images, labels};
}

void write_gzip(const fs::path& path, const std::string& bytes) {
  gzFile f = gzopen(path.c_str(), "wb");
  ASSERT_NE(f, nullptr);
  gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
  gzclose(f);
}

void expect_same_archive(const nn::WeightArchive& a, const nn::WeightArchive& b) {
  EXPECT_EQ(a.topology, b.topology);
  EXPECT_EQ(a.output_format, b.output_format);
  ASSERT_EQ(a.layers.size(), b.layers.size());
  for (std::size_t j = 0; j < a.layers.size(); ++j) {
    EXPECT_EQ(a.layers[j].formats, b.layers[j].formats);
    EXPECT_EQ(a.layers[j].weights, b.layers[j].weights);
    EXPECT_EQ(a.layers[j].biases, b.layers[j].biases);
  }
}

}  // namespace

TEST(Archive, RoundTripsTheDigitsNet) {
  TempDir dir;
  io::write_archive(*fixtures::desk_archive(), dir.path() / "a");
  EXPECT_TRUE(fs::exists(dir.path() / "a" / "W0.bin"));
  EXPECT_EQ(fs::file_size(dir.path() / "a" / "W0.bin"), 64u * 32u * 2u);
  expect_same_archive(io::read_archive(dir.path() / "a"), *fixtures::desk_archive());
}

TEST(Archive, NarrowSignedWordsAreSignExtended) {
  TempDir dir;
  const auto narrow = fixtures::random_archive({{5, 4, 3}, nn::Activation::satlin}, 2, 12);
  io::write_archive(narrow, dir.path());
  expect_same_archive(io::read_archive(dir.path()), narrow);
  // A negative 12-bit weight occupies all 16 bits on disk.
  const auto bytes = io::read_text(dir.path() / "W0.bin");
  bool negative = false;
  for (std::size_t i = 0; i + 1 < bytes.size(); i += 2) negative |= (static_cast<unsigned char>(bytes[i + 1]) & 0xf0) == 0xf0;
  EXPECT_TRUE(negative);
}

TEST(Archive, WritingIsByteStable) {
  TempDir dir;
  io::write_archive(*fixtures::desk_archive(), dir.path() / "a");
  io::write_archive(*fixtures::desk_archive(), dir.path() / "b");
  for (const auto* name : {"manifest.json", "W0.bin", "b0.bin", "W1.bin", "b1.bin"}) {
    EXPECT_EQ(io::read_text(dir.path() / "a" / name), io::read_text(dir.path() / "b" / name)) << name;
  }
}

TEST(Archive, DamagedArchivesAreRejected) {
  TempDir dir;
  const auto archive = fixtures::random_archive({{3, 2}, nn::Activation::logsig}, 1);
  io::write_archive(archive, dir.path());
  EXPECT_THROW(io::read_archive(dir.path() / "missing"), Error);

  io::write_text(dir.path() / "W0.bin", "abc");
  EXPECT_THROW(io::read_archive(dir.path()), FormatError);

  io::write_archive(archive, dir.path());
  auto manifest = io::read_json(dir.path() / "manifest.json");
  manifest["version"] = 99;
  io::write_text(dir.path() / "manifest.json", io::dump_json(manifest));
  EXPECT_THROW(io::read_archive(dir.path()), FormatError);

  io::write_text(dir.path() / "manifest.json", "{not json");
  EXPECT_THROW(io::read_archive(dir.path()), FormatError);
}

TEST(Csv, ParsesLabelsAndScalesFeatures) {
  TempDir dir;
  io::write_text(dir.path() / "d.csv", "1,0,8,16\n0,4,4,4\n\n2,16,0,1\n");
  const auto d = io::read_csv_dataset(dir.path() / "d.csv", 16.0);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d.class_count, 3u);
  EXPECT_EQ(d.items[0].label, 1u);
  EXPECT_EQ(d.items[0].input, (std::vector<double>{0.0, 0.5, 1.0}));
  EXPECT_THROW(io::read_csv_dataset(dir.path() / "d.csv", 16.0, 2), FormatError);
  EXPECT_THROW(io::read_csv_dataset(dir.path() / "d.csv", 0.0), ContractError);

  io::write_text(dir.path() / "bad.csv", "1,0,8\n0,4\n");
  EXPECT_THROW(io::read_csv_dataset(dir.path() / "bad.csv", 1.0), FormatError);
  io::write_text(dir.path() / "nan.csv", "1,x,8\n");
  EXPECT_THROW(io::read_csv_dataset(dir.path() / "nan.csv", 1.0), FormatError);
  EXPECT_THROW(io::read_csv_dataset(dir.path() / "none.csv", 1.0), Error);
}

TEST(Csv, BundledDigits) {
  const auto& d = fixtures::digits();
  EXPECT_EQ(d.size(), 1797u);
  EXPECT_EQ(d.class_count, 10u);
  for (const auto& item : d.items) {
    ASSERT_EQ(item.input.size(), 64u);
    for (double x : item.input) {
      ASSERT_GE(x, 0.0);
      ASSERT_LT(x, 1.0);
    }
  }
}

TEST(Idx, ReadsPlainAndGzipFiles) {
  TempDir dir;
  const auto [images, labels] = idx_pair();
  io::write_text(dir.path() / "img", images);
  io::write_text(dir.path() / "lab", labels);
  write_gzip(dir.path() / "img.gz", images);
  write_gzip(dir.path() / "lab.gz", labels);
  for (const auto* suffix : {"", ".gz"}) {
    const auto d = io::read_idx_dataset(dir.path() / (std::string("img") + suffix),
                                        dir.path() / (std::string("lab") + suffix), 10);
    ASSERT_EQ(d.size(), 2u);
    EXPECT_EQ(d.items[1].label, 7u);
    EXPECT_EQ(d.items[0].input, (std::vector<double>{0.0, 0.25, 0.5, 255.0 / 256.0}));
  }
  EXPECT_THROW(io::read_idx_dataset(dir.path() / "lab", dir.path() / "img"), FormatError);
  io::write_text(dir.path() / "short", images.substr(0, images.size() - 1));
  EXPECT_THROW(io::read_idx_dataset(dir.path() / "short", dir.path() / "lab"), FormatError);
}

TEST(DatasetSpec, OffsetAndLimitSelectASlice) {
  const auto spec = io::DatasetSpec::from_json(
      {{"path", "digits.csv"}, {"divisor", 17}, {"classes", 10}, {"offset", 1437}, {"limit", 100}},
      fixtures::data_dir());
  const auto d = io::load_dataset(spec);
  ASSERT_EQ(d.size(), 100u);
  EXPECT_EQ(d.items[0].input, fixtures::digits().items[1437].input);
  EXPECT_EQ(io::DatasetSpec::from_json(spec.to_json(), "/").to_json(), spec.to_json());
  EXPECT_THROW(io::DatasetSpec::from_json({{"path", "x"}, {"format", "npy"}}, "."), FormatError);
  EXPECT_THROW(io::DatasetSpec::from_json({{"path", "x"}, {"format", "idx"}}, "."), FormatError);
}

TEST(Text, JsonDumpIsSortedAndStable) {
  nlohmann::json j;
  j["b"] = 1;
  j["a"] = {{"d", 2}, {"c", 3}};
  EXPECT_EQ(io::dump_json(j), "{\n  \"a\": {\n    \"c\": 3,\n    \"d\": 2\n  },\n  \"b\": 1\n}\n");
}

TEST(Text, HashAndDecimalFormatting) {
  EXPECT_EQ(io::fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(io::fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(io::format_double(7.5), "7.5");
  EXPECT_EQ(io::format_double(20), "20");
  Rng rng(8);
  for (int n = 0; n < 2000; ++n) {
    const double v = rng.uniform(-1e6, 1e6) / 3.0;
    EXPECT_EQ(std::stod(io::format_double(v)), v);
  }
  const double third = 100.0 / 3.0;
  EXPECT_EQ(std::stod(io::format_double(third)), third);
}
