#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "droidsynth/dataset_prep.hpp"

namespace droidsynth::testing {

struct FixtureFamily {
  std::string name;
  std::size_t rows;
};

struct DatasetFixture {
  std::vector<FixtureFamily> families = {{"BankBot", 60}, {"Locker/SLocker", 40}, {"Airpush/StopSMS", 50}};
  std::size_t benign_rows = 400;
  std::uint64_t seed = 7;
  // Share of count cells written as the literal "None".
  double none_rate = 0.05;
};

// Column names of the fixture tables: the ten metadata columns, the nine
// count columns, syscall counters, permission flags and a few sparse flags.
std::vector<std::string> fixture_header();

// Writes malware.csv and benign.csv under dir; returns their paths.
std::pair<std::filesystem::path, std::filesystem::path> write_dataset_fixture(
    const std::filesystem::path& dir, const DatasetFixture& fixture = {});

// Two unit-variance Gaussian blobs, one per class, whose means differ by
// `separation` on every feature. Labels alternate 0, 1, 0, ...
FeatureMatrix gaussian_blobs(std::size_t rows, std::size_t features, double separation,
                             std::uint64_t seed);

// XOR in the unit square corners with per-corner copies; class counts are
// balanced unless `extra_positive` adds copies of the (1,0) corner.
FeatureMatrix xor_fixture(std::size_t copies, std::size_t extra_positive = 0);

// Unique temporary directory removed by the destructor.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);

}  // namespace droidsynth::testing
