#include "fixtures.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "droidsynth/csv.hpp"
#include "droidsynth/rng.hpp"

namespace droidsynth::testing {
namespace fs = std::filesystem;

namespace {

constexpr const char* kSyscalls[] = {"read",   "write", "openat", "close",  "ptrace", "kill",
                                     "futex",  "ioctl", "mmap2",  "sendto", "recvfrom",
                                     "getuid", "clone", "fstat64"};
constexpr const char* kPermissions[] = {
    "android.permission.INTERNET",          "android.permission.SEND_SMS",
    "android.permission.READ_SMS",          "android.permission.RECEIVE_BOOT_COMPLETED",
    "android.permission.READ_PHONE_STATE",  "android.permission.ACCESS_NETWORK_STATE",
    "android.permission.SYSTEM_ALERT_WINDOW", "android.permission.WAKE_LOCK"};
// Mostly zero everywhere; the sparse filter should drop these.
constexpr const char* kSparse[] = {"android.permission.BIND_DEVICE_ADMIN", "sys_kexec_load",
                                   "android.permission.INSTALL_PACKAGES", "sys_swapon"};

std::string hex64(Rng& rng) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string h(64, '0');
  for (char& c : h) c = kHex[rng.below(16)];
  return h;
}

std::string date(Rng& rng) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d/%02d/%04d", static_cast<int>(rng.between(1, 12)),
                static_cast<int>(rng.between(1, 28)), static_cast<int>(rng.between(2011, 2019)));
  return buf;
}

std::int64_t count_draw(Rng& rng, double mean) {
  return std::max<std::int64_t>(0, std::llround(mean + rng.normal() * mean * 0.25));
}

std::vector<std::string> make_row(Rng& rng, bool malware, const std::string& family,
                                  std::size_t family_index, double none_rate) {
  std::vector<std::string> row;
  row.push_back("com." + std::string(malware ? "evil" : "good") + ".app" + std::to_string(rng.below(100000)));
  row.push_back(hex64(rng));
  row.push_back(date(rng));
  row.push_back(date(rng));
  row.push_back(malware ? family : "");
  row.push_back(malware ? "1" : "0");
  row.push_back(malware ? csv::format_number(static_cast<double>(rng.between(10, 60)) / 64.0) : "0");
  row.push_back(malware ? "Scanner" + std::to_string(rng.below(60)) : "");
  row.push_back(std::to_string(rng.between(1, 20)));
  row.push_back(std::to_string(rng.between(0, 40)));
  // Count columns; occasionally the literal None.
  for (int i = 0; i < 9; ++i) {
    if (rng.unit() < none_rate) {
      row.push_back("None");
    } else {
      row.push_back(std::to_string(count_draw(rng, malware ? 6.0 + i : 12.0 + i)));
    }
  }
  const double shift = malware ? 1.0 + 0.3 * static_cast<double>(family_index) : 0.0;
  for (std::size_t s = 0; s < std::size(kSyscalls); ++s) {
    const double base = 20.0 + 5.0 * static_cast<double>(s);
    row.push_back(std::to_string(count_draw(rng, base * (1.0 + 0.6 * shift))));
  }
  for (std::size_t p = 0; p < std::size(kPermissions); ++p) {
    const double rate = malware ? 0.75 - 0.05 * static_cast<double>(p) : 0.35 + 0.02 * static_cast<double>(p);
    row.push_back(rng.unit() < rate ? "1" : "0");
  }
  for (std::size_t p = 0; p < std::size(kSparse); ++p) row.push_back(rng.unit() < 0.05 ? "1" : "0");
  return row;
}

}  // namespace

std::vector<std::string> fixture_header() {
  std::vector<std::string> h = {"Package",         "sha256",          "EarliestModDate",
                                "HighestModDate",  "MalFamily",       "Malware",
                                "Detection_Ratio", "Scanners",        "TimesSubmitted",
                                "NrContactedIps"};
  for (auto c : kImputedCountColumns) h.emplace_back(c);
  for (auto s : kSyscalls) h.emplace_back(s);
  for (auto p : kPermissions) h.emplace_back(p);
  for (auto p : kSparse) h.emplace_back(p);
  return h;
}

std::pair<fs::path, fs::path> write_dataset_fixture(const fs::path& dir, const DatasetFixture& fixture) {
  fs::create_directories(dir);
  Rng rng(fixture.seed);
  const auto malware_path = dir / "malware.csv";
  const auto benign_path = dir / "benign.csv";
  {
    std::ofstream out(malware_path, std::ios::binary);
    csv::write_record(out, fixture_header());
    for (std::size_t f = 0; f < fixture.families.size(); ++f) {
      for (std::size_t i = 0; i < fixture.families[f].rows; ++i) {
        csv::write_record(out, make_row(rng, true, fixture.families[f].name, f, fixture.none_rate));
      }
    }
  }
  {
    std::ofstream out(benign_path, std::ios::binary);
    csv::write_record(out, fixture_header());
    for (std::size_t i = 0; i < fixture.benign_rows; ++i) {
      csv::write_record(out, make_row(rng, false, "", 0, fixture.none_rate));
    }
  }
  return {malware_path, benign_path};
}

FeatureMatrix gaussian_blobs(std::size_t rows, std::size_t features, double separation,
                             std::uint64_t seed) {
  Rng rng(seed);
  const double offset = separation / 2.0;
  std::vector<std::string> names;
  for (std::size_t f = 0; f < features; ++f) names.push_back("f" + std::to_string(f));
  std::vector<double> values;
  std::vector<int> labels;
  for (std::size_t r = 0; r < rows; ++r) {
    const int label = static_cast<int>(r % 2);
    for (std::size_t f = 0; f < features; ++f) {
      values.push_back(rng.normal() + (label ? offset : -offset));
    }
    labels.push_back(label);
  }
  return FeatureMatrix(std::move(names), std::move(values), std::move(labels));
}

FeatureMatrix xor_fixture(std::size_t copies, std::size_t extra_positive) {
  std::vector<double> values;
  std::vector<int> labels;
  for (std::size_t c = 0; c < copies; ++c) {
    for (int a : {0, 1}) {
      for (int b : {0, 1}) {
        values.push_back(a);
        values.push_back(b);
        labels.push_back(a ^ b);
      }
    }
  }
  for (std::size_t e = 0; e < extra_positive; ++e) {
    values.push_back(1);
    values.push_back(0);
    labels.push_back(1);
  }
  return FeatureMatrix({"x0", "x1"}, std::move(values), std::move(labels));
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("droidsynth-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace droidsynth::testing
