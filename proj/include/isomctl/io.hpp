#pragma once

// Small file helpers: hashing, a versioned binary blob format for caches,
// and CSV output.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace isomctl {

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

/// Cache directory from ISOMCTL_CACHE_DIR, else ./.isomctl-cache.
std::filesystem::path cache_dir();

class BinaryWriter {
 public:
  BinaryWriter(const std::filesystem::path& path, const char (&magic)[8]);
  void u64(std::uint64_t v);
  void i64(std::int64_t v);
  void f64(double v);
  void matrix(const Eigen::MatrixXd& m);
  void ints(const std::vector<std::int64_t>& v);
  /// Writes to a temporary file and renames it into place.
  void finish();

 private:
  void raw(const void* p, std::size_t n);
  std::filesystem::path path_, tmp_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  /// nullopt when the file is missing or the magic does not match.
  static std::optional<BinaryReader> open(const std::filesystem::path& path, const char (&magic)[8]);
  std::uint64_t u64();
  std::int64_t i64();
  double f64();
  Eigen::MatrixXd matrix();
  Eigen::VectorXd vector();
  std::vector<std::int64_t> ints();
  bool ok() const { return ok_; }

 private:
  explicit BinaryReader(std::vector<char> data) : data_(std::move(data)) {}
  bool raw(void* p, std::size_t n);
  std::vector<char> data_;
  std::size_t pos_ = 0;
  bool ok_ = true;
};

/// Comma-separated writer with a header row; doubles use max precision.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  CsvWriter& operator<<(double v);
  CsvWriter& operator<<(long long v);
  CsvWriter& operator<<(int v) { return *this << static_cast<long long>(v); }
  CsvWriter& operator<<(const std::string& v);
  void endrow();

 private:
  void sep();
  std::ofstream out_;
  std::size_t columns_;
  std::size_t col_ = 0;
};

std::string format_double(double v);

}  // namespace isomctl
