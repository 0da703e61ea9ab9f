#include "isomctl/io.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>
#include <iterator>
#include <stdexcept>

namespace isomctl {

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

std::filesystem::path cache_dir() {
  if (const char* env = std::getenv("ISOMCTL_CACHE_DIR"); env && *env) return env;
  return std::filesystem::current_path() / ".isomctl-cache";
}

BinaryWriter::BinaryWriter(const std::filesystem::path& path, const char (&magic)[8])
    : path_(path), tmp_(path) {
  tmp_ += ".tmp";
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(tmp_, std::ios::binary | std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot write " + tmp_.string());
  raw(magic, 8);
}

void BinaryWriter::raw(const void* p, std::size_t n) {
  out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
void BinaryWriter::u64(std::uint64_t v) { raw(&v, sizeof v); }
void BinaryWriter::i64(std::int64_t v) { raw(&v, sizeof v); }
void BinaryWriter::f64(double v) { raw(&v, sizeof v); }

void BinaryWriter::matrix(const Eigen::MatrixXd& m) {
  i64(m.rows());
  i64(m.cols());
  raw(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

void BinaryWriter::ints(const std::vector<std::int64_t>& v) {
  i64(static_cast<std::int64_t>(v.size()));
  raw(v.data(), sizeof(std::int64_t) * v.size());
}

void BinaryWriter::finish() {
  out_.close();
  if (!out_) throw std::runtime_error("write failed: " + tmp_.string());
  std::filesystem::rename(tmp_, path_);
}

std::optional<BinaryReader> BinaryReader::open(const std::filesystem::path& path, const char (&magic)[8]) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 8 || std::memcmp(data.data(), magic, 8) != 0) return std::nullopt;
  BinaryReader r(std::move(data));
  r.pos_ = 8;
  return r;
}

bool BinaryReader::raw(void* p, std::size_t n) {
  if (!ok_ || pos_ + n > data_.size()) {
    ok_ = false;
    std::memset(p, 0, n);
    return false;
  }
  std::memcpy(p, data_.data() + pos_, n);
  pos_ += n;
  return true;
}

std::uint64_t BinaryReader::u64() { std::uint64_t v; raw(&v, sizeof v); return v; }
std::int64_t BinaryReader::i64() { std::int64_t v; raw(&v, sizeof v); return v; }
double BinaryReader::f64() { double v; raw(&v, sizeof v); return v; }

Eigen::MatrixXd BinaryReader::matrix() {
  const auto rows = i64();
  const auto cols = i64();
  if (!ok_ || rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) * 8 > data_.size()) {
    ok_ = false;
    return {};
  }
  Eigen::MatrixXd m(rows, cols);
  raw(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  return m;
}

Eigen::VectorXd BinaryReader::vector() {
  Eigen::MatrixXd m = matrix();
  if (m.cols() != 1) {
    ok_ = false;
    return {};
  }
  return m.col(0);
}

std::vector<std::int64_t> BinaryReader::ints() {
  const auto n = i64();
  if (!ok_ || n < 0 || static_cast<std::size_t>(n) * 8 > data_.size()) {
    ok_ = false;
    return {};
  }
  std::vector<std::int64_t> v(static_cast<std::size_t>(n));
  raw(v.data(), sizeof(std::int64_t) * v.size());
  return v;
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : columns_(header.size()) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
  out_ << '\n';
}

void CsvWriter::sep() {
  if (col_++ > 0) out_ << ',';
}

CsvWriter& CsvWriter::operator<<(double v) {
  sep();
  out_ << format_double(v);
  return *this;
}

CsvWriter& CsvWriter::operator<<(long long v) {
  sep();
  out_ << v;
  return *this;
}

CsvWriter& CsvWriter::operator<<(const std::string& v) {
  sep();
  out_ << v;
  return *this;
}

void CsvWriter::endrow() {
  if (col_ != columns_) throw std::logic_error("csv row has wrong column count");
  out_ << '\n';
  col_ = 0;
}

}  // namespace isomctl
