#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace ctxrank::io {

/// Writes through a temporary sibling file and renames it over `path`, so
/// readers never observe a partially written artifact.
void atomic_write(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer);

/// Reads a plain or gzip-compressed text file into memory.
std::string read_text(const std::filesystem::path& path);

/// Throws DataError naming the file when it does not exist.
void require_file(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);

std::vector<std::string_view> split(std::string_view line, char sep);

/// Parse helpers; `what` names the field in the error message.
std::int64_t parse_int(std::string_view s, std::string_view what);
double parse_double(std::string_view s, std::string_view what);

/// FNV-1a over file contents; recorded in run manifests.
std::uint64_t file_fingerprint(const std::filesystem::path& path);

/// Little-endian POD stream helpers for the binary caches.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}
  void u32(std::uint32_t v);
  void i64(std::int64_t v);
  void f64(double v);
  void bytes(std::string_view s);

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  BinaryReader(std::string_view data, std::string name) : data_(data), name_(std::move(name)) {}
  std::uint32_t u32();
  std::int64_t i64();
  double f64();
  std::string_view bytes(std::size_t n);
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const;
  std::string_view data_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace ctxrank::io
