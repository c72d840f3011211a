#pragma once

#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nowcast::csv {

constexpr uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr uint64_t kFnvPrime = 1099511628211ULL;

inline uint64_t fnv1a(std::string_view data, uint64_t h = kFnvOffset) {
  for (const char c : data) {
    h ^= uint64_t(uint8_t(c));
    h *= kFnvPrime;
  }
  return h;
}

std::string read_file(const std::string& path);
bool file_exists(const std::string& path);
uint64_t hash_file(const std::string& path);

/// Reals are serialized with 9 significant digits everywhere.
std::string format_real(double v);

/// Splits a buffer into comma-separated rows. Field views point into the
/// buffer; `\r` before the newline is stripped.
class RowScanner {
 public:
  explicit RowScanner(std::string_view buf) : buf_(buf) {}

  bool next(std::vector<std::string_view>& fields);
  std::size_t line() const { return line_; }

 private:
  std::string_view buf_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

/// Throws ValidationError unless `fields` starts with `expected` and any
/// extra columns are all listed in `optional_tail`.
void check_header(const std::vector<std::string_view>& fields,
                  std::span<const std::string_view> expected,
                  std::span<const std::string_view> optional_tail,
                  const std::string& path);

/// Buffered writer that streams to `<path>.tmp` and renames into place on
/// close, so readers never observe a partial artifact. Keeps a running
/// FNV-1a hash and a row count of the bytes written.
class AtomicWriter {
 public:
  explicit AtomicWriter(std::string path);
  ~AtomicWriter();

  AtomicWriter(const AtomicWriter&) = delete;
  AtomicWriter& operator=(const AtomicWriter&) = delete;

  void append(std::string_view s);
  void append_real(double v) { append(format_real(v)); }
  void append_int(long long v);

  uint64_t content_hash() const { return hash_; }
  std::size_t rows() const { return rows_; }

  /// Flushes and renames. Returns the content hash.
  uint64_t close();

 private:
  void flush();

  std::string path_;
  std::string tmp_path_;
  std::FILE* file_ = nullptr;
  std::string buffer_;
  uint64_t hash_ = kFnvOffset;
  std::size_t rows_ = 0;
  bool closed_ = false;
};

/// write-temp-then-rename for small whole-string artifacts.
uint64_t write_atomic(const std::string& path, std::string_view content);

}  // namespace nowcast::csv
