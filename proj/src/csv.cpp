#include "nowcast/csv.hpp"

#include <sys/stat.h>

#include <cerrno>
#include <cstdio>
#include <cstring>

#include "nowcast/error.hpp"

namespace nowcast::csv {

std::string read_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("cannot open file: " + path);
  std::string out;
  std::fseek(f, 0, SEEK_END);
  const long size = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  if (size > 0) {
    out.resize(std::size_t(size));
    const std::size_t got = std::fread(out.data(), 1, out.size(), f);
    out.resize(got);
  }
  std::fclose(f);
  return out;
}

bool file_exists(const std::string& path) {
  struct stat st {};
  return ::stat(path.c_str(), &st) == 0 && S_ISREG(st.st_mode);
}

uint64_t hash_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("cannot open file: " + path);
  uint64_t h = kFnvOffset;
  char buf[1 << 16];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, f)) > 0)
    h = fnv1a(std::string_view(buf, got), h);
  std::fclose(f);
  return h;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

bool RowScanner::next(std::vector<std::string_view>& fields) {
  fields.clear();
  if (pos_ >= buf_.size()) return false;
  std::size_t line_end = buf_.find('\n', pos_);
  if (line_end == std::string_view::npos) line_end = buf_.size();
  std::string_view row = buf_.substr(pos_, line_end - pos_);
  if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
  pos_ = line_end + 1;
  ++line_;

  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = row.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(row.substr(start));
      break;
    }
    fields.push_back(row.substr(start, comma - start));
    start = comma + 1;
  }
  return true;
}

void check_header(const std::vector<std::string_view>& fields,
                  std::span<const std::string_view> expected,
                  std::span<const std::string_view> optional_tail,
                  const std::string& path) {
  auto fail = [&] {
    std::string want;
    for (const auto& e : expected) {
      if (!want.empty()) want += ',';
      want += e;
    }
    throw ValidationError("bad header in " + path + " (expected '" + want + "')");
  };
  if (fields.size() < expected.size()) fail();
  for (std::size_t i = 0; i < expected.size(); ++i)
    if (fields[i] != expected[i]) fail();
  for (std::size_t i = expected.size(); i < fields.size(); ++i) {
    bool ok = false;
    for (const auto& opt : optional_tail) ok = ok || fields[i] == opt;
    if (!ok) fail();
  }
}

AtomicWriter::AtomicWriter(std::string path)
    : path_(std::move(path)), tmp_path_(path_ + ".tmp") {
  file_ = std::fopen(tmp_path_.c_str(), "wb");
  if (!file_) throw IoError("cannot open file for writing: " + tmp_path_);
  buffer_.reserve(1 << 20);
}

AtomicWriter::~AtomicWriter() {
  if (!closed_ && file_) {
    std::fclose(file_);
    std::remove(tmp_path_.c_str());
  }
}

void AtomicWriter::append(std::string_view s) {
  hash_ = fnv1a(s, hash_);
  for (const char c : s)
    if (c == '\n') ++rows_;
  buffer_.append(s);
  if (buffer_.size() >= (1 << 20)) flush();
}

void AtomicWriter::append_int(long long v) {
  char buf[24];
  const int n = std::snprintf(buf, sizeof buf, "%lld", v);
  append(std::string_view(buf, std::size_t(n)));
}

void AtomicWriter::flush() {
  if (!buffer_.empty()) {
    if (std::fwrite(buffer_.data(), 1, buffer_.size(), file_) != buffer_.size())
      throw IoError("short write to " + tmp_path_);
    buffer_.clear();
  }
}

uint64_t AtomicWriter::close() {
  flush();
  if (std::fclose(file_) != 0) throw IoError("close failed for " + tmp_path_);
  file_ = nullptr;
  if (std::rename(tmp_path_.c_str(), path_.c_str()) != 0)
    throw IoError("rename failed: " + tmp_path_ + " -> " + path_ + " (" + std::strerror(errno) + ")");
  closed_ = true;
  return hash_;
}

uint64_t write_atomic(const std::string& path, std::string_view content) {
  AtomicWriter w(path);
  w.append(content);
  return w.close();
}

}  // namespace nowcast::csv
