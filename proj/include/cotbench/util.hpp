#pragma once

// Small filesystem and hashing helpers.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cotbench {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

std::string base64_encode(std::string_view bytes);

class LockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exclusive advisory lock on "<path>.lock", held for the object's lifetime.
/// A second writer (in this or another process) fails immediately with
/// LockError instead of waiting.
class FileLock {
 public:
  explicit FileLock(const std::filesystem::path& path);
  ~FileLock();
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
  std::filesystem::path lock_path_;
};

/// Appends one line with a single write(2) on an O_APPEND descriptor and
/// fsyncs it. The newline is added here.
void append_line(const std::filesystem::path& path, std::string_view line);

/// Writes to a sibling temp file and renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// Splits on '\n'; a trailing empty segment is dropped.
std::vector<std::string> split_lines(std::string_view text);

std::int64_t unix_millis_now();

}  // namespace cotbench
