#pragma once

#include "imsound/core.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace imsound {

/// Binary PGM (P5, maxval 255) for 1-channel canvases and PPM (P6) for
/// 3-channel canvases. Pixel byte = lround(255 * clamp(v, 0, 1)).
std::vector<unsigned char> encode_pnm(const Canvas& c);
Canvas decode_pnm(const std::vector<unsigned char>& bytes);
void write_pnm(const std::filesystem::path& path, const Canvas& c);
Canvas read_pnm(const std::filesystem::path& path);

std::vector<unsigned char> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

/// 64-bit FNV-1a, printed as 16 lowercase hex digits.
std::uint64_t fnv1a64(const std::vector<unsigned char>& bytes);
std::string hex64(std::uint64_t v);

/// Flat key=value text. '#' starts a comment; blank lines are ignored;
/// whitespace around keys and values is trimmed.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text);
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);
  void set(const std::string& key, int value) { set(key, static_cast<long long>(value)); }
  void set(const std::string& key, std::uint64_t value);

  /// Keys the caller did not expect; used to reject typos in config files.
  std::vector<std::string> unknown_keys(const std::vector<std::string>& known) const;

  /// Keys sorted, one "key=value" per line.
  std::string serialize() const;
  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Shortest decimal form that round-trips the double.
std::string format_double(double v);

/// Table rendered both as aligned plain text and as CSV with a header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_text() const;
  std::string to_csv() const;
};

}  // namespace imsound
