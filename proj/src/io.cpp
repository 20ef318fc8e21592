#include "imsound/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace imsound {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
}

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(const std::vector<unsigned char>& b, std::size_t& at) {
  while (at < b.size()) {
    if (b[at] == '#') {
      while (at < b.size() && b[at] != '\n') ++at;
    } else if (std::isspace(b[at])) {
      ++at;
    } else {
      break;
    }
  }
  std::string tok;
  while (at < b.size() && !std::isspace(b[at]) && b[at] != '#') tok.push_back(char(b[at++]));
  if (tok.empty()) throw FormatError("truncated PNM header");
  return tok;
}

int parse_positive(const std::string& tok) {
  int v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size() || v <= 0) {
    throw FormatError("bad PNM header field '" + tok + "'");
  }
  return v;
}

}  // namespace

std::vector<unsigned char> encode_pnm(const Canvas& c) {
  if (c.channels() != 1 && c.channels() != 3) {
    throw ShapeError("PNM output needs 1 or 3 channels, got " + to_string(c.shape()));
  }
  const std::string header = std::string(c.channels() == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(c.width()) + " " + std::to_string(c.height()) +
                             "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(out.size() + std::size_t(c.size()));
  for (int y = 0; y < c.height(); ++y) {
    for (int x = 0; x < c.width(); ++x) {
      for (int ch = 0; ch < c.channels(); ++ch) out.push_back(to_byte(c(ch, y, x)));
    }
  }
  return out;
}

Canvas decode_pnm(const std::vector<unsigned char>& b) {
  std::size_t at = 0;
  const std::string magic = next_token(b, at);
  int channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw FormatError("unsupported PNM magic '" + magic + "'");
  }
  const int width = parse_positive(next_token(b, at));
  const int height = parse_positive(next_token(b, at));
  const int maxval = parse_positive(next_token(b, at));
  if (maxval != 255) throw FormatError("only maxval 255 is supported");
  if (at >= b.size() || !std::isspace(b[at])) throw FormatError("malformed PNM header");
  ++at;
  const std::size_t need = std::size_t(width) * height * channels;
  if (b.size() - at < need) throw FormatError("truncated PNM pixel data");
  Canvas c(Shape{channels, height, width});
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int ch = 0; ch < channels; ++ch) c(ch, y, x) = double(b[at++]) / 255.0;
    }
  }
  return c;
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << text;
}

void write_pnm(const std::filesystem::path& path, const Canvas& c) { write_bytes(path, encode_pnm(c)); }
Canvas read_pnm(const std::filesystem::path& path) { return decode_pnm(read_bytes(path)); }

std::uint64_t fnv1a64(const std::vector<unsigned char>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

KeyValues KeyValues::parse(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw FormatError("line " + std::to_string(lineno) + ": empty key");
    kv.values_[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  return parse(std::string(bytes.begin(), bytes.end()));
}

const std::string& KeyValues::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ParameterError("missing key '" + key + "'");
  return it->second;
}

std::string KeyValues::get_or(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(it->second, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != it->second.size()) {
    throw ParameterError("key '" + key + "' is not a number: '" + it->second + "'");
  }
  return v;
}

long long KeyValues::get_int(const std::string& key, long long fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  long long v = 0;
  const auto& s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ParameterError("key '" + key + "' is not an integer: '" + s + "'");
  }
  return v;
}

std::uint64_t KeyValues::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::uint64_t v = 0;
  const auto& s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ParameterError("key '" + key + "' is not an unsigned integer: '" + s + "'");
  }
  return v;
}

void KeyValues::set(const std::string& key, const std::string& value) { values_[key] = value; }
void KeyValues::set(const std::string& key, double value) { values_[key] = format_double(value); }
void KeyValues::set(const std::string& key, long long value) { values_[key] = std::to_string(value); }
void KeyValues::set(const std::string& key, std::uint64_t value) { values_[key] = std::to_string(value); }

std::vector<std::string> KeyValues::unknown_keys(const std::vector<std::string>& known) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    if (std::find(known.begin(), known.end(), k) == known.end()) out.push_back(k);
  }
  return out;
}

std::string KeyValues::serialize() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, p) : std::to_string(v);
}

std::string Table::to_text() const {
  std::vector<std::size_t> width(header.size(), 0);
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) s += "  ";
      s += cells[i];
      if (i + 1 < cells.size()) s.append(width[i] - std::min(width[i], cells[i].size()), ' ');
    }
    return s + "\n";
  };
  std::string out = line(header);
  for (const auto& r : rows) out += line(r);
  return out;
}

std::string Table::to_csv() const {
  auto join = [](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) s += ",";
      s += cells[i];
    }
    return s + "\n";
  };
  std::string out = join(header);
  for (const auto& r : rows) out += join(r);
  return out;
}

}  // namespace imsound
