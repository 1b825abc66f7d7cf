#pragma once

#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace rnnhard {

inline constexpr const char* kToolVersion = "0.1.0";

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// key=value run description. Keys are kept sorted so the serialized form is
// canonical; '#' starts a comment line.
class RunManifest {
 public:
  RunManifest() { values_["version"] = kToolVersion; }

  static RunManifest parse(const std::string& text) {
    RunManifest m;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw UsageError("manifest line " + std::to_string(lineno) + ": expected key=value");
      m.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return m;
  }

  static RunManifest load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("cannot read manifest: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str());
  }

  std::string to_text() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
  }

  void set(const std::string& key, const std::string& value) {
    if (key.empty() || key.find_first_of("=\n") != std::string::npos) throw UsageError("invalid manifest key: " + key);
    if (value.find('\n') != std::string::npos) throw UsageError("manifest values must be single-line");
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get(const std::string& key, const std::string& fallback = {}) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string require(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end() || it->second.empty()) throw UsageError("missing required parameter --" + key);
    return it->second;
  }

  long long get_int(const std::string& key, long long fallback) const {
    return has(key) ? to_int(key, get(key)) : fallback;
  }
  long long require_int(const std::string& key) const { return to_int(key, require(key)); }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key);
    errno = 0;
    char* end = nullptr;
    const unsigned long long x = std::strtoull(v.c_str(), &end, 0);
    if (v.empty() || *end != '\0' || errno != 0 || v[0] == '-') throw UsageError("--" + key + " expects an unsigned integer");
    return x;
  }

  double get_double(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key);
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0') throw UsageError("--" + key + " expects a number");
    return x;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  static long long to_int(const std::string& key, const std::string& v) {
    errno = 0;
    char* end = nullptr;
    const long long x = std::strtoll(v.c_str(), &end, 10);
    if (v.empty() || *end != '\0' || errno != 0) throw UsageError("--" + key + " expects an integer");
    return x;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace rnnhard
