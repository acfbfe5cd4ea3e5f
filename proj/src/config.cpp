#include "greyfeed/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "greyfeed/error.hpp"

namespace greyfeed {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

KvConfig KvConfig::from_text(const std::string& text, const std::string& name) {
  KvConfig cfg;
  cfg.name_ = name;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s[0] == '#') continue;
    if (s.front() == '[' && s.back() == ']') continue;  // section header, purely visual
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ParseError(name + ":" + std::to_string(line) + ": expected key=value, got '" + s +
                       "'");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty())
      throw ParseError(name + ":" + std::to_string(line) + ": empty key");
    if (cfg.find(key) != nullptr)
      throw ParseError(name + ":" + std::to_string(line) + ": duplicate key '" + key + "'");
    cfg.entries_.push_back({key, trim(s.substr(eq + 1)), line});
  }
  return cfg;
}

KvConfig KvConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return from_text(text.str(), path);
}

void KvConfig::set(const std::string& key, const std::string& value) {
  for (ConfigEntry& e : entries_) {
    if (e.key == key) {
      e.value = value;
      e.line = 0;
      return;
    }
  }
  entries_.push_back({key, value, 0});
}

const std::string* KvConfig::find(const std::string& key) const {
  for (const ConfigEntry& e : entries_)
    if (e.key == key) return &e.value;
  return nullptr;
}

std::string KvConfig::get(const std::string& key, const std::string& fallback) const {
  const std::string* v = find(key);
  return v != nullptr ? *v : fallback;
}

long KvConfig::get_long(const std::string& key, long fallback) const {
  const std::string* v = find(key);
  if (v == nullptr) return fallback;
  errno = 0;
  char* end = nullptr;
  const long out = std::strtol(v->c_str(), &end, 10);
  if (errno != 0 || end == v->c_str() || *end != '\0')
    throw ParseError("config: key '" + key + "' wants an integer, got '" + *v + "'");
  return out;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  const std::string* v = find(key);
  if (v == nullptr) return fallback;
  char* end = nullptr;
  const double out = std::strtod(v->c_str(), &end);
  if (end == v->c_str() || *end != '\0')
    throw ParseError("config: key '" + key + "' wants a number, got '" + *v + "'");
  return out;
}

void KvConfig::require_known(const std::vector<std::string>& allowed) const {
  for (const ConfigEntry& e : entries_) {
    if (std::find(allowed.begin(), allowed.end(), e.key) != allowed.end()) continue;
    std::string msg = name_;
    if (e.line > 0) msg += ":" + std::to_string(e.line);
    throw ParseError(msg + ": unknown key '" + e.key + "'");
  }
}

std::string KvConfig::to_text() const {
  std::string out;
  for (const ConfigEntry& e : entries_) out += e.key + "=" + e.value + "\n";
  return out;
}

}  // namespace greyfeed
