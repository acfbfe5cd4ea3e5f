#pragma once

#include <string>
#include <vector>

namespace greyfeed {

struct ConfigEntry {
  std::string key, value;
  int line = 0;  // 0 for programmatic entries
};

// Flat key=value store. `[section]` lines group entries visually but carry no
// meaning; `#` lines are comments; duplicate keys are rejected at parse time
// so a file cannot silently shadow itself. Later set() calls override.
class KvConfig {
 public:
  static KvConfig from_text(const std::string& text, const std::string& name = "<config>");
  static KvConfig from_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  const std::string* find(const std::string& key) const;

  std::string get(const std::string& key, const std::string& fallback) const;
  long get_long(const std::string& key, long fallback) const;
  double get_double(const std::string& key, double fallback) const;

  // Rejects any key outside `allowed`, citing the source line when known.
  void require_known(const std::vector<std::string>& allowed) const;

  const std::vector<ConfigEntry>& entries() const { return entries_; }
  std::string to_text() const;

 private:
  std::vector<ConfigEntry> entries_;
  std::string name_ = "<config>";
};

}  // namespace greyfeed
