#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "jotlas/solvers.hpp"

namespace jotlas {

/// Flat dotted-key text configuration ("key = value" lines, '#' comments).
/// Keys are validated against the toolkit registry; unknown keys are
/// rejected by name. Typed getters record the value they resolved (explicit
/// or default), so the effective configuration of a run can be written back
/// out and replayed.
class RunConfig {
 public:
  RunConfig() = default;

  static RunConfig from_file(const std::string& path);
  static RunConfig parse(const std::string& text);

  void set(const std::string& key, const std::string& value);
  /// Parses a "key=value" assignment (the --set form).
  void set_assignment(const std::string& assignment);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;  // required
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const;

  /// Throws ConfigError naming the first unknown key.
  void validate_keys() const;

  const std::map<std::string, std::string>& entries() const { return entries_; }
  /// Every key this config resolved so far, explicit entries first.
  std::map<std::string, std::string> effective() const;
  std::string effective_text() const;

 private:
  std::map<std::string, std::string> entries_;
  mutable std::map<std::string, std::string> resolved_;
};

const std::vector<std::string>& known_config_keys();
bool is_known_config_key(const std::string& key);

struct Dims3 {
  int height = 0;
  int width = 0;
  int frames = 0;
};

/// Parses "HxWxT".
Dims3 parse_dims(const std::string& text, const std::string& key);

/// Schedule files reuse the flat key=value format with schedule.* header
/// keys and one iter.<n>.* block per iteration.
void save_schedule_file(const std::string& path, const SolverSchedule& schedule);
SolverSchedule load_schedule_file(const std::string& path);

}  // namespace jotlas
