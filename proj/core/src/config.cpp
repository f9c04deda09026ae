#include "jotlas/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "jotlas/errors.hpp"

namespace jotlas {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const std::vector<std::string> kKnownKeys = {
    "mask.pattern", "mask.accel", "mask.lines", "mask.acs", "mask.seed",
    "phantom.kind", "phantom.dims", "phantom.seed", "phantom.motion_amplitude",
    "phantom.n_ellipses",
    "csm.coils", "csm.seed",
    "solver.id", "solver.iterations", "solver.mu", "solver.omega1", "solver.t",
    "solver.acceleration",
    "solver.lr.threshold_mode", "solver.lr.threshold", "solver.lr.transform",
    "solver.sp.mode", "solver.sp.threshold", "solver.sp.alpha", "solver.sp.transform",
    "solver.sp.channels", "solver.sp.nc",
    "admm.rho", "admm.eta", "admm.inner_steps", "admm.t_threshold_includes_mu",
    "tuner.budget", "tuner.seed", "tuner.gain_a", "tuner.gain_c", "tuner.stability_fraction",
    "io.input", "io.output", "io.report", "io.mask", "io.csm", "io.schedule", "io.reference",
    "io.train_dir", "io.pgm_frame",
    "noise.snr_db", "noise.seed",
    "compare.solvers",
};

}  // namespace

const std::vector<std::string>& known_config_keys() { return kKnownKeys; }

bool is_known_config_key(const std::string& key) {
  return std::find(kKnownKeys.begin(), kKnownKeys.end(), key) != kKnownKeys.end();
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + " is not 'key = value': '" +
                        stripped + "'");
    }
    config.set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  return config;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key.empty()) throw ConfigError("empty config key");
  entries_[key] = value;
}

void RunConfig::set_assignment(const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

bool RunConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string RunConfig::get_string(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("missing required config key '" + key + "'");
  resolved_[key] = it->second;
  return it->second;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  const std::string value = it == entries_.end() ? fallback : it->second;
  resolved_[key] = value;
  return value;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string s = get_string(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + s + "' as a number");
  }
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  if (!has(key)) {
    resolved_[key] = fmt_double(fallback);
    return fallback;
  }
  return get_double(key);
}

int RunConfig::get_int(const std::string& key) const {
  const std::string s = get_string(key);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + s + "' as an integer");
  }
  return v;
}

int RunConfig::get_int(const std::string& key, int fallback) const {
  if (!has(key)) {
    resolved_[key] = std::to_string(fallback);
    return fallback;
  }
  return get_int(key);
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) {
    resolved_[key] = fallback ? "true" : "false";
    return fallback;
  }
  const std::string s = get_string(key);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("config key '" + key + "': cannot parse '" + s + "' as a boolean");
}

std::uint64_t RunConfig::get_seed(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) {
    resolved_[key] = std::to_string(fallback);
    return fallback;
  }
  const std::string s = get_string(key);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + s + "' as a seed");
  }
  return v;
}

void RunConfig::validate_keys() const {
  for (const auto& [key, value] : entries_) {
    if (!is_known_config_key(key)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

std::map<std::string, std::string> RunConfig::effective() const {
  std::map<std::string, std::string> merged = resolved_;
  for (const auto& [key, value] : entries_) merged[key] = value;
  return merged;
}

std::string RunConfig::effective_text() const {
  std::string out;
  for (const auto& [key, value] : effective()) {
    out += key + " = " + value + "\n";
  }
  return out;
}

Dims3 parse_dims(const std::string& text, const std::string& key) {
  Dims3 dims;
  int parts[3] = {0, 0, 0};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t next = i < 2 ? text.find('x', pos) : text.size();
    if (next == std::string::npos) {
      throw ConfigError("config key '" + key + "': expected HxWxT, got '" + text + "'");
    }
    const std::string part = text.substr(pos, next - pos);
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), parts[i]);
    if (ec != std::errc() || ptr != part.data() + part.size() || parts[i] <= 0) {
      throw ConfigError("config key '" + key + "': expected HxWxT, got '" + text + "'");
    }
    pos = next + 1;
  }
  dims.height = parts[0];
  dims.width = parts[1];
  dims.frames = parts[2];
  return dims;
}

namespace {

std::string join_doubles(const double* data, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) out += ',';
    out += fmt_double(data[i]);
  }
  return out;
}

std::vector<double> split_doubles(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t next = text.find(',', pos);
    if (next == std::string::npos) next = text.size();
    const std::string part = trim(text.substr(pos, next - pos));
    if (!part.empty()) {
      try {
        out.push_back(std::stod(part));
      } catch (const std::exception&) {
        throw ConfigError("schedule key '" + key + "': cannot parse '" + part + "'");
      }
    }
    pos = next + 1;
  }
  return out;
}

std::string sp_mode_string(const IterationParams& p) {
  if (std::holds_alternative<double>(p.sp_threshold)) return "st";
  return std::get<AttentionParams>(p.sp_threshold).mode == AttentionParams::Mode::fc_attention
             ? "ast-fc"
             : "ast-energy";
}

}  // namespace

void save_schedule_file(const std::string& path, const SolverSchedule& schedule) {
  schedule.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "schedule.iterations = " << schedule.iterations << "\n";
  out << "schedule.acceleration = " << to_string(schedule.acceleration) << "\n";
  out << "schedule.form = " << (schedule.shared() ? "shared" : "list") << "\n";
  const int blocks = schedule.shared() ? 1 : schedule.iterations;
  for (int n = 0; n < blocks; ++n) {
    const IterationParams& p = schedule.params_for(n);
    const std::string prefix = "iter." + std::to_string(n) + ".";
    out << prefix << "mu = " << fmt_double(p.mu) << "\n";
    out << prefix << "lr.mode = " << to_string(p.lr_threshold.mode) << "\n";
    out << prefix << "lr.threshold = " << fmt_double(p.lr_threshold.value) << "\n";
    out << prefix << "lr.transform = " << to_string(p.lr_transform.kind) << "\n";
    out << prefix << "sp.mode = " << sp_mode_string(p) << "\n";
    if (std::holds_alternative<double>(p.sp_threshold)) {
      out << prefix << "sp.threshold = " << fmt_double(std::get<double>(p.sp_threshold)) << "\n";
    } else {
      const AttentionParams& att = std::get<AttentionParams>(p.sp_threshold);
      if (att.mode == AttentionParams::Mode::energy_proportional) {
        out << prefix << "sp.alpha = " << fmt_double(att.alpha) << "\n";
      } else {
        out << prefix << "sp.nc = " << att.channels << "\n";
        out << prefix << "sp.fc1.weights = "
            << join_doubles(att.fc1_weights.data(), att.fc1_weights.size()) << "\n";
        out << prefix << "sp.fc1.bias = " << join_doubles(att.fc1_bias.data(), att.fc1_bias.size())
            << "\n";
        out << prefix << "sp.fc2.weights = "
            << join_doubles(att.fc2_weights.data(), att.fc2_weights.size()) << "\n";
        out << prefix << "sp.fc2.bias = " << join_doubles(att.fc2_bias.data(), att.fc2_bias.size())
            << "\n";
      }
    }
    out << prefix << "sp.transform = " << to_string(p.sp_transform.kind) << "\n";
    out << prefix << "sp.channels = " << to_string(p.sp_channels) << "\n";
    out << prefix << "omega1 = " << fmt_double(p.omega1) << "\n";
    out << prefix << "t = " << fmt_double(p.t) << "\n";
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

SolverSchedule load_schedule_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open schedule file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig kv = RunConfig::parse(buf.str());

  SolverSchedule schedule;
  schedule.iterations = kv.get_int("schedule.iterations");
  schedule.acceleration = acceleration_from_string(kv.get_string("schedule.acceleration"));
  const std::string form = kv.get_string("schedule.form", "list");
  const int blocks = form == "shared" ? 1 : schedule.iterations;

  std::vector<IterationParams> list;
  for (int n = 0; n < blocks; ++n) {
    const std::string prefix = "iter." + std::to_string(n) + ".";
    IterationParams p;
    p.mu = kv.get_double(prefix + "mu");
    p.lr_threshold.mode = threshold_mode_from_string(kv.get_string(prefix + "lr.mode"));
    p.lr_threshold.value = kv.get_double(prefix + "lr.threshold");
    p.lr_transform.kind = transform_kind_from_string(kv.get_string(prefix + "lr.transform"));
    const std::string sp_mode = kv.get_string(prefix + "sp.mode");
    if (sp_mode == "st") {
      p.sp_threshold = kv.get_double(prefix + "sp.threshold");
    } else if (sp_mode == "ast-energy") {
      p.sp_threshold = AttentionParams::energy(kv.get_double(prefix + "sp.alpha"));
    } else if (sp_mode == "ast-fc") {
      const int nc = kv.get_int(prefix + "sp.nc");
      AttentionParams att = AttentionParams::zero_fc(nc);
      const auto fill_matrix = [&](Eigen::MatrixXd& m, const std::string& key) {
        const std::vector<double> v = split_doubles(kv.get_string(key), key);
        if (static_cast<Eigen::Index>(v.size()) != m.size()) {
          throw ConfigError("schedule key '" + key + "': expected " + std::to_string(m.size()) +
                            " values, got " + std::to_string(v.size()));
        }
        std::copy(v.begin(), v.end(), m.data());
      };
      const auto fill_vector = [&](Eigen::VectorXd& m, const std::string& key) {
        const std::vector<double> v = split_doubles(kv.get_string(key), key);
        if (static_cast<Eigen::Index>(v.size()) != m.size()) {
          throw ConfigError("schedule key '" + key + "': expected " + std::to_string(m.size()) +
                            " values, got " + std::to_string(v.size()));
        }
        std::copy(v.begin(), v.end(), m.data());
      };
      fill_matrix(att.fc1_weights, prefix + "sp.fc1.weights");
      fill_vector(att.fc1_bias, prefix + "sp.fc1.bias");
      fill_matrix(att.fc2_weights, prefix + "sp.fc2.weights");
      fill_vector(att.fc2_bias, prefix + "sp.fc2.bias");
      p.sp_threshold = std::move(att);
    } else {
      throw ConfigError("schedule key '" + prefix + "sp.mode': unknown mode '" + sp_mode +
                        "' (allowed: st, ast-fc, ast-energy)");
    }
    p.sp_transform.kind = transform_kind_from_string(kv.get_string(prefix + "sp.transform"));
    p.sp_channels = sparse_channels_from_string(kv.get_string(prefix + "sp.channels", "frames"));
    p.omega1 = kv.get_double(prefix + "omega1");
    p.t = kv.get_double(prefix + "t");
    list.push_back(std::move(p));
  }
  if (form == "shared") {
    schedule.per_iteration = list.front();
  } else {
    schedule.per_iteration = std::move(list);
  }
  schedule.validate();
  return schedule;
}

}  // namespace jotlas
