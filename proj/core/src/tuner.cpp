#include "jotlas/tuner.hpp"

#include <cmath>
#include <fstream>
#include <future>
#include <random>
#include <stdexcept>

#include "jotlas/errors.hpp"

namespace jotlas {

namespace {

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double softplus_inv(double y) {
  if (y <= 0.0) return -745.0;  // softplus(-745) underflows to +0
  if (y > 36.0) return y;
  return std::log(std::expm1(y));
}

double logit(double p) {
  if (p <= 0.0) return -40.0;
  if (p >= 1.0) return 40.0;
  return std::log(p / (1.0 - p));
}

void encode_entry(const IterationParams& p, std::vector<double>& out) {
  out.push_back(softplus_inv(p.mu));
  if (p.lr_threshold.mode == ThresholdSpec::Mode::absolute) {
    out.push_back(softplus_inv(p.lr_threshold.value));
  } else {
    out.push_back(p.lr_threshold.value);
  }
  if (std::holds_alternative<double>(p.sp_threshold)) {
    out.push_back(softplus_inv(std::get<double>(p.sp_threshold)));
  } else {
    const AttentionParams& att = std::get<AttentionParams>(p.sp_threshold);
    if (att.mode == AttentionParams::Mode::energy_proportional) {
      out.push_back(softplus_inv(att.alpha));
    } else {
      for (Eigen::Index i = 0; i < att.fc1_weights.size(); ++i) {
        out.push_back(att.fc1_weights.data()[i]);
      }
      for (Eigen::Index i = 0; i < att.fc1_bias.size(); ++i) out.push_back(att.fc1_bias(i));
      for (Eigen::Index i = 0; i < att.fc2_weights.size(); ++i) {
        out.push_back(att.fc2_weights.data()[i]);
      }
      for (Eigen::Index i = 0; i < att.fc2_bias.size(); ++i) out.push_back(att.fc2_bias(i));
    }
  }
  out.push_back(logit(p.omega1));
  out.push_back(logit(p.t));
}

IterationParams decode_entry(const IterationParams& proto, const std::vector<double>& raw,
                             std::size_t& pos) {
  IterationParams p = proto;
  p.mu = softplus(raw[pos++]);
  if (p.lr_threshold.mode == ThresholdSpec::Mode::absolute) {
    p.lr_threshold.value = softplus(raw[pos++]);
  } else {
    p.lr_threshold.value = raw[pos++];
  }
  if (std::holds_alternative<double>(p.sp_threshold)) {
    p.sp_threshold = softplus(raw[pos++]);
  } else {
    AttentionParams att = std::get<AttentionParams>(proto.sp_threshold);
    if (att.mode == AttentionParams::Mode::energy_proportional) {
      att.alpha = softplus(raw[pos++]);
    } else {
      for (Eigen::Index i = 0; i < att.fc1_weights.size(); ++i) {
        att.fc1_weights.data()[i] = raw[pos++];
      }
      for (Eigen::Index i = 0; i < att.fc1_bias.size(); ++i) att.fc1_bias(i) = raw[pos++];
      for (Eigen::Index i = 0; i < att.fc2_weights.size(); ++i) {
        att.fc2_weights.data()[i] = raw[pos++];
      }
      for (Eigen::Index i = 0; i < att.fc2_bias.size(); ++i) att.fc2_bias(i) = raw[pos++];
    }
    p.sp_threshold = std::move(att);
  }
  // sigmoid keeps omega1 and t inside their boxes; omega2 stays the exact
  // complement because it is derived.
  p.omega1 = 1.0 / (1.0 + std::exp(-raw[pos++]));
  p.t = 1.0 / (1.0 + std::exp(-raw[pos++]));
  return p;
}

std::size_t entry_dimension(const IterationParams& p) {
  std::size_t n = 4;  // mu, lr threshold, omega1, t
  if (std::holds_alternative<double>(p.sp_threshold)) {
    n += 1;
  } else {
    const AttentionParams& att = std::get<AttentionParams>(p.sp_threshold);
    if (att.mode == AttentionParams::Mode::energy_proportional) {
      n += 1;
    } else {
      n += static_cast<std::size_t>(att.fc1_weights.size() + att.fc1_bias.size() +
                                    att.fc2_weights.size() + att.fc2_bias.size());
    }
  }
  return n;
}

ReconReport solve_for_loss(const SolverSchedule& schedule, const TrainingPair& pair) {
  SolveOptions options;
  options.trace_metrics = false;
  if (schedule.shared()) {
    return csa_reconstruct(pair.kspace, pair.op, schedule, options);
  }
  return unrolled_csa(pair.kspace, pair.op, schedule, options);
}

}  // namespace

double mse_loss(const SolverSchedule& schedule, const TrainingSet& train) {
  if (train.empty()) throw std::invalid_argument("mse_loss needs a non-empty training set");
  double acc = 0.0;
  for (const TrainingPair& pair : train) {
    const ReconReport report = solve_for_loss(schedule, pair);
    const DynamicImage err = sub(pair.truth, report.final_image);
    const double n = err.frobenius_norm();
    acc += n * n;
  }
  return acc;
}

namespace param_codec {

std::vector<double> encode(const SolverSchedule& schedule) {
  schedule.validate();
  std::vector<double> out;
  if (schedule.shared()) {
    encode_entry(std::get<IterationParams>(schedule.per_iteration), out);
  } else {
    for (const IterationParams& p : std::get<std::vector<IterationParams>>(schedule.per_iteration)) {
      encode_entry(p, out);
    }
  }
  return out;
}

SolverSchedule decode(const SolverSchedule& prototype, const std::vector<double>& raw) {
  if (raw.size() != dimension(prototype)) {
    throw std::invalid_argument("param vector length " + std::to_string(raw.size()) +
                                " does not match the prototype (" +
                                std::to_string(dimension(prototype)) + ")");
  }
  SolverSchedule out = prototype;
  std::size_t pos = 0;
  if (prototype.shared()) {
    out.per_iteration = decode_entry(std::get<IterationParams>(prototype.per_iteration), raw, pos);
  } else {
    std::vector<IterationParams> list;
    for (const IterationParams& p : std::get<std::vector<IterationParams>>(prototype.per_iteration)) {
      list.push_back(decode_entry(p, raw, pos));
    }
    out.per_iteration = std::move(list);
  }
  return out;
}

std::size_t dimension(const SolverSchedule& prototype) {
  if (prototype.shared()) {
    return entry_dimension(std::get<IterationParams>(prototype.per_iteration));
  }
  std::size_t n = 0;
  for (const IterationParams& p : std::get<std::vector<IterationParams>>(prototype.per_iteration)) {
    n += entry_dimension(p);
  }
  return n;
}

}  // namespace param_codec

TuneResult spsa_tune(const SolverSchedule& init, const TrainingSet& train, int budget,
                     std::uint64_t seed, const SpsaOptions& options) {
  if (budget < 1) throw std::invalid_argument("spsa_tune needs budget >= 1");
  if (train.empty()) throw std::invalid_argument("spsa_tune needs a non-empty training set");
  init.validate();

  std::vector<double> theta = param_codec::encode(init);
  const std::size_t dim = theta.size();

  TuneResult result;
  result.schedule = init;
  result.best_loss = mse_loss(init, train);
  result.trace.push_back({0, result.best_loss, result.best_loss});

  std::mt19937_64 rng(seed);
  const double stability = options.stability_fraction * budget;
  double c_scale = 1.0;
  int consecutive_skips = 0;

  for (int k = 1; k <= budget; ++k) {
    const double a_k = options.a / std::pow(k + stability, 0.602);
    const double c_k = c_scale * options.c / std::pow(static_cast<double>(k), 0.101);

    std::vector<double> delta(dim);
    for (double& d : delta) d = (rng() & 1u) ? 1.0 : -1.0;

    std::vector<double> plus(dim), minus(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      plus[i] = theta[i] + c_k * delta[i];
      minus[i] = theta[i] - c_k * delta[i];
    }

    // The two probes are independent; evaluate them concurrently.
    auto plus_future = std::async(std::launch::async, [&] {
      return mse_loss(param_codec::decode(init, plus), train);
    });
    const double loss_minus = mse_loss(param_codec::decode(init, minus), train);
    const double loss_plus = plus_future.get();

    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (!std::isfinite(loss_plus) || !std::isfinite(loss_minus)) {
      c_scale *= 0.5;
      result.trace.push_back({k, nan, result.best_loss});
      if (++consecutive_skips >= 10) break;
      continue;
    }

    const double slope = (loss_plus - loss_minus) / (2.0 * c_k);
    std::vector<double> theta_new(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      theta_new[i] = theta[i] - a_k * slope * delta[i];  // delta_i^{-1} == delta_i
    }

    SolverSchedule candidate = param_codec::decode(init, theta_new);
    const double cand_loss = mse_loss(candidate, train);
    if (!std::isfinite(cand_loss)) {
      c_scale *= 0.5;
      result.trace.push_back({k, nan, result.best_loss});
      if (++consecutive_skips >= 10) break;
      continue;
    }

    consecutive_skips = 0;
    theta = std::move(theta_new);
    if (cand_loss < result.best_loss) {
      result.best_loss = cand_loss;
      result.schedule = std::move(candidate);
    }
    result.trace.push_back({k, cand_loss, result.best_loss});
  }
  return result;
}

namespace {

void apply_shared_param(IterationParams& p, const std::string& name, double value) {
  if (name == "mu") {
    if (value <= 0.0) throw std::invalid_argument("grid value for mu must be > 0");
    p.mu = value;
  } else if (name == "lr.threshold") {
    p.lr_threshold.value = value;
  } else if (name == "sp.threshold") {
    if (!std::holds_alternative<double>(p.sp_threshold)) {
      throw std::invalid_argument("sp.threshold sweep needs a scalar sparse threshold");
    }
    p.sp_threshold = value;
  } else if (name == "sp.alpha") {
    if (!std::holds_alternative<AttentionParams>(p.sp_threshold)) {
      throw std::invalid_argument("sp.alpha sweep needs attention sparse params");
    }
    std::get<AttentionParams>(p.sp_threshold).alpha = value;
  } else if (name == "omega1") {
    if (value < 0.0 || value > 1.0) throw std::invalid_argument("omega1 must be in [0,1]");
    p.omega1 = value;
  } else if (name == "t") {
    if (value < 0.0 || value > 1.0) throw std::invalid_argument("t must be in [0,1]");
    p.t = value;
  } else {
    throw std::invalid_argument("unknown grid parameter '" + name +
                                "' (allowed: mu, lr.threshold, sp.threshold, sp.alpha, omega1, t)");
  }
}

}  // namespace

GridResult grid_tune(const SolverSchedule& init, const TrainingSet& train,
                     const std::string& param_name, const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("grid_tune needs a non-empty grid");
  GridResult result;
  double best_loss = std::numeric_limits<double>::infinity();
  for (double value : grid) {
    SolverSchedule sched = init;
    if (sched.shared()) {
      apply_shared_param(std::get<IterationParams>(sched.per_iteration), param_name, value);
    } else {
      for (IterationParams& p : std::get<std::vector<IterationParams>>(sched.per_iteration)) {
        apply_shared_param(p, param_name, value);
      }
    }
    const double loss = mse_loss(sched, train);
    result.table.emplace_back(value, loss);
    if (loss < best_loss) {
      best_loss = loss;
      result.schedule = std::move(sched);
    }
  }
  return result;
}

void write_loss_trace_csv(const std::vector<LossRecord>& trace, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "step,loss,best_loss\n";
  char buf[96];
  for (const LossRecord& rec : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", rec.step, rec.loss, rec.best_loss);
    out << buf;
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace jotlas
