#include "jotlas/solvers.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "jotlas/errors.hpp"
#include "jotlas/metrics.hpp"

namespace jotlas {

Acceleration acceleration_from_string(const std::string& name) {
  if (name == "none") return Acceleration::none;
  if (name == "nesterov") return Acceleration::analytic_nesterov;
  if (name == "learned-t") return Acceleration::learned_t;
  throw std::invalid_argument("unknown acceleration '" + name +
                              "' (allowed: none, nesterov, learned-t)");
}

std::string to_string(Acceleration accel) {
  switch (accel) {
    case Acceleration::none: return "none";
    case Acceleration::analytic_nesterov: return "nesterov";
    case Acceleration::learned_t: return "learned-t";
  }
  return "?";
}

SparseChannels sparse_channels_from_string(const std::string& name) {
  if (name == "frames") return SparseChannels::frames;
  if (name == "single") return SparseChannels::single;
  throw std::invalid_argument("unknown sparse channelization '" + name +
                              "' (allowed: frames, single)");
}

std::string to_string(SparseChannels channels) {
  return channels == SparseChannels::frames ? "frames" : "single";
}

const IterationParams& SolverSchedule::params_for(int n) const {
  if (shared()) return std::get<IterationParams>(per_iteration);
  return std::get<std::vector<IterationParams>>(per_iteration).at(static_cast<std::size_t>(n));
}

std::vector<IterationParams> SolverSchedule::expanded() const {
  validate();
  if (shared()) {
    return std::vector<IterationParams>(static_cast<std::size_t>(iterations),
                                        std::get<IterationParams>(per_iteration));
  }
  return std::get<std::vector<IterationParams>>(per_iteration);
}

void SolverSchedule::validate() const {
  if (iterations < 1) throw std::invalid_argument("schedule needs iterations >= 1");
  if (!shared()) {
    const auto& list = std::get<std::vector<IterationParams>>(per_iteration);
    if (static_cast<int>(list.size()) != iterations) {
      throw std::invalid_argument("per-iteration list length " + std::to_string(list.size()) +
                                  " does not match iterations=" + std::to_string(iterations));
    }
  }
  for (int n = 0; n < iterations; ++n) {
    const IterationParams& p = params_for(shared() ? 0 : n);
    if (p.mu <= 0.0) throw std::invalid_argument("schedule needs mu > 0");
    if (p.omega1 < 0.0 || p.omega1 > 1.0) {
      throw std::invalid_argument("schedule needs omega1 in [0,1]");
    }
    if (p.t < 0.0 || p.t > 1.0) throw std::invalid_argument("schedule needs t in [0,1]");
    if (shared()) break;
  }
}

double nesterov_t_next(double t) {
  if (t < 1.0) throw std::invalid_argument("nesterov_t_next needs t >= 1");
  return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
}

namespace {

class WallTimer {
 public:
  WallTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Momentum coefficient sequence. Analytic mode follows t^{n+1} =
// (1+sqrt(1+4 t_n^2))/2 from t=1, so the first step carries no momentum.
class MomentumDriver {
 public:
  explicit MomentumDriver(Acceleration mode) : mode_(mode) {}

  double next_coeff(const IterationParams& p) {
    switch (mode_) {
      case Acceleration::none: return 0.0;
      case Acceleration::learned_t: return p.t;
      case Acceleration::analytic_nesterov: {
        const double t_next = nesterov_t_next(t_);
        const double coeff = (t_ - 1.0) / t_next;
        t_ = t_next;
        return coeff;
      }
    }
    return 0.0;
  }

 private:
  Acceleration mode_;
  double t_ = 1.0;
};

double half_squared_norm(const KSpaceData& r) {
  const double n = r.norm();
  return 0.5 * n * n;
}

// One fidelity gradient step: x - mu * A^H (A x - b). The residual is handed
// back so callers can reuse ||r||^2.
DynamicImage gradient_step(const KSpaceData& b, const AcquisitionOperator& op,
                           const DynamicImage& x, double mu, KSpaceData* residual_out) {
  KSpaceData r = ksub(op.forward(x), b);
  DynamicImage g = op.adjoint(r);
  if (residual_out != nullptr) *residual_out = std::move(r);
  return lincomb(1.0, x, -mu, g);
}

DynamicImage apply_lr_prox(const DynamicImage& xbar, const IterationParams& p, double divisor) {
  return svt_tensor(xbar, p.lr_transform, p.lr_threshold, divisor);
}

// Applies AST on a transform-domain tensor under the configured
// channelization.
DynamicImage ast_on_tensor(const DynamicImage& y, const AttentionParams& params, double omega2,
                           SparseChannels channels) {
  if (channels == SparseChannels::single) {
    double acc = 0.0;
    for (const Complex& v : y.values()) acc += std::abs(v);
    const std::vector<double> means{acc / static_cast<double>(y.size())};
    const std::vector<double> taus = ast_thresholds(means, params);
    return soft_threshold(y, taus[0] / omega2);
  }
  std::vector<double> means(static_cast<std::size_t>(y.frames()), 0.0);
  for (int h = 0; h < y.height(); ++h) {
    for (int w = 0; w < y.width(); ++w) {
      const std::size_t base = y.index(h, w, 0);
      for (int t = 0; t < y.frames(); ++t) means[static_cast<std::size_t>(t)] += std::abs(y.data()[base + t]);
    }
  }
  const double pixels = static_cast<double>(y.height()) * y.width();
  for (double& m : means) m /= pixels;
  const std::vector<double> taus = ast_thresholds(means, params);
  DynamicImage out = y;
  for (int h = 0; h < out.height(); ++h) {
    for (int w = 0; w < out.width(); ++w) {
      const std::size_t base = out.index(h, w, 0);
      for (int t = 0; t < out.frames(); ++t) {
        out.data()[base + t] =
            soft_threshold(out.data()[base + t], taus[static_cast<std::size_t>(t)] / omega2);
      }
    }
  }
  return out;
}

DynamicImage apply_sp_prox(const DynamicImage& xbar, const IterationParams& p, double divisor) {
  DynamicImage y = transform_apply(p.sp_transform, xbar);
  if (std::holds_alternative<double>(p.sp_threshold)) {
    const double tau = std::get<double>(p.sp_threshold);
    if (tau < 0.0) throw std::invalid_argument("sparse threshold must be >= 0");
    y = soft_threshold(y, tau / divisor);
  } else {
    y = ast_on_tensor(y, std::get<AttentionParams>(p.sp_threshold), divisor, p.sp_channels);
  }
  return transform_inverse(p.sp_transform, y);
}

void check_finite(const DynamicImage& z, const std::string& solver_id, int iteration) {
  if (!z.all_finite()) {
    throw NumericalError(solver_id + ": non-finite iterate at iteration " +
                         std::to_string(iteration + 1));
  }
}

// Numerical failures inside the prox/transform stack get the iteration index
// attached before they surface.
template <typename Fn>
auto with_iteration_context(const std::string& solver_id, int iteration, Fn&& fn) {
  try {
    return fn();
  } catch (const NumericalError& e) {
    throw NumericalError(solver_id + ": " + e.what() + " at iteration " +
                         std::to_string(iteration + 1));
  }
}

IterateRecord trace_record(const KSpaceData& b, const AcquisitionOperator& op,
                           const DynamicImage& z, const IterationParams& p,
                           const SolveOptions& opt) {
  IterateRecord rec;
  if (opt.trace_metrics) {
    rec.fidelity = half_squared_norm(ksub(op.forward(z), b));
    rec.ttnn_value = ttnn(z, p.lr_transform);
    rec.l1_value = l1_norm(transform_apply(p.sp_transform, z));
  }
  if (opt.reference != nullptr) {
    rec.psnr_db = psnr(z, *opt.reference);
  }
  return rec;
}

DynamicImage initial_iterate(const KSpaceData& b, const AcquisitionOperator& op,
                             const SolveOptions& opt) {
  if (opt.x0 != nullptr) {
    if (opt.x0->height() != op.height() || opt.x0->width() != op.width() ||
        opt.x0->frames() != op.frames()) {
      throw std::invalid_argument("x0 dimensions do not match the operator");
    }
    return *opt.x0;
  }
  return op.adjoint(b);
}

// Shared composite-splitting loop; ISTA uses the degenerate single-prior
// paths below instead so the two stay independently testable.
ReconReport run_csa_loop(const KSpaceData& b, const AcquisitionOperator& op,
                         const std::vector<IterationParams>& params, Acceleration accel,
                         const SolveOptions& opt, std::string solver_id) {
  WallTimer timer;
  ReconReport report;
  report.solver_id = std::move(solver_id);
  report.trace.reserve(params.size());

  DynamicImage x = initial_iterate(b, op, opt);
  DynamicImage z_prev = x;  // Z^0
  MomentumDriver momentum(accel);

  for (std::size_t n = 0; n < params.size(); ++n) {
    const IterationParams& p = params[n];
    DynamicImage z = with_iteration_context(report.solver_id, static_cast<int>(n), [&] {
      DynamicImage xbar = gradient_step(b, op, x, p.mu, nullptr);
      const double w1 = p.omega1;
      const double w2 = p.omega2();
      if (w2 <= 0.0) {
        return scaled(apply_lr_prox(xbar, p, w1), w1);
      }
      if (w1 <= 0.0) {
        return scaled(apply_sp_prox(xbar, p, w2), w2);
      }
      DynamicImage y1 = apply_lr_prox(xbar, p, w1);
      DynamicImage y2 = apply_sp_prox(xbar, p, w2);
      return lincomb(w1, y1, w2, y2);
    });
    check_finite(z, report.solver_id, static_cast<int>(n));

    const double coeff = momentum.next_coeff(p);
    if (coeff != 0.0) {
      x = add(z, scaled(sub(z, z_prev), coeff));
    } else {
      x = z;
    }
    report.trace.push_back(trace_record(b, op, z, p, opt));
    z_prev = std::move(z);
  }
  report.final_image = std::move(z_prev);
  report.wall_time_s = timer.seconds();
  return report;
}

}  // namespace

ReconReport ista_reconstruct(const KSpaceData& b, const AcquisitionOperator& op, IstaPrior prior,
                             const SolverSchedule& schedule, const SolveOptions& options) {
  schedule.validate();
  const std::vector<IterationParams> params = schedule.expanded();
  for (const IterationParams& p : params) {
    const bool has_attention = std::holds_alternative<AttentionParams>(p.sp_threshold);
    if (prior == IstaPrior::sparse_ast && !has_attention) {
      throw std::invalid_argument("ista_reconstruct: sparse_ast prior needs attention params");
    }
    if (prior == IstaPrior::sparse_st && has_attention) {
      throw std::invalid_argument("ista_reconstruct: sparse_st prior needs a scalar threshold");
    }
  }

  WallTimer timer;
  ReconReport report;
  report.solver_id = prior == IstaPrior::tensor_lowrank ? "ista-lr" : "ista-sp";
  report.trace.reserve(params.size());

  DynamicImage x = initial_iterate(b, op, options);
  DynamicImage z_prev = x;
  MomentumDriver momentum(schedule.acceleration);

  for (std::size_t n = 0; n < params.size(); ++n) {
    const IterationParams& p = params[n];
    DynamicImage z = with_iteration_context(report.solver_id, static_cast<int>(n), [&] {
      DynamicImage xbar = gradient_step(b, op, x, p.mu, nullptr);
      return prior == IstaPrior::tensor_lowrank ? apply_lr_prox(xbar, p, 1.0)
                                                : apply_sp_prox(xbar, p, 1.0);
    });
    check_finite(z, report.solver_id, static_cast<int>(n));

    const double coeff = momentum.next_coeff(p);
    if (coeff != 0.0) {
      x = add(z, scaled(sub(z, z_prev), coeff));
    } else {
      x = z;
    }
    report.trace.push_back(trace_record(b, op, z, p, options));
    z_prev = std::move(z);
  }
  report.final_image = std::move(z_prev);
  report.wall_time_s = timer.seconds();
  return report;
}

ReconReport csa_reconstruct(const KSpaceData& b, const AcquisitionOperator& op,
                            const SolverSchedule& schedule, const SolveOptions& options) {
  schedule.validate();
  return run_csa_loop(b, op, schedule.expanded(), schedule.acceleration, options, "csa");
}

ReconReport unrolled_csa(const KSpaceData& b, const AcquisitionOperator& op,
                         const SolverSchedule& schedule, const SolveOptions& options) {
  schedule.validate();
  if (schedule.shared()) {
    throw std::invalid_argument("unrolled_csa needs a per-iteration parameter list");
  }
  return run_csa_loop(b, op, schedule.expanded(), schedule.acceleration, options, "unrolled-csa");
}

LpsResult lps_ista(const KSpaceData& b, const AcquisitionOperator& op,
                   const SolverSchedule& schedule, const SolveOptions& options) {
  schedule.validate();
  const std::vector<IterationParams> params = schedule.expanded();

  WallTimer timer;
  LpsResult result;
  result.report.solver_id = "lps";
  result.report.trace.reserve(params.size());

  DynamicImage lowrank = initial_iterate(b, op, options);
  DynamicImage sparse(lowrank.height(), lowrank.width(), lowrank.frames());

  for (std::size_t n = 0; n < params.size(); ++n) {
    const IterationParams& p = params[n];
    DynamicImage combined = with_iteration_context(result.report.solver_id, static_cast<int>(n), [&] {
      DynamicImage x = add(lowrank, sparse);
      DynamicImage mbar = gradient_step(b, op, x, p.mu, nullptr);
      lowrank = apply_lr_prox(sub(mbar, sparse), p, 1.0);
      sparse = apply_sp_prox(sub(mbar, lowrank), p, 1.0);
      return add(lowrank, sparse);
    });
    check_finite(combined, result.report.solver_id, static_cast<int>(n));
    result.report.trace.push_back(trace_record(b, op, combined, p, options));
  }
  result.report.final_image = add(lowrank, sparse);
  result.lowrank = std::move(lowrank);
  result.sparse = std::move(sparse);
  result.report.wall_time_s = timer.seconds();
  return result;
}

ReconReport slr_admm(const KSpaceData& b, const AcquisitionOperator& op,
                     const SlrAdmmParams& params, const SolveOptions& options) {
  if (params.rho <= 0.0 || params.eta <= 0.0 || params.mu <= 0.0) {
    throw std::invalid_argument("slr_admm needs rho, eta, mu > 0");
  }
  if (params.iterations < 1 || params.inner_ista_steps < 1) {
    throw std::invalid_argument("slr_admm needs positive iteration counts");
  }

  WallTimer timer;
  ReconReport report;
  report.solver_id = "slr-admm";
  report.trace.reserve(static_cast<std::size_t>(params.iterations));

  IterationParams prox_params;
  prox_params.lr_threshold = params.lr_threshold;
  prox_params.sp_threshold = params.sp_threshold;
  prox_params.lr_transform = params.lr_transform;
  prox_params.sp_transform = params.sp_transform;
  prox_params.sp_channels = params.sp_channels;

  DynamicImage x = initial_iterate(b, op, options);
  DynamicImage aux = x;  // low-rank auxiliary variable
  DynamicImage mult(x.height(), x.width(), x.frames());

  for (int n = 0; n < params.iterations; ++n) {
    with_iteration_context(report.solver_id, n, [&] {
      for (int inner = 0; inner < params.inner_ista_steps; ++inner) {
        KSpaceData r = ksub(op.forward(x), b);
        DynamicImage g = op.adjoint(r);
        axpy(g, params.rho, add(sub(x, aux), mult));
        DynamicImage z = lincomb(1.0, x, -params.mu, g);
        // Sparse prox with threshold mu * value.
        x = apply_sp_prox(z, prox_params, 1.0 / params.mu);
      }
      const double svt_divisor =
          params.t_threshold_includes_mu ? params.rho / params.mu : params.rho;
      aux = svt_tensor(add(x, mult), params.lr_transform, params.lr_threshold, svt_divisor);
      axpy(mult, params.eta, sub(x, aux));
    });
    check_finite(x, report.solver_id, n);
    report.trace.push_back(trace_record(b, op, x, prox_params, options));
  }
  report.final_image = std::move(x);
  report.wall_time_s = timer.seconds();
  return report;
}

ReconReport run_solver(const SolverSpec& spec, const KSpaceData& b, const AcquisitionOperator& op,
                       const SolveOptions& options) {
  ReconReport report;
  if (spec.kind == "ista-lr") {
    report = ista_reconstruct(b, op, IstaPrior::tensor_lowrank, spec.schedule, options);
  } else if (spec.kind == "ista-sp") {
    const IstaPrior prior =
        std::holds_alternative<AttentionParams>(spec.schedule.params_for(0).sp_threshold)
            ? IstaPrior::sparse_ast
            : IstaPrior::sparse_st;
    report = ista_reconstruct(b, op, prior, spec.schedule, options);
  } else if (spec.kind == "csa") {
    report = csa_reconstruct(b, op, spec.schedule, options);
  } else if (spec.kind == "unrolled-csa") {
    report = unrolled_csa(b, op, spec.schedule, options);
  } else if (spec.kind == "lps") {
    report = lps_ista(b, op, spec.schedule, options).report;
  } else if (spec.kind == "slr-admm") {
    report = slr_admm(b, op, spec.admm, options);
  } else {
    throw std::invalid_argument("unknown solver kind '" + spec.kind + "'");
  }
  if (!spec.id.empty()) report.solver_id = spec.id;
  return report;
}

namespace {

// Threshold weights used for the comparison objective column.
std::pair<double, double> objective_weights(const IterationParams& p) {
  const double lr_w = p.lr_threshold.mode == ThresholdSpec::Mode::absolute
                          ? p.lr_threshold.value
                          : sigmoid(p.lr_threshold.value);
  double sp_w = 0.0;
  if (std::holds_alternative<double>(p.sp_threshold)) {
    sp_w = std::get<double>(p.sp_threshold);
  } else {
    sp_w = std::get<AttentionParams>(p.sp_threshold).alpha;
  }
  return {lr_w, sp_w};
}

IterationParams objective_params(const SolverSpec& spec) {
  if (spec.kind == "slr-admm") {
    IterationParams p;
    p.lr_threshold = spec.admm.lr_threshold;
    p.sp_threshold = spec.admm.sp_threshold;
    p.lr_transform = spec.admm.lr_transform;
    p.sp_transform = spec.admm.sp_transform;
    return p;
  }
  return spec.schedule.params_for(0);
}

}  // namespace

CompareTable compare_structures(const KSpaceData& b, const AcquisitionOperator& op,
                                const std::vector<SolverSpec>& specs,
                                const DynamicImage* reference) {
  if (specs.size() < 2) {
    throw std::invalid_argument("compare_structures needs at least two solver configs");
  }
  SolveOptions options;
  options.reference = reference;
  options.trace_metrics = true;

  CompareTable table;
  std::vector<std::vector<double>> objectives;
  for (const SolverSpec& spec : specs) {
    ReconReport report = run_solver(spec, b, op, options);
    const auto [lr_w, sp_w] = objective_weights(objective_params(spec));
    std::vector<double> obj;
    obj.reserve(report.trace.size());
    for (const IterateRecord& rec : report.trace) {
      obj.push_back(rec.fidelity + lr_w * rec.ttnn_value + sp_w * rec.l1_value);
    }
    objectives.push_back(std::move(obj));
    table.reports.push_back(std::move(report));
  }

  double target = -std::numeric_limits<double>::infinity();
  for (const std::vector<double>& obj : objectives) {
    if (!obj.empty()) target = std::max(target, obj.back());
  }
  table.target_objective = target;

  for (std::size_t i = 0; i < specs.size(); ++i) {
    const ReconReport& report = table.reports[i];
    CompareRow row;
    row.solver_id = report.solver_id;
    row.iterations = static_cast<int>(report.trace.size());
    row.wall_time_s = report.wall_time_s;
    if (reference != nullptr) {
      row.psnr_db = psnr(report.final_image, *reference);
      row.ssim_value = ssim(report.final_image, *reference);
    }
    const std::vector<double>& obj = objectives[i];
    row.final_objective = obj.empty() ? std::numeric_limits<double>::quiet_NaN() : obj.back();
    const double slack = 1e-9 * (1.0 + std::abs(target));
    row.iters_to_target = row.iterations;
    for (std::size_t n = 0; n < obj.size(); ++n) {
      if (obj[n] <= target + slack) {
        row.iters_to_target = static_cast<int>(n + 1);
        break;
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

namespace {

void write_csv_line(std::ofstream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out << ',';
    out << fields[i];
  }
  out << '\n';
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_report_csv(const ReconReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "iteration,fidelity,ttnn,l1,psnr\n";
  for (std::size_t n = 0; n < report.trace.size(); ++n) {
    const IterateRecord& rec = report.trace[n];
    write_csv_line(out, {std::to_string(n + 1), fmt(rec.fidelity), fmt(rec.ttnn_value),
                         fmt(rec.l1_value), fmt(rec.psnr_db)});
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

void write_compare_csv(const CompareTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "solver,psnr_db,ssim,final_objective,wall_time_s,iterations,iters_to_target\n";
  for (const CompareRow& row : table.rows) {
    write_csv_line(out, {row.solver_id, fmt(row.psnr_db), fmt(row.ssim_value),
                         fmt(row.final_objective), fmt(row.wall_time_s),
                         std::to_string(row.iterations), std::to_string(row.iters_to_target)});
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace jotlas
