#pragma once

#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "jotlas/acquisition.hpp"
#include "jotlas/prox.hpp"
#include "jotlas/tensor.hpp"

namespace jotlas {

enum class Acceleration { none, analytic_nesterov, learned_t };

Acceleration acceleration_from_string(const std::string& name);
std::string to_string(Acceleration accel);

/// How the sparse prior channelizes the transform-domain tensor for AST:
/// each transform-domain frame as one channel, or the whole tensor as one.
enum class SparseChannels { frames, single };

SparseChannels sparse_channels_from_string(const std::string& name);
std::string to_string(SparseChannels channels);

/// Per-iteration solver parameters. omega2 is derived from omega1 so the two
/// weights always sum to one exactly.
struct IterationParams {
  double mu = 1.0;
  ThresholdSpec lr_threshold{};
  std::variant<double, AttentionParams> sp_threshold = 0.0;
  double omega1 = 0.5;
  double t = 0.0;  // learned momentum coefficient, used by learned-t schedules
  TransformSpec lr_transform{};
  TransformSpec sp_transform{};
  SparseChannels sp_channels = SparseChannels::frames;

  double omega2() const { return 1.0 - omega1; }
};

struct SolverSchedule {
  int iterations = 15;
  std::variant<IterationParams, std::vector<IterationParams>> per_iteration = IterationParams{};
  Acceleration acceleration = Acceleration::analytic_nesterov;

  bool shared() const { return std::holds_alternative<IterationParams>(per_iteration); }
  const IterationParams& params_for(int n) const;
  std::vector<IterationParams> expanded() const;
  void validate() const;
};

struct IterateRecord {
  double fidelity = std::numeric_limits<double>::quiet_NaN();
  double ttnn_value = std::numeric_limits<double>::quiet_NaN();
  double l1_value = std::numeric_limits<double>::quiet_NaN();
  double psnr_db = std::numeric_limits<double>::quiet_NaN();
};

struct ReconReport {
  std::vector<IterateRecord> trace;
  DynamicImage final_image;
  double wall_time_s = 0.0;
  std::string solver_id;
};

/// CSV columns: iteration,fidelity,ttnn,l1,psnr
void write_report_csv(const ReconReport& report, const std::string& path);

enum class IstaPrior { tensor_lowrank, sparse_st, sparse_ast };

struct SolveOptions {
  const DynamicImage* x0 = nullptr;         // default: adjoint(b)
  const DynamicImage* reference = nullptr;  // enables the psnr trace column
  bool trace_metrics = true;
};

/// Single-prior proximal gradient: gradient step on the fidelity term, one
/// proximal map, optional momentum.
ReconReport ista_reconstruct(const KSpaceData& b, const AcquisitionOperator& op, IstaPrior prior,
                             const SolverSchedule& schedule, const SolveOptions& options = {});

/// Composite splitting: shared gradient step, parallel low-rank and sparse
/// proximal maps, omega-weighted combination, momentum on the combined
/// iterates.
ReconReport csa_reconstruct(const KSpaceData& b, const AcquisitionOperator& op,
                            const SolverSchedule& schedule, const SolveOptions& options = {});

/// The composite splitting loop driven by an explicit per-iteration
/// parameter list; momentum uses each iteration's learned t.
ReconReport unrolled_csa(const KSpaceData& b, const AcquisitionOperator& op,
                         const SolverSchedule& schedule, const SolveOptions& options = {});

/// (1 + sqrt(1 + 4 t^2)) / 2 for t >= 1.
double nesterov_t_next(double t);

struct LpsResult {
  ReconReport report;  // trace and final image of L + S
  DynamicImage lowrank;
  DynamicImage sparse;
};

/// Low-rank plus sparse decomposition solved serially: a gradient step on
/// the summed variable, then the low-rank prox, then the sparse prox against
/// the freshly updated low-rank part.
LpsResult lps_ista(const KSpaceData& b, const AcquisitionOperator& op,
                   const SolverSchedule& schedule, const SolveOptions& options = {});

struct SlrAdmmParams {
  double rho = 1.0;
  double eta = 1.0;
  double mu = 1.0;
  ThresholdSpec lr_threshold{};
  std::variant<double, AttentionParams> sp_threshold = 0.0;
  TransformSpec lr_transform{};
  TransformSpec sp_transform{};
  SparseChannels sp_channels = SparseChannels::frames;
  int iterations = 15;
  int inner_ista_steps = 1;
  // Auxiliary-variable SVT threshold is value/rho by default; enable to use
  // mu*value/rho instead.
  bool t_threshold_includes_mu = false;
};

/// ADMM with the data subproblem solved by embedded ISTA steps: inner
/// gradient + sparse prox on the image variable, SVT update of the auxiliary
/// low-rank variable, multiplier ascent.
ReconReport slr_admm(const KSpaceData& b, const AcquisitionOperator& op,
                     const SlrAdmmParams& params, const SolveOptions& options = {});

struct SolverSpec {
  std::string id;    // row label
  std::string kind;  // ista-lr | ista-sp | csa | unrolled-csa | lps | slr-admm
  SolverSchedule schedule{};
  SlrAdmmParams admm{};
};

ReconReport run_solver(const SolverSpec& spec, const KSpaceData& b, const AcquisitionOperator& op,
                       const SolveOptions& options = {});

struct CompareRow {
  std::string solver_id;
  double psnr_db = std::numeric_limits<double>::quiet_NaN();
  double ssim_value = std::numeric_limits<double>::quiet_NaN();
  double final_objective = std::numeric_limits<double>::quiet_NaN();
  double wall_time_s = 0.0;
  int iterations = 0;
  int iters_to_target = 0;
};

struct CompareTable {
  std::vector<CompareRow> rows;
  double target_objective = std::numeric_limits<double>::quiet_NaN();
  std::vector<ReconReport> reports;
};

/// Runs every solver on identical inputs. The per-row objective is
/// fidelity + lr_weight*ttnn + sp_weight*l1 with that row's own threshold
/// weights; iters_to_target counts iterations until a row first reaches the
/// loosest final objective across rows.
CompareTable compare_structures(const KSpaceData& b, const AcquisitionOperator& op,
                                const std::vector<SolverSpec>& specs,
                                const DynamicImage* reference);

/// CSV columns: solver,psnr_db,ssim,final_objective,wall_time_s,iterations,iters_to_target
void write_compare_csv(const CompareTable& table, const std::string& path);

}  // namespace jotlas
