#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jotlas/acquisition.hpp"
#include "jotlas/solvers.hpp"
#include "jotlas/tensor.hpp"

namespace jotlas {

struct TrainingPair {
  DynamicImage truth;
  KSpaceData kspace;
  AcquisitionOperator op;
};

using TrainingSet = std::vector<TrainingPair>;

/// Sum over pairs of || truth - solve(kspace | schedule) ||_F^2.
double mse_loss(const SolverSchedule& schedule, const TrainingSet& train);

/// Flat unconstrained encoding of a schedule's tunable values: softplus for
/// positive quantities (mu, absolute thresholds, alpha), logit/sigmoid for
/// omega1 and t, identity for relative-threshold and fc-attention raws.
/// Structure (modes, transforms, list length) is carried by a prototype.
namespace param_codec {
std::vector<double> encode(const SolverSchedule& schedule);
SolverSchedule decode(const SolverSchedule& prototype, const std::vector<double>& raw);
std::size_t dimension(const SolverSchedule& prototype);
}  // namespace param_codec

struct LossRecord {
  int step = 0;
  double loss = 0.0;       // candidate loss this step (NaN on a skipped step)
  double best_loss = 0.0;  // best seen so far
};

struct SpsaOptions {
  double a = 0.05;
  double c = 0.1;
  double stability_fraction = 0.1;  // A = fraction * budget
};

struct TuneResult {
  SolverSchedule schedule;
  std::vector<LossRecord> trace;
  double best_loss = 0.0;
};

/// Simultaneous-perturbation tuning of the schedule. Each step probes
/// theta +/- c_k * delta with a Rademacher delta, moves theta along the
/// estimated gradient with gain a_k = a/(k+A)^0.602, c_k = c/k^0.101, and
/// evaluates the updated point. Returns the best-seen schedule, never a
/// worse one than init. Non-finite probe losses skip the step and halve the
/// perturbation scale; ten consecutive skips stop the run early.
TuneResult spsa_tune(const SolverSchedule& init, const TrainingSet& train, int budget,
                     std::uint64_t seed, const SpsaOptions& options = {});

struct GridResult {
  SolverSchedule schedule;
  std::vector<std::pair<double, double>> table;  // (value, loss)
};

/// One-dimensional sweep of a shared parameter; param_name is one of
/// mu, lr.threshold, sp.threshold, sp.alpha, omega1, t.
GridResult grid_tune(const SolverSchedule& init, const TrainingSet& train,
                     const std::string& param_name, const std::vector<double>& grid);

/// CSV columns: step,loss,best_loss
void write_loss_trace_csv(const std::vector<LossRecord>& trace, const std::string& path);

}  // namespace jotlas
