#pragma once

#include <iosfwd>
#include <string>

#include "jotlas/acquisition.hpp"
#include "jotlas/config.hpp"
#include "jotlas/solvers.hpp"

namespace jotlas {

/// Builds a mask from mask.* keys; dimensions come from phantom.dims unless
/// a caller supplies them.
SamplingMask mask_from_config(const RunConfig& config);
SamplingMask mask_from_config(const RunConfig& config, int height, int width, int frames);

/// The shared solver schedule implied by solver.* keys and their defaults.
SolverSchedule schedule_from_config(const RunConfig& config);
SolverSpec solver_spec_from_config(const RunConfig& config);

void cmd_mask(const RunConfig& config, std::ostream& out);
void cmd_phantom(const RunConfig& config, std::ostream& out);
void cmd_simulate(const RunConfig& config, std::ostream& out);
void cmd_recon(const RunConfig& config, std::ostream& out);
void cmd_tune(const RunConfig& config, std::ostream& out);
void cmd_eval(const RunConfig& config, std::ostream& out);
void cmd_compare(const RunConfig& config, std::ostream& out);

/// Validates the config keys and dispatches to the named subcommand.
void run_command(const std::string& name, const RunConfig& config, std::ostream& out);

}  // namespace jotlas
