#include "jotlas/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>

#include "jotlas/errors.hpp"
#include "jotlas/jotl_io.hpp"
#include "jotlas/metrics.hpp"
#include "jotlas/phantom.hpp"
#include "jotlas/tuner.hpp"

namespace jotlas {

namespace {

namespace fs = std::filesystem;

// Wraps enum parsers so failures always name the offending key.
template <typename Parser>
auto parse_key(const RunConfig& config, const std::string& key, const std::string& fallback,
               Parser parser) {
  const std::string value = config.get_string(key, fallback);
  try {
    return parser(value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t next = text.find(',', pos);
    if (next == std::string::npos) next = text.size();
    std::string part = text.substr(pos, next - pos);
    while (!part.empty() && part.front() == ' ') part.erase(part.begin());
    while (!part.empty() && part.back() == ' ') part.pop_back();
    if (!part.empty()) out.push_back(part);
    pos = next + 1;
  }
  return out;
}

std::string case_name(const std::string& path) {
  std::string stem = fs::path(path).filename().string();
  const std::size_t dot = stem.find('.');
  return dot == std::string::npos ? stem : stem.substr(0, dot);
}

std::optional<CoilSensitivities> csm_from_config(const RunConfig& config, int height, int width) {
  if (config.has("io.csm")) {
    CoilSensitivities csm = load_csm_jotl(config.get_string("io.csm"));
    if (csm.height != height || csm.width != width) {
      throw ConfigError("coil maps in '" + config.get_string("io.csm") +
                        "' do not match the data dimensions");
    }
    return csm;
  }
  const int coils = config.get_int("csm.coils", 1);
  if (coils < 1) throw ConfigError("config key 'csm.coils': must be >= 1");
  if (coils == 1) return std::nullopt;
  return make_synthetic_csm(height, width, coils, config.get_seed("csm.seed", 0));
}

void add_noise(KSpaceData& b, const SamplingMask& mask, double snr_db, std::uint64_t seed,
               std::ostream& out) {
  double signal_power = 0.0;
  std::size_t sampled = 0;
  for (int c = 0; c < b.coils; ++c) {
    for (int h = 0; h < b.height; ++h) {
      for (int w = 0; w < b.width; ++w) {
        for (int t = 0; t < b.frames; ++t) {
          if (mask.at(h, w, t)) {
            signal_power += std::norm(b.at(c, h, w, t));
            ++sampled;
          }
        }
      }
    }
  }
  if (sampled == 0 || signal_power == 0.0) return;
  signal_power /= static_cast<double>(sampled);
  const double noise_power = signal_power / std::pow(10.0, snr_db / 10.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(noise_power / 2.0));
  double actual_noise = 0.0;
  for (int c = 0; c < b.coils; ++c) {
    for (int h = 0; h < b.height; ++h) {
      for (int w = 0; w < b.width; ++w) {
        for (int t = 0; t < b.frames; ++t) {
          if (mask.at(h, w, t)) {
            const Complex n(gauss(rng), gauss(rng));
            actual_noise += std::norm(n);
            b.at(c, h, w, t) += n;
          }
        }
      }
    }
  }
  actual_noise /= static_cast<double>(sampled);
  out << "noise snr_db=" << snr_db
      << " measured_snr_db=" << 10.0 * std::log10(signal_power / actual_noise) << "\n";
}

struct ReconInputs {
  KSpaceData kspace;
  SamplingMask mask;
  std::optional<CoilSensitivities> csm;
};

ReconInputs load_recon_inputs(const RunConfig& config) {
  ReconInputs in;
  in.kspace = load_kspace_jotl(config.get_string("io.input"));
  in.mask = load_mask_jotl(config.get_string("io.mask"));
  if (in.mask.height != in.kspace.height || in.mask.width != in.kspace.width ||
      in.mask.frames != in.kspace.frames) {
    throw ConfigError("mask and k-space dimensions do not match");
  }
  in.csm = csm_from_config(config, in.mask.height, in.mask.width);
  const int coils = in.csm ? in.csm->coils : 1;
  if (coils != in.kspace.coils) {
    throw ConfigError("k-space has " + std::to_string(in.kspace.coils) + " coils but " +
                      std::to_string(coils) + " coil maps were configured");
  }
  return in;
}

}  // namespace

SamplingMask mask_from_config(const RunConfig& config) {
  const Dims3 dims = parse_dims(config.get_string("phantom.dims", "128x128x16"), "phantom.dims");
  return mask_from_config(config, dims.height, dims.width, dims.frames);
}

SamplingMask mask_from_config(const RunConfig& config, int height, int width, int frames) {
  const MaskPattern pattern =
      parse_key(config, "mask.pattern", "vds", mask_pattern_from_string);
  const std::uint64_t seed = config.get_seed("mask.seed", 0);
  try {
    switch (pattern) {
      case MaskPattern::radial:
        return make_radial_mask(height, width, frames, config.get_int("mask.lines", 16), seed);
      case MaskPattern::vds:
        return make_vds_mask(height, width, frames, config.get_double("mask.accel", 4.0), seed);
      case MaskPattern::equispaced:
        return make_equispaced_mask(height, width, frames, config.get_int("mask.accel", 4),
                                    config.get_int("mask.acs", 24));
      case MaskPattern::vista_like:
        return make_vista_like_mask(height, width, frames, config.get_double("mask.accel", 8.0),
                                    seed);
      case MaskPattern::full:
      case MaskPattern::external:
        return make_full_mask(height, width, frames);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("mask generation: ") + e.what());
  }
  throw ConfigError("config key 'mask.pattern': unsupported pattern");
}

SolverSchedule schedule_from_config(const RunConfig& config) {
  IterationParams p;
  p.mu = config.get_double("solver.mu", 1.0);
  p.omega1 = config.get_double("solver.omega1", 0.5);
  p.t = config.get_double("solver.t", 0.0);
  p.lr_threshold.mode =
      parse_key(config, "solver.lr.threshold_mode", "relative", threshold_mode_from_string);
  p.lr_threshold.value = config.get_double(
      "solver.lr.threshold", p.lr_threshold.mode == ThresholdSpec::Mode::absolute ? 0.01 : -6.0);
  p.lr_transform.kind =
      parse_key(config, "solver.lr.transform", "dft", transform_kind_from_string);
  p.sp_transform.kind =
      parse_key(config, "solver.sp.transform", "dft", transform_kind_from_string);
  p.sp_channels = parse_key(config, "solver.sp.channels", "frames", sparse_channels_from_string);

  const std::string sp_mode = config.get_string("solver.sp.mode", "st");
  if (sp_mode == "st") {
    p.sp_threshold = config.get_double("solver.sp.threshold", 0.002);
  } else if (sp_mode == "ast-energy") {
    p.sp_threshold = AttentionParams::energy(config.get_double("solver.sp.alpha", 0.03));
  } else if (sp_mode == "ast-fc") {
    p.sp_threshold = AttentionParams::zero_fc(config.get_int("solver.sp.nc", 16));
  } else {
    throw ConfigError("config key 'solver.sp.mode': unknown mode '" + sp_mode +
                      "' (allowed: st, ast-fc, ast-energy)");
  }

  SolverSchedule schedule;
  schedule.iterations = config.get_int("solver.iterations", 15);
  schedule.acceleration =
      parse_key(config, "solver.acceleration", "nesterov", acceleration_from_string);
  schedule.per_iteration = std::move(p);
  try {
    schedule.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("solver schedule: ") + e.what());
  }
  return schedule;
}

SolverSpec solver_spec_from_config(const RunConfig& config) {
  SolverSpec spec;
  spec.kind = config.get_string("solver.id", "csa");
  spec.id = spec.kind;
  const std::vector<std::string> known = {"ista-lr", "ista-sp", "csa",
                                          "unrolled-csa", "lps", "slr-admm"};
  if (std::find(known.begin(), known.end(), spec.kind) == known.end()) {
    throw ConfigError(
        "config key 'solver.id': unknown solver '" + spec.kind +
        "' (allowed: ista-lr, ista-sp, csa, unrolled-csa, lps, slr-admm)");
  }
  if (spec.kind == "unrolled-csa") {
    spec.schedule = load_schedule_file(config.get_string("io.schedule"));
  } else {
    spec.schedule = schedule_from_config(config);
  }
  if (spec.kind == "slr-admm") {
    const IterationParams& p = spec.schedule.params_for(0);
    spec.admm.rho = config.get_double("admm.rho", 1.0);
    spec.admm.eta = config.get_double("admm.eta", 1.0);
    spec.admm.mu = p.mu;
    spec.admm.lr_threshold = p.lr_threshold;
    spec.admm.sp_threshold = p.sp_threshold;
    spec.admm.lr_transform = p.lr_transform;
    spec.admm.sp_transform = p.sp_transform;
    spec.admm.sp_channels = p.sp_channels;
    spec.admm.iterations = spec.schedule.iterations;
    spec.admm.inner_ista_steps = config.get_int("admm.inner_steps", 1);
    spec.admm.t_threshold_includes_mu = config.get_bool("admm.t_threshold_includes_mu", false);
  }
  return spec;
}

void cmd_mask(const RunConfig& config, std::ostream& out) {
  const SamplingMask mask = mask_from_config(config);
  save_mask_jotl(config.get_string("io.output"), mask);
  out << "mask pattern=" << to_string(mask.pattern) << " dims=" << mask.height << "x" << mask.width
      << "x" << mask.frames << " sampled=" << mask.sampled_count()
      << " measured_accel=" << mask.measured_accel() << " nominal_accel=" << mask.nominal_accel
      << "\n";
}

void cmd_phantom(const RunConfig& config, std::ostream& out) {
  PhantomSpec spec;
  const Dims3 dims = parse_dims(config.get_string("phantom.dims", "128x128x16"), "phantom.dims");
  spec.height = dims.height;
  spec.width = dims.width;
  spec.frames = dims.frames;
  spec.kind = parse_key(config, "phantom.kind", "lowrank-plus-sparse", phantom_kind_from_string);
  spec.seed = config.get_seed("phantom.seed", 0);
  spec.motion_amplitude = config.get_double("phantom.motion_amplitude", 4.0);
  spec.n_ellipses = config.get_int("phantom.n_ellipses", 5);
  const DynamicImage phantom = make_phantom(spec);
  save_image_jotl(config.get_string("io.output"), phantom);
  out << "phantom kind=" << to_string(spec.kind) << " dims=" << spec.height << "x" << spec.width
      << "x" << spec.frames << " seed=" << spec.seed << " norm=" << phantom.frobenius_norm()
      << "\n";
}

void cmd_simulate(const RunConfig& config, std::ostream& out) {
  const DynamicImage image = load_image_jotl(config.get_string("io.input"));
  SamplingMask mask;
  if (config.has("io.mask")) {
    mask = load_mask_jotl(config.get_string("io.mask"));
    if (mask.height != image.height() || mask.width != image.width() ||
        mask.frames != image.frames()) {
      throw ConfigError("mask dimensions do not match the input image");
    }
  } else {
    mask = mask_from_config(config, image.height(), image.width(), image.frames());
  }
  const std::optional<CoilSensitivities> csm =
      csm_from_config(config, image.height(), image.width());
  const AcquisitionOperator op(mask, csm);
  KSpaceData b = op.forward(image);
  if (config.has("noise.snr_db")) {
    add_noise(b, mask, config.get_double("noise.snr_db"), config.get_seed("noise.seed", 0), out);
  }
  save_kspace_jotl(config.get_string("io.output"), b);
  out << "simulate coils=" << b.coils << " dims=" << b.height << "x" << b.width << "x" << b.frames
      << " norm=" << b.norm() << "\n";
}

void cmd_recon(const RunConfig& config, std::ostream& out) {
  ReconInputs in = load_recon_inputs(config);
  const AcquisitionOperator op(in.mask, in.csm);
  const SolverSpec spec = solver_spec_from_config(config);

  std::optional<DynamicImage> reference;
  if (config.has("io.reference")) {
    reference = load_image_jotl(config.get_string("io.reference"));
  }
  SolveOptions options;
  options.reference = reference ? &*reference : nullptr;

  const ReconReport report = run_solver(spec, in.kspace, op, options);
  const std::string output = config.get_string("io.output");
  save_image_jotl(output, report.final_image);
  if (config.has("io.report")) {
    write_report_csv(report, config.get_string("io.report"));
  }
  if (config.has("io.pgm_frame")) {
    const int frame = config.get_int("io.pgm_frame");
    export_frame_pgm(report.final_image, frame,
                     output + ".frame" + std::to_string(frame) + ".pgm");
  }
  out << "recon solver=" << report.solver_id << " iterations=" << report.trace.size()
      << " wall_time_s=" << report.wall_time_s;
  if (reference) {
    out << " final_psnr_db=" << psnr(report.final_image, *reference)
        << " zero_filled_psnr_db=" << psnr(op.zero_filled(in.kspace), *reference);
  }
  out << "\n";
}

void cmd_tune(const RunConfig& config, std::ostream& out) {
  const std::string dir = config.get_string("io.train_dir");
  if (!fs::is_directory(dir)) throw IoError("training directory '" + dir + "' does not exist");

  const SamplingMask mask = load_mask_jotl((fs::path(dir) / "mask.jotl").string());
  std::optional<CoilSensitivities> csm;
  if (fs::exists(fs::path(dir) / "csm.jotl")) {
    csm = load_csm_jotl((fs::path(dir) / "csm.jotl").string());
  }
  const AcquisitionOperator op(mask, csm);

  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    const std::string suffix = ".truth.jotl";
    if (name.size() > suffix.size() && name.ends_with(suffix)) {
      stems.push_back(name.substr(0, name.size() - suffix.size()));
    }
  }
  std::sort(stems.begin(), stems.end());
  if (stems.empty()) {
    throw ConfigError("training directory '" + dir + "' holds no *.truth.jotl files");
  }

  TrainingSet train;
  for (const std::string& stem : stems) {
    TrainingPair pair{load_image_jotl((fs::path(dir) / (stem + ".truth.jotl")).string()),
                      load_kspace_jotl((fs::path(dir) / (stem + ".kspace.jotl")).string()), op};
    train.push_back(std::move(pair));
  }

  SolverSchedule init = schedule_from_config(config);
  std::vector<IterationParams> list = init.expanded();
  if (init.acceleration == Acceleration::analytic_nesterov) {
    // Seed the learnable momentum with the analytic coefficient sequence.
    double t = 1.0;
    for (IterationParams& p : list) {
      const double t_next = nesterov_t_next(t);
      p.t = (t - 1.0) / t_next;
      t = t_next;
    }
    init.acceleration = Acceleration::learned_t;
  }
  init.per_iteration = std::move(list);

  SpsaOptions gains;
  gains.a = config.get_double("tuner.gain_a", 0.05);
  gains.c = config.get_double("tuner.gain_c", 0.1);
  gains.stability_fraction = config.get_double("tuner.stability_fraction", 0.1);
  const int budget = config.get_int("tuner.budget", 200);
  const std::uint64_t seed = config.get_seed("tuner.seed", 0);

  const TuneResult result = spsa_tune(init, train, budget, seed, gains);
  save_schedule_file(config.get_string("io.output"), result.schedule);
  if (config.has("io.report")) {
    write_loss_trace_csv(result.trace, config.get_string("io.report"));
  }
  out << "tune pairs=" << train.size() << " budget=" << budget
      << " init_loss=" << result.trace.front().loss << " best_loss=" << result.best_loss << "\n";
}

void cmd_eval(const RunConfig& config, std::ostream& out) {
  const std::vector<std::string> inputs = split_list(config.get_string("io.input"));
  const std::vector<std::string> refs = split_list(config.get_string("io.reference"));
  if (inputs.empty()) throw ConfigError("config key 'io.input': no input files given");
  if (refs.size() != 1 && refs.size() != inputs.size()) {
    throw ConfigError("config key 'io.reference': need one reference or one per input");
  }

  std::string csv = "case,psnr_db,ssim\n";
  double psnr_sum = 0.0;
  double ssim_sum = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const DynamicImage x = load_image_jotl(inputs[i]);
    const DynamicImage ref = load_image_jotl(refs.size() == 1 ? refs[0] : refs[i]);
    const double p = psnr(x, ref);
    const double s = ssim(x, ref);
    psnr_sum += p;
    ssim_sum += s;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f\n", case_name(inputs[i]).c_str(), p, s);
    csv += buf;
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "mean,%.6f,%.6f\n",
                psnr_sum / static_cast<double>(inputs.size()),
                ssim_sum / static_cast<double>(inputs.size()));
  csv += buf;
  out << csv;
  if (config.has("io.report")) {
    std::ofstream report(config.get_string("io.report"), std::ios::trunc);
    if (!report) throw IoError("cannot open '" + config.get_string("io.report") + "' for writing");
    report << csv;
  }
}

void cmd_compare(const RunConfig& config, std::ostream& out) {
  ReconInputs in = load_recon_inputs(config);
  const AcquisitionOperator op(in.mask, in.csm);

  std::optional<DynamicImage> reference;
  if (config.has("io.reference")) {
    reference = load_image_jotl(config.get_string("io.reference"));
  }

  const std::vector<std::string> tokens =
      split_list(config.get_string("compare.solvers", "csa,lps,slr-admm"));
  if (tokens.size() < 2) {
    throw ConfigError("config key 'compare.solvers': need at least two solver entries");
  }

  std::vector<SolverSpec> specs;
  for (const std::string& token : tokens) {
    std::string base = token;
    bool no_accel = false;
    const std::string suffix = "-noaccel";
    if (base.size() > suffix.size() && base.ends_with(suffix)) {
      base = base.substr(0, base.size() - suffix.size());
      no_accel = true;
    }
    RunConfig local = config;
    local.set("solver.id", base);
    SolverSpec spec = solver_spec_from_config(local);
    spec.id = token;
    if (no_accel) spec.schedule.acceleration = Acceleration::none;
    specs.push_back(std::move(spec));
  }

  const CompareTable table =
      compare_structures(in.kspace, op, specs, reference ? &*reference : nullptr);
  if (config.has("io.report")) {
    write_compare_csv(table, config.get_string("io.report"));
  }
  out << "solver,psnr_db,ssim,final_objective,wall_time_s,iterations,iters_to_target\n";
  for (const CompareRow& row : table.rows) {
    char buf[240];
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.9g,%.3f,%d,%d\n", row.solver_id.c_str(),
                  row.psnr_db, row.ssim_value, row.final_objective, row.wall_time_s,
                  row.iterations, row.iters_to_target);
    out << buf;
  }
}

void run_command(const std::string& name, const RunConfig& config, std::ostream& out) {
  config.validate_keys();
  if (name == "mask") return cmd_mask(config, out);
  if (name == "phantom") return cmd_phantom(config, out);
  if (name == "simulate") return cmd_simulate(config, out);
  if (name == "recon") return cmd_recon(config, out);
  if (name == "tune") return cmd_tune(config, out);
  if (name == "eval") return cmd_eval(config, out);
  if (name == "compare") return cmd_compare(config, out);
  throw ConfigError("unknown command '" + name +
                    "' (available: mask, phantom, simulate, recon, tune, eval, compare)");
}

}  // namespace jotlas
