#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "jotlas/commands.hpp"
#include "jotlas/config.hpp"
#include "jotlas/errors.hpp"
#include "jotlas/jotl_io.hpp"
#include "jotlas/metrics.hpp"
#include "test_support.hpp"

using namespace jotlas;

namespace {

namespace fs = std::filesystem;

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "jotlas_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path_of(const std::string& name) { return (work_dir() / name).string(); }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

RunConfig base_pipeline_config() {
  RunConfig c;
  c.set("phantom.dims", "24x24x4");
  c.set("phantom.kind", "lowrank-plus-sparse");
  c.set("mask.pattern", "vds");
  c.set("mask.accel", "2");
  return c;
}

void run_quiet(const std::string& name, const RunConfig& config) {
  std::ostringstream sink;
  run_command(name, config, sink);
}

}  // namespace

TEST_CASE("config parsing, defaults, and effective tracking") {
  const RunConfig c = RunConfig::parse("# comment\nsolver.mu = 0.5\n\nmask.pattern = radial\n");
  CHECK(c.get_double("solver.mu") == 0.5);
  CHECK(c.get_string("mask.pattern") == "radial");
  CHECK(c.get_int("solver.iterations", 15) == 15);
  CHECK(c.effective().at("solver.iterations") == "15");

  RunConfig overridden = c;
  overridden.set_assignment("solver.mu=2.0");
  CHECK(overridden.get_double("solver.mu") == 2.0);

  CHECK_THROWS_AS(RunConfig::parse("not an assignment\n"), ConfigError);
  CHECK_THROWS_AS(c.get_string("io.input"), ConfigError);
  RunConfig bad;
  bad.set("solver.mu", "abc");
  CHECK_THROWS_AS(bad.get_double("solver.mu"), ConfigError);
}

TEST_CASE("unknown keys are rejected by name") {
  RunConfig c;
  c.set("bogus.key", "1");
  try {
    c.validate_keys();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bogus.key") != std::string::npos);
  }
}

TEST_CASE("dims parsing") {
  const Dims3 d = parse_dims("128x96x16", "phantom.dims");
  CHECK(d.height == 128);
  CHECK(d.width == 96);
  CHECK(d.frames == 16);
  CHECK_THROWS_AS(parse_dims("128x96", "phantom.dims"), ConfigError);
  CHECK_THROWS_AS(parse_dims("axbxc", "phantom.dims"), ConfigError);
  CHECK_THROWS_AS(parse_dims("0x4x4", "phantom.dims"), ConfigError);
}

TEST_CASE("schedule files round trip") {
  SolverSchedule s;
  s.iterations = 3;
  s.acceleration = Acceleration::learned_t;
  std::vector<IterationParams> list(3);
  for (int n = 0; n < 3; ++n) {
    list[n].mu = 0.9 - 0.1 * n;
    list[n].omega1 = 0.4 + 0.1 * n;
    list[n].t = 0.1 * n;
    list[n].lr_threshold.mode = ThresholdSpec::Mode::sigma_max_relative;
    list[n].lr_threshold.value = -2.0 - n;
    list[n].sp_threshold = 0.01 * (n + 1);
    list[n].lr_transform.kind = TransformKind::dft_mode3;
    list[n].sp_transform.kind = TransformKind::dct_mode3;
  }
  s.per_iteration = list;

  const std::string path = path_of("schedule.cfg");
  save_schedule_file(path, s);
  const SolverSchedule back = load_schedule_file(path);
  REQUIRE(back.iterations == 3);
  CHECK(back.acceleration == Acceleration::learned_t);
  for (int n = 0; n < 3; ++n) {
    CHECK(back.params_for(n).mu == list[n].mu);
    CHECK(back.params_for(n).omega1 == list[n].omega1);
    CHECK(back.params_for(n).t == list[n].t);
    CHECK(back.params_for(n).lr_threshold.value == list[n].lr_threshold.value);
    CHECK(std::get<double>(back.params_for(n).sp_threshold) ==
          std::get<double>(list[n].sp_threshold));
    CHECK(back.params_for(n).sp_transform.kind == TransformKind::dct_mode3);
  }

  // attention blocks round trip as well
  SolverSchedule att = s;
  AttentionParams fc = AttentionParams::zero_fc(2);
  fc.fc1_weights(1, 0) = 0.75;
  fc.fc2_bias(0) = -0.5;
  list[1].sp_threshold = fc;
  list[2].sp_threshold = AttentionParams::energy(0.33);
  att.per_iteration = list;
  save_schedule_file(path, att);
  const SolverSchedule att_back = load_schedule_file(path);
  const AttentionParams& fc_back = std::get<AttentionParams>(att_back.params_for(1).sp_threshold);
  CHECK(fc_back.fc1_weights(1, 0) == 0.75);
  CHECK(fc_back.fc2_bias(0) == -0.5);
  CHECK(std::get<AttentionParams>(att_back.params_for(2).sp_threshold).alpha == 0.33);
}

TEST_CASE("cmd_mask writes deterministic files and validates the pattern") {
  RunConfig c = base_pipeline_config();
  c.set("io.output", path_of("mask_a.jotl"));
  std::ostringstream out_a;
  run_command("mask", c, out_a);
  CHECK(out_a.str().find("pattern=vds") != std::string::npos);

  c.set("io.output", path_of("mask_b.jotl"));
  run_quiet("mask", c);
  CHECK(slurp(path_of("mask_a.jotl")) == slurp(path_of("mask_b.jotl")));

  RunConfig bad = base_pipeline_config();
  bad.set("mask.pattern", "spiral");
  bad.set("io.output", path_of("mask_c.jotl"));
  try {
    run_quiet("mask", bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("mask.pattern") != std::string::npos);
    CHECK(what.find("radial") != std::string::npos);  // allowed values listed
  }
}

TEST_CASE("phantom, simulate, and recon compose through files") {
  RunConfig c = base_pipeline_config();
  c.set("io.output", path_of("truth.jotl"));
  run_quiet("phantom", c);

  c.set("io.output", path_of("mask.jotl"));
  run_quiet("mask", c);

  // full-mask simulation preserves the norm
  RunConfig sim_full = base_pipeline_config();
  sim_full.set("mask.pattern", "full");
  sim_full.set("io.input", path_of("truth.jotl"));
  sim_full.set("io.output", path_of("kspace_full.jotl"));
  run_quiet("simulate", sim_full);
  const DynamicImage truth = load_image_jotl(path_of("truth.jotl"));
  const KSpaceData full_k = load_kspace_jotl(path_of("kspace_full.jotl"));
  CHECK(full_k.norm() == doctest::Approx(truth.frobenius_norm()).epsilon(1e-10));

  RunConfig sim = base_pipeline_config();
  sim.set("io.input", path_of("truth.jotl"));
  sim.set("io.mask", path_of("mask.jotl"));
  sim.set("io.output", path_of("kspace.jotl"));
  run_quiet("simulate", sim);

  RunConfig recon;
  recon.set("io.input", path_of("kspace.jotl"));
  recon.set("io.mask", path_of("mask.jotl"));
  recon.set("io.output", path_of("recon.jotl"));
  recon.set("io.report", path_of("report.csv"));
  recon.set("io.reference", path_of("truth.jotl"));
  recon.set("solver.iterations", "5");
  std::ostringstream out;
  run_command("recon", recon, out);
  CHECK(out.str().find("final_psnr_db=") != std::string::npos);

  const std::string report = slurp(path_of("report.csv"));
  CHECK(report.rfind("iteration,fidelity,ttnn,l1,psnr\n", 0) == 0);
  CHECK(std::count(report.begin(), report.end(), '\n') == 6);  // header + 5 rows

  RunConfig missing = sim;
  missing.set("io.input", path_of("nope.jotl"));
  CHECK_THROWS_AS(run_quiet("simulate", missing), IoError);
}

TEST_CASE("noise injection hits the requested snr") {
  RunConfig c = base_pipeline_config();
  c.set("phantom.dims", "64x64x8");
  c.set("io.output", path_of("truth64.jotl"));
  run_quiet("phantom", c);

  RunConfig sim = base_pipeline_config();
  sim.set("phantom.dims", "64x64x8");
  sim.set("io.input", path_of("truth64.jotl"));
  sim.set("io.output", path_of("k_noiseless.jotl"));
  run_quiet("simulate", sim);
  sim.set("io.output", path_of("k_noisy.jotl"));
  sim.set("noise.snr_db", "30");
  sim.set("noise.seed", "5");
  run_quiet("simulate", sim);

  const KSpaceData clean = load_kspace_jotl(path_of("k_noiseless.jotl"));
  const KSpaceData noisy = load_kspace_jotl(path_of("k_noisy.jotl"));
  const double signal = clean.norm();
  const double noise = ksub(noisy, clean).norm();
  const double snr_db = 20.0 * std::log10(signal / noise);
  CHECK(snr_db == doctest::Approx(30.0).epsilon(0.5 / 30.0));
}

TEST_CASE("degenerate csa weight equals the low-rank ista from the cli") {
  RunConfig recon;
  recon.set("io.input", path_of("kspace.jotl"));
  recon.set("io.mask", path_of("mask.jotl"));
  recon.set("solver.iterations", "6");
  recon.set("solver.omega1", "1.0");

  recon.set("solver.id", "csa");
  recon.set("io.output", path_of("recon_csa.jotl"));
  run_quiet("recon", recon);
  recon.set("solver.id", "ista-lr");
  recon.set("io.output", path_of("recon_ista.jotl"));
  run_quiet("recon", recon);

  const DynamicImage a = load_image_jotl(path_of("recon_csa.jotl"));
  const DynamicImage b = load_image_jotl(path_of("recon_ista.jotl"));
  CHECK(jotlas::testing::rel_err(a, b) <= 1e-10);
}

TEST_CASE("tune writes a deterministic schedule file") {
  const fs::path train = work_dir() / "train";
  fs::create_directories(train);
  fs::copy_file(path_of("truth.jotl"), train / "case0.truth.jotl",
                fs::copy_options::overwrite_existing);
  fs::copy_file(path_of("kspace.jotl"), train / "case0.kspace.jotl",
                fs::copy_options::overwrite_existing);
  fs::copy_file(path_of("mask.jotl"), train / "mask.jotl", fs::copy_options::overwrite_existing);

  RunConfig tune;
  tune.set("io.train_dir", train.string());
  tune.set("tuner.budget", "2");
  tune.set("solver.iterations", "3");
  tune.set("io.output", path_of("sched_a.cfg"));
  run_quiet("tune", tune);
  tune.set("io.output", path_of("sched_b.cfg"));
  run_quiet("tune", tune);
  CHECK(slurp(path_of("sched_a.cfg")) == slurp(path_of("sched_b.cfg")));

  // the tuned schedule feeds back into recon and is at least as good as the
  // default on the (single) training phantom
  RunConfig recon;
  recon.set("io.input", path_of("kspace.jotl"));
  recon.set("io.mask", path_of("mask.jotl"));
  recon.set("io.output", path_of("recon_tuned.jotl"));
  recon.set("solver.id", "unrolled-csa");
  recon.set("io.schedule", path_of("sched_a.cfg"));
  run_quiet("recon", recon);
  CHECK(fs::exists(path_of("recon_tuned.jotl")));

  RunConfig default_recon;
  default_recon.set("io.input", path_of("kspace.jotl"));
  default_recon.set("io.mask", path_of("mask.jotl"));
  default_recon.set("io.output", path_of("recon_default3.jotl"));
  default_recon.set("solver.iterations", "3");
  run_quiet("recon", default_recon);

  const DynamicImage truth = load_image_jotl(path_of("truth.jotl"));
  const double tuned_psnr = psnr(load_image_jotl(path_of("recon_tuned.jotl")), truth);
  const double default_psnr = psnr(load_image_jotl(path_of("recon_default3.jotl")), truth);
  CHECK(tuned_psnr >= default_psnr - 1e-9);
}

TEST_CASE("multi-coil simulate and recon round trip through synthesized maps") {
  RunConfig sim = base_pipeline_config();
  sim.set("io.input", path_of("truth.jotl"));
  sim.set("io.mask", path_of("mask.jotl"));
  sim.set("csm.coils", "3");
  sim.set("csm.seed", "4");
  sim.set("io.output", path_of("kspace_mc.jotl"));
  run_quiet("simulate", sim);
  const KSpaceData mc = load_kspace_jotl(path_of("kspace_mc.jotl"));
  CHECK(mc.coils == 3);

  RunConfig recon;
  recon.set("io.input", path_of("kspace_mc.jotl"));
  recon.set("io.mask", path_of("mask.jotl"));
  recon.set("csm.coils", "3");
  recon.set("csm.seed", "4");
  recon.set("io.output", path_of("recon_mc.jotl"));
  recon.set("io.reference", path_of("truth.jotl"));
  recon.set("solver.iterations", "4");
  std::ostringstream out;
  run_command("recon", recon, out);
  CHECK(out.str().find("final_psnr_db=") != std::string::npos);

  // coil-count mismatch is a config error
  RunConfig wrong = recon;
  wrong.set("csm.coils", "2");
  wrong.set("csm.seed", "4");
  CHECK_THROWS_AS(run_quiet("recon", wrong), ConfigError);
}

TEST_CASE("recon exports a pgm frame on request") {
  RunConfig recon;
  recon.set("io.input", path_of("kspace.jotl"));
  recon.set("io.mask", path_of("mask.jotl"));
  recon.set("io.output", path_of("recon_pgm.jotl"));
  recon.set("io.pgm_frame", "1");
  recon.set("solver.iterations", "2");
  run_quiet("recon", recon);
  const std::string pgm = slurp(path_of("recon_pgm.jotl") + ".frame1.pgm");
  CHECK(pgm.rfind("P5\n24 24\n255\n", 0) == 0);
}

TEST_CASE("eval prints the csv table with the inf sentinel") {
  RunConfig eval;
  eval.set("io.input", path_of("truth.jotl"));
  eval.set("io.reference", path_of("truth.jotl"));
  std::ostringstream out;
  run_command("eval", eval, out);
  const std::string text = out.str();
  CHECK(text.rfind("case,psnr_db,ssim\n", 0) == 0);
  CHECK(text.find("inf") != std::string::npos);
  CHECK(text.find("1.000000") != std::string::npos);
}

TEST_CASE("eval agrees with direct metric calls") {
  RunConfig eval;
  eval.set("io.input", path_of("recon.jotl"));
  eval.set("io.reference", path_of("truth.jotl"));
  std::ostringstream out;
  run_command("eval", eval, out);

  const DynamicImage recon = load_image_jotl(path_of("recon.jotl"));
  const DynamicImage truth = load_image_jotl(path_of("truth.jotl"));
  char expected[160];
  std::snprintf(expected, sizeof(expected), "recon,%.6f,%.6f", psnr(recon, truth),
                ssim(recon, truth));
  CHECK(out.str().find(expected) != std::string::npos);
}

TEST_CASE("compare returns identical rows for identical configs") {
  RunConfig cmp;
  cmp.set("io.input", path_of("kspace.jotl"));
  cmp.set("io.mask", path_of("mask.jotl"));
  cmp.set("io.reference", path_of("truth.jotl"));
  cmp.set("solver.iterations", "4");
  cmp.set("compare.solvers", "csa,csa");
  cmp.set("io.report", path_of("compare.csv"));
  run_quiet("compare", cmp);
  std::istringstream table(slurp(path_of("compare.csv")));
  std::string header, row_a, row_b;
  std::getline(table, header);
  std::getline(table, row_a);
  std::getline(table, row_b);
  CHECK(header == "solver,psnr_db,ssim,final_objective,wall_time_s,iterations,iters_to_target");
  // all columns except wall time match
  const auto strip_time = [](const std::string& row) {
    std::vector<std::string> fields;
    std::istringstream ss(row);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    REQUIRE(fields.size() == 7);
    fields[4] = "";
    std::string joined;
    for (const std::string& x : fields) joined += x + "|";
    return joined;
  };
  CHECK(strip_time(row_a) == strip_time(row_b));
}

TEST_CASE("effective config replays to identical outputs") {
  RunConfig c = base_pipeline_config();
  c.set("io.output", path_of("mask_eff_a.jotl"));
  run_quiet("mask", c);

  RunConfig replay = RunConfig::parse(c.effective_text());
  replay.set("io.output", path_of("mask_eff_b.jotl"));
  run_quiet("mask", replay);
  CHECK(slurp(path_of("mask_eff_a.jotl")) == slurp(path_of("mask_eff_b.jotl")));
}

TEST_CASE("unknown command is rejected") {
  std::ostringstream out;
  CHECK_THROWS_AS(run_command("reconstructify", RunConfig{}, out), ConfigError);
}

#ifdef JOTLAS_CLI_PATH
namespace {
int run_shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return status >= 0 ? (status >> 8) & 0xff : -1;
}
}  // namespace

TEST_CASE("cli binary exit codes") {
  const std::string cli = JOTLAS_CLI_PATH;
  const std::string quiet = " > /dev/null 2>&1";

  // success
  {
    const std::string cmd = cli + " phantom --set phantom.dims=8x8x2 --set io.output=" +
                            path_of("exit_truth.jotl") + quiet;
    CHECK(run_shell(cmd) == 0);
  }
  // config error: unknown key
  {
    const std::string cmd = cli + " phantom --set bogus.key=1 --set io.output=" +
                            path_of("exit_x.jotl") + quiet;
    CHECK(run_shell(cmd) == 2);
  }
  // io error: missing input
  {
    const std::string cmd = cli + " simulate --set io.input=" + path_of("missing.jotl") +
                            " --set io.output=" + path_of("exit_y.jotl") + quiet;
    CHECK(run_shell(cmd) == 3);
  }
  // numerical failure: absurd step size blows up the iterates
  {
    RunConfig prep = base_pipeline_config();
    prep.set("phantom.dims", "8x8x2");
    prep.set("io.output", path_of("exit_truth8.jotl"));
    run_quiet("phantom", prep);
    prep.set("io.output", path_of("exit_mask8.jotl"));
    run_quiet("mask", prep);
    RunConfig sim = base_pipeline_config();
    sim.set("phantom.dims", "8x8x2");
    sim.set("io.input", path_of("exit_truth8.jotl"));
    sim.set("io.mask", path_of("exit_mask8.jotl"));
    sim.set("io.output", path_of("exit_k8.jotl"));
    run_quiet("simulate", sim);

    const std::string cmd = cli + " recon --set io.input=" + path_of("exit_k8.jotl") +
                            " --set io.mask=" + path_of("exit_mask8.jotl") +
                            " --set io.output=" + path_of("exit_r8.jotl") +
                            " --set solver.iterations=60 --set solver.mu=1e150" +
                            " --set solver.acceleration=none" + quiet;
    CHECK(run_shell(cmd) == 4);
  }
  // --seed overrides module seeds: identical outputs for identical --seed
  {
    const std::string out_a = path_of("seeded_a.jotl");
    const std::string out_b = path_of("seeded_b.jotl");
    const std::string base = cli + " mask --set phantom.dims=16x16x2 --set mask.pattern=vds" +
                             " --set mask.accel=2 --seed 31 --set io.output=";
    CHECK(run_shell(base + out_a + quiet) == 0);
    CHECK(run_shell(base + out_b + quiet) == 0);
    CHECK(slurp(out_a) == slurp(out_b));
  }
  // --config reads the flat key=value file, --set overrides it
  {
    const std::string cfg = path_of("run.cfg");
    std::ofstream out(cfg);
    out << "phantom.dims = 16x16x2\n"
        << "mask.pattern = equispaced\n"
        << "mask.accel = 2\n"
        << "mask.acs = 4\n"
        << "io.output = " << path_of("cfg_mask.jotl") << "\n";
    out.close();
    CHECK(run_shell(cli + " mask --config " + cfg + quiet) == 0);
    CHECK(fs::exists(path_of("cfg_mask.jotl")));
    CHECK(run_shell(cli + " mask --config " + cfg + " --set io.output=" +
                    path_of("cfg_mask2.jotl") + quiet) == 0);
    CHECK(slurp(path_of("cfg_mask.jotl")) == slurp(path_of("cfg_mask2.jotl")));
  }
}
#endif
