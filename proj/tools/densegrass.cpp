// densegrass: synthesize scenes, reconstruct, evaluate and sweep noise levels.

#include <densegrass/densegrass.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

namespace dg = densegrass;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

void verbose_row(const dg::IterationRecord& r) {
  std::fprintf(stderr, "%5d  %12.4e  %10.3e  %12.5e  %14.7e  %6ld\n", r.iter, r.gap, r.rho, r.reproj, r.objective,
               static_cast<long>(r.label_changes));
}

std::vector<dg::Permutation> read_history(const std::string& path) {
  if (path.empty()) return {};
  const json j = dg::read_json(path);
  const json& list = j.is_object() && j.contains("history") ? j.at("history") : j;
  std::vector<dg::Permutation> out;
  try {
    for (const auto& p : list) out.push_back(p.get<dg::Permutation>());
  } catch (const json::exception& e) {
    throw dg::DataError(path + ": " + e.what());
  }
  for (const auto& p : out)
    if (!dg::is_permutation(p)) throw dg::DataError(path + ": entry is not a permutation");
  return out;
}

int cmd_synth(const dg::RunConfig& rc) {
  dg::Scene scene = dg::generate_scene(rc.scene);
  if (rc.synth_noise > 0) scene.data.W = dg::add_noise(scene.data.W, rc.synth_noise, rc.scene.seed);
  dg::write_scene(rc.out, scene, rc.scene);
  print_json({{"out", rc.out}, {"frames", scene.data.F}, {"points", scene.data.P}, {"K_true", rc.scene.K_true},
              {"patch_draws", scene.patch_draws}});
  return 0;
}

int cmd_reconstruct(const dg::RunConfig& rc) {
  const dg::Dataset ds = dg::load_dataset(rc.data);
  std::vector<dg::IterationRecord> records;
  if (rc.verbose) std::fprintf(stderr, " iter           gap         rho        reproj       objective  moved\n");
  fs::create_directories(rc.out);
  try {
    const dg::SolveResult res = dg::admm_solve(ds, rc.solver, [&](const dg::IterationRecord& r) {
      records.push_back(r);
      if (rc.verbose) verbose_row(r);
    });
    dg::save_shape(rc.out, res.S_est);
    dg::write_labels(fs::path(rc.out) / "labels.csv", res.labels.original_order_labels());
    dg::write_diagnostics(fs::path(rc.out) / "diagnostics.json", res.diagnostics, rc.timing, &res);
    json summary = {{"out", rc.out},
                    {"iterations", res.diagnostics.size()},
                    {"converged", res.converged},
                    {"stop_reason", res.stop_reason},
                    {"final_gap", res.diagnostics.back().gap}};
    if (ds.S_gt) summary["e3d"] = dg::e3d(res.S_est, *ds.S_gt).e3d;
    print_json(summary);
  } catch (const dg::NumericalError&) {
    dg::write_diagnostics(fs::path(rc.out) / "diagnostics.json", records, rc.timing);
    throw;
  }
  return 0;
}

int cmd_eval(const dg::RunConfig& rc) {
  const dg::Dataset ds = dg::load_dataset(rc.data);
  if (!ds.S_gt) throw dg::DataError("missing ground truth: " + (fs::path(rc.data) / "S_gt.csv").string() + " not found");
  const fs::path est = rc.estimate.empty() ? fs::path(rc.out) / "S_est.csv" : fs::path(rc.estimate);
  if (!fs::exists(est)) throw dg::DataError("missing estimate: " + est.string() + " not found");
  const dg::Matrix S = dg::read_csv(est);
  dg::EvalReport rep = dg::e3d(S, *ds.S_gt, read_history(rc.history));
  if (!rc.labels.empty()) {
    const fs::path gt = fs::path(rc.data) / "labels_gt.csv";
    if (!fs::exists(gt)) throw dg::DataError("missing ground-truth labels: " + gt.string() + " not found");
    rep.label_accuracy = dg::label_accuracy(dg::read_labels(rc.labels), dg::read_labels(gt));
  }
  print_json(dg::report_json(rep));
  return 0;
}

int cmd_sweep(const dg::RunConfig& rc) {
  const dg::Dataset ds = dg::load_dataset(rc.data);
  const auto rows = dg::noise_sweep(ds, rc.solver, rc.lambdas, rc.noise_seeds);
  fs::create_directories(rc.out);
  dg::write_sweep(fs::path(rc.out) / "sweep.csv", rows);
  if (rc.verbose) {
    std::fprintf(stderr, "   lambda  seed         e3d  iters\n");
    for (const auto& r : rows)
      std::fprintf(stderr, "%9.4f  %4llu  %10.6f  %5d\n", r.lambda, static_cast<unsigned long long>(r.seed), r.e3d, r.iters);
  }
  json means = json::array();
  for (const auto& [lambda, mean] : dg::sweep_means(rows)) means.push_back({{"lambda_g", lambda}, {"mean_e3d", mean}});
  print_json({{"out", (fs::path(rc.out) / "sweep.csv").string()}, {"runs", rows.size()}, {"means", means}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  dg::RunConfig rc;
  CLI::App app{"Dense non-rigid structure from motion with Grassmannian subspace grouping"};
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "Read options from a key = value file (unknown keys are rejected)");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1, 1);

  auto& s = rc.solver;
  app.add_option("--seed", s.seed, "Seed for every random choice (scene, noise, clustering)");
  app.add_option("--threads", rc.threads, "Upper bound on worker threads")->check(CLI::PositiveNumber);
  app.add_option("--max-iter", s.max_iter, "Maximum ADMM iterations")->check(CLI::PositiveNumber);
  app.add_option("--beta1", s.beta1, "Weight of the self-expression term");
  app.add_option("--beta2", s.beta2, "Weight of the shape nuclear norm; negative selects 0.35 * rms(W)");
  app.add_option("--beta3", s.beta3, "Weight of the coefficient nuclear norm");
  app.add_option("--rho0", s.rho0, "Initial penalty");
  app.add_option("--rho-max", s.rho_max, "Penalty cap");
  app.add_option("--eps", s.eps, "Stopping tolerance on the constraint gap");
  app.add_option("--c", s.c, "Penalty growth factor");
  app.add_option("--K", s.K, "Number of local subspaces (synth: number of patches)")->check(CLI::PositiveNumber);
  app.add_option("--p", s.p, "Rank of each local trajectory subspace")->check(CLI::PositiveNumber);
  app.add_option("--d-tilde", s.d_tilde, "Dimension of the projected space; 0 selects min(max(2p, 12), max(p, 3F - 1))");
  app.add_option("--projection-stride", s.projection_stride, "Refit the projection every N iterations")
      ->check(CLI::PositiveNumber);
  app.add_option("--refine", s.refine, "Refine each regrouping by nearest-subspace reassignment in image space");
  app.add_option("--out", rc.out, "Output directory");
  app.add_flag("--verbose", rc.verbose, "Print per-iteration tables to stderr");
  app.add_flag("--timing", rc.timing, "Record wall-clock seconds in diagnostics.json");

  auto* synth = app.add_subcommand("synth", "Write a synthetic scene with ground truth");
  synth->fallthrough();
  synth->add_option("--F", rc.scene.F, "Frames")->check(CLI::PositiveNumber);
  synth->add_option("--P", rc.scene.P, "Points")->check(CLI::PositiveNumber);
  synth->add_option("--p-true", rc.scene.p_true, "Rank of each patch's trajectory subspace");
  synth->add_option("--deform-amp", rc.scene.deform_amp, "Deformation amplitude");
  synth->add_option("--rot-range", rc.scene.rot_range, "Maximum rotation angle in degrees");
  synth->add_option("--min-angle", rc.scene.min_angle, "Minimum largest principal angle between patch subspaces, degrees");
  synth->add_option("--deform-freq", rc.scene.deform_freq, "Deformation cycles over the sequence");
  synth->add_option("--noise", rc.synth_noise, "Noise level lambda; sigma = lambda * max|W|");

  auto* recon = app.add_subcommand("reconstruct", "Recover the shape from a dataset directory");
  recon->fallthrough();
  recon->add_option("data,--data", rc.data, "Dataset directory")->required();

  auto* eval = app.add_subcommand("eval", "Score an estimate against ground truth");
  eval->fallthrough();
  eval->add_option("data,--data", rc.data, "Dataset directory")->required();
  eval->add_option("--estimate", rc.estimate, "Estimated shape CSV; defaults to OUT/S_est.csv");
  eval->add_option("--labels", rc.labels, "Estimated labels CSV, scored against labels_gt.csv");
  eval->add_option("--history", rc.history, "JSON list of column permutations applied to the estimate");

  auto* sweep = app.add_subcommand("sweep-noise", "Reconstruct under increasing measurement noise");
  sweep->fallthrough();
  sweep->add_option("data,--data", rc.data, "Dataset directory with ground truth")->required();
  sweep->add_option("--lambdas", rc.lambdas, "Noise levels")->delimiter(',');
  sweep->add_option("--noise-seeds", rc.noise_seeds, "Noise seeds per level")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    Eigen::setNbThreads(rc.threads);
    rc.scene.seed = s.seed;
    rc.scene.K_true = s.K;
    if (*synth) return cmd_synth(rc);
    if (*recon || *sweep) {
      if (app.get_option("--K")->count() == 0) {
        const fs::path m = fs::path(rc.data) / "meta.json";
        if (fs::exists(m)) {
          const json j = dg::read_json(m);
          if (j.contains("K") && j.at("K").is_number_integer()) s.K = j.at("K").get<int>();
        }
      }
      return *recon ? cmd_reconstruct(rc) : cmd_sweep(rc);
    }
    if (*eval) return cmd_eval(rc);
  } catch (const dg::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const dg::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
