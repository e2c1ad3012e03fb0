#pragma once

// Everything a command-line run can set. Solver and scene fields keep the
// library defaults; the rest are per-command options.

#include <densegrass/bench.hpp>
#include <densegrass/solver.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace densegrass {

struct RunConfig {
  SolverConfig solver;
  SceneSpec scene = standard_scene(0);
  double synth_noise = 0.0;  // lambda applied to W after synthesis
  std::string data;          // dataset directory
  std::string out = ".";     // output directory
  std::string estimate;      // S_est.csv to evaluate
  std::string labels;        // labels.csv to evaluate
  std::string history;       // JSON list of column permutations applied to the estimate
  std::vector<double> lambdas{0.0, 0.01, 0.03, 0.055};
  std::vector<std::uint64_t> noise_seeds{0, 1, 2};
  int threads = 1;
  bool verbose = false;
  bool timing = false;
};

}  // namespace densegrass
