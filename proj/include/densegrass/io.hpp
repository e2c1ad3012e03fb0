#pragma once

// Plain-text dataset directories and solver outputs.
//
//   W.csv        2F x P
//   R.csv        2F x 3
//   S_gt.csv     3F x P (optional)
//   meta.json    {"frames": F, "points": P, optional "K", optional "column_ids"}
//   labels_gt.csv, labels.csv   one 1-based label per line
//   S_est.csv    3F x P, original column order
//   diagnostics.json, sweep.csv

#include <densegrass/bench.hpp>
#include <densegrass/core.hpp>
#include <densegrass/solver.hpp>
#include <densegrass/types.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace densegrass {

namespace fs = std::filesystem;

inline std::string format_double(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

inline Matrix read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (true) {
      const std::size_t end = std::min(line.find(',', pos), line.size());
      std::size_t b = pos, e = end;
      while (b < e && (line[b] == ' ' || line[b] == '\t')) ++b;
      while (e > b && (line[e - 1] == ' ' || line[e - 1] == '\t')) --e;
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(line.data() + b, line.data() + e, v);
      if (b == e || ec != std::errc{} || ptr != line.data() + e)
        throw DataError(path.filename().string() + ":" + std::to_string(lineno) + ": not a number: '" +
                        line.substr(b, e - b) + "'");
      row.push_back(v);
      if (end == line.size()) break;
      pos = end + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw DimensionError(path.filename().string() + ":" + std::to_string(lineno) + ": expected " +
                           std::to_string(rows.front().size()) + " columns, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  Matrix M(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows.front().size()));
  for (Index r = 0; r < M.rows(); ++r)
    for (Index c = 0; c < M.cols(); ++c) M(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return M;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

inline void write_csv(const fs::path& path, const Matrix& M) {
  std::string text;
  for (Index r = 0; r < M.rows(); ++r) {
    for (Index c = 0; c < M.cols(); ++c) {
      if (c) text += ',';
      text += format_double(M(r, c));
    }
    text += '\n';
  }
  write_text(path, text);
}

inline std::vector<int> read_labels(const fs::path& path) {
  const Matrix M = read_csv(path);
  if (M.cols() != 1 && M.rows() != 1) throw DimensionError(path.filename().string() + ": expected a single column of labels");
  std::vector<int> out;
  for (Index k = 0; k < M.size(); ++k) {
    const double v = M.reshaped()(k);
    if (v != std::floor(v) || v < 1) throw DataError(path.filename().string() + ": labels must be integers >= 1");
    out.push_back(static_cast<int>(v) - 1);
  }
  return out;
}

inline void write_labels(const fs::path& path, const std::vector<int>& labels) {
  std::string text;
  for (int l : labels) text += std::to_string(l + 1) + '\n';
  write_text(path, text);
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.filename().string() + ": " + e.what());
  }
}

struct DatasetMeta {
  std::optional<int> K;
};

inline Dataset load_dataset(const fs::path& dir, DatasetMeta* meta_out = nullptr) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());
  const fs::path w = dir / "W.csv", r = dir / "R.csv", s = dir / "S_gt.csv", m = dir / "meta.json";
  if (!fs::exists(w)) throw DataError("missing measurements: " + w.string() + " not found");
  if (!fs::exists(r)) throw DataError("missing rotations: " + r.string() + " not found");
  Dataset ds;
  ds.W = read_csv(w);
  ds.R = read_csv(r);
  if (fs::exists(s)) ds.S_gt = read_csv(s);
  ds.F = ds.W.rows() / 2;
  ds.P = ds.W.cols();
  if (ds.W.rows() % 2 != 0) throw DimensionError("W.csv must have an even number of rows");
  if (fs::exists(m)) {
    const auto meta = read_json(m);
    try {
      if (meta.contains("frames") && meta.at("frames").get<Index>() != ds.F)
        throw DimensionError("meta.json frames=" + std::to_string(meta.at("frames").get<Index>()) +
                             " but W.csv holds " + std::to_string(ds.F));
      if (meta.contains("points") && meta.at("points").get<Index>() != ds.P)
        throw DimensionError("meta.json points=" + std::to_string(meta.at("points").get<Index>()) +
                             " but W.csv holds " + std::to_string(ds.P));
      if (meta.contains("column_ids")) ds.column_ids = meta.at("column_ids").get<std::vector<long long>>();
      if (meta_out && meta.contains("K")) meta_out->K = meta.at("K").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError("meta.json: " + std::string(e.what()));
    }
  }
  if (ds.column_ids.empty()) ds.column_ids = default_column_ids(ds.P);
  validate(ds);
  return ds;
}

inline void save_dataset(const fs::path& dir, const Dataset& ds, const nlohmann::json& extra_meta = {}) {
  validate(ds);
  fs::create_directories(dir);
  write_csv(dir / "W.csv", ds.W);
  write_csv(dir / "R.csv", ds.R);
  if (ds.S_gt) write_csv(dir / "S_gt.csv", *ds.S_gt);
  nlohmann::json meta = extra_meta.is_object() ? extra_meta : nlohmann::json::object();
  meta["frames"] = ds.F;
  meta["points"] = ds.P;
  if (ds.column_ids != default_column_ids(ds.P)) meta["column_ids"] = ds.column_ids;
  write_text(dir / "meta.json", meta.dump(2) + "\n");
}

inline void write_scene(const fs::path& dir, const Scene& scene, const SceneSpec& spec) {
  nlohmann::json meta;
  meta["K"] = spec.K_true;
  meta["scene"] = {{"F", spec.F},
                   {"P", spec.P},
                   {"K_true", spec.K_true},
                   {"p_true", spec.p_true},
                   {"deform_amp", spec.deform_amp},
                   {"rot_range", spec.rot_range},
                   {"min_angle", spec.min_angle},
                   {"deform_freq", spec.deform_freq},
                   {"seed", spec.seed}};
  save_dataset(dir, scene.data, meta);
  write_labels(dir / "labels_gt.csv", scene.labels_gt);
}

inline void save_shape(const fs::path& dir, const Matrix& S) {
  fs::create_directories(dir);
  write_csv(dir / "S_est.csv", S);
}

inline nlohmann::json diagnostics_json(const std::vector<IterationRecord>& records, bool timing,
                                       const SolveResult* result = nullptr) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json row = {{"iter", r.iter},           {"gap", r.gap},           {"rho", r.rho},
                          {"reproj", r.reproj},       {"nn_Ssharp", r.nn_Ssharp}, {"nn_Z", r.nn_Z},
                          {"objective", r.objective}, {"label_changes", r.label_changes}};
    if (timing) row["seconds"] = r.seconds;
    rows.push_back(std::move(row));
  }
  nlohmann::json out;
  out["iterations"] = rows;
  out["iteration_count"] = records.size();
  if (result) {
    out["converged"] = result->converged;
    out["stop_reason"] = result->stop_reason;
    out["beta2"] = result->beta2;
  } else {
    out["converged"] = false;
    out["stop_reason"] = "error";
  }
  return out;
}

inline void write_diagnostics(const fs::path& path, const std::vector<IterationRecord>& records, bool timing,
                              const SolveResult* result = nullptr) {
  write_text(path, diagnostics_json(records, timing, result).dump(2) + "\n");
}

inline void write_sweep(const fs::path& path, const std::vector<SweepRow>& rows) {
  std::string text = "lambda_g,seed,e3d,iters,seconds\n";
  for (const auto& r : rows)
    text += format_double(r.lambda) + ',' + std::to_string(r.seed) + ',' + format_double(r.e3d) + ',' +
            std::to_string(r.iters) + ',' + format_double(r.seconds) + '\n';
  write_text(path, text);
}

inline nlohmann::json report_json(const EvalReport& rep) {
  nlohmann::json j;
  j["e3d"] = rep.e3d;
  j["sign_flipped"] = rep.sign_flipped;
  j["per_frame_errors"] = std::vector<double>(rep.per_frame_errors.data(), rep.per_frame_errors.data() + rep.per_frame_errors.size());
  if (rep.label_accuracy) j["label_accuracy"] = *rep.label_accuracy;
  else j["label_accuracy"] = nullptr;
  return j;
}

}  // namespace densegrass
