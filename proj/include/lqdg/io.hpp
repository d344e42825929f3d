#pragma once

// JSON and CSV formats.
//
// Matrices are row-major nested arrays. A GameInstance document carries
// "n", "N", "m", "A", "B", "Q", "R" and an optional "X0" (identity when
// absent). A policy document is either {"K": [...]} or the bare array.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lqdg/errors.hpp"
#include "lqdg/game_model.hpp"
#include "lqdg/instance_gen.hpp"
#include "lqdg/rng.hpp"
#include "lqdg/solvers.hpp"

namespace lqdg::io {

using json = nlohmann::json;

inline json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Accepts nested arrays, or a bare number as a 1x1 matrix.
inline Matrix matrix_from_json(const json& j, const std::string& name) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) {
    throw ArgumentError(name + ": expected a nonempty array of rows");
  }
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  if (cols == 0) throw ArgumentError(name + ": rows must be nonempty arrays");
  Matrix M(static_cast<Eigen::Index>(j.size()),
           static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const json& row = j[r];
    if (!row.is_array() || row.size() != cols) {
      throw ArgumentError(name + ": ragged row " + std::to_string(r));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row[c].is_number()) {
        throw ArgumentError(name + ": non-numeric entry");
      }
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          row[c].get<double>();
    }
  }
  return M;
}

inline std::vector<Matrix> matrices_from_json(const json& j,
                                              const std::string& name) {
  if (!j.is_array()) throw ArgumentError(name + ": expected an array");
  std::vector<Matrix> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(matrix_from_json(j[i], name + "[" + std::to_string(i) + "]"));
  }
  return out;
}

inline json matrices_to_json(const std::vector<Matrix>& ms) {
  json out = json::array();
  for (const auto& m : ms) out.push_back(matrix_to_json(m));
  return out;
}

// ---------------------------------------------------------------------------

inline json instance_to_json(const GameInstance& inst) {
  json j;
  j["n"] = inst.n();
  j["N"] = inst.num_players();
  j["m"] = inst.control_dims();
  j["A"] = matrix_to_json(inst.A());
  j["B"] = matrices_to_json(inst.B());
  j["Q"] = matrices_to_json(inst.Q());
  j["R"] = matrices_to_json(inst.R());
  j["X0"] = matrix_to_json(inst.X0());
  return j;
}

inline GameInstance instance_from_json(const json& j) {
  if (!j.is_object()) throw ArgumentError("instance must be a JSON object");
  for (const char* key : {"n", "N", "m", "A", "B", "Q", "R"}) {
    if (!j.contains(key)) {
      throw ArgumentError(std::string("instance is missing \"") + key + "\"");
    }
  }
  const auto n = j.at("n").get<std::size_t>();
  const auto N = j.at("N").get<std::size_t>();
  const auto m = j.at("m").get<std::vector<std::size_t>>();
  Matrix A = matrix_from_json(j.at("A"), "A");
  auto B = matrices_from_json(j.at("B"), "B");
  auto Q = matrices_from_json(j.at("Q"), "Q");
  auto R = matrices_from_json(j.at("R"), "R");
  if (static_cast<std::size_t>(A.rows()) != n || m.size() != N ||
      B.size() != N) {
    throw ArgumentError("instance n/N/m disagree with the matrices");
  }
  for (std::size_t i = 0; i < N; ++i) {
    if (static_cast<std::size_t>(B[i].cols()) != m[i]) {
      throw ArgumentError("m[" + std::to_string(i) + "] disagrees with B");
    }
  }
  Matrix X0 = j.contains("X0") ? matrix_from_json(j.at("X0"), "X0")
                               : Matrix::Identity(A.rows(), A.rows());
  return GameInstance(std::move(A), std::move(B), std::move(Q), std::move(R),
                      std::move(X0));
}

inline json policy_to_json(const PolicySet& pol) {
  return json{{"K", matrices_to_json(pol.K)}};
}

inline PolicySet policy_from_json(const json& j) {
  const json& arr = j.is_object() ? j.at("K") : j;
  return PolicySet{matrices_from_json(arr, "K")};
}

// ---------------------------------------------------------------------------

inline json gen_spec_to_json(const GenSpec& spec) {
  return json{{"n", spec.n},
              {"N", spec.num_players},
              {"m", spec.m},
              {"seed", spec.seed},
              {"target_radius", spec.target_radius},
              {"cost_shift", spec.cost_shift}};
}

inline GenSpec gen_spec_from_json(const json& j) {
  GenSpec spec;
  spec.n = j.at("n").get<std::size_t>();
  spec.num_players = j.at("N").get<std::size_t>();
  spec.m = j.at("m").get<std::vector<std::size_t>>();
  spec.seed = j.value("seed", std::uint64_t{0});
  spec.target_radius = j.value("target_radius", spec.target_radius);
  spec.cost_shift = j.value("cost_shift", spec.cost_shift);
  spec.validate();
  return spec;
}

inline BallSpec ball_spec_from_json(const json& j) {
  BallSpec spec;
  spec.reference = policy_from_json(j.at("reference"));
  spec.radius = j.at("radius").get<double>();
  spec.seed = j.value("seed", std::uint64_t{0});
  spec.max_rejections = j.value("max_rejections", spec.max_rejections);
  return spec;
}

/// Generated instance plus a "meta" block naming its seed and generator.
inline json generated_instance_to_json(const GameInstance& inst,
                                       const GenSpec& spec) {
  json j = instance_to_json(inst);
  j["meta"] = {{"seed", spec.seed},
               {"generator", kGeneratorFamily},
               {"target_radius", spec.target_radius},
               {"cost_shift", spec.cost_shift}};
  return j;
}

// ---------------------------------------------------------------------------

inline json config_to_json(const SolverConfig& cfg) {
  return json{{"algorithm", std::string(to_string(cfg.algorithm))},
              {"eta", cfg.eta},
              {"epsilon", cfg.epsilon},
              {"max_iterations", cfg.max_iterations},
              {"divergence_norm_cap", cfg.divergence_norm_cap},
              {"equilibrium_tolerance", cfg.equilibrium_tolerance}};
}

inline json record_to_json(const IterationRecord& rec) {
  json j{{"k", rec.k},
         {"policy_delta", rec.policy_delta},
         {"e_norm", nullptr},
         {"rho", rec.closed_loop_radius},
         {"elapsed_ns", rec.elapsed_ns}};
  if (rec.e_norm) j["e_norm"] = *rec.e_norm;
  return j;
}

inline json result_to_json(const SolveResult& result) {
  json trace = json::array();
  for (const auto& rec : result.trace) trace.push_back(record_to_json(rec));
  json j{{"status", std::string(to_string(result.status))},
         {"iterations", result.iterations},
         {"K", matrices_to_json(result.final_policies.K)},
         {"trace", std::move(trace)},
         {"config", config_to_json(result.config)}};
  if (!result.message.empty()) j["message"] = result.message;
  return j;
}

// ---------------------------------------------------------------------------

inline constexpr const char* kTraceCsvHeader = "k,policy_delta,e_norm,rho,elapsed_ns";

/// Shortest round-trip decimal form.
inline std::string format_double(double x) {
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

inline std::string trace_csv_row(const IterationRecord& rec) {
  std::string row = std::to_string(rec.k) + "," +
                    format_double(rec.policy_delta) + ",";
  if (rec.e_norm) row += format_double(*rec.e_norm);
  row += "," + format_double(rec.closed_loop_radius) + "," +
         std::to_string(rec.elapsed_ns);
  return row;
}

inline std::string trace_to_csv(const std::vector<IterationRecord>& trace) {
  std::string out = std::string(kTraceCsvHeader) + "\n";
  for (const auto& rec : trace) out += trace_csv_row(rec) + "\n";
  return out;
}

// ---------------------------------------------------------------------------

inline json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ArgumentError(path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

inline GameInstance load_instance(const std::filesystem::path& path) {
  try {
    return instance_from_json(load_json_file(path));
  } catch (const json::exception& e) {
    throw ArgumentError(path.string() + ": " + e.what());
  }
}

inline PolicySet load_policy(const std::filesystem::path& path) {
  try {
    return policy_from_json(load_json_file(path));
  } catch (const json::exception& e) {
    throw ArgumentError(path.string() + ": " + e.what());
  }
}

}  // namespace lqdg::io
