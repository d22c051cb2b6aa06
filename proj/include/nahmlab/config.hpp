#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nahmlab/holo.hpp"
#include "nahmlab/solver.hpp"

namespace nahmlab {

enum class RunMode { VerifyLie, VerifyToda, VerifyModels, Hitchin2D, Solve, KnotSolve, Donaldson, Uniqueness };

std::string to_string(RunMode m);

/// Bad config text. Carries the offending key (may be empty for syntax errors) and 1-based line (0 if none).
class ParseError : public DomainError {
 public:
  ParseError(const std::string& msg, std::string key, int line);
  const std::string& key() const noexcept { return key_; }
  int line() const noexcept { return line_; }

 private:
  std::string key_;
  int line_;
};

struct GridSpec {
  int nx = 16, nz = 16;
  double y_min = 0.01, y_max = 8.0;
  int ny = 0;                     // > 0 fixes the node count
  double nodes_per_decade = 12.0; // used when ny == 0
};

struct HiggsSpec {
  HiggsKind kind = HiggsKind::HitchinSection;
  std::vector<TrigPoly> q;  // q_2 .. q_{n+1}; missing entries are zero
  std::vector<int> knot_weights;
  std::optional<double> knot_x2, knot_x3;  // default: cell center next to the origin
};

struct RunConfig {
  RunMode mode = RunMode::VerifyLie;
  int n = 1;
  GridSpec grid;
  HiggsSpec higgs;
  SolverOptions solver;
  double y_c = 1.0;
  int background_order = 0;
  // verify-toda
  std::vector<std::vector<int>> toda_weights;  // empty: the standard suite for n
  // donaldson / uniqueness
  double perturbation = 0.3;
  int directions = 100;
  unsigned seed = 1;
  int quad_nodes = 8;
  // outputs, relative to the output directory
  std::string report = "report.json";
  std::string csv = "slice.csv";
};

/// Flat key = value lines; '#' starts a comment; optional [section] headers group keys but do not scope them.
RunConfig parse_config(const std::string& text);
/// Canonical text with every key, parseable by parse_config.
std::string serialize_config(const RunConfig& c);

bool operator==(const RunConfig& a, const RunConfig& b);

Grid3 make_grid(const GridSpec& g);
HiggsData make_higgs(const LieContext& ctx, const RunConfig& c);

}  // namespace nahmlab
