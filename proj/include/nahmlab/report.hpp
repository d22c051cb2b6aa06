#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "nahmlab/config.hpp"
#include "nahmlab/variational.hpp"

namespace nahmlab {

inline constexpr const char* kReportSchema = "nahmlab-report/1";

nlohmann::json to_json(const LieCheck& c);
nlohmann::json to_json(const NewtonRecord& r);
nlohmann::json to_json(const SolverState& s);
nlohmann::json to_json(const Hitchin2DResult& r);
nlohmann::json to_json(const FunctionalReport& r);
nlohmann::json to_json(const DecayFit& f);

/// Per-node CSV on the plane x3 = 0 (all y planes), columns documented in README.
/// omega may be empty; s may be empty.
void write_slice_csv(const std::filesystem::path& path, const Grid3& g, const MatField& H, const MatField& s,
                     const MatField& omega);

/// Collocation table of numeric Toda profiles: case, weights, sigma, q_1..q_n, max_i |residual_i|.
void write_toda_csv(const std::filesystem::path& path, const std::vector<TodaProfile>& profiles);

struct RunOutcome {
  int exit_code = 0;  // 0 ok, 1 contract failed, 2 domain error, 3 solver failure
  nlohmann::json report;
};

/// Execute one configured run, writing the report and CSV under out_dir. Never throws for run failures;
/// they become a failure record in the report.
RunOutcome run(const RunConfig& c, const std::filesystem::path& out_dir, int workers = 1);

/// Machine-readable record for a failed run.
nlohmann::json failure_record(const std::string& kind, const std::string& message,
                              const std::vector<double>& history = {});

}  // namespace nahmlab
