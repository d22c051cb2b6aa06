// nahmlab: run one configured verification or solve and write its report.
//
//   nahmlab --config run.conf --output out/ [--workers N] [--verbosity info]
//
// Exit status: 0 all contracts of the mode pass, 1 a contract failed, 2 parse or domain error,
// 3 solver failure. Failures still write a report with a failure record.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "nahmlab/report.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Extended Bogomolny equation laboratory"};
  std::string config_path, output_dir = "out", verbosity = "info";
  int workers = 1;
  app.add_option("-c,--config", config_path, "Run configuration (key = value)")->required()->check(CLI::ExistingFile);
  app.add_option("-o,--output", output_dir, "Output directory for report and CSV");
  app.add_option("-w,--workers", workers, "Worker threads")->check(CLI::Range(1, 1024));
  app.add_option("-v,--verbosity", verbosity, "Log level")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(verbosity));

  std::ifstream in(config_path);
  std::stringstream text;
  text << in.rdbuf();

  nahmlab::RunConfig cfg;
  try {
    cfg = nahmlab::parse_config(text.str());
  } catch (const nahmlab::ParseError& e) {
    spdlog::error("config: {}", e.what());
    std::filesystem::create_directories(output_dir);
    nlohmann::json rep{{"schema", nahmlab::kReportSchema}, {"status", "failed"}};
    rep["failure"] = nahmlab::failure_record("parse", e.what());
    rep["failure"]["key"] = e.key();
    rep["failure"]["line"] = e.line();
    std::ofstream(std::filesystem::path(output_dir) / "report.json") << rep.dump(2) << '\n';
    return 2;
  }

  spdlog::info("mode {} n={} -> {}", nahmlab::to_string(cfg.mode), cfg.n, output_dir);
  const auto outcome = nahmlab::run(cfg, output_dir, workers);
  const auto& rep = outcome.report;
  if (rep.contains("failure"))
    spdlog::error("{} failure: {}", rep["failure"]["error_kind"].get<std::string>(),
                  rep["failure"]["message"].get<std::string>());
  spdlog::info("status {} (exit {}) in {:.2f} s", rep["status"].get<std::string>(), outcome.exit_code,
               rep["timing"]["seconds"].get<double>());
  return outcome.exit_code;
}
