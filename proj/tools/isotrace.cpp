// Copyright 2026 The isotrace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// isotrace: black-box training-data audits of generative models.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "isotrace/audit.hpp"
#include "isotrace/error.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> cache;
  std::optional<std::size_t> max_in_flight;
  bool verbose = false;
  std::string run_dir;
};

isotrace::AuditConfig load_config(const Options& o) {
  isotrace::AuditConfig config = o.config_path.empty()
                                     ? isotrace::AuditConfig::from_json(nlohmann::json::object(), fs::current_path())
                                     : isotrace::AuditConfig::load(o.config_path);
  // Command-line paths are relative to the working directory.
  if (o.seed) config.seed = *o.seed;
  if (o.out) config.output_dir = fs::absolute(*o.out).string();
  if (o.cache) config.cache_dir = fs::absolute(*o.cache).string();
  if (o.max_in_flight) config.max_in_flight = *o.max_in_flight;
  if (config.max_in_flight == 0) throw isotrace::ConfigError("--max-in-flight must be at least 1");
  return config;
}

isotrace::AuditConfig require_config(const Options& o) {
  if (o.config_path.empty()) throw isotrace::ConfigError("--config is required for this command");
  return load_config(o);
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("isotrace");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"isotrace: black-box training-data audits via isotope probes"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config_path, "Audit config (JSON)");
  app.add_option("--seed", o.seed, "Override the master seed");
  app.add_option("--out", o.out, "Override the output directory");
  app.add_option("--cache", o.cache, "Override the response cache directory");
  app.add_option("--max-in-flight", o.max_in_flight, "Concurrent backend requests");
  app.add_flag("--verbose", o.verbose, "Debug logging");
  // Subcommands hand the options above back to the app, so they may appear
  // on either side of the subcommand name.
  app.fallthrough();

  CLI::App* detect = app.add_subcommand("detect", "Run an audit and decide whether the dataset was trained on");
  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo validation of the audit statistics");
  CLI::App* baseline = app.add_subcommand("baseline", "Continuation-similarity baseline detectors");
  CLI::App* report = app.add_subcommand("report", "Consolidate a finished run directory");
  report->add_option("run_dir", o.run_dir, "Run directory (defaults to --out or the config's output_dir)");
  CLI::App* calibrate = app.add_subcommand("calibrate", "Estimate p_n from a control dataset");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return isotrace::kExitError;
  }
  spdlog::set_level(o.verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (detect->parsed()) {
      const isotrace::DetectResult r = isotrace::cmd_detect(require_config(o));
      std::cout << r.summary;
      return r.exit_code;
    }
    if (simulate->parsed()) {
      const isotrace::AuditConfig config = load_config(o);
      const isotrace::ValidationReport r = isotrace::cmd_simulate(config);
      std::size_t dominated = 0;
      for (const auto& cell : r.lemma) dominated += cell.dominated() ? 1 : 0;
      std::cout << "isotrace simulate: " << r.lemma.size() << " N cells (" << dominated
                << " within the error bound), " << r.attack.size() << " attack cells, "
                << r.config.trials << " trials each\n"
                << "  written to " << config.resolve(config.output_dir).string() << "\n";
      return isotrace::kExitNotDetected;
    }
    if (baseline->parsed()) {
      const auto summaries = isotrace::cmd_baseline(require_config(o));
      std::cout << "isotrace baseline:\n";
      for (const auto& s : summaries) {
        std::cout << "  " << s.metric << ": member mean " << s.mean_member << ", non-member mean "
                  << s.mean_nonmember;
        if (s.welch) std::cout << ", Welch p = " << s.welch->p_two_sided;
        if (!s.sweep.empty()) std::cout << ", best accuracy " << s.best_accuracy;
        std::cout << "\n";
      }
      return isotrace::kExitNotDetected;
    }
    if (report->parsed()) {
      fs::path dir = o.run_dir;
      if (dir.empty() && o.out) dir = *o.out;
      if (dir.empty()) {
        const isotrace::AuditConfig config = require_config(o);
        dir = config.resolve(config.output_dir);
      }
      const nlohmann::json r = isotrace::cmd_report(dir);
      std::cout << "isotrace report: " << r.at("verdict").get<std::string>() << "; consolidated report at "
                << (dir / "consolidated_report.json").string() << "\n";
      return isotrace::kExitNotDetected;
    }
    if (calibrate->parsed()) {
      const isotrace::Calibration c = isotrace::cmd_calibrate(require_config(o));
      std::cout << "isotrace calibrate: p_n = " << c.priors.p_n << " from " << c.n
                << " control observations (raw mean " << c.raw_mean << ")\n";
      return isotrace::kExitNotDetected;
    }
  } catch (const isotrace::Error& e) {
    std::cerr << "error [" << e.module() << "]: " << e.what() << "\n";
    if (!e.hint().empty()) std::cerr << "  hint: " << e.hint() << "\n";
    return isotrace::kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return isotrace::kExitError;
  }
  return isotrace::kExitError;
}
