#pragma once

// Subcommands of the `pgx` command-line tool. Each returns an exit status; diagnostics go to
// `err`, data goes to files (and short summaries to `out`).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "pgx/growth.hpp"
#include "pgx/linking.hpp"

namespace pgx::cli {

enum ExitStatus : int { kSuccess = 0, kInputError = 1, kInternalError = 2 };

struct EvaluateOptions {
  std::filesystem::path ref;
  std::filesystem::path pred;
  std::optional<std::filesystem::path> vessels;
  double min_cc = kDefaultMinComponentCc;
  int connectivity = 26;
  std::filesystem::path out;  // metrics CSV; link summary goes to <stem>.links.json
};

struct TrackOptions {
  std::filesystem::path manifest;
  std::filesystem::path out;  // series CSV
  double min_cc = kDefaultMinComponentCc;
  int connectivity = 26;
};

struct FitOptions {
  std::filesystem::path series;
  std::string models = "all";
  std::size_t budget_evals = 50'000;
  double budget_seconds = 90.0;
  std::uint64_t seed = 1;
  std::filesystem::path out;  // fits JSON; report goes to <stem>.report.csv
};

struct ObserverStatsOptions {
  std::filesystem::path pairs;
  double alpha = 0.05;
  std::filesystem::path out;
};

struct DistanceMapOptions {
  std::filesystem::path ref;
  std::filesystem::path pred;
  std::filesystem::path out;
};

std::filesystem::path links_path_for(const std::filesystem::path& metrics_csv);
std::filesystem::path report_path_for(const std::filesystem::path& fits_json);

/// Seed of the optimization run for the given job of a cohort fit.
std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t job_index);

int cmd_evaluate(const EvaluateOptions& opt, std::ostream& out, std::ostream& err);
int cmd_track(const TrackOptions& opt, std::ostream& out, std::ostream& err);
int cmd_fit(const FitOptions& opt, std::ostream& out, std::ostream& err);
int cmd_observer_stats(const ObserverStatsOptions& opt, std::ostream& out, std::ostream& err);
int cmd_distance_map(const DistanceMapOptions& opt, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a subcommand.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pgx::cli
