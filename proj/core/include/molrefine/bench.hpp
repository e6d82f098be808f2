// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "molrefine/agent.hpp"
#include "molrefine/objective.hpp"
#include "molrefine/proposer.hpp"

namespace molrefine {

struct BenchConfig {
  std::filesystem::path molecules_file;
  std::vector<ObjectiveSpec> objectives;
  LoopConfig loop;
  ProposerConfig proposer;
  std::optional<std::filesystem::path> database;
  /// 0 picks the number of hardware threads.
  int parallelism = 0;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;

  /// Relative paths resolve against `base_dir`. Throws ConfigError.
  static BenchConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static BenchConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

struct SummaryRow {
  std::string objective;
  /// Signed property list, e.g. "+LogP-TPSA"; loose and strict rows share it.
  std::string base;
  std::string group;      // single / multi
  std::string threshold;  // loose / strict / custom
  std::string mode;
  std::size_t n = 0;
  std::size_t valid = 0;
  std::size_t hits = 0;
  std::size_t aborted = 0;
  /// Hits whose molecule is the given one unchanged.
  std::size_t unchanged_hits = 0;
  double validity_pct = 0.0;
  double hit_pct = 0.0;
  /// Mean similarity over all traces (invalid counted as 0), valid traces, hits.
  std::optional<double> sim_all;
  std::optional<double> sim_valid;
  std::optional<double> sim_hits;
};

struct BenchResult {
  std::vector<SummaryRow> rows;
  std::filesystem::path traces_path;
  std::size_t completed_now = 0;
  std::size_t resumed = 0;
};

struct BenchRunOptions {
  /// Stop after this many new traces (simulates an interrupted run).
  std::optional<std::size_t> stop_after;
};

/// Runs every (objective, molecule) pair not already present in
/// output_dir/traces.jsonl, then writes the reports.
BenchResult run_benchmark(const BenchConfig& config, const BenchRunOptions& options = {});

/// Folds a trace stream into one row per objective, in first-seen order.
std::vector<SummaryRow> aggregate_traces(const std::vector<RefinementTrace>& traces);
std::vector<RefinementTrace> read_traces(const std::filesystem::path& path);

/// Writes summary.csv, summary.txt and plotdata.csv.
void write_report(const std::vector<SummaryRow>& rows, const std::filesystem::path& dir);
std::string summary_csv(const std::vector<SummaryRow>& rows);
std::string summary_text(const std::vector<SummaryRow>& rows);
std::string plot_csv(const std::vector<SummaryRow>& rows);

/// Recomputes the reports from output_dir/traces.jsonl.
std::vector<SummaryRow> rebuild_report(const std::filesystem::path& dir);

/// Seeded draw of n distinct non-blank lines, in input order.
std::vector<std::string> sample_lines(const std::vector<std::string>& lines, std::size_t n, std::uint64_t seed);

}  // namespace molrefine
