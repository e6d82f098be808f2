// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "molrefine/bench.hpp"
#include "molrefine/errors.hpp"
#include "molrefine/retrieval.hpp"
#include "test_support.hpp"

namespace molrefine {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::read_text;
using testing::TempDir;

constexpr const char* kReports[] = {"traces.jsonl", "summary.csv", "summary.txt", "plotdata.csv"};

BenchConfig smoke_config(const fs::path& out, int parallelism = 4) {
  auto c = BenchConfig::load(testing::fixture_path("bench_smoke/config.json"));
  c.output_dir = out;
  c.parallelism = parallelism;
  return c;
}

// Re-derives summary.csv from the raw JSON lines without the library's reader or aggregator.
std::string independent_summary(const fs::path& traces) {
  struct Acc {
    std::string group, threshold, mode;
    std::size_t n = 0, valid = 0, hits = 0, aborted = 0, unchanged = 0;
    double all = 0, valid_sum = 0, hit_sum = 0;
  };
  std::vector<std::string> order;
  std::map<std::string, Acc> acc;
  std::ifstream in(traces);
  for (std::string line; std::getline(in, line);) {
    const auto j = json::parse(line);
    const std::string name = j["objective"]["name"];
    if (!acc.contains(name)) {
      order.push_back(name);
      auto& a = acc[name];
      a.group = j["objective"]["terms"].size() == 1 ? "single" : "multi";
      a.threshold = name.find("/loose/") != std::string::npos   ? "loose"
                    : name.find("/strict/") != std::string::npos ? "strict"
                                                                 : "custom";
      const auto& c = j["config"];
      const bool inner = c["inner_loop"], grad = c["gradient_feedback"], ret = c["retrieval"];
      a.mode = inner && grad && ret ? "full" : !inner && grad && ret ? "no-inner"
               : inner && !grad && ret ? "generic" : inner && grad && !ret ? "no-retrieval" : "custom";
    }
    auto& a = acc[name];
    const auto& f = j["final"];
    ++a.n;
    a.aborted += j["aborted"].get<bool>();
    const double sim = f["valid"].get<bool>() && !f["similarity"].is_null() ? f["similarity"].get<double>() : 0.0;
    a.all += sim;
    if (f["valid"].get<bool>()) ++a.valid, a.valid_sum += sim;
    if (f["hit"].get<bool>()) {
      ++a.hits, a.hit_sum += sim;
      a.unchanged += f["unchanged"].get<bool>();
    }
  }
  auto mean = [](double s, std::size_t n) { return n == 0 ? std::string("NA") : fmt::format("{:.4f}", s / n); };
  std::string out =
      "objective,group,threshold,mode,n,valid,hits,aborted,unchanged_hits,validity_pct,hit_pct,sim_all,sim_valid,"
      "sim_hits\n";
  for (const auto& name : order) {
    const auto& a = acc[name];
    out += fmt::format("{},{},{},{},{},{},{},{},{},{:.2f},{:.2f},{},{},{}\n", name, a.group, a.threshold, a.mode, a.n,
                       a.valid, a.hits, a.aborted, a.unchanged, 100.0 * a.valid / a.n, 100.0 * a.hits / a.n,
                       mean(a.all, a.n), mean(a.valid_sum, a.valid), mean(a.hit_sum, a.hits));
  }
  return out;
}

TEST(Bench, DeterministicAcrossRunsAndThreads) {
  TempDir a("bench-a"), b("bench-b");
  const auto ra = run_benchmark(smoke_config(a.path(), 4));
  const auto rb = run_benchmark(smoke_config(b.path(), 1));
  EXPECT_EQ(ra.completed_now, 20U);
  EXPECT_EQ(rb.completed_now, 20U);
  for (const auto* name : kReports) {
    const auto text = read_text(a / name);
    EXPECT_FALSE(text.empty()) << name;
    EXPECT_EQ(text, read_text(b / name)) << name;
  }
  EXPECT_TRUE(fs::exists(a / "run.json"));
}

TEST(Bench, KillAndResumeIsByteIdentical) {
  TempDir full("bench-full"), cut("bench-cut");
  run_benchmark(smoke_config(full.path()));
  const auto partial = run_benchmark(smoke_config(cut.path()), BenchRunOptions{7});
  EXPECT_EQ(partial.completed_now, 7U);
  {
    // A torn write from the interrupted process.
    std::ofstream torn(cut / "traces.jsonl", std::ios::app);
    torn << R"({"abort_reason":"","aborted":fal)";
  }
  const auto resumed = run_benchmark(smoke_config(cut.path()));
  EXPECT_EQ(resumed.resumed, 7U);
  EXPECT_EQ(resumed.completed_now, 13U);
  for (const auto* name : kReports) EXPECT_EQ(read_text(cut / name), read_text(full / name)) << name;
  // Nothing left to do on a third run.
  EXPECT_EQ(run_benchmark(smoke_config(cut.path())).completed_now, 0U);
  EXPECT_EQ(read_text(cut / "traces.jsonl"), read_text(full / "traces.jsonl"));
}

TEST(Bench, IndependentReaggregationMatches) {
  TempDir dir("bench-agg");
  run_benchmark(smoke_config(dir.path()));
  EXPECT_EQ(independent_summary(dir / "traces.jsonl"), read_text(dir / "summary.csv"));
  fs::remove(dir / "summary.csv");
  rebuild_report(dir.path());
  EXPECT_EQ(independent_summary(dir / "traces.jsonl"), read_text(dir / "summary.csv"));
}

TEST(Bench, TracesAreCanonicalAndValid) {
  TempDir dir("bench-order");
  run_benchmark(smoke_config(dir.path()));
  const auto traces = read_traces(dir / "traces.jsonl");
  ASSERT_EQ(traces.size(), 20U);
  const auto molecules = testing::read_lines(testing::fixture_path("bench_smoke/molecules.smi"), true);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    EXPECT_EQ(traces[i].given, molecules[i % 10]);
    EXPECT_EQ(traces[i].objective.name, i < 10 ? "single/loose/+LogP" : "single/strict/-TPSA");
    EXPECT_EQ(validate_trace(traces[i]), std::nullopt);
  }
}

TEST(Bench, WithDatabase) {
  TempDir dir("bench-db");
  std::stringstream in;
  std::size_t n = 0;
  for (const auto& s : testing::read_lines(testing::data_path("zinc_10k.smi"), true)) {
    if (n++ == 200) break;
    in << s << '\n';
  }
  Database::build(in).save(dir / "index.jsonl");
  auto config = smoke_config(dir / "out");
  config.database = dir / "index.jsonl";
  run_benchmark(config);
  bool quoted = false;
  for (const auto& t : read_traces(dir / "out/traces.jsonl")) {
    for (const auto& s : t.steps) quoted = quoted || s.example.has_value();
  }
  EXPECT_TRUE(quoted);
  auto mismatched = config;
  mismatched.loop.fp_bits = 1024;
  EXPECT_THROW(run_benchmark(mismatched), ConfigError);
}

TEST(Bench, EmptyPopulationsPrintNA) {
  SummaryRow r;
  r.objective = "single/strict/+QED";
  r.base = "+QED";
  r.group = "single";
  r.threshold = "strict";
  r.mode = "full";
  r.n = 2;
  r.sim_all = 0.0;
  const auto csv = summary_csv({r});
  EXPECT_NE(csv.find(",0.0000,NA,NA\n"), std::string::npos) << csv;
}

TEST(Bench, SampleLinesIsSeeded) {
  std::vector<std::string> lines;
  for (int i = 0; i < 100; ++i) lines.push_back("C" + std::to_string(i));
  const auto a = sample_lines(lines, 10, 42);
  EXPECT_EQ(a, sample_lines(lines, 10, 42));
  EXPECT_NE(a, sample_lines(lines, 10, 43));
  EXPECT_EQ(a.size(), 10U);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end(), [&](const auto& x, const auto& y) {
    return std::stoi(x.substr(1)) < std::stoi(y.substr(1));
  }));
}

TEST(Bench, ConfigErrors) {
  EXPECT_THROW(BenchConfig::from_json(json::parse(R"({"objectives": ["+LogP:1"]})")), ConfigError);
  EXPECT_THROW(BenchConfig::from_json(json::parse(
                   R"({"molecules": "m.smi", "objectives": [], "proposer": "scripted:s.json", "output_dir": "o"})")),
               ConfigError);
  EXPECT_THROW(BenchConfig::load("/nonexistent/config.json"), ConfigError);
}

}  // namespace
}  // namespace molrefine
