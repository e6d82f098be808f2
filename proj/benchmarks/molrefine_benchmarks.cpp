// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "molrefine/agent.hpp"
#include "molrefine/descriptors.hpp"
#include "molrefine/fingerprint.hpp"
#include "molrefine/retrieval.hpp"
#include "molrefine/smiles.hpp"

namespace {

using namespace molrefine;

const std::vector<std::string>& corpus() {
  static const std::vector<std::string> lines = [] {
    std::vector<std::string> out;
    std::ifstream in(std::string(MOLREFINE_DATA_DIR) + "/zinc_10k.smi");
    for (std::string line; std::getline(in, line) && out.size() < 2000;) {
      std::istringstream f(line);
      std::string s;
      if (f >> s) out.push_back(s);
    }
    return out;
  }();
  return lines;
}

const std::vector<MolGraph>& molecules() {
  static const std::vector<MolGraph> mols = [] {
    std::vector<MolGraph> out;
    for (const auto& s : corpus()) {
      auto o = parse_smiles(s);
      if (o.valid()) out.push_back(o.molecule());
    }
    return out;
  }();
  return mols;
}

const Database& database() {
  static const Database db = [] {
    std::stringstream in;
    for (const auto& s : corpus()) in << s << '\n';
    return Database::build(in);
  }();
  return db;
}

void BM_ParseSmiles(benchmark::State& state) {
  const auto& lines = corpus();
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(parse_smiles(lines[i++ % lines.size()]));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ParseSmiles);

void BM_ParseErrorClassification(benchmark::State& state) {
  const std::vector<std::string> bad = {"C1CC", "C(C", "C12CC12", "CC(C)(C)(C)C", "c1ccc1", "C&C"};
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(parse_smiles(bad[i++ % bad.size()]));
}
BENCHMARK(BM_ParseErrorClassification);

void BM_Properties(benchmark::State& state) {
  const auto& mols = molecules();
  const auto& ids = registered_properties();
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(compute_properties(mols[i++ % mols.size()], ids));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Properties);

void BM_MorganFingerprint(benchmark::State& state) {
  const auto& mols = molecules();
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(morgan_fingerprint(mols[i++ % mols.size()]));
}
BENCHMARK(BM_MorganFingerprint);

void BM_Tanimoto(benchmark::State& state) {
  const auto a = morgan_fingerprint(molecules()[0]);
  const auto b = morgan_fingerprint(molecules()[1]);
  for (auto _ : state) benchmark::DoNotOptimize(tanimoto(a, b));
}
BENCHMARK(BM_Tanimoto);

void BM_Retrieve(benchmark::State& state) {
  const auto& db = database();
  const auto spec = parse_objective("+LogP:0.5,-TPSA:10");
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& q = db[i++ % db.size()];
    benchmark::DoNotOptimize(db.retrieve(spec, q.properties, q.fingerprint, {q.signature}));
  }
  state.counters["records"] = static_cast<double>(db.size());
}
BENCHMARK(BM_Retrieve);

void BM_ScriptedLoop(benchmark::State& state) {
  const auto spec = parse_objective("single/strict/+LogP");
  LoopConfig config;
  for (auto _ : state) {
    ScriptedProposer proposer(std::vector<std::string>{"C1CC", "CCO", "CCCO", "CCCCCC"});
    benchmark::DoNotOptimize(run_loop(config, "CCO", spec, proposer, &database()));
  }
}
BENCHMARK(BM_ScriptedLoop);

}  // namespace

BENCHMARK_MAIN();
