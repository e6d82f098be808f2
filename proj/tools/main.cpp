// SPDX-License-Identifier: Apache-2.0
// molrefine command-line front end.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "molrefine/agent.hpp"
#include "molrefine/bench.hpp"
#include "molrefine/descriptors.hpp"
#include "molrefine/errors.hpp"
#include "molrefine/fingerprint.hpp"
#include "molrefine/retrieval.hpp"
#include "molrefine/signature.hpp"
#include "molrefine/smiles.hpp"

namespace {

using nlohmann::json;
using namespace molrefine;

constexpr int kUsage = 1;
constexpr int kFailure = 2;

MolGraph require_molecule(const std::string& smiles) {
  auto outcome = parse_smiles(smiles);
  if (!outcome.valid()) throw UsageError(fmt::format("'{}' is not a valid molecule: {}", smiles, outcome.error().message()));
  return std::move(std::get<MolGraph>(outcome.value));
}

std::vector<PropertyId> split_properties(const std::string& list) {
  std::vector<PropertyId> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_parse(const std::string& smiles) {
  auto outcome = parse_smiles(smiles);
  json j = {{"input", smiles}, {"valid", outcome.valid()}};
  if (outcome.valid()) {
    const auto& mol = outcome.molecule();
    j["smiles"] = write_smiles(mol);
    j["atoms"] = mol.atom_count();
    j["bonds"] = mol.bond_count();
    j["rings"] = mol.rings().size();
    j["signature"] = graph_signature(mol);
  } else {
    j.update(parse_error_to_json(outcome.error()));
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_props(const std::string& smiles, const std::string& properties, bool sub) {
  const auto mol = require_molecule(smiles);
  auto ids = properties.empty() ? registered_properties() : split_properties(properties);
  json j = {{"smiles", smiles}, {"properties", compute_properties(mol, ids)}};
  if (sub) {
    const auto d = sub_descriptors(mol);
    j["qed_descriptors"] = {{"MW", d.mw}, {"HBA", d.hba}, {"HBD", d.hbd},
                            {"ROTB", d.rotb}, {"AROM", d.arom}, {"ALERTS", d.alerts}};
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_sim(const std::string& a, const std::string& b, int radius, int bits) {
  const double s = tanimoto(morgan_fingerprint(require_molecule(a), radius, bits),
                            morgan_fingerprint(require_molecule(b), radius, bits));
  std::cout << json(s).dump() << '\n';
  return 0;
}

int cmd_db_build(const std::string& input, const std::string& output, int radius, int bits,
                 const std::string& properties) {
  IndexBuildOptions options{bits, radius, split_properties(properties)};
  IndexBuildReport report;
  const auto db = Database::build(std::filesystem::path(input), options, &report);
  for (const auto& s : report.skipped) std::cerr << fmt::format("skipped line {}: {}: {}\n", s.line, s.text, s.reason);
  db.save(output);
  std::cerr << fmt::format("{} records written to {} ({} lines, {} skipped, {} duplicates)\n", db.size(), output,
                           report.lines, report.skipped.size(), report.duplicates);
  return 0;
}

int cmd_db_stats(const std::string& index) {
  const auto db = Database::load(index);
  json props = json::object();
  for (const auto& id : db.header().properties) {
    double lo = 0, hi = 0, sum = 0;
    bool first = true;
    for (const auto& r : db.records()) {
      const double v = r.properties.at(id);
      lo = first ? v : std::min(lo, v);
      hi = first ? v : std::max(hi, v);
      sum += v;
      first = false;
    }
    props[id] = {{"min", lo}, {"max", hi}, {"mean", db.size() ? sum / static_cast<double>(db.size()) : 0.0}};
  }
  json j = {{"records", db.size()},
            {"nbits", db.header().nbits},
            {"radius", db.header().radius},
            {"asset_hashes", db.header().asset_hashes},
            {"properties", props}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_db_query(const std::string& index, const std::string& smiles, const std::string& mhat,
                 const std::string& objective) {
  const auto db = Database::load(index);
  const auto spec = parse_objective(objective);
  const auto m = require_molecule(smiles);
  const auto q = require_molecule(mhat.empty() ? smiles : mhat);
  const auto fp = morgan_fingerprint(q, db.header().radius, db.header().nbits);
  const auto hit = db.retrieve(spec, compute_properties(m, db.header().properties), fp,
                               {graph_signature(m), graph_signature(q)});
  if (!hit) {
    std::cout << "null\n";
    return 0;
  }
  const auto& r = db[*hit];
  std::cout << json{{"index", *hit}, {"smiles", r.smiles}, {"properties", r.properties},
                    {"similarity", tanimoto(r.fingerprint, fp)}}
                   .dump(2)
            << '\n';
  return 0;
}

int cmd_db_sample(const std::string& input, const std::string& output, std::size_t n, std::uint64_t seed) {
  std::ifstream in(input);
  if (!in) throw ConfigError(fmt::format("cannot read {}", input));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  const auto picked = sample_lines(lines, n, seed);
  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!output.empty()) {
    file.open(output);
    if (!file) throw BuildError(fmt::format("cannot write {}", output));
    out = &file;
  }
  for (const auto& l : picked) *out << l << '\n';
  return 0;
}

struct OptimizeArgs {
  std::string smiles;
  std::string objective;
  std::string mode = "full";
  std::string proposer;
  std::string database;
  std::string cache;
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  int iterations = 3;
  double rps = 0.0;
};

int cmd_optimize(const OptimizeArgs& a) {
  LoopConfig loop;
  loop.max_iterations = a.iterations;
  apply_mode(loop, a.mode);
  auto pc = proposer_config_from_spec(a.proposer);
  if (pc.kind == ProposerConfig::Kind::kRemoteChat && a.proposer.starts_with("remote:")) {
    pc.remote.model = a.model;
    pc.remote.api_key_env = a.api_key_env;
    pc.remote.requests_per_second = a.rps;
  }
  if (!a.cache.empty()) pc.cache_dir = a.cache;
  if (pc.kind == ProposerConfig::Kind::kRemoteChat) {
    loop.generation.model = pc.remote.model;
    loop.generation.temperature = pc.remote.temperature;
    loop.generation.max_tokens = pc.remote.max_tokens;
  }
  std::optional<Database> db;
  if (!a.database.empty()) db = Database::load(a.database);
  auto proposer = make_proposer_factory(pc)();
  const auto trace = run_loop(loop, a.smiles, parse_objective(a.objective), *proposer, db ? &*db : nullptr);
  std::cout << trace_to_json(trace).dump(2) << '\n';
  if (trace.aborted) {
    std::cerr << "aborted: " << trace.abort_reason << '\n';
    return kFailure;
  }
  return 0;
}

int cmd_bench(const std::string& config_path, std::size_t stop_after) {
  const auto config = BenchConfig::load(config_path);
  BenchRunOptions options;
  if (stop_after > 0) options.stop_after = stop_after;
  const auto result = run_benchmark(config, options);
  std::cerr << fmt::format("{} traces run, {} resumed; reports in {}\n", result.completed_now, result.resumed,
                           config.output_dir.string());
  std::cout << summary_text(result.rows);
  return 0;
}

int cmd_report(const std::string& dir) {
  std::cout << summary_text(rebuild_report(dir));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Molecule refinement toolkit: SMILES validation, descriptors, retrieval and LLM refinement loops"};
  app.require_subcommand(1);
  std::function<int()> action;

  std::string smiles, smiles_b, properties, input, output, index, mhat, objective, dir;
  int radius = kDefaultRadius;
  int bits = kDefaultBits;
  bool sub = false;
  std::size_t n = 500;
  std::uint64_t seed = 0;
  std::size_t stop_after = 0;
  OptimizeArgs opt;

  auto* parse = app.add_subcommand("parse", "Validate a SMILES string and print the outcome as JSON");
  parse->add_option("smiles", smiles)->required();
  parse->callback([&] { action = [&] { return cmd_parse(smiles); }; });

  auto* props = app.add_subcommand("props", "Compute molecular properties");
  props->add_option("smiles", smiles)->required();
  props->add_option("--properties", properties, "Comma-separated property ids (default: all)");
  props->add_flag("--qed-descriptors", sub, "Also print the QED sub-descriptors");
  props->callback([&] { action = [&] { return cmd_props(smiles, properties, sub); }; });

  auto* sim = app.add_subcommand("sim", "Tanimoto similarity of two molecules");
  sim->add_option("a", smiles)->required();
  sim->add_option("b", smiles_b)->required();
  sim->add_option("--radius", radius);
  sim->add_option("--bits", bits);
  sim->callback([&] { action = [&] { return cmd_sim(smiles, smiles_b, radius, bits); }; });

  auto* db = app.add_subcommand("db", "Example-molecule database");
  db->require_subcommand(1);
  auto* build = db->add_subcommand("build", "Build an index from a SMILES file");
  build->add_option("input", input)->required();
  build->add_option("-o,--output", output)->required();
  build->add_option("--radius", radius);
  build->add_option("--bits", bits);
  build->add_option("--properties", properties);
  build->callback([&] { action = [&] { return cmd_db_build(input, output, radius, bits, properties); }; });
  auto* stats = db->add_subcommand("stats", "Summarize an index");
  stats->add_option("index", index)->required();
  stats->callback([&] { action = [&] { return cmd_db_stats(index); }; });
  auto* query = db->add_subcommand("query", "Retrieve the best example for a molecule and objective");
  query->add_option("index", index)->required();
  query->add_option("smiles", smiles, "Given molecule")->required();
  query->add_option("--modified", mhat, "Modified molecule used for similarity (default: the given one)");
  query->add_option("--objective", objective)->required();
  query->callback([&] { action = [&] { return cmd_db_query(index, smiles, mhat, objective); }; });
  auto* sample = db->add_subcommand("sample", "Draw a seeded sample of lines from a SMILES file");
  sample->add_option("input", input)->required();
  sample->add_option("-n", n);
  sample->add_option("--seed", seed);
  sample->add_option("-o,--output", output);
  sample->callback([&] { action = [&] { return cmd_db_sample(input, output, n, seed); }; });

  auto* optimize = app.add_subcommand("optimize", "Run the refinement loop on one molecule and print the trace");
  optimize->add_option("smiles", opt.smiles)->required();
  optimize->add_option("--objective", opt.objective, "Compact form (+LogP:0.5,-TPSA:10) or preset name")->required();
  optimize->add_option("--mode", opt.mode)->check(CLI::IsMember({"full", "no-inner", "generic", "no-retrieval"}));
  optimize->add_option("--proposer", opt.proposer, "scripted:<file>, remote:<base_url> or a JSON object")->required();
  optimize->add_option("--db", opt.database, "Index used for example retrieval");
  optimize->add_option("--cache", opt.cache, "Response cache directory");
  optimize->add_option("--model", opt.model);
  optimize->add_option("--api-key-env", opt.api_key_env);
  optimize->add_option("--rps", opt.rps, "Request rate limit");
  optimize->add_option("-T,--iterations", opt.iterations)->check(CLI::PositiveNumber);
  optimize->callback([&] { action = [&] { return cmd_optimize(opt); }; });

  auto* bench = app.add_subcommand("bench", "Run a benchmark described by a JSON config");
  bench->add_option("--config", input)->required();
  bench->add_option("--stop-after", stop_after, "Stop after this many new traces")->group("");
  bench->callback([&] { action = [&] { return cmd_bench(input, stop_after); }; });

  auto* report = app.add_subcommand("report", "Rebuild reports from a results directory");
  report->add_option("dir", dir)->required();
  report->callback([&] { action = [&] { return cmd_report(dir); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    return action();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
