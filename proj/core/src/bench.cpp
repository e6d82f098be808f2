// SPDX-License-Identifier: Apache-2.0
#include "molrefine/bench.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <unistd.h>

#include <fmt/format.h>

#include "molrefine/digest.hpp"
#include "molrefine/errors.hpp"
#include "molrefine/smiles.hpp"

namespace molrefine {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomically(const fs::path& path, std::string_view content) {
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw BuildError(fmt::format("cannot write {}", tmp.string()));
    out << content;
    if (!out.flush()) throw BuildError(fmt::format("write failed for {}", tmp.string()));
  }
  fs::rename(tmp, path);
}

std::vector<std::string> read_molecules(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read molecules file {}", path.string()));
  std::vector<std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream tokens(line);
    std::string smiles;
    if (!(tokens >> smiles) || smiles.front() == '#') continue;
    auto outcome = parse_smiles(smiles);
    if (!outcome.valid()) {
      throw ConfigError(fmt::format("{} line {}: given molecule is invalid: {}", path.string(), line_no,
                                    outcome.error().message()));
    }
    out.push_back(smiles);
  }
  if (out.empty()) throw ConfigError(fmt::format("no molecules in {}", path.string()));
  return out;
}

std::string objective_base(const ObjectiveSpec& spec) {
  std::string out;
  for (const auto& t : spec.terms) out += fmt::format("{}{}", t.direction == Direction::kIncrease ? '+' : '-', t.property);
  return out;
}

std::string threshold_class(const ObjectiveSpec& spec) {
  const bool loose = std::all_of(spec.terms.begin(), spec.terms.end(), [](const auto& t) { return t.magnitude == 0.0; });
  if (loose) return "loose";
  const bool strict = std::all_of(spec.terms.begin(), spec.terms.end(), [](const auto& t) {
    return is_registered_property(t.property) && t.magnitude == strict_magnitude(t.property);
  });
  return strict ? "strict" : "custom";
}

std::string fmt_pct(double v) { return fmt::format("{:.2f}", v); }
std::string fmt_sim(const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : std::string("NA"); }

std::optional<double> mean(double sum, std::size_t n) {
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace

BenchConfig BenchConfig::from_json(const json& j, const fs::path& base_dir) {
  BenchConfig c;
  try {
    c.molecules_file = resolve(base_dir, j.at("molecules").get<std::string>());
    for (const auto& o : j.at("objectives")) c.objectives.push_back(parse_objective(o.get<std::string>()));
    if (c.objectives.empty()) throw ConfigError("bench config lists no objectives");
    if (auto loop = j.find("loop"); loop != j.end()) {
      auto& l = c.loop;
      l.max_iterations = loop->value("max_iterations", l.max_iterations);
      if (loop->contains("mode")) apply_mode(l, loop->at("mode").get<std::string>());
      l.inner_loop_enabled = loop->value("inner_loop", l.inner_loop_enabled);
      l.gradient_feedback = loop->value("gradient_feedback", l.gradient_feedback);
      l.retrieval_enabled = loop->value("retrieval", l.retrieval_enabled);
      l.system_prompt = loop->value("system_prompt", l.system_prompt);
      l.fp_radius = loop->value("fp_radius", l.fp_radius);
      l.fp_bits = loop->value("fp_bits", l.fp_bits);
      if (l.max_iterations < 1) throw ConfigError("loop.max_iterations must be at least 1");
    }
    const auto& p = j.at("proposer");
    c.proposer = p.is_string() ? proposer_config_from_spec(p.get<std::string>()) : proposer_config_from_json(p);
    if (c.proposer.kind == ProposerConfig::Kind::kScripted) c.proposer.scenario = resolve(base_dir, c.proposer.scenario.string());
    if (c.proposer.cache_dir) c.proposer.cache_dir = resolve(base_dir, c.proposer.cache_dir->string());
    if (c.proposer.kind == ProposerConfig::Kind::kRemoteChat) {
      c.loop.generation.model = c.proposer.remote.model;
      c.loop.generation.temperature = c.proposer.remote.temperature;
      c.loop.generation.max_tokens = c.proposer.remote.max_tokens;
    }
    if (auto db = j.find("database"); db != j.end() && !db->is_null()) c.database = resolve(base_dir, db->get<std::string>());
    c.parallelism = j.value("parallelism", 0);
    if (c.parallelism < 0) throw ConfigError("parallelism must be non-negative");
    c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    c.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("bad bench config: {}", e.what()));
  }
  return c;
}

BenchConfig BenchConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read bench config {}", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return from_json(j, path.parent_path());
}

json BenchConfig::to_json() const {
  json names = json::array();
  for (const auto& o : objectives) names.push_back(o.name);
  return {{"molecules", molecules_file.string()},
          {"objectives", names},
          {"loop",
           {{"max_iterations", loop.max_iterations},
            {"inner_loop", loop.inner_loop_enabled},
            {"gradient_feedback", loop.gradient_feedback},
            {"retrieval", loop.retrieval_enabled},
            {"system_prompt", loop.system_prompt},
            {"fp_radius", loop.fp_radius},
            {"fp_bits", loop.fp_bits}}},
          {"proposer", proposer_config_to_json(proposer)},
          {"database", database ? json(database->string()) : json(nullptr)},
          {"parallelism", parallelism},
          {"output_dir", output_dir.string()},
          {"seed", seed}};
}

std::vector<std::string> sample_lines(const std::vector<std::string>& lines, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t\r") != std::string::npos) idx.push_back(i);
  }
  n = std::min(n, idx.size());
  // Partial Fisher-Yates on mt19937_64 output, which is fully specified, so
  // the draw is the same on every platform.
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < n; ++k) {
    const auto j = k + static_cast<std::size_t>(rng() % (idx.size() - k));
    std::swap(idx[k], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  std::vector<std::string> out;
  for (auto i : idx) out.push_back(lines[i]);
  return out;
}

std::vector<RefinementTrace> read_traces(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw BuildError(fmt::format("cannot read {}", path.string()));
  std::vector<RefinementTrace> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(trace_from_json(json::parse(line)));
    } catch (const json::parse_error&) {
      break;  // torn final line of an interrupted run
    }
  }
  return out;
}

std::vector<SummaryRow> aggregate_traces(const std::vector<RefinementTrace>& traces) {
  std::vector<SummaryRow> rows;
  std::map<std::string, std::size_t> row_of;
  struct Sums {
    double all = 0.0, valid = 0.0, hits = 0.0;
  };
  std::vector<Sums> sums;
  for (const auto& t : traces) {
    auto [it, fresh] = row_of.try_emplace(t.objective.name, rows.size());
    if (fresh) {
      SummaryRow row;
      row.objective = t.objective.name;
      row.base = objective_base(t.objective);
      row.group = t.objective.terms.size() == 1 ? "single" : "multi";
      row.threshold = threshold_class(t.objective);
      row.mode = t.config.mode_name().value_or("custom");
      rows.push_back(row);
      sums.emplace_back();
    }
    auto& row = rows[it->second];
    auto& s = sums[it->second];
    ++row.n;
    if (t.aborted) ++row.aborted;
    const double sim = t.final.valid && t.final.similarity ? *t.final.similarity : 0.0;
    s.all += sim;
    if (t.final.valid) {
      ++row.valid;
      s.valid += sim;
    }
    if (t.final.hit) {
      ++row.hits;
      s.hits += sim;
      if (t.final.unchanged) ++row.unchanged_hits;
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto& row = rows[i];
    row.validity_pct = 100.0 * static_cast<double>(row.valid) / static_cast<double>(row.n);
    row.hit_pct = 100.0 * static_cast<double>(row.hits) / static_cast<double>(row.n);
    row.sim_all = mean(sums[i].all, row.n);
    row.sim_valid = mean(sums[i].valid, row.valid);
    row.sim_hits = mean(sums[i].hits, row.hits);
  }
  return rows;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out =
      "objective,group,threshold,mode,n,valid,hits,aborted,unchanged_hits,validity_pct,hit_pct,sim_all,sim_valid,"
      "sim_hits\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.objective, r.group, r.threshold, r.mode, r.n,
                       r.valid, r.hits, r.aborted, r.unchanged_hits, fmt_pct(r.validity_pct), fmt_pct(r.hit_pct),
                       fmt_sim(r.sim_all), fmt_sim(r.sim_valid), fmt_sim(r.sim_hits));
  }
  return out;
}

std::string summary_text(const std::vector<SummaryRow>& rows) {
  std::string out;
  const auto header = fmt::format("{:<20} {:<9} {:>5} {:>9} {:>8} {:>11}\n", "objective", "threshold", "n", "valid %",
                                  "hit %", "similarity");
  for (const char* group : {"single", "multi"}) {
    // Bases in first-seen order, each with its loose, strict and custom rows.
    std::vector<std::string> bases;
    std::map<std::string, std::vector<const SummaryRow*>> by_base;
    for (const auto& r : rows) {
      if (r.group != group) continue;
      const auto& base = r.base;
      if (!by_base.contains(base)) bases.push_back(base);
      by_base[base].push_back(&r);
    }
    if (bases.empty()) continue;
    if (!out.empty()) out += '\n';
    out += fmt::format("{}-property objectives (similarity over valid molecules)\n", group);
    out += header;
    for (const auto& base : bases) {
      auto& list = by_base[base];
      std::stable_sort(list.begin(), list.end(), [](const SummaryRow* a, const SummaryRow* b) {
        auto rank = [](const std::string& t) { return t == "loose" ? 0 : t == "strict" ? 1 : 2; };
        return rank(a->threshold) < rank(b->threshold);
      });
      for (const auto* r : list) {
        out += fmt::format("{:<20} {:<9} {:>5} {:>9} {:>8} {:>11}\n", base, r->threshold, r->n,
                           fmt_pct(r->validity_pct), fmt_pct(r->hit_pct), fmt_sim(r->sim_valid));
      }
    }
  }
  return out;
}

std::string plot_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "objective,mode,hit,similarity\n";
  for (const auto& r : rows) out += fmt::format("{},{},{},{}\n", r.objective, r.mode, fmt_pct(r.hit_pct), fmt_sim(r.sim_valid));
  return out;
}

void write_report(const std::vector<SummaryRow>& rows, const fs::path& dir) {
  fs::create_directories(dir);
  write_atomically(dir / "summary.csv", summary_csv(rows));
  write_atomically(dir / "summary.txt", summary_text(rows));
  write_atomically(dir / "plotdata.csv", plot_csv(rows));
}

std::vector<SummaryRow> rebuild_report(const fs::path& dir) {
  auto rows = aggregate_traces(read_traces(dir / "traces.jsonl"));
  write_report(rows, dir);
  return rows;
}

BenchResult run_benchmark(const BenchConfig& config, const BenchRunOptions& options) {
  for (const auto& o : config.objectives) validate(o);
  const auto molecules = read_molecules(config.molecules_file);
  std::optional<Database> db;
  if (config.database) {
    db = Database::load(*config.database);
    if (db->header().nbits != config.loop.fp_bits || db->header().radius != config.loop.fp_radius) {
      throw ConfigError(fmt::format("database fingerprints ({} bits, radius {}) differ from the loop settings ({} bits, radius {})",
                                    db->header().nbits, db->header().radius, config.loop.fp_bits, config.loop.fp_radius));
    }
  }
  auto factory = make_proposer_factory(config.proposer);
  fs::create_directories(config.output_dir);

  BenchResult result;
  result.traces_path = config.output_dir / "traces.jsonl";
  const std::size_t nmol = molecules.size();
  const std::size_t total = nmol * config.objectives.size();
  auto key_json = [&](std::size_t item) {
    return json{{"molecule_index", item % nmol}, {"objective", config.objectives[item / nmol].name}};
  };

  // Keep the longest in-order prefix of finished items from an earlier run.
  std::vector<std::string> kept;
  {
    const auto existing = read_file(result.traces_path);
    std::size_t start = 0;
    while (kept.size() < total) {
      const auto end = existing.find('\n', start);
      if (end == std::string::npos) break;
      const auto line = existing.substr(start, end - start);
      start = end + 1;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error&) {
        break;
      }
      if (!j.contains("key") || j.at("key") != key_json(kept.size())) break;
      kept.push_back(line);
    }
    std::string prefix;
    for (const auto& l : kept) prefix += l + '\n';
    if (prefix != existing) write_atomically(result.traces_path, prefix);
  }
  result.resumed = kept.size();

  std::size_t to_run = total - kept.size();
  if (options.stop_after) to_run = std::min(to_run, *options.stop_after);
  const std::size_t first = kept.size();
  const std::size_t last = first + to_run;

  std::FILE* out = std::fopen(result.traces_path.string().c_str(), "ab");
  if (out == nullptr) throw BuildError(fmt::format("cannot append to {}", result.traces_path.string()));

  std::vector<std::optional<std::string>> done(to_run);
  std::mutex mutex;
  std::condition_variable ready;
  std::atomic<std::size_t> next{first};
  std::exception_ptr failure;
  std::atomic<bool> stop{false};

  auto worker = [&] {
    while (!stop) {
      const std::size_t item = next++;
      if (item >= last) break;
      try {
        auto proposer = factory();
        const auto& spec = config.objectives[item / nmol];
        auto trace = run_loop(config.loop, molecules[item % nmol], spec, *proposer, db ? &*db : nullptr);
        auto j = trace_to_json(trace);
        j["key"] = key_json(item);
        std::lock_guard lock(mutex);
        done[item - first] = j.dump();
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
        stop = true;
      }
      ready.notify_all();
    }
  };

  int workers = config.parallelism > 0 ? config.parallelism : static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  if (config.proposer.kind == ProposerConfig::Kind::kRemoteChat && config.proposer.remote.max_concurrency > 0) {
    workers = std::min(workers, config.proposer.remote.max_concurrency);
  }
  workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), std::max<std::size_t>(to_run, 1)));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);

  // Single writer: append finished traces strictly in item order.
  std::size_t written = 0;
  {
    std::unique_lock lock(mutex);
    while (written < to_run) {
      ready.wait(lock, [&] { return done[written].has_value() || failure; });
      if (failure && !done[written]) break;
      std::string batch;
      while (written < to_run && done[written]) {
        batch += *done[written] + '\n';
        done[written].reset();
        ++written;
      }
      lock.unlock();
      std::fwrite(batch.data(), 1, batch.size(), out);
      std::fflush(out);
      ::fsync(::fileno(out));
      lock.lock();
    }
  }
  for (auto& t : pool) t.join();
  std::fclose(out);
  if (failure) std::rethrow_exception(failure);
  result.completed_now = written;

  json run = {{"config", config.to_json()},
              {"asset_hashes", ParameterTables::defaults().asset_hashes},
              {"database_sha256", config.database ? json(sha256_hex(read_file(*config.database))) : json(nullptr)},
              {"molecules", nmol}};
  write_atomically(config.output_dir / "run.json", run.dump(2) + '\n');
  result.rows = rebuild_report(config.output_dir);
  return result;
}

}  // namespace molrefine
