// SPDX-License-Identifier: Apache-2.0
#include "molrefine/retrieval.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "molrefine/errors.hpp"
#include "molrefine/signature.hpp"
#include "molrefine/smiles.hpp"

namespace molrefine {
namespace {

using nlohmann::json;

std::vector<PropertyId> resolved_properties(const IndexBuildOptions& options) {
  return options.properties.empty() ? registered_properties() : options.properties;
}

template <typename T>
T field(const json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) throw BuildError(fmt::format("index line {}: missing '{}'", line, key));
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw BuildError(fmt::format("index line {}: bad '{}': {}", line, key, e.what()));
  }
}

}  // namespace

Database::Database(DatabaseHeader header, std::vector<MoleculeRecord> records)
    : header_(std::move(header)), records_(std::move(records)) {
  header_.count = records_.size();
}

MoleculeRecord make_record(const MolGraph& mol, const IndexBuildOptions& options) {
  return {write_smiles(mol), graph_signature(mol), compute_properties(mol, resolved_properties(options)),
          morgan_fingerprint(mol, options.radius, options.nbits)};
}

Database Database::build(std::istream& smiles, const IndexBuildOptions& options, IndexBuildReport* report) {
  IndexBuildReport local;
  IndexBuildReport& rep = report ? *report : local;
  DatabaseHeader header;
  header.nbits = options.nbits;
  header.radius = options.radius;
  header.properties = resolved_properties(options);
  header.asset_hashes = ParameterTables::defaults().asset_hashes;
  // Validates the fingerprint parameters before any work.
  (void)Fingerprint(options.nbits, options.radius);
  for (const auto& id : header.properties) {
    if (!is_registered_property(id)) throw ConfigError(fmt::format("unknown property '{}'", id));
  }

  std::vector<MoleculeRecord> records;
  std::set<std::string> seen;
  std::string line;
  while (std::getline(smiles, line)) {
    ++rep.lines;
    std::istringstream tokens(line);
    std::string token;
    if (!(tokens >> token) || token.front() == '#') continue;
    auto outcome = parse_smiles(token);
    if (!outcome.valid()) {
      rep.skipped.push_back({rep.lines, token, outcome.error().message()});
      continue;
    }
    auto record = make_record(outcome.molecule(), options);
    if (!seen.insert(record.signature).second) {
      ++rep.duplicates;
      continue;
    }
    records.push_back(std::move(record));
  }
  if (records.empty()) throw BuildError("no valid molecules in input");
  return Database(std::move(header), std::move(records));
}

Database Database::build(const std::filesystem::path& smiles_file, const IndexBuildOptions& options,
                         IndexBuildReport* report) {
  std::ifstream in(smiles_file);
  if (!in) throw BuildError(fmt::format("cannot read {}", smiles_file.string()));
  return build(in, options, report);
}

void Database::write(std::ostream& out) const {
  json h = json::object();
  h["version"] = header_.version;
  h["nbits"] = header_.nbits;
  h["radius"] = header_.radius;
  h["properties"] = header_.properties;
  h["asset_hashes"] = header_.asset_hashes;
  h["count"] = records_.size();
  out << h.dump() << '\n';
  for (const auto& r : records_) {
    json j = json::object();
    j["smiles"] = r.smiles;
    j["sig"] = r.signature;
    j["props"] = r.properties;
    j["fp"] = r.fingerprint.to_base64();
    out << j.dump() << '\n';
  }
}

void Database::save(const std::filesystem::path& path) const {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw BuildError(fmt::format("cannot write {}", tmp.string()));
    write(out);
    out.flush();
    if (!out) throw BuildError(fmt::format("write failed for {}", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

Database Database::read(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw BuildError("index is empty");
  json h;
  try {
    h = json::parse(line);
  } catch (const json::exception& e) {
    throw BuildError(fmt::format("index line 1: {}", e.what()));
  }
  DatabaseHeader header;
  header.version = field<int>(h, "version", 1);
  if (header.version != kIndexVersion) throw BuildError(fmt::format("unsupported index version {}", header.version));
  header.nbits = field<int>(h, "nbits", 1);
  header.radius = field<int>(h, "radius", 1);
  header.properties = field<std::vector<PropertyId>>(h, "properties", 1);
  header.asset_hashes = field<std::map<std::string, std::string>>(h, "asset_hashes", 1);
  header.count = field<std::size_t>(h, "count", 1);

  std::vector<MoleculeRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw BuildError(fmt::format("index line {}: {}", line_no, e.what()));
    }
    MoleculeRecord r{field<std::string>(j, "smiles", line_no), field<std::string>(j, "sig", line_no),
                     field<PropertyVector>(j, "props", line_no),
                     Fingerprint(header.nbits, header.radius)};
    try {
      r.fingerprint = Fingerprint::from_base64(field<std::string>(j, "fp", line_no), header.nbits, header.radius);
    } catch (const UsageError& e) {
      throw BuildError(fmt::format("index line {}: {}", line_no, e.what()));
    }
    for (const auto& id : header.properties) {
      if (!r.properties.contains(id)) throw BuildError(fmt::format("index line {}: missing property '{}'", line_no, id));
    }
    records.push_back(std::move(r));
  }
  if (records.size() != header.count) {
    throw BuildError(fmt::format("index header says {} records, found {}", header.count, records.size()));
  }
  return Database(std::move(header), std::move(records));
}

Database Database::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BuildError(fmt::format("cannot read {}", path.string()));
  return read(in);
}

std::optional<std::size_t> Database::retrieve(const ObjectiveSpec& spec, const PropertyVector& props_m,
                                              const Fingerprint& fp_mhat, const std::set<std::string>& exclude) const {
  if (fp_mhat.nbits() != header_.nbits || fp_mhat.radius() != header_.radius) {
    throw UsageError(fmt::format("query fingerprint ({} bits, radius {}) does not match index ({} bits, radius {})",
                                 fp_mhat.nbits(), fp_mhat.radius(), header_.nbits, header_.radius));
  }
  std::optional<std::size_t> best;
  double best_sim = -1.0;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (exclude.contains(r.signature)) continue;
    if (!evaluate(spec, props_m, r.properties).overall) continue;
    const double sim = tanimoto(r.fingerprint, fp_mhat);
    if (sim > best_sim) {
      best_sim = sim;
      best = i;
    }
  }
  return best;
}

}  // namespace molrefine
