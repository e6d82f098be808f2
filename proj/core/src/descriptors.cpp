// SPDX-License-Identifier: Apache-2.0
#include "molrefine/descriptors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "embedded_assets.hpp"
#include "molrefine/digest.hpp"
#include "molrefine/element.hpp"
#include "molrefine/errors.hpp"
#include "molrefine/smiles.hpp"

namespace molrefine {
namespace {

struct Row {
  std::size_t line;
  std::vector<std::string> fields;
};

std::vector<Row> rows_of(std::string_view text) {
  std::vector<Row> rows;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') {
      if (end == text.size()) break;
      continue;
    }
    Row row{line_no, {}};
    std::size_t f = 0;
    while (true) {
      const auto tab = line.find('\t', f);
      row.fields.emplace_back(line.substr(f, tab == std::string_view::npos ? std::string_view::npos : tab - f));
      if (tab == std::string_view::npos) break;
      f = tab + 1;
    }
    if (!std::all_of(row.fields.begin(), row.fields.end(), [](const std::string& s) { return s.empty(); })) {
      rows.push_back(std::move(row));
    }
    if (end == text.size()) break;
  }
  return rows;
}

[[noreturn]] void bad_row(std::string_view file, const Row& row, std::string_view what) {
  throw ConfigError(fmt::format("{} line {}: {}", file, row.line, what));
}

double to_double(std::string_view file, const Row& row, const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) bad_row(file, row, fmt::format("bad number '{}'", s));
  return v;
}

int to_count(std::string_view file, const Row& row, const std::string& s) {
  if (s == "*") return -1;
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) bad_row(file, row, fmt::format("bad integer '{}'", s));
  return v;
}

Pattern compile(std::string_view file, const Row& row, const std::string& text) {
  try {
    return Pattern::parse(text);
  } catch (const std::invalid_argument& e) {
    bad_row(file, row, e.what());
  }
}

int element_of(std::string_view file, const Row& row, const std::string& symbol) {
  auto z = element_from_symbol(symbol);
  if (!z) bad_row(file, row, fmt::format("unknown element '{}'", symbol));
  return *z;
}

bool count_fits(int wanted, int actual) { return wanted < 0 || wanted == actual; }

}  // namespace

const std::vector<PropertyId>& registered_properties() {
  static const std::vector<PropertyId> ids{std::string(kLogP), std::string(kTPSA), std::string(kQED)};
  return ids;
}

bool is_registered_property(std::string_view id) {
  const auto& ids = registered_properties();
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

ParameterTables ParameterTables::from_text(std::string_view crippen, std::string_view tpsa, std::string_view qed,
                                           std::string_view alerts) {
  ParameterTables t;
  for (const auto& row : rows_of(crippen)) {
    if (row.fields.size() < 3) bad_row("crippen.tsv", row, "expected type, pattern, value");
    t.crippen.push_back({row.fields[0], compile("crippen.tsv", row, row.fields[1]), to_double("crippen.tsv", row, row.fields[2])});
  }
  for (const auto& row : rows_of(tpsa)) {
    const auto& f = row.fields;
    if (f[0] == "fallback") {
      if (f.size() != 5) bad_row("tpsa.tsv", row, "expected fallback, element, base, per neighbour, per hydrogen");
      t.tpsa_fallback.push_back({element_of("tpsa.tsv", row, f[1]), to_double("tpsa.tsv", row, f[2]),
                                 to_double("tpsa.tsv", row, f[3]), to_double("tpsa.tsv", row, f[4])});
      continue;
    }
    if (f.size() != 10) bad_row("tpsa.tsv", row, "expected 10 columns");
    TpsaRule r;
    r.element = element_of("tpsa.tsv", row, f[0]);
    r.neighbours = to_count("tpsa.tsv", row, f[1]);
    r.hydrogens = to_count("tpsa.tsv", row, f[2]);
    r.charge = f[3] == "*" ? -100 : to_count("tpsa.tsv", row, f[3]);
    r.single = to_count("tpsa.tsv", row, f[4]);
    r.double_ = to_count("tpsa.tsv", row, f[5]);
    r.triple = to_count("tpsa.tsv", row, f[6]);
    r.aromatic = to_count("tpsa.tsv", row, f[7]);
    r.in_three_ring = to_count("tpsa.tsv", row, f[8]);
    r.value = to_double("tpsa.tsv", row, f[9]);
    t.tpsa.push_back(r);
  }
  for (const auto& row : rows_of(qed)) {
    const auto& f = row.fields;
    const auto& kind = f[0];
    if (kind == "ads") {
      if (f.size() != 9) bad_row("qed_params.tsv", row, "expected descriptor and 7 coefficients");
      std::array<double, 7> v{};
      for (std::size_t i = 0; i < 7; ++i) v[i] = to_double("qed_params.tsv", row, f[i + 2]);
      t.qed.ads[f[1]] = {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
    } else if (kind == "weight") {
      if (f.size() != 3) bad_row("qed_params.tsv", row, "expected descriptor and weight");
      t.qed.weights[f[1]] = to_double("qed_params.tsv", row, f[2]);
    } else if (f.size() == 2 && (kind == "acceptor" || kind == "donor" || kind == "rotatable" || kind == "aliphatic_ring")) {
      auto p = compile("qed_params.tsv", row, f[1]);
      if (kind == "acceptor") t.qed.acceptors.push_back(std::move(p));
      if (kind == "donor") t.qed.donors.push_back(std::move(p));
      if (kind == "rotatable") t.qed.rotatable.push_back(std::move(p));
      if (kind == "aliphatic_ring") t.qed.aliphatic_ring.push_back(std::move(p));
    } else {
      bad_row("qed_params.tsv", row, fmt::format("unknown row kind '{}'", kind));
    }
  }
  for (auto name : kQedDescriptors) {
    if (!t.qed.ads.contains(name) || !t.qed.weights.contains(name)) {
      throw ConfigError(fmt::format("qed_params.tsv: missing parameters for {}", name));
    }
  }
  for (const auto& row : rows_of(alerts)) {
    if (row.fields.size() != 2) bad_row("alerts.tsv", row, "expected id and fragment");
    auto outcome = parse_smiles(row.fields[1], ParseOptions{.fragment = true});
    if (!outcome.valid()) bad_row("alerts.tsv", row, outcome.error().message());
    if (t.alerts.empty() || t.alerts.back().id != row.fields[0]) t.alerts.push_back({row.fields[0], {}, {}});
    t.alerts.back().fragments.push_back(row.fields[1]);
    t.alerts.back().patterns.push_back(Pattern::from_fragment(outcome.molecule()));
  }
  t.asset_hashes["crippen.tsv"] = sha256_hex(crippen);
  t.asset_hashes["tpsa.tsv"] = sha256_hex(tpsa);
  t.asset_hashes["qed_params.tsv"] = sha256_hex(qed);
  t.asset_hashes["alerts.tsv"] = sha256_hex(alerts);
  return t;
}

ParameterTables ParameterTables::load(const std::filesystem::path& directory) {
  std::array<std::string, 4> texts;
  for (std::size_t i = 0; i < kAssetFiles.size(); ++i) {
    const auto path = directory / kAssetFiles[i];
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(fmt::format("cannot read asset {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    texts[i] = ss.str();
  }
  return from_text(texts[0], texts[1], texts[2], texts[3]);
}

const ParameterTables& ParameterTables::defaults() {
  static const ParameterTables tables = [] {
    if (const char* dir = std::getenv("MOLREFINE_ASSET_DIR"); dir && *dir) return load(dir);
    return from_text(detail::embedded_asset("crippen.tsv"), detail::embedded_asset("tpsa.tsv"),
                     detail::embedded_asset("qed_params.tsv"), detail::embedded_asset("alerts.tsv"));
  }();
  return tables;
}

std::vector<double> crippen_contributions(const MolGraph& mol, const ParameterTables& tables) {
  const MatchTarget target(mol, true);
  const auto heavy = mol.atom_count();
  std::vector<double> out(heavy, 0.0);
  for (int node = 0; node < static_cast<int>(target.size()); ++node) {
    const int owner = static_cast<std::size_t>(node) < heavy ? node : target.edges(node).front().to;
    for (const auto& rule : tables.crippen) {
      if (rule.pattern.matches_at(target, node)) {
        out[static_cast<std::size_t>(owner)] += rule.logp;
        break;
      }
    }
  }
  return out;
}

double crippen_logp(const MolGraph& mol, const ParameterTables& tables) {
  const auto c = crippen_contributions(mol, tables);
  return std::accumulate(c.begin(), c.end(), 0.0);
}

double ertl_tpsa(const MolGraph& mol, const ParameterTables& tables) {
  double total = 0.0;
  for (int a = 0; a < static_cast<int>(mol.atom_count()); ++a) {
    const auto& atom = mol.atom(a);
    if (atom.element != 7 && atom.element != 8) continue;
    int neighbours = 0;
    int hydrogens = mol.total_h(a);
    int single = 0;
    int double_ = 0;
    int triple = 0;
    int aromatic = 0;
    for (int b : mol.incident_bonds(a)) {
      if (mol.atom(mol.bond(b).other(a)).element == 1) {
        ++hydrogens;
        continue;
      }
      ++neighbours;
      if (mol.bond_aromatic(b)) {
        ++aromatic;
      } else {
        switch (mol.kekule_order(b)) {
          case 1: ++single; break;
          case 2: ++double_; break;
          case 3: ++triple; break;
          default: break;
        }
      }
    }
    const int in3 = mol.atom_in_ring_of_size(a, 3) ? 1 : 0;
    double value = -1.0;
    for (const auto& r : tables.tpsa) {
      if (r.element != atom.element) continue;
      if (!count_fits(r.neighbours, neighbours) || !count_fits(r.hydrogens, hydrogens)) continue;
      if (r.charge != -100 && r.charge != atom.formal_charge) continue;
      if (!count_fits(r.single, single) || !count_fits(r.double_, double_) || !count_fits(r.triple, triple)) continue;
      if (!count_fits(r.aromatic, aromatic) || !count_fits(r.in_three_ring, in3)) continue;
      value = r.value;
      break;
    }
    if (value < 0.0) {
      for (const auto& f : tables.tpsa_fallback) {
        if (f.element != atom.element) continue;
        value = std::max(0.0, f.base + f.per_neighbour * neighbours + f.per_hydrogen * hydrogens);
        break;
      }
    }
    if (value > 0.0) total += value;
  }
  return total;
}

double molecular_weight(const MolGraph& mol) {
  const double hydrogen = element_info(1).atomic_weight;
  double mw = 0.0;
  for (int a = 0; a < static_cast<int>(mol.atom_count()); ++a) {
    mw += element_info(mol.atom(a).element).atomic_weight + hydrogen * mol.total_h(a);
  }
  return mw;
}

SubDescriptors sub_descriptors(const MolGraph& mol, const ParameterTables& tables) {
  const MatchTarget target(mol, false);
  SubDescriptors d;
  d.mw = molecular_weight(mol);
  for (const auto& p : tables.qed.acceptors) d.hba += static_cast<int>(p.find_all(target, true).size());
  for (const auto& p : tables.qed.donors) d.hbd += static_cast<int>(p.find_all(target, true).size());
  for (const auto& p : tables.qed.rotatable) d.rotb += static_cast<int>(p.find_all(target, true).size());

  // Aromatic ring count: cycle rank left after removing aliphatic ring atoms
  // that touch a non-aromatic neighbour.
  const int n = static_cast<int>(mol.atom_count());
  std::vector<bool> removed(static_cast<std::size_t>(n), false);
  for (int a = 0; a < n; ++a) {
    for (const auto& p : tables.qed.aliphatic_ring) {
      if (p.matches_at(target, a)) removed[static_cast<std::size_t>(a)] = true;
    }
  }
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    return x;
  };
  int rank = 0;
  for (const auto& b : mol.bonds()) {
    if (removed[static_cast<std::size_t>(b.begin)] || removed[static_cast<std::size_t>(b.end)]) continue;
    const int ra = find(b.begin);
    const int rb = find(b.end);
    if (ra == rb) {
      ++rank;
    } else {
      parent[static_cast<std::size_t>(ra)] = rb;
    }
  }
  d.arom = rank;

  for (const auto& alert : tables.alerts) {
    if (std::any_of(alert.patterns.begin(), alert.patterns.end(), [&](const Pattern& p) { return p.matches(target); })) {
      ++d.alerts;
    }
  }
  return d;
}

double qed_desirability(const AdsParameters& p, double x) {
  const double exp1 = 1.0 + std::exp(-1.0 * (x - p.c + p.d / 2.0) / p.e);
  const double exp2 = 1.0 + std::exp(-1.0 * (x - p.c - p.d / 2.0) / p.f);
  const double dx = p.a + p.b / exp1 * (1.0 - 1.0 / exp2);
  return dx / p.dmax;
}

double qed(const MolGraph& mol, const ParameterTables& tables) {
  const auto d = sub_descriptors(mol, tables);
  const std::array<double, 8> values{d.mw,
                                     crippen_logp(mol, tables),
                                     static_cast<double>(d.hba),
                                     static_cast<double>(d.hbd),
                                     ertl_tpsa(mol, tables),
                                     static_cast<double>(d.rotb),
                                     static_cast<double>(d.arom),
                                     static_cast<double>(d.alerts)};
  double log_sum = 0.0;
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < kQedDescriptors.size(); ++i) {
    const auto name = kQedDescriptors[i];
    const double w = tables.qed.weights.find(name)->second;
    log_sum += w * std::log(qed_desirability(tables.qed.ads.find(name)->second, values[i]));
    weight_sum += w;
  }
  return std::clamp(std::exp(log_sum / weight_sum), 0.0, 1.0);
}

PropertyVector compute_properties(const MolGraph& mol, const std::vector<PropertyId>& ids,
                                  const ParameterTables& tables) {
  if (ids.empty()) throw ConfigError("no properties requested");
  PropertyVector out;
  for (const auto& id : ids) {
    if (id == kLogP) {
      out[id] = crippen_logp(mol, tables);
    } else if (id == kTPSA) {
      out[id] = ertl_tpsa(mol, tables);
    } else if (id == kQED) {
      out[id] = qed(mol, tables);
    } else {
      throw ConfigError(fmt::format("unknown property '{}'", id));
    }
  }
  return out;
}

}  // namespace molrefine
