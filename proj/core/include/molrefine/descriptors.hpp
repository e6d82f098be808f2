// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "molrefine/molgraph.hpp"
#include "molrefine/pattern.hpp"

namespace molrefine {

using PropertyId = std::string;
/// Property name to value, ordered by name.
using PropertyVector = std::map<PropertyId, double>;

inline constexpr std::string_view kLogP = "LogP";
inline constexpr std::string_view kTPSA = "TPSA";
inline constexpr std::string_view kQED = "QED";

/// Every property id compute_properties understands, in registration order.
const std::vector<PropertyId>& registered_properties();
bool is_registered_property(std::string_view id);

struct CrippenRule {
  std::string type;
  Pattern pattern;
  double logp = 0.0;
};

/// -1 in any count field means "any".
struct TpsaRule {
  int element = 0;
  int neighbours = -1;
  int hydrogens = -1;
  int charge = -1;
  int single = -1;
  int double_ = -1;
  int triple = -1;
  int aromatic = -1;
  int in_three_ring = -1;
  double value = 0.0;
};

struct TpsaFallback {
  int element = 0;
  double base = 0.0;
  double per_neighbour = 0.0;
  double per_hydrogen = 0.0;
};

struct AdsParameters {
  double a, b, c, d, e, f, dmax;
};

inline constexpr std::array<std::string_view, 8> kQedDescriptors = {"MW",   "ALOGP", "HBA",  "HBD",
                                                                    "PSA", "ROTB",  "AROM", "ALERTS"};

struct QedParameters {
  std::map<std::string, AdsParameters, std::less<>> ads;
  std::map<std::string, double, std::less<>> weights;
  std::vector<Pattern> acceptors;
  std::vector<Pattern> donors;
  std::vector<Pattern> rotatable;
  std::vector<Pattern> aliphatic_ring;
};

struct AlertRule {
  std::string id;
  std::vector<std::string> fragments;
  std::vector<Pattern> patterns;
};

/// All descriptor parameters, read once and shared read-only.
struct ParameterTables {
  std::vector<CrippenRule> crippen;
  std::vector<TpsaRule> tpsa;
  std::vector<TpsaFallback> tpsa_fallback;
  QedParameters qed;
  std::vector<AlertRule> alerts;
  /// Asset file name to SHA-256 of its content.
  std::map<std::string, std::string> asset_hashes;

  static constexpr std::array<std::string_view, 4> kAssetFiles = {"crippen.tsv", "tpsa.tsv", "qed_params.tsv",
                                                                  "alerts.tsv"};

  /// Parses the four asset texts; throws ConfigError naming the file and line on bad rows.
  static ParameterTables from_text(std::string_view crippen, std::string_view tpsa, std::string_view qed,
                                   std::string_view alerts);
  static ParameterTables load(const std::filesystem::path& directory);
  /// Tables from $MOLREFINE_ASSET_DIR when set, else the copies built into the library.
  static const ParameterTables& defaults();
};

struct SubDescriptors {
  double mw = 0.0;
  int hba = 0;
  int hbd = 0;
  int rotb = 0;
  int arom = 0;
  int alerts = 0;
};

double crippen_logp(const MolGraph& mol, const ParameterTables& tables = ParameterTables::defaults());
/// Per-atom contributions, hydrogens folded into their heavy atom.
std::vector<double> crippen_contributions(const MolGraph& mol,
                                          const ParameterTables& tables = ParameterTables::defaults());
double ertl_tpsa(const MolGraph& mol, const ParameterTables& tables = ParameterTables::defaults());
double molecular_weight(const MolGraph& mol);
SubDescriptors sub_descriptors(const MolGraph& mol, const ParameterTables& tables = ParameterTables::defaults());
/// Desirability of one QED descriptor value.
double qed_desirability(const AdsParameters& p, double x);
double qed(const MolGraph& mol, const ParameterTables& tables = ParameterTables::defaults());

/// Throws ConfigError for an unknown id or an empty id list.
PropertyVector compute_properties(const MolGraph& mol, const std::vector<PropertyId>& ids,
                                  const ParameterTables& tables = ParameterTables::defaults());

}  // namespace molrefine
