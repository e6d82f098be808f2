// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "molrefine/descriptors.hpp"
#include "molrefine/fingerprint.hpp"
#include "molrefine/objective.hpp"

namespace molrefine {

inline constexpr int kIndexVersion = 1;

struct MoleculeRecord {
  /// Written by write_smiles, so it re-parses to the same graph.
  std::string smiles;
  std::string signature;
  PropertyVector properties;
  Fingerprint fingerprint;

  bool operator==(const MoleculeRecord&) const = default;
};

struct DatabaseHeader {
  int version = kIndexVersion;
  int nbits = kDefaultBits;
  int radius = kDefaultRadius;
  std::vector<PropertyId> properties;
  std::map<std::string, std::string> asset_hashes;
  std::size_t count = 0;

  bool operator==(const DatabaseHeader&) const = default;
};

struct IndexBuildOptions {
  int nbits = kDefaultBits;
  int radius = kDefaultRadius;
  /// Empty means every registered property.
  std::vector<PropertyId> properties;
};

struct SkippedLine {
  std::size_t line = 0;
  std::string text;
  std::string reason;
};

struct IndexBuildReport {
  std::size_t lines = 0;
  std::size_t duplicates = 0;
  std::vector<SkippedLine> skipped;
};

/// Example-molecule database, immutable once built or loaded.
class Database {
 public:
  Database() = default;
  Database(DatabaseHeader header, std::vector<MoleculeRecord> records);

  /// One SMILES per line (first whitespace-separated token; blank and '#'
  /// lines ignored). Unparseable lines are skipped and reported, duplicates by
  /// signature keep the first occurrence. Throws BuildError if nothing is left.
  static Database build(std::istream& smiles, const IndexBuildOptions& options = {},
                        IndexBuildReport* report = nullptr);
  static Database build(const std::filesystem::path& smiles_file, const IndexBuildOptions& options = {},
                        IndexBuildReport* report = nullptr);

  /// JSONL: header line, then one record per line.
  static Database load(const std::filesystem::path& path);
  static Database read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  void write(std::ostream& out) const;

  const DatabaseHeader& header() const { return header_; }
  const std::vector<MoleculeRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  const MoleculeRecord& operator[](std::size_t i) const { return records_[i]; }

  /// Index of the record most similar to fp_mhat among those meeting `spec`
  /// relative to props_m and not in `exclude`; ties go to the lowest index.
  /// Throws UsageError on a fingerprint parameter mismatch.
  std::optional<std::size_t> retrieve(const ObjectiveSpec& spec, const PropertyVector& props_m,
                                      const Fingerprint& fp_mhat, const std::set<std::string>& exclude = {}) const;

 private:
  DatabaseHeader header_;
  std::vector<MoleculeRecord> records_;
};

/// Builds the record for a molecule with the given fingerprint and property settings.
MoleculeRecord make_record(const MolGraph& mol, const IndexBuildOptions& options);

}  // namespace molrefine
