// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>

#include <gtest/gtest.h>

#include "molrefine/signature.hpp"
#include "molrefine/smiles.hpp"
#include "test_support.hpp"

namespace molrefine {
namespace {

using testing::fixture_path;
using testing::read_lines;

struct CorpusCase {
  std::string category;
  std::string family;
  std::string smiles;
};

std::vector<CorpusCase> load_corpus() {
  std::vector<CorpusCase> out;
  for (const auto& line : read_lines(fixture_path("parse_error_corpus.tsv"))) {
    std::istringstream fields(line);
    CorpusCase c;
    std::getline(fields, c.category, '\t');
    std::getline(fields, c.family, '\t');
    std::getline(fields, c.smiles, '\t');
    out.push_back(c);
  }
  return out;
}

std::string category_of(std::string_view smiles) {
  auto outcome = parse_smiles(smiles);
  return outcome.valid() ? "valid" : std::string(category_name(outcome.error().category));
}

TEST(ParseErrorCorpus, EveryCaseHasItsLabel) {
  const auto corpus = load_corpus();
  std::map<std::string, int> per_category;
  for (const auto& c : corpus) {
    EXPECT_EQ(category_of(c.smiles), c.category) << c.family << ": " << c.smiles;
    ++per_category[c.category];
  }
  EXPECT_GE(corpus.size(), 120U);
  for (auto cat : kAllParseErrorCategories) EXPECT_GE(per_category[std::string(category_name(cat))], 20) << category_name(cat);
}

TEST(ParseErrorCorpus, CanonicalExamples) {
  EXPECT_EQ(category_of("C1CC"), "unclosed_ring");
  EXPECT_EQ(category_of("C(C"), "parentheses");
  EXPECT_EQ(category_of("C12CC12"), "duplicate_bond");
  EXPECT_EQ(category_of("CC(C)(C)(C)C"), "valence");
  EXPECT_EQ(category_of("c1ccc1"), "aromaticity");
  EXPECT_EQ(category_of("C11"), "duplicate_bond");
}

TEST(ParseErrorMessage, CategoryDetailPosition) {
  auto outcome = parse_smiles("C1CC");
  ASSERT_FALSE(outcome.valid());
  const auto msg = outcome.error().message();
  EXPECT_TRUE(msg.starts_with("unclosed_ring: ")) << msg;
  EXPECT_NE(msg.find(" at position 1"), std::string::npos) << msg;
}

TEST(ParseErrorMessage, PrecedenceSyntaxFirst) {
  // Both a stray character and an open ring: syntax wins.
  EXPECT_EQ(category_of("C1CC&"), "syntax");
  // Unbalanced parenthesis and an unclosed ring: parentheses wins.
  EXPECT_EQ(category_of("C1CC(C"), "parentheses");
  // Unclosed ring before valence.
  EXPECT_EQ(category_of("C1C(C)(C)(C)C"), "unclosed_ring");
}

TEST(ParseErrorCategory, NamesRoundTrip) {
  for (auto cat : kAllParseErrorCategories) {
    auto back = category_from_name(category_name(cat));
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(*back, cat);
  }
  EXPECT_FALSE(category_from_name("bogus").has_value());
}

TEST(Valence, AllowedSets) {
  for (const char* ok : {"C", "N", "O", "S", "P", "B", "F", "Cl", "Br", "I", "CS(=O)(=O)C", "CP(=O)(O)O",
                         "C[N+](C)(C)C", "C[O-]", "[NH4+]", "O=[N+]([O-])C", "CN(=O)=O", "C=S(=O)=O"}) {
    EXPECT_EQ(category_of(ok), "valid") << ok;
  }
  for (const char* bad : {"C(C)(C)(C)(C)C", "CO(C)C", "CF(C)", "F(C)C", "C=C=C=C(=C)C", "N(C)(C)(C)(C)(C)C"}) {
    EXPECT_EQ(category_of(bad), "valence") << bad;
  }
}

TEST(Aromaticity, KekulizableRingsParse) {
  for (const char* ok : {"c1ccccc1", "c1ccncc1", "c1cc[nH]c1", "c1ccoc1", "c1ccsc1", "c1ccc2ccccc2c1",
                         "Cn1cnc2c1c(=O)n(C)c(=O)n2C", "c1ccc2[nH]ccc2c1"}) {
    EXPECT_EQ(category_of(ok), "valid") << ok;
  }
  for (const char* bad : {"c1cccc1", "c1ccncc1c", "c1cnc1", "c1ccc1"}) {
    EXPECT_EQ(category_of(bad), "aromaticity") << bad;
  }
}

TEST(Aromaticity, PerceptionMatchesOracleFlags) {
  // Last column holds the oracle's per-atom aromatic flags.
  for (const auto* name : {"descriptor_oracle.tsv", "aromaticity_oracle.tsv"}) {
    for (const auto& line : read_lines(fixture_path(name))) {
      std::istringstream fields(line);
      std::vector<std::string> cols;
      for (std::string f; std::getline(fields, f, '\t');) cols.push_back(f);
      auto outcome = parse_smiles(cols.front());
      if (!outcome.valid()) {
        // Hypervalent bracket iodine is rejected by design; nothing else may fail.
        EXPECT_EQ(outcome.error().category, ParseErrorCategory::kValence) << cols.front();
        EXPECT_NE(cols.front().find("[I]"), std::string::npos) << cols.front();
        continue;
      }
      const auto& mol = outcome.molecule();
      std::string flags;
      for (std::size_t i = 0; i < mol.atom_count(); ++i) flags += mol.aromatic(static_cast<int>(i)) ? '1' : '0';
      EXPECT_EQ(flags, cols.back()) << cols.front();
    }
  }
}

TEST(DrugLikeSample, AtLeast99PercentParse) {
  const auto lines = read_lines(fixture_path("druglike_1k.smi"), true);
  ASSERT_EQ(lines.size(), 1000U);
  std::size_t valid = 0;
  for (const auto& s : lines) valid += parse_smiles(s).valid() ? 1 : 0;
  EXPECT_GE(valid, 990U);
}

TEST(Writer, RoundTripPreservesGraph) {
  const auto lines = read_lines(fixture_path("druglike_1k.smi"), true);
  for (const auto& s : lines) {
    auto outcome = parse_smiles(s);
    if (!outcome.valid()) continue;
    const auto written = write_smiles(outcome.molecule());
    auto again = parse_smiles(written);
    ASSERT_TRUE(again.valid()) << s << " -> " << written << ": " << again.error().message();
    EXPECT_EQ(graph_signature(again.molecule()), graph_signature(outcome.molecule())) << s << " -> " << written;
    EXPECT_EQ(write_smiles(again.molecule()), written) << s;
  }
}

TEST(Signature, InvariantUnderRelabelling) {
  const auto lines = read_lines(fixture_path("druglike_1k.smi"), true);
  std::mt19937_64 rng(11);
  for (std::size_t k = 0; k < 50; ++k) {
    auto outcome = parse_smiles(lines[k * 17]);
    ASSERT_TRUE(outcome.valid());
    const auto& mol = outcome.molecule();
    const auto sig = graph_signature(mol);
    std::vector<int> perm(mol.atom_count());
    std::iota(perm.begin(), perm.end(), 0);
    for (int r = 0; r < 20; ++r) {
      std::shuffle(perm.begin(), perm.end(), rng);
      const auto relabelled = mol.permuted(perm);
      EXPECT_EQ(graph_signature(relabelled), sig);
      // The relabelled graph written out re-parses to the same molecule.
      auto again = parse_smiles(write_smiles(relabelled));
      ASSERT_TRUE(again.valid());
      EXPECT_EQ(graph_signature(again.molecule()), sig);
    }
  }
}

TEST(Signature, DistinguishesIsomers) {
  auto a = parse_smiles("CCO");
  auto b = parse_smiles("COC");
  ASSERT_TRUE(a.valid() && b.valid());
  EXPECT_NE(graph_signature(a.molecule()), graph_signature(b.molecule()));
}

TEST(Parser, StereoAndBracketsAccepted) {
  for (const char* ok : {"C[C@H](N)C(=O)O", "F/C=C/F", "[13CH4]", "[2H]C", "C[H]", "[Na+].[Cl-]"}) {
    EXPECT_EQ(category_of(ok), "valid") << ok;
  }
}

TEST(Fuzz, EveryOutcomeClassified) {
  const auto seeds = read_lines(fixture_path("druglike_1k.smi"), true);
  const std::string alphabet = "CNOSPFIBrcnosp()[]=#-+:/\\@%.123456789H*$& ";
  const std::regex message_shape(R"(^(syntax|parentheses|unclosed_ring|duplicate_bond|valence|aromaticity): .+)");
  std::mt19937_64 rng(2024);
  std::map<std::string, int> seen;
  for (int i = 0; i < 100000; ++i) {
    std::string s = seeds[rng() % seeds.size()];
    const int edits = 1 + static_cast<int>(rng() % 4);
    for (int e = 0; e < edits; ++e) {
      const auto op = rng() % 3;
      const auto pos = s.empty() ? 0 : rng() % (s.size() + 1);
      const char ch = alphabet[rng() % alphabet.size()];
      if (op == 0 || s.empty()) s.insert(s.begin() + static_cast<std::ptrdiff_t>(pos), ch);
      else if (op == 1 && pos < s.size()) s.erase(pos, 1);
      else if (pos < s.size()) s[pos] = ch;
    }
    if (rng() % 50 == 0) {
      s.clear();
      for (int k = static_cast<int>(rng() % 24); k > 0; --k) s += static_cast<char>(rng() % 256);
    }
    auto outcome = parse_smiles(s);
    if (outcome.valid()) {
      ++seen["valid"];
      continue;
    }
    const auto msg = outcome.error().message();
    ASSERT_TRUE(std::regex_search(msg, message_shape)) << "input: " << s << " message: " << msg;
    ++seen[std::string(category_name(outcome.error().category))];
  }
  // The mutations reach every class.
  for (auto cat : kAllParseErrorCategories) EXPECT_GT(seen[std::string(category_name(cat))], 0) << category_name(cat);
}

}  // namespace
}  // namespace molrefine
