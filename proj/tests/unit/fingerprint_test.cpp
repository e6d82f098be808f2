// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "molrefine/errors.hpp"
#include "molrefine/fingerprint.hpp"
#include "molrefine/smiles.hpp"
#include "test_support.hpp"

namespace molrefine {
namespace {

std::vector<MolGraph> sample_molecules() {
  std::vector<MolGraph> out;
  for (const auto& s : testing::read_lines(testing::fixture_path("druglike_1k.smi"), true)) {
    auto outcome = parse_smiles(s);
    if (outcome.valid()) out.push_back(outcome.molecule());
  }
  return out;
}

MolGraph mol(std::string_view s) { return parse_smiles(s).molecule(); }

TEST(Fingerprint, IdentitySymmetryBounds) {
  const auto mols = sample_molecules();
  std::vector<Fingerprint> fps;
  for (const auto& m : mols) fps.push_back(morgan_fingerprint(m));
  std::mt19937_64 rng(5);
  for (int k = 0; k < 1000; ++k) {
    const auto& a = fps[rng() % fps.size()];
    const auto& b = fps[rng() % fps.size()];
    EXPECT_EQ(tanimoto(a, a), 1.0);
    const double ab = tanimoto(a, b);
    EXPECT_EQ(ab, tanimoto(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(Fingerprint, PermutationInvariant) {
  const auto mols = sample_molecules();
  std::mt19937_64 rng(17);
  for (std::size_t k = 0; k < 50; ++k) {
    const auto& m = mols[k * 13];
    const auto fp = morgan_fingerprint(m);
    std::vector<int> perm(m.atom_count());
    std::iota(perm.begin(), perm.end(), 0);
    for (int r = 0; r < 100; ++r) {
      std::shuffle(perm.begin(), perm.end(), rng);
      EXPECT_EQ(morgan_fingerprint(m.permuted(perm)), fp);
    }
  }
}

TEST(Fingerprint, EnvironmentCountsAndFolding) {
  const auto m = mol("CCO");
  const auto hashes = morgan_environment_hashes(m, 2);
  EXPECT_EQ(hashes.size(), 9U);
  const auto fp = morgan_fingerprint(m, 2, 2048);
  for (auto h : hashes) EXPECT_TRUE(fp.test(h & 2047));
  EXPECT_LE(fp.popcount(), 9);
  // Radius 0 only depends on atom invariants: the two carbons differ by H count and degree.
  EXPECT_EQ(morgan_fingerprint(m, 0, 2048).popcount(), 3);
  EXPECT_EQ(morgan_fingerprint(mol("CC"), 0, 2048).popcount(), 1);
}

TEST(Fingerprint, SimilarMoleculesScoreHigher) {
  const auto base = morgan_fingerprint(mol("CCOc1ccccc1"));
  EXPECT_GT(tanimoto(base, morgan_fingerprint(mol("CCCOc1ccccc1"))),
            tanimoto(base, morgan_fingerprint(mol("NC(=O)C1CC1"))));
}

TEST(Fingerprint, EmptyPairIsOne) {
  Fingerprint a(64, 2), b(64, 2);
  EXPECT_EQ(tanimoto(a, b), 1.0);
  b.set(3);
  EXPECT_EQ(tanimoto(a, b), 0.0);
}

TEST(Fingerprint, ParameterChecks) {
  EXPECT_THROW(Fingerprint(100, 2), UsageError);
  EXPECT_THROW(Fingerprint(32, 2), UsageError);
  EXPECT_THROW(Fingerprint(2048, 9), UsageError);
  EXPECT_THROW(tanimoto(Fingerprint(2048, 2), Fingerprint(1024, 2)), UsageError);
  EXPECT_THROW(tanimoto(Fingerprint(2048, 2), Fingerprint(2048, 3)), UsageError);
}

TEST(Fingerprint, Base64RoundTrip) {
  const auto fp = morgan_fingerprint(mol("CC(=O)Nc1ccc(O)cc1"));
  const auto text = fp.to_base64();
  EXPECT_EQ(Fingerprint::from_base64(text, 2048, 2), fp);
  EXPECT_THROW(Fingerprint::from_base64(text, 1024, 2), UsageError);
  Fingerprint one(64, 1);
  one.set(0);
  one.set(9);
  // Little-endian: byte 0 = 0x01, byte 1 = 0x02.
  EXPECT_EQ(one.to_base64(), "AQIAAAAAAAA=");
}

}  // namespace
}  // namespace molrefine
