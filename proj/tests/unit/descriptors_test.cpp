// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "molrefine/descriptors.hpp"
#include "molrefine/errors.hpp"
#include "molrefine/smiles.hpp"
#include "test_support.hpp"

namespace molrefine {
namespace {

using testing::fixture_path;
using testing::read_lines;

MolGraph mol(std::string_view s) {
  auto outcome = parse_smiles(s);
  if (!outcome.valid()) throw std::runtime_error(std::string(s) + ": " + outcome.error().message());
  return outcome.molecule();
}

struct OracleRow {
  std::string smiles;
  double logp, tpsa, qed, mw;
  int hba, hbd, rotb, arom, alerts;
};

std::vector<OracleRow> oracle(const char* name) {
  std::vector<OracleRow> rows;
  for (const auto& line : read_lines(fixture_path(name))) {
    std::istringstream f(line);
    OracleRow r;
    f >> r.smiles >> r.logp >> r.tpsa >> r.qed >> r.mw >> r.hba >> r.hbd >> r.rotb >> r.arom >> r.alerts;
    rows.push_back(r);
  }
  return rows;
}

TEST(Descriptors, ReferenceValues) {
  EXPECT_EQ(ertl_tpsa(mol("c1ccccc1")), 0.0);
  EXPECT_NEAR(ertl_tpsa(mol("c1ccncc1")), 12.89, 0.01);
  EXPECT_NEAR(ertl_tpsa(mol("Nc1ccccc1")), 26.02, 0.01);
  EXPECT_NEAR(molecular_weight(mol("C")), 16.043, 0.001);
  EXPECT_NEAR(ertl_tpsa(mol("CCO")), 20.23, 0.01);
  EXPECT_NEAR(crippen_logp(mol("CCO")), -0.0014, 0.001);
  EXPECT_NEAR(crippen_logp(mol("c1ccccc1")), 1.6866, 0.001);
}

TEST(Descriptors, OracleParity) {
  const auto rows = oracle("descriptor_oracle.tsv");
  ASSERT_EQ(rows.size(), 200U);
  std::size_t logp_ok = 0, tpsa_ok = 0, alert_free = 0;
  for (const auto& r : rows) {
    const auto m = mol(r.smiles);
    logp_ok += std::fabs(crippen_logp(m) - r.logp) <= 0.01;
    tpsa_ok += std::fabs(ertl_tpsa(m) - r.tpsa) <= 0.01;
    const auto sub = sub_descriptors(m);
    EXPECT_NEAR(sub.mw, r.mw, 0.01) << r.smiles;
    EXPECT_EQ(sub.hba, r.hba) << r.smiles;
    EXPECT_EQ(sub.hbd, r.hbd) << r.smiles;
    EXPECT_EQ(sub.rotb, r.rotb) << r.smiles;
    EXPECT_EQ(sub.arom, r.arom) << r.smiles;
    EXPECT_LE(sub.alerts, r.alerts) << r.smiles;
    if (r.alerts == 0) {
      ++alert_free;
      EXPECT_NEAR(qed(m), r.qed, 0.05) << r.smiles;
    }
  }
  EXPECT_GE(logp_ok, 198U);
  EXPECT_GE(tpsa_ok, 198U);
  EXPECT_GT(alert_free, 100U);
}

TEST(Descriptors, QedIsBounded) {
  for (const auto& s : read_lines(fixture_path("druglike_1k.smi"), true)) {
    auto outcome = parse_smiles(s);
    if (!outcome.valid()) continue;
    const double q = qed(outcome.molecule());
    EXPECT_GT(q, 0.0) << s;
    EXPECT_LE(q, 1.0) << s;
  }
}

TEST(Descriptors, ComputePropertiesChecksIds) {
  const auto m = mol("CCO");
  auto props = compute_properties(m, {"LogP", "TPSA", "QED"});
  EXPECT_EQ(props.size(), 3U);
  EXPECT_THROW(compute_properties(m, {"Solubility"}), ConfigError);
  EXPECT_THROW(compute_properties(m, {}), ConfigError);
  EXPECT_TRUE(is_registered_property("QED"));
  EXPECT_FALSE(is_registered_property("qed"));
}

TEST(Descriptors, BadParameterRowsNameTheFile) {
  try {
    ParameterTables::from_text("C1\tnot a pattern[\t0.1\n", "", "", "");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("crippen.tsv"), std::string::npos) << e.what();
  }
}

TEST(Descriptors, AssetHashesRecorded) {
  const auto& tables = ParameterTables::defaults();
  for (auto name : ParameterTables::kAssetFiles) {
    auto it = tables.asset_hashes.find(std::string(name));
    ASSERT_NE(it, tables.asset_hashes.end()) << name;
    EXPECT_EQ(it->second.size(), 64U);
  }
}

}  // namespace
}  // namespace molrefine
