// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "molrefine/agent.hpp"
#include "molrefine/errors.hpp"
#include "molrefine/smiles.hpp"
#include "test_support.hpp"

namespace molrefine {
namespace {

using Kinds = std::vector<std::string>;

Kinds kinds(const RefinementTrace& t) {
  Kinds out;
  for (const auto& s : t.steps) out.emplace_back(step_kind_name(s.kind));
  return out;
}

class RecordingProposer : public Proposer {
 public:
  explicit RecordingProposer(std::vector<std::string> responses) : inner_(std::move(responses)) {}
  ProposerResponse propose(const ProposerRequest& request) override {
    seen.push_back(request);
    if (fail_on && seen.size() == *fail_on) throw TransportError("connection refused");
    return inner_.propose(request);
  }
  std::vector<ProposerRequest> seen;
  std::optional<std::size_t> fail_on;

 private:
  ScriptedProposer inner_;
};

const Database& small_db() {
  static const Database db = [] {
    std::stringstream in;
    std::size_t n = 0;
    for (const auto& s : testing::read_lines(testing::data_path("zinc_10k.smi"), true)) {
      if (n++ == 300) break;
      in << s << '\n';
    }
    return Database::build(in);
  }();
  return db;
}

LoopConfig config_for(const std::string& mode, int T = 3) {
  LoopConfig c;
  c.max_iterations = T;
  apply_mode(c, mode);
  return c;
}

std::string fmt_phrase(const ObjectiveTerm& term, double residual) {
  return std::string(direction_word(term.direction)) + " " + term.property + " by " + format_quantity(residual) +
         " more.";
}

// Residuals quoted in every outer prompt equal the gradient recomputed from the
// recorded property vectors of the state the prompt describes.
void expect_honest_feedback(const RefinementTrace& t) {
  const PropertyVector* last_valid = nullptr;
  for (std::size_t k = 0; k < t.steps.size(); ++k) {
    const auto& step = t.steps[k];
    if (step.kind == StepKind::kOuterRefine && t.config.gradient_feedback) {
      const PropertyVector& state = last_valid ? *last_valid : t.given_properties;
      const auto eval = evaluate(t.objective, t.given_properties, state);
      const auto grad = gradient(t.objective, t.given_properties, state);
      for (std::size_t i = 0; i < t.objective.terms.size(); ++i) {
        const auto& term = t.objective.terms[i];
        const auto phrase = fmt_phrase(term, grad.per_term[i].residual);
        if (eval.per_term[i].satisfied) {
          EXPECT_EQ(step.prompt.find(phrase), std::string::npos) << step.prompt;
        } else {
          EXPECT_NE(step.prompt.find(phrase), std::string::npos) << "missing '" << phrase << "' in\n" << step.prompt;
        }
      }
    }
    if (step.valid()) {
      ASSERT_TRUE(step.properties && step.gradient && step.evaluation);
      const auto grad = gradient(t.objective, t.given_properties, *step.properties);
      for (std::size_t i = 0; i < grad.per_term.size(); ++i) {
        EXPECT_EQ(grad.per_term[i].residual, step.gradient->per_term[i].residual);
      }
      last_valid = &*step.properties;
    }
  }
}

RefinementTrace run(const std::string& mode, std::vector<std::string> responses, const std::string& objective,
                    int T = 3, const Database* db = nullptr, const std::string& given = "CCO") {
  ScriptedProposer proposer(std::move(responses));
  auto trace = run_loop(config_for(mode, T), given, parse_objective(objective), proposer, db);
  EXPECT_EQ(validate_trace(trace), std::nullopt);
  expect_honest_feedback(trace);
  return trace;
}

TEST(AgentLoop, InvalidFixMissHit) {
  const auto t = run("full", {"C1CC", "CCO", "CCCCCC"}, "+LogP:0.5");
  EXPECT_EQ(kinds(t), (Kinds{"init", "inner_fix", "outer_refine"}));
  EXPECT_TRUE(t.final.valid);
  EXPECT_TRUE(t.final.hit);
  EXPECT_EQ(t.final.smiles, "CCCCCC");
  ASSERT_TRUE(t.final.similarity.has_value());
  EXPECT_FALSE(t.final.unchanged);
  EXPECT_NE(t.steps[1].prompt.find("unclosed_ring"), std::string::npos);
  EXPECT_NE(t.steps[1].prompt.find("C1CC"), std::string::npos);
}

TEST(AgentLoop, ImmediateHit) {
  const auto t = run("full", {"CCCCCC"}, "+LogP:0.5");
  EXPECT_EQ(kinds(t), (Kinds{"init"}));
  EXPECT_TRUE(t.final.hit);
  EXPECT_EQ(t.steps[0].iteration, 0);
}

TEST(AgentLoop, AlwaysInvalidExhaustsBudget) {
  const auto t = run("full", {"C1CC", "C1CC", "C1CC", "C1CC"}, "+LogP:0.5");
  EXPECT_EQ(kinds(t), (Kinds{"init", "inner_fix", "inner_fix", "inner_fix"}));
  EXPECT_FALSE(t.final.valid);
  EXPECT_FALSE(t.final.hit);
  EXPECT_FALSE(t.final.similarity.has_value());
}

TEST(AgentLoop, AlwaysMissExhaustsBudget) {
  const auto t = run("full", {"CCO", "CCO", "CCO", "CCO"}, "+LogP:0.5");
  EXPECT_EQ(kinds(t), (Kinds{"init", "outer_refine", "outer_refine", "outer_refine"}));
  EXPECT_TRUE(t.final.valid);
  EXPECT_FALSE(t.final.hit);
  EXPECT_TRUE(t.final.unchanged);
}

TEST(AgentLoop, IterationSweep) {
  for (int T = 3; T <= 6; ++T) {
    const auto t = run("full", std::vector<std::string>(static_cast<std::size_t>(T + 1), "CCO"), "+LogP:0.5", T);
    EXPECT_EQ(t.steps.size(), static_cast<std::size_t>(T + 1));
    EXPECT_EQ(t.steps.back().iteration, T);
  }
}

TEST(AgentLoop, AblationModes) {
  const std::vector<std::string> script = {"C(C", "CCO", "OCCO", "CCCCCC"};
  const auto* db = &small_db();
  struct Expect {
    std::string mode;
    Kinds kinds;
  };
  for (const auto& e : {Expect{"full", {"init", "inner_fix", "outer_refine", "outer_refine"}},
                        Expect{"no-inner", {"init", "outer_refine", "outer_refine", "outer_refine"}},
                        Expect{"generic", {"init", "inner_fix", "outer_refine", "outer_refine"}},
                        Expect{"no-retrieval", {"init", "inner_fix", "outer_refine", "outer_refine"}}}) {
    const auto t = run(e.mode, script, "+LogP:0.5", 3, db);
    EXPECT_EQ(kinds(t), e.kinds) << e.mode;
    EXPECT_EQ(t.config.mode_name(), e.mode);
    EXPECT_TRUE(t.final.hit) << e.mode;
  }
}

TEST(AgentLoop, NoInnerBuildsFromGivenWhenNothingValid) {
  const auto t = run("no-inner", {"C(C", "CCCCCC"}, "+LogP:0.5");
  EXPECT_EQ(kinds(t), (Kinds{"init", "outer_refine"}));
  const auto& prompt = t.steps[1].prompt;
  // Unchanged relative to the given molecule, the full threshold still owed.
  EXPECT_NE(prompt.find("which is unchanged compared to the given one"), std::string::npos) << prompt;
  EXPECT_NE(prompt.find("increase LogP by 0.5 more."), std::string::npos) << prompt;
}

TEST(AgentLoop, NoInnerUsesLastValidState) {
  const auto t = run("no-inner", {"CCCO", "C(C", "CCCCCC"}, "+LogP:2");
  EXPECT_EQ(kinds(t), (Kinds{"init", "outer_refine", "outer_refine"}));
  const auto& p = *t.steps[0].properties;
  const auto value = format_quantity(p.at("LogP"));
  EXPECT_NE(t.steps[2].prompt.find("has LogP of " + value), std::string::npos) << t.steps[2].prompt;
}

TEST(AgentLoop, ModeSoundness) {
  const auto* db = &small_db();
  const std::vector<std::string> script = {"CCO", "OCCO", "CCN", "CCCl"};
  const auto generic = run("generic", script, "+LogP:1,+TPSA:10", 3, db);
  for (const auto& s : generic.steps) {
    if (s.kind != StepKind::kOuterRefine) continue;
    std::string text = s.prompt;
    if (s.example) text.erase(text.find(s.example->smiles), s.example->smiles.size());
    EXPECT_TRUE(std::none_of(text.begin(), text.end(), [](unsigned char c) { return std::isdigit(c); })) << text;
    EXPECT_EQ(text.find("more."), std::string::npos);
  }
  const auto plain = run("no-retrieval", script, "+LogP:1,+TPSA:10", 3, db);
  for (const auto& s : plain.steps) {
    EXPECT_FALSE(s.example.has_value());
    EXPECT_EQ(s.prompt.find("For your reference"), std::string::npos);
    for (const auto& r : db->records()) {
      if (r.smiles.size() < 10) continue;
      EXPECT_EQ(s.prompt.find(r.smiles), std::string::npos) << r.smiles;
    }
  }
  const auto full = run("full", script, "+LogP:1,+TPSA:10", 3, db);
  std::size_t examples = 0;
  for (const auto& s : full.steps) {
    if (!s.example) continue;
    ++examples;
    EXPECT_NE(s.prompt.find(s.example->smiles), std::string::npos);
    EXPECT_EQ(db->records()[s.example->index].smiles, s.example->smiles);
  }
  EXPECT_GT(examples, 0U);
}

TEST(AgentLoop, RetrievalMissOmitsExample) {
  const auto* db = &small_db();
  const auto t = run("full", {"CCO", "CCO", "CCO", "CCO"}, "+LogP:1000", 3, db);
  EXPECT_EQ(kinds(t), (Kinds{"init", "outer_refine", "outer_refine", "outer_refine"}));
  for (const auto& s : t.steps) {
    EXPECT_FALSE(s.example.has_value());
    EXPECT_EQ(s.prompt.find("For your reference"), std::string::npos);
  }
}

TEST(AgentLoop, RetrievalExcludesGivenAndProposed) {
  const auto* db = &small_db();
  const auto& rec = (*db)[3];
  const auto t = run("full", {rec.smiles, rec.smiles}, "+LogP:0", 1, db, rec.smiles);
  // Unchanged molecule on a loose objective is a hit and is flagged.
  EXPECT_EQ(kinds(t), (Kinds{"init"}));
  EXPECT_TRUE(t.final.hit);
  EXPECT_TRUE(t.final.unchanged);
  const auto t2 = run("full", {rec.smiles, rec.smiles}, "+LogP:0.5", 1, db, rec.smiles);
  ASSERT_EQ(t2.steps.size(), 2U);
  ASSERT_TRUE(t2.steps[1].example.has_value());
  EXPECT_NE(t2.steps[1].example->smiles, rec.smiles);
}

TEST(AgentLoop, HistoryCapPinsFirstMessage) {
  RecordingProposer proposer(std::vector<std::string>(7, "C1CC"));
  auto trace = run_loop(config_for("full", 6), "CCO", parse_objective("+LogP:0.5"), proposer);
  ASSERT_EQ(proposer.seen.size(), 7U);
  for (const auto& req : proposer.seen) {
    ASSERT_FALSE(req.messages.empty());
    EXPECT_LE(req.messages.size(), kHistoryCap + 1);
    EXPECT_EQ(req.messages.front().content, trace.steps[0].prompt);
    for (std::size_t i = 0; i < req.messages.size(); ++i) {
      EXPECT_EQ(req.messages[i].role, i % 2 == 0 ? "user" : "assistant");
    }
  }
  EXPECT_EQ(proposer.seen.back().messages.back().content, trace.steps.back().prompt);
}

TEST(AgentLoop, TransportFailureAborts) {
  RecordingProposer proposer({"C1CC", "CCO"});
  proposer.fail_on = 2;
  auto trace = run_loop(config_for("full"), "CCO", parse_objective("+LogP:0.5"), proposer);
  EXPECT_TRUE(trace.aborted);
  EXPECT_NE(trace.abort_reason.find("connection refused"), std::string::npos);
  EXPECT_FALSE(trace.final.valid);
  EXPECT_EQ(trace.steps.size(), 1U);
}

TEST(AgentLoop, InvalidGivenIsUsageError) {
  ScriptedProposer proposer(std::vector<std::string>{"CCO"});
  EXPECT_THROW(run_loop(config_for("full"), "C1CC", parse_objective("+LogP:0.5"), proposer), UsageError);
  LoopConfig bad;
  bad.max_iterations = 0;
  EXPECT_THROW(run_loop(bad, "CCO", parse_objective("+LogP:0.5"), proposer), ConfigError);
  EXPECT_THROW(apply_mode(bad, "turbo"), ConfigError);
}

TEST(AgentLoop, ScenarioUnderrunSurfaces) {
  ScriptedProposer proposer(std::vector<std::string>{"C1CC"});
  EXPECT_THROW(run_loop(config_for("full"), "CCO", parse_objective("+LogP:0.5"), proposer), ScenarioUnderrun);
}

TEST(TraceValidator, RejectsBrokenBranching) {
  auto t = run("full", {"C1CC", "CCO", "CCCCCC"}, "+LogP:0.5");
  auto swapped = t;
  swapped.steps[1].kind = StepKind::kOuterRefine;
  EXPECT_TRUE(validate_trace(swapped).has_value());
  auto extra = t;
  extra.steps.push_back(extra.steps.back());
  extra.steps.back().iteration = 3;
  EXPECT_TRUE(validate_trace(extra).has_value());
  auto lying = t;
  lying.final.hit = false;
  EXPECT_TRUE(validate_trace(lying).has_value());
}

TEST(TraceJson, RoundTrip) {
  const auto t = run("full", {"C1CC", "CCO", "CCCCCC"}, "+LogP:0.5,-TPSA:0", 3, &small_db());
  const auto j = trace_to_json(t);
  const auto back = trace_from_json(j);
  EXPECT_EQ(trace_to_json(back), j);
  auto wrong = j;
  wrong["schema"] = 99;
  EXPECT_THROW(trace_from_json(wrong), ConfigError);
}

TEST(Prompts, InitialTemplate) {
  const auto p = initial_prompt(parse_objective("+LogP:0.5"), "CCO");
  for (const char* part : {"increase", "LogP", "0.5", "CCO", "must be similar to the given one",
                           "Respond with only the SMILES string of the modified molecule."}) {
    EXPECT_NE(p.find(part), std::string::npos) << part;
  }
  EXPECT_EQ(p.find("respectively"), std::string::npos);
  const auto two = initial_prompt(parse_objective("+LogP:0.5,-TPSA:10"), "CCO");
  EXPECT_NE(two.find("increase and decrease its LogP and TPSA by 0.5 and 10, respectively"), std::string::npos) << two;
  EXPECT_NE(initial_prompt(parse_objective("single/loose/+QED"), "CCO").find("by 0."), std::string::npos);
}

TEST(Prompts, ParseErrorFeedback) {
  const auto outcome = parse_smiles("C(C");
  const auto p = parse_error_feedback_prompt("C(C", outcome.error());
  EXPECT_NE(p.find(outcome.error().message()), std::string::npos);
  EXPECT_NE(p.find("parentheses"), std::string::npos);
  EXPECT_TRUE(p.ends_with("No explanation is needed."));
}

TEST(Prompts, OuterFeedbackStructure) {
  const auto spec = parse_objective("+LogP:0.5");
  const PropertyVector m{{"LogP", 1.0}}, mhat{{"LogP", 1.2}};
  const auto eval = evaluate(spec, m, mhat);
  const auto grad = gradient(spec, m, mhat);
  RetrievedExample ex{4, "CCCCCl", 0.4};
  OuterFeedback f{spec, m, mhat, eval, grad, &ex};
  const auto p = outer_feedback_prompt(f);
  EXPECT_TRUE(p.starts_with("Unfortunately, the modified molecule does not meet the objective."));
  EXPECT_NE(p.find("LogP of 1.2, which is increased by 0.2"), std::string::npos) << p;
  EXPECT_NE(p.find("increase LogP by 0.3 more."), std::string::npos) << p;
  EXPECT_NE(p.find("we found a molecule CCCCCl that is similar"), std::string::npos) << p;
  EXPECT_NE(p.find("Refine the modified molecule based on the above domain feedback."), std::string::npos);
  f.gradient_feedback = false;
  f.example = nullptr;
  EXPECT_EQ(outer_feedback_prompt(f),
            "Unfortunately, the modified molecule does not meet the objective.\n"
            "Respond with only the SMILES string of the modified molecule. No explanation is needed.");
}

TEST(Prompts, QuantityFormatting) {
  EXPECT_EQ(format_quantity(0.5), "0.5");
  EXPECT_EQ(format_quantity(10.0), "10");
  EXPECT_EQ(format_quantity(0.0), "0");
  EXPECT_EQ(format_quantity(-0.0001), "0");
  EXPECT_EQ(format_quantity(0.30000000000000004), "0.3");
  EXPECT_EQ(format_quantity(12.8912), "12.891");
}

TEST(Extraction, Corpus) {
  std::ifstream in(testing::fixture_path("extraction_corpus.jsonl"));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(extract_smiles(j.at("response").get<std::string>()), j.at("expected").get<std::string>())
        << j.at("response");
    ++n;
  }
  EXPECT_EQ(n, 50U);
  EXPECT_THROW(extract_smiles("  \n "), ProposerError);
}

}  // namespace
}  // namespace molrefine
