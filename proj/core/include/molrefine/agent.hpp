// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "molrefine/objective.hpp"
#include "molrefine/parse_error.hpp"
#include "molrefine/proposer.hpp"
#include "molrefine/retrieval.hpp"

namespace molrefine {

inline constexpr int kTraceSchemaVersion = 1;
inline constexpr std::size_t kHistoryCap = 8;

struct LoopConfig {
  int max_iterations = 3;
  bool inner_loop_enabled = true;
  bool gradient_feedback = true;
  bool retrieval_enabled = true;
  GenerationParams generation;
  std::string system_prompt;
  int fp_radius = kDefaultRadius;
  int fp_bits = kDefaultBits;

  /// "full", "no-inner", "generic", "no-retrieval"; nullopt for other combinations.
  std::optional<std::string> mode_name() const;
};

/// Sets the three mode flags from a mode name; throws ConfigError for unknown names.
void apply_mode(LoopConfig& config, std::string_view mode);

enum class StepKind { kInit, kInnerFix, kOuterRefine };
std::string_view step_kind_name(StepKind kind);

struct RetrievedExample {
  std::size_t index = 0;
  std::string smiles;
  double similarity = 0.0;
};

struct TraceStep {
  /// 0 for the initial proposal, then 1..T.
  int iteration = 0;
  StepKind kind = StepKind::kInit;
  std::string prompt;
  std::string response;
  std::string extracted;
  /// nullopt when the extracted text is a valid molecule.
  std::optional<ParseError> error;
  /// Set when valid.
  std::optional<PropertyVector> properties;
  std::optional<EvaluationResult> evaluation;
  std::optional<Gradient> gradient;
  /// Example quoted in this step's prompt.
  std::optional<RetrievedExample> example;
  double latency_ms = 0.0;
  bool from_cache = false;

  bool valid() const { return !error.has_value(); }
};

struct TraceFinal {
  std::string smiles;
  bool valid = false;
  bool hit = false;
  std::optional<double> similarity;
  /// Same graph as the given molecule.
  bool unchanged = false;
};

struct RefinementTrace {
  std::string given;
  PropertyVector given_properties;
  ObjectiveSpec objective;
  LoopConfig config;
  std::vector<TraceStep> steps;
  TraceFinal final;
  bool aborted = false;
  std::string abort_reason;
};

/// Initial request: objective, molecule and thresholds in one instruction.
std::string initial_prompt(const ObjectiveSpec& spec, std::string_view molecule);
/// Asks for a corrected molecule, quoting the parser's message.
std::string parse_error_feedback_prompt(std::string_view bad_smiles, const ParseError& error);

struct OuterFeedback {
  const ObjectiveSpec& spec;
  const PropertyVector& props_m;
  const PropertyVector& props_mhat;
  const EvaluationResult& evaluation;
  const Gradient& gradient;
  const RetrievedExample* example = nullptr;
  bool gradient_feedback = true;
  bool retrieval_enabled = true;
  /// The newest proposal was invalid and the inner loop is off.
  bool last_invalid = false;
};
std::string outer_feedback_prompt(const OuterFeedback& feedback);

/// Number formatting used in every prompt: three decimals, trailing zeros trimmed.
std::string format_quantity(double value);

/// Pulls a SMILES out of free-form model output. Throws ProposerError when the
/// response is blank.
std::string extract_smiles(std::string_view response);

/// Runs the nested refinement loop for one molecule. Throws UsageError when
/// `given` does not parse. Proposer failures end the trace with aborted = true.
RefinementTrace run_loop(const LoopConfig& config, std::string_view given, const ObjectiveSpec& spec,
                         Proposer& proposer, const Database* db = nullptr);

/// Checks that each step kind follows from the previous step's outcome and the
/// budget; returns a description of the first violation.
std::optional<std::string> validate_trace(const RefinementTrace& trace);

nlohmann::json trace_to_json(const RefinementTrace& trace);
/// Throws ConfigError on schema mismatch.
RefinementTrace trace_from_json(const nlohmann::json& j);

nlohmann::json parse_error_to_json(const ParseError& error);

}  // namespace molrefine
