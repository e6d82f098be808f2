// SPDX-License-Identifier: Apache-2.0
#include "molrefine/agent.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "molrefine/errors.hpp"
#include "molrefine/fingerprint.hpp"
#include "molrefine/signature.hpp"
#include "molrefine/smiles.hpp"

namespace molrefine {
namespace {

using nlohmann::json;

constexpr std::string_view kClosing = "Respond with only the SMILES string of the modified molecule. No explanation is needed.";

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string join(const std::vector<std::string>& items, std::string_view last_sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += i + 1 == items.size() ? last_sep : std::string_view(", ");
    out += items[i];
  }
  return out;
}

// A valid proposal together with everything the next outer prompt needs.
struct ValidState {
  std::string smiles;
  std::string signature;
  PropertyVector properties;
  EvaluationResult evaluation;
  Gradient gradient;
  Fingerprint query_fp;
};

bool grammar_ok(std::string_view token) {
  const auto outcome = parse_smiles(token);
  return outcome.valid() || outcome.error().category != ParseErrorCategory::kSyntax;
}

std::string strip_token(std::string_view t) {
  constexpr std::string_view kWrap = "\"'`*_<>";
  bool changed = true;
  while (changed && !t.empty()) {
    changed = false;
    while (!t.empty() && kWrap.find(t.front()) != std::string_view::npos) t.remove_prefix(1), changed = true;
    while (!t.empty() && (kWrap.find(t.back()) != std::string_view::npos ||
                          std::string_view(".,;:!?").find(t.back()) != std::string_view::npos)) {
      t.remove_suffix(1);
      changed = true;
    }
    if (t.size() >= 2 && t.front() == '(' && t.back() == ')') {
      t = t.substr(1, t.size() - 2);
      changed = true;
    }
  }
  return std::string(t);
}

// Words that happen to be valid SMILES but are far more likely to be prose.
bool prose_word(std::string_view t) { return t == "I" || t == "No" || t == "CO" || t == "NO" || t == "SO"; }

json props_json(const PropertyVector& p) { return json(p); }

json evaluation_json(const EvaluationResult& e) {
  json terms = json::array();
  for (const auto& t : e.per_term) terms.push_back({{"delta", t.observed_delta}, {"satisfied", t.satisfied}});
  return {{"overall", e.overall}, {"terms", terms}};
}

json gradient_json(const Gradient& g) {
  json terms = json::array();
  for (const auto& t : g.per_term) {
    terms.push_back({{"property", t.property}, {"direction", direction_word(t.direction)}, {"residual", t.residual}});
  }
  return terms;
}

Direction direction_from(const std::string& word) {
  if (word == "increase") return Direction::kIncrease;
  if (word == "decrease") return Direction::kDecrease;
  throw ConfigError(fmt::format("bad direction '{}'", word));
}

StepKind step_kind_from(const std::string& name) {
  if (name == "init") return StepKind::kInit;
  if (name == "inner_fix") return StepKind::kInnerFix;
  if (name == "outer_refine") return StepKind::kOuterRefine;
  throw ConfigError(fmt::format("bad step kind '{}'", name));
}

}  // namespace

std::optional<std::string> LoopConfig::mode_name() const {
  if (inner_loop_enabled && gradient_feedback && retrieval_enabled) return "full";
  if (!inner_loop_enabled && gradient_feedback && retrieval_enabled) return "no-inner";
  if (inner_loop_enabled && !gradient_feedback && retrieval_enabled) return "generic";
  if (inner_loop_enabled && gradient_feedback && !retrieval_enabled) return "no-retrieval";
  return std::nullopt;
}

void apply_mode(LoopConfig& config, std::string_view mode) {
  config.inner_loop_enabled = mode != "no-inner";
  config.gradient_feedback = mode != "generic";
  config.retrieval_enabled = mode != "no-retrieval";
  if (mode != "full" && mode != "no-inner" && mode != "generic" && mode != "no-retrieval") {
    throw ConfigError(fmt::format("unknown mode '{}' (full, no-inner, generic, no-retrieval)", mode));
  }
}

std::string_view step_kind_name(StepKind kind) {
  switch (kind) {
    case StepKind::kInit: return "init";
    case StepKind::kInnerFix: return "inner_fix";
    case StepKind::kOuterRefine: return "outer_refine";
  }
  return "init";
}

std::string format_quantity(double value) {
  if (std::fabs(value) < 0.0005) value = 0.0;
  auto s = fmt::format("{:.3f}", value);
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  return s;
}

std::string initial_prompt(const ObjectiveSpec& spec, std::string_view molecule) {
  std::vector<std::string> directions;
  std::vector<std::string> properties;
  std::vector<std::string> thresholds;
  for (const auto& t : spec.terms) {
    directions.emplace_back(direction_word(t.direction));
    properties.push_back(t.property);
    thresholds.push_back(format_quantity(t.magnitude));
  }
  const bool several = spec.terms.size() > 1;
  return fmt::format(
      "Given {}, modify it to {} its {} by {}{}. Importantly, the modified molecule must be similar to the given "
      "one.\n{}",
      molecule, join(directions, " and "), join(properties, " and "), join(thresholds, " and "),
      several ? ", respectively" : "", kClosing);
}

std::string parse_error_feedback_prompt(std::string_view bad_smiles, const ParseError& error) {
  return fmt::format(
      "The modified molecule {} is not chemically valid. Parsing it failed with this error: {}.\n"
      "Correct the modified molecule so that it is valid and still meets the objective.\n{}",
      bad_smiles, error.message(), kClosing);
}

std::string outer_feedback_prompt(const OuterFeedback& f) {
  std::string out = "Unfortunately, the modified molecule does not meet the objective.";
  if (f.last_invalid) out += " It is not a valid molecule either; the last valid state is described below.";
  if (f.gradient_feedback) {
    bool first = true;
    for (std::size_t i = 0; i < f.spec.terms.size(); ++i) {
      if (f.evaluation.per_term[i].satisfied) continue;
      const auto& term = f.spec.terms[i];
      const auto& g = f.gradient.per_term[i];
      const double value = f.props_mhat.at(term.property);
      const double change = value - f.props_m.at(term.property);
      out += first ? " More specifically, the modified molecule has " : " It has ";
      first = false;
      if (format_quantity(change) == "0") {
        out += fmt::format("{} of {}, which is unchanged compared to the given one.", term.property,
                           format_quantity(value));
      } else {
        out += fmt::format("{} of {}, which is {} by {} compared to the given one.", term.property,
                           format_quantity(value), change > 0 ? "increased" : "decreased",
                           format_quantity(std::fabs(change)));
      }
      out += fmt::format(" To meet the objective, {} {} by {} more.", direction_word(g.direction), term.property,
                         format_quantity(g.residual));
    }
  }
  if (f.gradient_feedback) out += "\nRefine the modified molecule based on the above domain feedback.";
  if (f.retrieval_enabled && f.example != nullptr) {
    out += fmt::format(
        "\nFor your reference, we found a molecule {} that is similar to the modified molecule and meets the "
        "objective.",
        f.example->smiles);
  }
  out += '\n';
  out += kClosing;
  return out;
}

std::string extract_smiles(std::string_view response) {
  std::string_view text = trim(response);
  if (text.empty()) throw ProposerError("empty response");

  // Code fence: keep the body of the first fenced block.
  if (auto open = text.find("```"); open != std::string_view::npos) {
    auto body_start = text.find('\n', open);
    auto close = text.find("```", open + 3);
    if (body_start != std::string_view::npos && (close == std::string_view::npos || body_start < close)) {
      auto body = text.substr(body_start + 1, close == std::string_view::npos ? std::string_view::npos
                                                                               : close - body_start - 1);
      if (!trim(body).empty()) text = trim(body);
    } else if (close != std::string_view::npos) {
      auto inline_body = trim(text.substr(open + 3, close - open - 3));
      if (!inline_body.empty()) text = inline_body;
    }
  }

  // Whole text wrapped in quotes.
  if (text.size() >= 2 && (text.front() == '"' || text.front() == '\'' || text.front() == '`') &&
      text.back() == text.front()) {
    text = trim(text.substr(1, text.size() - 2));
  }

  // Markup tags such as <smiles>...</smiles> become separators.
  std::string untagged(text);
  for (auto open = untagged.find('<'); open != std::string::npos; open = untagged.find('<', open + 1)) {
    const auto close = untagged.find('>', open);
    if (close == std::string::npos) break;
    const auto inner = std::string_view(untagged).substr(open + 1, close - open - 1);
    const bool tag = !inner.empty() && inner.find_first_of(" \n<") == std::string_view::npos &&
                     std::isalpha(static_cast<unsigned char>(inner.front() == '/' && inner.size() > 1 ? inner[1] : inner.front()));
    if (tag) std::fill(untagged.begin() + static_cast<std::ptrdiff_t>(open), untagged.begin() + static_cast<std::ptrdiff_t>(close) + 1, ' ');
  }
  text = untagged;

  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) {
      auto token = strip_token(text.substr(i, j - i));
      if (!token.empty() && !prose_word(token)) tokens.push_back(std::move(token));
    }
    i = j;
  }
  for (const auto& t : tokens) {
    if (parse_smiles(t).valid()) return t;
  }
  for (const auto& t : tokens) {
    // All-lowercase words ("no", "on") pass the grammar but are prose.
    const bool word = std::all_of(t.begin(), t.end(), [](char c) { return c >= 'a' && c <= 'z'; });
    if (!word && grammar_ok(t)) return t;
  }
  const auto newline = text.find('\n');
  return std::string(trim(text.substr(0, newline)));
}

RefinementTrace run_loop(const LoopConfig& config, std::string_view given, const ObjectiveSpec& spec,
                         Proposer& proposer, const Database* db) {
  if (config.max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
  validate(spec);
  auto given_outcome = parse_smiles(given);
  if (!given_outcome.valid()) {
    throw UsageError(fmt::format("given molecule '{}' is invalid: {}", given, given_outcome.error().message()));
  }
  const MolGraph& m = given_outcome.molecule();
  const auto& ids = registered_properties();

  RefinementTrace trace;
  trace.given = std::string(given);
  trace.given_properties = compute_properties(m, ids);
  trace.objective = spec;
  trace.config = config;
  const auto given_sig = graph_signature(m);
  const auto fp_m = morgan_fingerprint(m, config.fp_radius, config.fp_bits);
  const bool use_db = db != nullptr && config.retrieval_enabled;
  const int query_radius = use_db ? db->header().radius : config.fp_radius;
  const int query_bits = use_db ? db->header().nbits : config.fp_bits;

  std::vector<ChatMessage> history;
  std::optional<ValidState> last_valid;
  std::optional<ValidState> current;

  auto ask = [&](TraceStep step) {
    ProposerRequest request;
    request.system = config.system_prompt;
    request.params = config.generation;
    if (history.size() > kHistoryCap) {
      request.messages.push_back(history.front());
      request.messages.insert(request.messages.end(), history.end() - static_cast<std::ptrdiff_t>(kHistoryCap - 1),
                              history.end());
    } else {
      request.messages = history;
    }
    request.messages.push_back({"user", step.prompt});
    auto response = proposer.propose(request);
    step.response = response.text;
    step.latency_ms = response.latency_ms;
    step.from_cache = response.from_cache;
    history.push_back({"user", step.prompt});
    history.push_back({"assistant", response.text});

    step.extracted = extract_smiles(response.text);
    auto outcome = parse_smiles(step.extracted);
    current.reset();
    if (outcome.valid()) {
      const auto& mol = outcome.molecule();
      auto props = compute_properties(mol, ids);
      ValidState s{step.extracted,
                   graph_signature(mol),
                   props,
                   evaluate(spec, trace.given_properties, props),
                   gradient(spec, trace.given_properties, props),
                   morgan_fingerprint(mol, query_radius, query_bits)};
      step.properties = s.properties;
      step.evaluation = s.evaluation;
      step.gradient = s.gradient;
      current = s;
      last_valid = std::move(s);
    } else {
      step.error = outcome.error();
    }
    trace.steps.push_back(std::move(step));
  };

  try {
    TraceStep init;
    init.iteration = 0;
    init.kind = StepKind::kInit;
    init.prompt = initial_prompt(spec, given);
    ask(std::move(init));

    for (int iteration = 1; iteration <= config.max_iterations; ++iteration) {
      const auto& prev = trace.steps.back();
      TraceStep step;
      step.iteration = iteration;
      if (!prev.valid() && config.inner_loop_enabled) {
        step.kind = StepKind::kInnerFix;
        step.prompt = parse_error_feedback_prompt(prev.extracted, *prev.error);
        ask(std::move(step));
        continue;
      }
      if (prev.valid() && prev.evaluation->overall) break;

      step.kind = StepKind::kOuterRefine;
      const bool invalid = !prev.valid();
      // Without the inner loop an invalid proposal falls back to the last
      // valid state, or to the given molecule itself.
      std::optional<ValidState> fallback;
      const ValidState* state = invalid ? (last_valid ? &*last_valid : nullptr) : &*current;
      if (state == nullptr) {
        fallback = ValidState{trace.given,
                    given_sig,
                    trace.given_properties,
                    evaluate(spec, trace.given_properties, trace.given_properties),
                    gradient(spec, trace.given_properties, trace.given_properties),
                    morgan_fingerprint(m, query_radius, query_bits)};
        state = &*fallback;
      }
      if (use_db) {
        if (auto hit = db->retrieve(spec, trace.given_properties, state->query_fp, {given_sig, state->signature})) {
          const auto& rec = (*db)[*hit];
          step.example = RetrievedExample{*hit, rec.smiles, tanimoto(rec.fingerprint, state->query_fp)};
        }
      }
      OuterFeedback feedback{spec,
                             trace.given_properties,
                             state->properties,
                             state->evaluation,
                             state->gradient,
                             step.example ? &*step.example : nullptr,
                             config.gradient_feedback,
                             config.retrieval_enabled,
                             invalid};
      step.prompt = outer_feedback_prompt(feedback);
      ask(std::move(step));
    }
  } catch (const ProposerError& e) {
    trace.aborted = true;
    trace.abort_reason = e.what();
  }

  if (trace.aborted) {
    trace.final.smiles = trace.steps.empty() ? std::string() : trace.steps.back().extracted;
    return trace;
  }
  const auto& last = trace.steps.back();
  trace.final.smiles = last.extracted;
  trace.final.valid = last.valid();
  if (trace.final.valid) {
    trace.final.hit = last.evaluation->overall;
    auto outcome = parse_smiles(last.extracted);
    trace.final.similarity = tanimoto(fp_m, morgan_fingerprint(outcome.molecule(), config.fp_radius, config.fp_bits));
    trace.final.unchanged = graph_signature(outcome.molecule()) == given_sig;
  }
  return trace;
}

std::optional<std::string> validate_trace(const RefinementTrace& trace) {
  const auto& steps = trace.steps;
  if (steps.empty()) {
    return trace.aborted ? std::nullopt : std::optional<std::string>("trace has no steps");
  }
  if (steps.front().kind != StepKind::kInit || steps.front().iteration != 0) return "first step is not init";
  const int budget = trace.config.max_iterations;
  if (static_cast<int>(steps.size()) - 1 > budget) return "more refinement steps than the iteration budget";
  for (std::size_t k = 1; k < steps.size(); ++k) {
    const auto& prev = steps[k - 1];
    const auto& step = steps[k];
    if (step.iteration != static_cast<int>(k)) return fmt::format("step {} has iteration {}", k, step.iteration);
    StepKind expected;
    if (!prev.valid()) {
      expected = trace.config.inner_loop_enabled ? StepKind::kInnerFix : StepKind::kOuterRefine;
    } else if (prev.evaluation && prev.evaluation->overall) {
      return fmt::format("step {} follows a hit", k);
    } else {
      expected = StepKind::kOuterRefine;
    }
    if (step.kind != expected) {
      return fmt::format("step {} is {} but should be {}", k, step_kind_name(step.kind), step_kind_name(expected));
    }
  }
  if (!trace.aborted) {
    const auto& last = steps.back();
    const bool hit = last.valid() && last.evaluation && last.evaluation->overall;
    if (!hit && static_cast<int>(steps.size()) - 1 < budget) return "loop stopped before the budget without a hit";
    if (trace.final.hit != hit || trace.final.valid != last.valid()) return "final outcome disagrees with last step";
  }
  if (trace.final.hit && !trace.final.valid) return "hit without validity";
  return std::nullopt;
}

json parse_error_to_json(const ParseError& e) {
  return {{"category", category_name(e.category)},
          {"detail", e.detail},
          {"position", e.position ? json(*e.position) : json(nullptr)},
          {"message", e.message()}};
}

json trace_to_json(const RefinementTrace& t) {
  json terms = json::array();
  for (const auto& term : t.objective.terms) {
    terms.push_back(
        {{"property", term.property}, {"direction", direction_word(term.direction)}, {"magnitude", term.magnitude}});
  }
  json steps = json::array();
  for (const auto& s : t.steps) {
    json step = {{"iteration", s.iteration},
                 {"kind", step_kind_name(s.kind)},
                 {"prompt", s.prompt},
                 {"response", s.response},
                 {"extracted", s.extracted},
                 {"valid", s.valid()},
                 {"error", s.error ? parse_error_to_json(*s.error) : json(nullptr)},
                 {"properties", s.properties ? props_json(*s.properties) : json(nullptr)},
                 {"evaluation", s.evaluation ? evaluation_json(*s.evaluation) : json(nullptr)},
                 {"gradient", s.gradient ? gradient_json(*s.gradient) : json(nullptr)},
                 {"example", s.example ? json{{"index", s.example->index},
                                              {"smiles", s.example->smiles},
                                              {"similarity", s.example->similarity}}
                                       : json(nullptr)},
                 {"latency_ms", s.latency_ms},
                 {"cached", s.from_cache}};
    steps.push_back(std::move(step));
  }
  const auto& c = t.config;
  return {{"schema", kTraceSchemaVersion},
          {"given", {{"smiles", t.given}, {"properties", props_json(t.given_properties)}}},
          {"objective", {{"name", t.objective.name}, {"terms", terms}}},
          {"config",
           {{"max_iterations", c.max_iterations},
            {"inner_loop", c.inner_loop_enabled},
            {"gradient_feedback", c.gradient_feedback},
            {"retrieval", c.retrieval_enabled},
            {"model", c.generation.model},
            {"temperature", c.generation.temperature},
            {"max_tokens", c.generation.max_tokens},
            {"fp_radius", c.fp_radius},
            {"fp_bits", c.fp_bits}}},
          {"steps", steps},
          {"final",
           {{"smiles", t.final.smiles},
            {"valid", t.final.valid},
            {"hit", t.final.hit},
            {"similarity", t.final.similarity ? json(*t.final.similarity) : json(nullptr)},
            {"unchanged", t.final.unchanged}}},
          {"aborted", t.aborted},
          {"abort_reason", t.abort_reason}};
}

RefinementTrace trace_from_json(const json& j) {
  try {
    if (j.at("schema").get<int>() != kTraceSchemaVersion) throw ConfigError("unsupported trace schema");
    RefinementTrace t;
    t.given = j.at("given").at("smiles").get<std::string>();
    t.given_properties = j.at("given").at("properties").get<PropertyVector>();
    t.objective.name = j.at("objective").at("name").get<std::string>();
    for (const auto& term : j.at("objective").at("terms")) {
      t.objective.terms.push_back({term.at("property").get<std::string>(),
                                   direction_from(term.at("direction").get<std::string>()),
                                   term.at("magnitude").get<double>()});
    }
    const auto& c = j.at("config");
    t.config.max_iterations = c.at("max_iterations").get<int>();
    t.config.inner_loop_enabled = c.at("inner_loop").get<bool>();
    t.config.gradient_feedback = c.at("gradient_feedback").get<bool>();
    t.config.retrieval_enabled = c.at("retrieval").get<bool>();
    t.config.generation.model = c.at("model").get<std::string>();
    t.config.generation.temperature = c.at("temperature").get<double>();
    t.config.generation.max_tokens = c.at("max_tokens").get<int>();
    t.config.fp_radius = c.at("fp_radius").get<int>();
    t.config.fp_bits = c.at("fp_bits").get<int>();
    for (const auto& s : j.at("steps")) {
      TraceStep step;
      step.iteration = s.at("iteration").get<int>();
      step.kind = step_kind_from(s.at("kind").get<std::string>());
      step.prompt = s.at("prompt").get<std::string>();
      step.response = s.at("response").get<std::string>();
      step.extracted = s.at("extracted").get<std::string>();
      if (const auto& e = s.at("error"); !e.is_null()) {
        auto category = category_from_name(e.at("category").get<std::string>());
        if (!category) throw ConfigError("bad error category in trace");
        step.error = ParseError{*category, e.at("detail").get<std::string>(),
                                e.at("position").is_null() ? std::nullopt
                                                           : std::optional<std::size_t>(e.at("position").get<std::size_t>())};
      }
      if (const auto& p = s.at("properties"); !p.is_null()) step.properties = p.get<PropertyVector>();
      if (const auto& e = s.at("evaluation"); !e.is_null()) {
        EvaluationResult r;
        r.overall = e.at("overall").get<bool>();
        for (const auto& term : e.at("terms")) {
          r.per_term.push_back({term.at("delta").get<double>(), term.at("satisfied").get<bool>()});
        }
        step.evaluation = r;
      }
      if (const auto& g = s.at("gradient"); !g.is_null()) {
        Gradient grad;
        for (const auto& term : g) {
          grad.per_term.push_back({term.at("property").get<std::string>(),
                                   direction_from(term.at("direction").get<std::string>()),
                                   term.at("residual").get<double>()});
        }
        step.gradient = grad;
      }
      if (const auto& e = s.at("example"); !e.is_null()) {
        step.example = RetrievedExample{e.at("index").get<std::size_t>(), e.at("smiles").get<std::string>(),
                                        e.at("similarity").get<double>()};
      }
      step.latency_ms = s.at("latency_ms").get<double>();
      step.from_cache = s.at("cached").get<bool>();
      t.steps.push_back(std::move(step));
    }
    const auto& f = j.at("final");
    t.final.smiles = f.at("smiles").get<std::string>();
    t.final.valid = f.at("valid").get<bool>();
    t.final.hit = f.at("hit").get<bool>();
    if (!f.at("similarity").is_null()) t.final.similarity = f.at("similarity").get<double>();
    t.final.unchanged = f.at("unchanged").get<bool>();
    t.aborted = j.at("aborted").get<bool>();
    t.abort_reason = j.at("abort_reason").get<std::string>();
    return t;
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("bad trace: {}", e.what()));
  }
}

}  // namespace molrefine
