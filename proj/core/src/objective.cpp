// SPDX-License-Identifier: Apache-2.0
#include "molrefine/objective.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "molrefine/errors.hpp"

namespace molrefine {
namespace {

double lookup(const PropertyVector& props, const PropertyId& id, std::string_view which) {
  auto it = props.find(id);
  if (it == props.end()) throw ConfigError(fmt::format("{} properties lack '{}'", which, id));
  return it->second;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

char sign_char(Direction d) { return d == Direction::kIncrease ? '+' : '-'; }

ObjectiveSpec make_preset(std::string_view arity, bool strict, std::vector<std::pair<Direction, std::string_view>> parts) {
  ObjectiveSpec spec;
  std::string label;
  for (const auto& [dir, prop] : parts) {
    spec.terms.push_back({std::string(prop), dir, strict ? strict_magnitude(prop) : 0.0});
    label += sign_char(dir);
    label += prop;
  }
  spec.name = fmt::format("{}/{}/{}", arity, strict ? "strict" : "loose", label);
  return spec;
}

}  // namespace

std::string_view direction_word(Direction d) { return d == Direction::kIncrease ? "increase" : "decrease"; }

EvaluationResult evaluate(const ObjectiveSpec& spec, const PropertyVector& props_m, const PropertyVector& props_mhat) {
  EvaluationResult out;
  out.overall = true;
  for (const auto& t : spec.terms) {
    const double delta = lookup(props_mhat, t.property, "modified molecule") - lookup(props_m, t.property, "given molecule");
    const bool ok = direction_sign(t.direction) * (delta - t.signed_threshold()) >= 0.0;
    out.per_term.push_back({delta, ok});
    out.overall = out.overall && ok;
  }
  return out;
}

Gradient gradient(const ObjectiveSpec& spec, const PropertyVector& props_m, const PropertyVector& props_mhat) {
  Gradient g;
  for (const auto& t : spec.terms) {
    const double delta = lookup(props_mhat, t.property, "modified molecule") - lookup(props_m, t.property, "given molecule");
    g.per_term.push_back({t.property, t.direction, std::fabs(delta - t.signed_threshold())});
  }
  return g;
}

double strict_magnitude(std::string_view property) {
  if (property == kLogP) return 0.5;
  if (property == kTPSA) return 10.0;
  if (property == kQED) return 0.1;
  throw ConfigError(fmt::format("no strict threshold for '{}'", property));
}

const std::vector<ObjectiveSpec>& load_presets() {
  static const std::vector<ObjectiveSpec> presets = [] {
    constexpr Direction kDirs[] = {Direction::kIncrease, Direction::kDecrease};
    std::vector<ObjectiveSpec> out;
    for (auto prop : {kLogP, kTPSA, kQED}) {
      for (auto dir : kDirs) {
        for (bool strict : {false, true}) out.push_back(make_preset("single", strict, {{dir, prop}}));
      }
    }
    for (auto second : {kTPSA, kQED}) {
      for (auto d1 : kDirs) {
        for (auto d2 : kDirs) {
          for (bool strict : {false, true}) out.push_back(make_preset("multi", strict, {{d1, kLogP}, {d2, second}}));
        }
      }
    }
    return out;
  }();
  return presets;
}

void validate(const ObjectiveSpec& spec) {
  if (spec.terms.empty()) throw ConfigError("objective has no terms");
  std::set<PropertyId> seen;
  for (const auto& t : spec.terms) {
    if (!is_registered_property(t.property)) throw ConfigError(fmt::format("unknown property '{}'", t.property));
    if (!seen.insert(t.property).second) throw ConfigError(fmt::format("property '{}' listed twice", t.property));
    if (!std::isfinite(t.magnitude) || t.magnitude < 0.0) {
      throw ConfigError(fmt::format("threshold for '{}' must be a non-negative number", t.property));
    }
  }
}

ObjectiveSpec parse_objective(std::string_view text) {
  text = trim(text);
  for (const auto& p : load_presets()) {
    if (p.name == text) return p;
  }
  if (text.empty()) throw ConfigError("empty objective");
  if (text.find('/') != std::string_view::npos) throw ConfigError(fmt::format("unknown objective preset '{}'", text));

  ObjectiveSpec spec;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    auto item = trim(text.substr(start, end - start));
    start = end + 1;
    if (item.size() < 2 || (item[0] != '+' && item[0] != '-')) {
      throw ConfigError(fmt::format("objective term '{}' must start with + or -", item));
    }
    ObjectiveTerm term;
    term.direction = item[0] == '+' ? Direction::kIncrease : Direction::kDecrease;
    item.remove_prefix(1);
    const auto colon = item.find(':');
    term.property = std::string(trim(item.substr(0, colon)));
    if (colon != std::string_view::npos) {
      auto num = trim(item.substr(colon + 1));
      auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), term.magnitude);
      if (num.empty() || ec != std::errc() || ptr != num.data() + num.size()) {
        throw ConfigError(fmt::format("bad threshold '{}' for '{}'", num, term.property));
      }
    }
    spec.terms.push_back(std::move(term));
    if (end == text.size()) break;
  }
  validate(spec);
  spec.name = to_compact(spec);
  return spec;
}

std::string to_compact(const ObjectiveSpec& spec) {
  std::string out;
  for (const auto& t : spec.terms) {
    if (!out.empty()) out += ',';
    out += fmt::format("{}{}:{}", sign_char(t.direction), t.property, t.magnitude);
  }
  return out;
}

}  // namespace molrefine
