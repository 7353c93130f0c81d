#include "cascade/config.hpp"

#include <array>
#include <cmath>
#include <utility>

#include "cascade/errors.hpp"

namespace cascade {
namespace {

constexpr std::array kOrders{
    std::pair{CandidateOrder::kSortedDesc, std::string_view{"sorted_desc"}},
    std::pair{CandidateOrder::kShuffled, std::string_view{"shuffled"}},
    std::pair{CandidateOrder::kReversed, std::string_view{"reversed"}},
};

constexpr std::array kPolicies{
    std::pair{ParsePolicy::kExact, std::string_view{"exact"}},
    std::pair{ParsePolicy::kNormalized, std::string_view{"normalized"}},
    std::pair{ParsePolicy::kNormalizedThenSubstring, std::string_view{"normalized_then_substring"}},
};

constexpr std::array kTemplates{
    std::pair{PromptTemplate::kListing, std::string_view{"listing"}},
    std::pair{PromptTemplate::kOptions, std::string_view{"options"}},
    std::pair{PromptTemplate::kFewShotQuestion, std::string_view{"few_shot_question"}},
    std::pair{PromptTemplate::kFewShotAnswerOnly, std::string_view{"few_shot_answer_only"}},
};

template <typename Enum, std::size_t N>
std::string_view name_of(const std::array<std::pair<Enum, std::string_view>, N>& table, Enum value) {
  for (const auto& [e, name] : table)
    if (e == value) return name;
  return "?";
}

template <typename Enum, std::size_t N>
Enum value_of(const std::array<std::pair<Enum, std::string_view>, N>& table, std::string_view text,
              std::string_view what) {
  for (const auto& [e, name] : table)
    if (name == text) return e;
  std::string expected;
  for (const auto& [e, name] : table) expected += (expected.empty() ? "" : ", ") + std::string(name);
  throw ValidationError("unknown " + std::string(what) + " '" + std::string(text) + "' (expected one of: " +
                        expected + ")");
}

}  // namespace

std::string_view to_string(CandidateOrder order) { return name_of(kOrders, order); }
std::string_view to_string(ParsePolicy policy) { return name_of(kPolicies, policy); }
std::string_view to_string(PromptTemplate tmpl) { return name_of(kTemplates, tmpl); }

CandidateOrder parse_candidate_order(std::string_view text) { return value_of(kOrders, text, "candidate order"); }
ParsePolicy parse_parse_policy(std::string_view text) { return value_of(kPolicies, text, "parse policy"); }
PromptTemplate parse_prompt_template(std::string_view text) { return value_of(kTemplates, text, "template id"); }

void CascadeConfig::validate() const {
  if (k < 1) throw ValidationError("k must be at least 1");
  if (!(tau >= 0.0) || std::isnan(tau)) throw ValidationError("tau must be non-negative");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ValidationError("temperature must be positive");
  if (few_shot && shots_per_class < 1) throw ValidationError("shots_per_class must be >= 1 when few_shot is enabled");
  if (is_few_shot(zero_shot_template)) throw ValidationError("zero_shot_template must be a zero-shot layout");
  if (!is_few_shot(few_shot_template)) throw ValidationError("few_shot_template must be a few-shot layout");
  if (prompt_noun.empty()) throw ValidationError("prompt_noun must not be empty");
}

}  // namespace cascade
