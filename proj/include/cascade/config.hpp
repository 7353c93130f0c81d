#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace cascade {

enum class CandidateOrder { kSortedDesc, kShuffled, kReversed };

/// How refiner text is mapped back into the candidate space.
enum class ParsePolicy { kExact, kNormalized, kNormalizedThenSubstring };

/// Prompt layouts. kListing and kOptions are zero-shot; kFewShotQuestion puts
/// the question (without options) on every exemplar and kFewShotAnswerOnly
/// shows exemplars with their answer only. Few-shot layouts carry the options
/// list on the final query block.
enum class PromptTemplate { kListing, kOptions, kFewShotQuestion, kFewShotAnswerOnly };

std::string_view to_string(CandidateOrder order);
std::string_view to_string(ParsePolicy policy);
std::string_view to_string(PromptTemplate tmpl);

CandidateOrder parse_candidate_order(std::string_view text);
ParsePolicy parse_parse_policy(std::string_view text);
PromptTemplate parse_prompt_template(std::string_view text);

[[nodiscard]] constexpr bool is_few_shot(PromptTemplate tmpl) {
  return tmpl == PromptTemplate::kFewShotQuestion || tmpl == PromptTemplate::kFewShotAnswerOnly;
}

struct CascadeConfig {
  std::size_t k = 10;
  double tau = 0.0;  // nats; 0 disables early exit
  double temperature = 1.0;
  bool few_shot = false;
  std::size_t shots_per_class = 1;
  CandidateOrder candidate_order = CandidateOrder::kSortedDesc;
  std::uint64_t seed = 0;
  std::string refiner_ref = "oracle";
  ParsePolicy parse_policy = ParsePolicy::kNormalizedThenSubstring;
  PromptTemplate zero_shot_template = PromptTemplate::kOptions;
  PromptTemplate few_shot_template = PromptTemplate::kFewShotQuestion;
  bool explain = false;
  std::string prompt_noun = "class";

  /// Throws ValidationError on the first violated invariant.
  void validate() const;
};

}  // namespace cascade
