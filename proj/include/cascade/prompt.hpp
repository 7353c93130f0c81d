#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/config.hpp"
#include "cascade/core_math.hpp"
#include "cascade/data.hpp"

namespace cascade {

struct ContentPart {
  enum class Kind { kText, kImage };
  Kind kind = Kind::kText;
  std::string value;  // text, or an opaque image reference

  static ContentPart text(std::string t) { return {Kind::kText, std::move(t)}; }
  static ContentPart image(std::string ref) { return {Kind::kImage, std::move(ref)}; }

  friend bool operator==(const ContentPart&, const ContentPart&) = default;
};

struct Message {
  std::string role;
  std::vector<ContentPart> parts;

  friend bool operator==(const Message&, const Message&) = default;
};

/// A rendered refiner prompt. candidate_labels holds the options in the order
/// they were shown to the refiner.
struct PromptBundle {
  PromptTemplate template_id = PromptTemplate::kOptions;
  bool explanation = false;
  std::vector<Message> messages;
  std::vector<std::string> candidate_labels;

  [[nodiscard]] std::size_t image_count() const;

  friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

/// "[a, b, c]" with labels verbatim.
std::string format_options(const std::vector<std::string>& labels);

PromptBundle render_zero_shot(const CandidateSet& candidates, const LabelSet& labels, std::string_view item_image_ref,
                              PromptTemplate template_id = PromptTemplate::kOptions, std::string_view noun = "class");

PromptBundle render_few_shot(const CandidateSet& candidates, const LabelSet& labels, const ExemplarBank& exemplars,
                             std::string_view item_image_ref,
                             PromptTemplate template_id = PromptTemplate::kFewShotQuestion,
                             std::string_view noun = "class");

/// Options prompt that also asks for a justification. The chosen option is
/// requested on the first line of the reply.
PromptBundle render_explanation(const CandidateSet& candidates, const LabelSet& labels,
                                std::string_view item_image_ref, std::string_view noun = "class");

/// Hex SHA-256 over the canonical serialization of the bundle (template,
/// ordered candidate labels, item image and exemplar references, all text).
std::string prompt_digest(const PromptBundle& bundle);

/// Canonical serialization used by prompt_digest; stable across runs.
std::string canonical_bundle_text(const PromptBundle& bundle);

}  // namespace cascade
