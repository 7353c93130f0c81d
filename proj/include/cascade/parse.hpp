#pragma once

#include <cstddef>
#include <string_view>

#include "cascade/config.hpp"
#include "cascade/core_math.hpp"

namespace cascade {

enum class ParseOutcome { kMatched, kFallbackTop1 };

std::string_view to_string(ParseOutcome outcome);
ParseOutcome parse_parse_outcome(std::string_view text);

struct ParseResult {
  std::size_t label;
  ParseOutcome outcome;

  friend bool operator==(const ParseResult&, const ParseResult&) = default;
};

/// Maps refiner text onto one candidate. Total: an unmatched or ambiguous reply
/// resolves to the highest-probability candidate with kFallbackTop1.
///
///  - exact: verbatim equality with a candidate label.
///  - normalized: equality after normalize_label on both sides.
///  - normalized_then_substring: additionally, a candidate whose normalized
///    label occurs in the normalized reply on word boundaries. Matches nested
///    inside a longer matching candidate are discarded; more than one
///    remaining match is ambiguous.
ParseResult parse_response(std::string_view text, const CandidateSet& candidates, const LabelSet& labels,
                           ParsePolicy policy);

/// First non-empty line of a reply; explanation prompts put the answer there.
std::string_view first_line(std::string_view text);

}  // namespace cascade
