#include "cascade/parse.hpp"

#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

namespace cascade {
namespace {

bool word_char(char c) {
  const auto uc = static_cast<unsigned char>(c);
  return std::isalnum(uc) || uc >= 0x80;
}

std::vector<std::size_t> occurrences(std::string_view haystack, std::string_view needle) {
  std::vector<std::size_t> out;
  if (needle.empty()) return out;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + 1)) {
    const bool left_ok = pos == 0 || !word_char(haystack[pos - 1]) || !word_char(needle.front());
    const auto end = pos + needle.size();
    const bool right_ok = end == haystack.size() || !word_char(haystack[end]) || !word_char(needle.back());
    if (left_ok && right_ok) out.push_back(pos);
  }
  return out;
}

struct Hit {
  std::size_t label;
  std::string form;
  std::vector<std::size_t> at;
};

// True when every occurrence of `inner` lies inside an occurrence of a longer hit.
bool shadowed(const Hit& inner, const std::vector<Hit>& hits) {
  return std::all_of(inner.at.begin(), inner.at.end(), [&](std::size_t pos) {
    return std::any_of(hits.begin(), hits.end(), [&](const Hit& outer) {
      if (outer.form.size() <= inner.form.size()) return false;
      return std::any_of(outer.at.begin(), outer.at.end(), [&](std::size_t o) {
        return o <= pos && pos + inner.form.size() <= o + outer.form.size();
      });
    });
  });
}

}  // namespace

std::string_view to_string(ParseOutcome outcome) {
  return outcome == ParseOutcome::kMatched ? "matched" : "fallback_top1";
}

ParseOutcome parse_parse_outcome(std::string_view text) {
  if (text == "matched") return ParseOutcome::kMatched;
  if (text == "fallback_top1") return ParseOutcome::kFallbackTop1;
  throw ValidationError("unknown parse outcome '" + std::string(text) + "'");
}

std::string_view first_line(std::string_view text) {
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    if (std::any_of(line.begin(), line.end(), [](char c) { return !std::isspace(static_cast<unsigned char>(c)); }))
      return line;
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return {};
}

ParseResult parse_response(std::string_view text, const CandidateSet& candidates, const LabelSet& labels,
                           ParsePolicy policy) {
  if (candidates.empty()) throw ValidationError("candidate set is empty");
  const ParseResult fallback{candidates.best().label, ParseOutcome::kFallbackTop1};

  if (policy == ParsePolicy::kExact) {
    for (const auto& c : candidates.entries())
      if (labels[c.label] == text) return {c.label, ParseOutcome::kMatched};
    return fallback;
  }

  const auto reply = normalize_label(text);
  if (reply.empty()) return fallback;
  for (const auto& c : candidates.entries())
    if (normalize_label(labels[c.label]) == reply) return {c.label, ParseOutcome::kMatched};
  if (policy == ParsePolicy::kNormalized) return fallback;

  std::vector<Hit> hits;
  for (const auto& c : candidates.entries()) {
    Hit h{c.label, normalize_label(labels[c.label]), {}};
    h.at = occurrences(reply, h.form);
    if (!h.at.empty()) hits.push_back(std::move(h));
  }
  std::vector<std::size_t> outer;
  for (const auto& h : hits)
    if (!shadowed(h, hits)) outer.push_back(h.label);
  if (outer.size() == 1) return {outer.front(), ParseOutcome::kMatched};
  return fallback;
}

}  // namespace cascade
