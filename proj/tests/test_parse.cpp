#include <random>

#include "cascade/parse.hpp"
#include "doctest.h"

using namespace cascade;

namespace {

CandidateSet cands(std::initializer_list<std::pair<std::size_t, double>> entries) {
  std::vector<Candidate> out;
  for (auto [l, p] : entries) out.push_back({l, p});
  return CandidateSet(std::move(out), entries.size());
}

}  // namespace

TEST_CASE("normalized policy") {
  const LabelSet labels({"mourning dove", "green-winged dove", "parus major", "titmouse"});
  const auto set = cands({{0, 0.5}, {1, 0.3}, {2, 0.1}, {3, 0.1}});
  CHECK(parse_response("green-winged dove.", set, labels, ParsePolicy::kNormalized) ==
        ParseResult{1, ParseOutcome::kMatched});
  CHECK(parse_response("Parus Major", set, labels, ParsePolicy::kNormalized) == ParseResult{2, ParseOutcome::kMatched});
  CHECK(parse_response("Parus Major", set, labels, ParsePolicy::kExact) == ParseResult{0, ParseOutcome::kFallbackTop1});
  CHECK(parse_response("titmouse", set, labels, ParsePolicy::kExact) == ParseResult{3, ParseOutcome::kMatched});
}

TEST_CASE("substring rescue") {
  const LabelSet labels({"barn owl", "striped owl", "snowy owl"});
  const auto set = cands({{0, 0.6}, {1, 0.3}, {2, 0.1}});
  const std::string reply = "I believe it is a striped owl";
  CHECK(parse_response(reply, set, labels, ParsePolicy::kNormalizedThenSubstring) ==
        ParseResult{1, ParseOutcome::kMatched});
  CHECK(parse_response(reply, set, labels, ParsePolicy::kNormalized) == ParseResult{0, ParseOutcome::kFallbackTop1});

  // Two candidates named: ambiguous.
  CHECK(parse_response("either a barn owl or a snowy owl", set, labels, ParsePolicy::kNormalizedThenSubstring) ==
        ParseResult{0, ParseOutcome::kFallbackTop1});
  // Word boundaries: "owl" alone is not a candidate and "barn owls" is not "barn owl".
  CHECK(parse_response("some owl", set, labels, ParsePolicy::kNormalizedThenSubstring).outcome ==
        ParseOutcome::kFallbackTop1);
  CHECK(parse_response("barn owls everywhere", set, labels, ParsePolicy::kNormalizedThenSubstring).outcome ==
        ParseOutcome::kFallbackTop1);
}

TEST_CASE("nested candidate names prefer the longer one") {
  const LabelSet labels({"rose", "desert rose"});
  const auto set = cands({{0, 0.7}, {1, 0.3}});
  CHECK(parse_response("it is a desert rose", set, labels, ParsePolicy::kNormalizedThenSubstring) ==
        ParseResult{1, ParseOutcome::kMatched});
  // The shorter name also stands alone, so both remain and the reply is ambiguous.
  CHECK(parse_response("a rose, or a desert rose", set, labels, ParsePolicy::kNormalizedThenSubstring).outcome ==
        ParseOutcome::kFallbackTop1);
}

TEST_CASE("fallback is the most probable candidate, not the first shown") {
  const LabelSet labels({"a", "b", "c"});
  const auto shuffled = cands({{2, 0.1}, {0, 0.7}, {1, 0.2}});
  CHECK(parse_response("", shuffled, labels, ParsePolicy::kNormalizedThenSubstring) ==
        ParseResult{0, ParseOutcome::kFallbackTop1});
  CHECK(parse_response("   ", shuffled, labels, ParsePolicy::kNormalized).outcome == ParseOutcome::kFallbackTop1);
  CHECK(parse_response("a daisy", shuffled, labels, ParsePolicy::kExact).label == 0);
}

TEST_CASE("parse is total over random replies") {
  std::vector<std::string> names;
  for (int i = 0; i < 30; ++i) names.push_back("name " + std::to_string(i));
  const LabelSet labels(names);
  std::mt19937_64 rng(99);
  const std::string alphabet = "abcname 0123456789.,!\n\"'";
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<std::size_t> idx(30);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto k = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
    std::vector<Candidate> entries;
    for (std::size_t i = 0; i < k; ++i) entries.push_back({idx[i], 1.0 / static_cast<double>(i + 2)});
    const CandidateSet set(entries, k);
    std::string reply;
    const auto len = std::uniform_int_distribution<int>(0, 40)(rng);
    for (int i = 0; i < len; ++i) reply += alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 1)(rng)];
    for (auto policy : {ParsePolicy::kExact, ParsePolicy::kNormalized, ParsePolicy::kNormalizedThenSubstring}) {
      const auto r = parse_response(reply, set, labels, policy);
      REQUIRE(set.contains(r.label));
      if (r.outcome == ParseOutcome::kFallbackTop1) REQUIRE(r.label == set.best().label);
    }
  }
}

TEST_CASE("first_line skips blank lines") {
  CHECK(first_line("\n  \nparus major\nbecause ...") == "parus major");
  CHECK(first_line("titmouse") == "titmouse");
  CHECK(first_line("\n\n").empty());
}

TEST_CASE("empty candidate set is rejected") {
  const LabelSet labels({"a"});
  CHECK_THROWS_AS(parse_response("a", CandidateSet({}, 1), labels, ParsePolicy::kExact), ValidationError);
}
