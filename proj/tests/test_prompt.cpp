#include "cascade/data.hpp"
#include "cascade/prompt.hpp"
#include "doctest.h"

using namespace cascade;

namespace {

CandidateSet cands(std::initializer_list<std::size_t> labels) {
  std::vector<Candidate> out;
  double p = 0.5;
  for (auto l : labels) {
    out.push_back({l, p});
    p /= 2;
  }
  return CandidateSet(std::move(out), labels.size());
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

std::string all_text(const PromptBundle& b) {
  std::string out;
  for (const auto& m : b.messages)
    for (const auto& p : m.parts)
      if (p.kind == ContentPart::Kind::kText) out += p.value + "\n";
  return out;
}

ExemplarBank bank_for(const LabelSet& labels, std::size_t shots, std::uint64_t seed) {
  ExemplarListing listing(labels.size());
  for (std::size_t l = 0; l < labels.size(); ++l)
    for (int i = 0; i < 4; ++i) listing[l].push_back("ex/" + labels[l] + "/" + std::to_string(i) + ".jpg");
  return build_exemplar_bank(listing, shots, seed);
}

}  // namespace

TEST_CASE("zero-shot options prompt") {
  const LabelSet labels({"rose", "wallflower", "watercress"});
  const auto b = render_zero_shot(cands({1, 2}), labels, "x.jpg", PromptTemplate::kOptions, "flower");
  REQUIRE(b.messages.size() == 1);
  const auto& parts = b.messages[0].parts;
  REQUIRE(parts.size() == 2);
  CHECK(parts[0] == ContentPart::image("x.jpg"));
  CHECK(parts[1].value.rfind("Question: What is the flower name?", 0) == 0);
  CHECK(parts[1].value.ends_with("Options: [wallflower, watercress]"));
  CHECK(b.candidate_labels == std::vector<std::string>{"wallflower", "watercress"});
  CHECK(b.image_count() == 1);
  CHECK(count(all_text(b), "Options: [") == 1);
}

TEST_CASE("zero-shot edge sizes") {
  const LabelSet labels({"a", "b", "c", "d"});
  const auto one = render_zero_shot(cands({2}), labels, "x.jpg");
  CHECK(all_text(one).find("Options: [c]") != std::string::npos);

  const auto full = render_zero_shot(cands({3, 0, 2, 1}), labels, "x.jpg");
  CHECK(all_text(full).find("Options: [d, a, c, b]") != std::string::npos);

  CHECK_THROWS_AS(render_zero_shot(CandidateSet({}, 1), labels, "x.jpg"), ValidationError);
  CHECK_THROWS_AS(render_zero_shot(cands({0}), labels, "x.jpg", PromptTemplate::kFewShotQuestion), ValidationError);
  CHECK_THROWS_AS(parse_prompt_template("prompt9"), ValidationError);
}

TEST_CASE("listing template uses the list wording") {
  const LabelSet labels({"a", "b"});
  const auto b = render_zero_shot(cands({0, 1}), labels, "x.jpg", PromptTemplate::kListing, "flower");
  CHECK(all_text(b).find("Available flower names: [a, b]") != std::string::npos);
  CHECK(b.candidate_labels == std::vector<std::string>{"a", "b"});
}

TEST_CASE("few-shot layout") {
  const LabelSet labels({"rose", "tulip", "iris"});
  const auto bank = bank_for(labels, 1, 5);
  const auto b = render_few_shot(cands({2, 0}), labels, bank, "q.jpg");
  REQUIRE(b.messages.size() == 1);
  const auto& parts = b.messages[0].parts;
  // Two exemplar blocks then the query block.
  REQUIRE(parts.size() == 6);
  CHECK(parts[0].kind == ContentPart::Kind::kImage);
  CHECK(parts[0].value.find("/iris/") != std::string::npos);
  CHECK(parts[1].value.ends_with("Answer: iris"));
  CHECK(parts[2].value.find("/rose/") != std::string::npos);
  CHECK(parts[3].value.ends_with("Answer: rose"));
  CHECK(parts[4] == ContentPart::image("q.jpg"));
  CHECK(parts[5].value.find("Options: [iris, rose]") != std::string::npos);
  CHECK(count(all_text(b), "Options: [") == 1);
  CHECK(parts[1].value.find("Options") == std::string::npos);

  const auto bare = render_few_shot(cands({2, 0}), labels, bank, "q.jpg", PromptTemplate::kFewShotAnswerOnly);
  CHECK(bare.messages[0].parts[1].value == "Answer: iris");
}

TEST_CASE("few-shot exemplar count and determinism") {
  const LabelSet labels({"a", "b", "c", "d", "e"});
  for (std::size_t shots : {1u, 2u, 3u}) {
    const auto bank = bank_for(labels, shots, 17);
    const auto set = cands({4, 1, 3});
    const auto b = render_few_shot(set, labels, bank, "q.jpg");
    CHECK(b.image_count() == set.size() * shots + 1);
    CHECK(b == render_few_shot(set, labels, bank_for(labels, shots, 17), "q.jpg"));
  }
}

TEST_CASE("few-shot blocks follow candidate order") {
  const LabelSet labels({"a", "b", "c"});
  const auto bank = bank_for(labels, 1, 3);
  const auto set = cands({0, 1, 2});
  const std::vector<std::size_t> perm{2, 0, 1};
  const auto b = render_few_shot(set.reordered(perm), labels, bank, "q.jpg");
  const auto& parts = b.messages[0].parts;
  CHECK(parts[0].value == bank.refs(2)[0]);
  CHECK(parts[2].value == bank.refs(0)[0]);
  CHECK(parts[4].value == bank.refs(1)[0]);
}

TEST_CASE("few-shot missing exemplar names the label") {
  const LabelSet labels({"a", "hibiscus"});
  const ExemplarBank bank({{"a.jpg"}, {}}, 1, 0);
  try {
    (void)render_few_shot(cands({0, 1}), labels, bank, "q.jpg");
    FAIL("expected a missing-exemplar error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("hibiscus") != std::string::npos);
  }
}

TEST_CASE("explanation prompt") {
  const LabelSet labels({"titmouse", "parus major"});
  const auto b = render_explanation(cands({0, 1}), labels, "bird.jpg", "bird");
  CHECK(b.explanation);
  const auto text = all_text(b);
  CHECK(text.find("Options: [titmouse, parus major]") != std::string::npos);
  CHECK(text.find("first line") != std::string::npos);
  CHECK(text.find("explain why") != std::string::npos);

  const auto single = render_explanation(cands({1}), labels, "bird.jpg", "bird");
  CHECK(all_text(single).find("Options: [parus major]") != std::string::npos);
  CHECK(all_text(single).find("explain") != std::string::npos);

  CHECK_THROWS_AS(render_explanation(CandidateSet({}, 1), labels, "bird.jpg"), ValidationError);
}

TEST_CASE("prompt digest") {
  const LabelSet labels({"a", "b", "c"});
  const auto two = render_zero_shot(cands({0, 1}), labels, "x.jpg");
  const auto three = render_zero_shot(cands({0, 1, 2}), labels, "x.jpg");
  CHECK(prompt_digest(two).size() == 64);
  CHECK(prompt_digest(two) == prompt_digest(render_zero_shot(cands({0, 1}), labels, "x.jpg")));
  CHECK(prompt_digest(two) != prompt_digest(three));
  CHECK(prompt_digest(two) != prompt_digest(render_zero_shot(cands({1, 0}), labels, "x.jpg")));
  CHECK(prompt_digest(two) != prompt_digest(render_zero_shot(cands({0, 1}), labels, "y.jpg")));
  CHECK(prompt_digest(two) != prompt_digest(render_zero_shot(cands({0, 1}), labels, "x.jpg", PromptTemplate::kListing)));
  PromptBundle empty;
  CHECK(canonical_bundle_text(empty).find("\"template\"") != std::string::npos);
}
