#include <cmath>
#include <sstream>

#include "cascade/prompt.hpp"
#include "cascade/refiner.hpp"
#include "cascade/seeding.hpp"
#include "doctest.h"

using namespace cascade;

namespace {

PromptBundle bundle_of(std::vector<std::string> options) {
  PromptBundle b;
  b.candidate_labels = std::move(options);
  b.messages.push_back({"user", {ContentPart::image("x.jpg"), ContentPart::text(format_options(b.candidate_labels))}});
  return b;
}

std::string ask(Refiner& r, const PromptBundle& b, std::string_view truth, std::uint64_t seed,
                std::string_view item = "item") {
  const auto digest = prompt_digest(b);
  return r.refine(RefineRequest{b, item, digest, truth, seed}).text;
}

}  // namespace

TEST_CASE("oracle with perfect accuracy") {
  OracleRefiner oracle(1.0);
  const auto b = bundle_of({"rose", "watercress", "tulip"});
  for (std::uint64_t s = 0; s < 200; ++s) CHECK(ask(oracle, b, "watercress", s) == "watercress");
  // Normalized comparison: casing in the truth does not matter.
  CHECK(ask(oracle, b, "Watercress", 1) == "watercress");
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto reply = ask(oracle, b, "hibiscus", s);
    CHECK(reply != "hibiscus");
    CHECK((reply == "rose" || reply == "watercress" || reply == "tulip"));
  }
}

TEST_CASE("oracle accuracy rate concentrates") {
  OracleRefiner oracle(0.85);
  const auto b = bundle_of({"a", "b", "c", "d", "e"});
  int hits = 0;
  std::array<int, 5> wrong{};
  for (int i = 0; i < 10000; ++i) {
    const auto seed = derive_seed(item_seed(42, "item-" + std::to_string(i)), SeedStream::kRefiner);
    const auto reply = ask(oracle, b, "c", seed);
    if (reply == "c") ++hits;
    else ++wrong[static_cast<std::size_t>(reply[0] - 'a')];
  }
  CHECK(std::abs(hits / 10000.0 - 0.85) <= 0.01);
  // Wrong answers spread over the other four options (expected 375 each, sd ~18).
  CHECK(wrong[2] == 0);
  for (std::size_t i : {0u, 1u, 3u, 4u}) CHECK(std::abs(wrong[i] - 375) < 90);
}

TEST_CASE("oracle correctness does not depend on option order") {
  OracleRefiner oracle(0.5);
  const auto fwd = bundle_of({"a", "b", "c", "d"});
  const auto rev = bundle_of({"d", "c", "b", "a"});
  for (std::uint64_t s = 0; s < 500; ++s) CHECK((ask(oracle, fwd, "b", s) == "b") == (ask(oracle, rev, "b", s) == "b"));
}

TEST_CASE("oracle validates accuracy") {
  CHECK_THROWS_AS(OracleRefiner(1.5), ValidationError);
  CHECK_THROWS_AS(OracleRefiner(-0.1), ValidationError);
  OracleRefiner zero(0.0);
  CHECK(ask(zero, bundle_of({"only"}), "only", 3) == "only");
  CHECK(ask(zero, bundle_of({"x", "y"}), "y", 3) == "x");
}

TEST_CASE("first pick") {
  FirstPickRefiner fp;
  CHECK(ask(fp, bundle_of({"tulip", "rose"}), "rose", 0) == "tulip");
}

TEST_CASE("replay serves recordings by item and digest") {
  const auto k2 = bundle_of({"watercress", "rose"});
  const auto k3 = bundle_of({"watercress", "rose", "tulip"});
  ReplayRefiner replay({{"7", prompt_digest(k2), "watercress", 812.5}});
  const auto d2 = prompt_digest(k2);
  const auto resp = replay.refine(RefineRequest{k2, "7", d2, "", 0});
  CHECK(resp.text == "watercress");
  CHECK(resp.latency_ms == 812.5);

  try {
    (void)ask(replay, k2, "", 0, "8");
    FAIL("expected missing recording");
  } catch (const RefinerError& e) {
    CHECK(e.kind() == RefinerError::Kind::kMissingRecording);
    CHECK(e.fatal());
  }
  try {
    (void)ask(replay, k3, "", 0, "7");
    FAIL("expected digest mismatch");
  } catch (const RefinerError& e) {
    CHECK(e.kind() == RefinerError::Kind::kDigestMismatch);
    CHECK(e.fatal());
  }
  CHECK_FALSE(RefinerError(RefinerError::Kind::kTimeout, "t").fatal());
}

TEST_CASE("recorder output is sorted and round-trips") {
  ReplayRecorder rec;
  rec.record({"b", "d2", "tulip", 3.0});
  rec.record({"a", "d9", "line one\nline \"two\"", 1.0});
  rec.record({"a", "d1", "rose", 2.0});
  std::stringstream out;
  rec.write(out);
  const auto text = out.str();
  CHECK(text.find("\"d1\"") < text.find("\"d9\""));
  CHECK(text.find("\"d9\"") < text.find("\"d2\""));
  const auto parsed = parse_replay(out);
  CHECK(parsed == rec.entries());
  CHECK(parsed[1].text == "line one\nline \"two\"");

  std::stringstream bad("{\"item_id\": 1}\n");
  CHECK_THROWS_AS(parse_replay(bad), ValidationError);
}
