#include <cmath>

#include "cascade/data.hpp"
#include "cascade/evaluation.hpp"
#include "cascade/report_io.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cascade;
using cascade::testing::slurp;
using cascade::testing::TempDir;

namespace {

EvalReport sample_report() {
  const auto ds = synthesize_dataset({400, 25, 0.55, 5, 0.85, 61});
  CascadeConfig cfg;
  cfg.k = 5;
  cfg.tau = 1.1;
  cfg.seed = 12345678901234567ULL;
  OracleRefiner oracle(0.9);
  const CostModel cost{3.0, 420.0};
  auto r = evaluate(classify_batch(ds.records, ds.labels, cfg, oracle), ds.records, cfg, cost, {1, 3, 10});
  r.sweep_param = "tau";
  r.sweep_curve = sweep_tau(ds.records, ds.labels, {0.0, 1.0 / 3.0, 2.0}, cfg, oracle, nullptr, cost);
  FirstPickRefiner first;
  r.order_accuracy = order_sensitivity(ds.records, ds.labels, cfg, first, nullptr,
                                       {CandidateOrder::kSortedDesc, CandidateOrder::kReversed});
  return r;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    out.push_back(text.substr(pos, nl - pos));
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  return out;
}

}  // namespace

TEST_CASE("round_sig6") {
  CHECK(round_sig6(1.0 / 3.0) == 0.333333);
  CHECK(round_sig6(123456789.0) == 123457000.0);
  CHECK(round_sig6(0.0) == 0.0);
  CHECK(round_sig6(-2.0 / 3.0) == -0.666667);
  CHECK(round_sig6(round_sig6(0.1234567)) == round_sig6(0.1234567));
}

TEST_CASE("json report is deterministic and round-trips") {
  const auto r = sample_report();
  TempDir dir;
  emit_report(r, dir / "a.json", ReportFormat::kJson);
  emit_report(r, dir / "b.json", ReportFormat::kJson);
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));

  const auto back = load_report(dir / "a.json");
  CHECK(report_to_json(back).dump() == report_to_json(r).dump());
  CHECK(back.cascade_accuracy == r.cascade_accuracy);
  CHECK(back.sweep_curve.size() == 3);
  CHECK(back.run_config.seed == 12345678901234567ULL);
  CHECK(back.error_buckets == r.error_buckets);
  CHECK(back.order_accuracy == r.order_accuracy);
  CHECK(back.base_topk.at(10) == r.base_topk.at(10));

  const auto doc = nlohmann::json::parse(slurp(dir / "a.json"));
  CHECK(doc["schema_version"] == kReportSchemaVersion);
  CHECK(doc["sweep"]["points"][1]["param"] == 0.333333);
  CHECK(doc["margin_buckets"].size() == 5);
}

TEST_CASE("empty bucket accuracies are null") {
  auto r = sample_report();
  r.margin_buckets[4] = MarginBucket{0.8, 1.0, 0, 0, 0};
  const auto doc = report_to_json(r);
  CHECK(doc["margin_buckets"][4]["base_accuracy"].is_null());
  CHECK(doc["margin_buckets"][4]["gap"].is_null());
  const auto back = report_from_json(nlohmann::json::parse(doc.dump()));
  CHECK(back.margin_buckets[4] == r.margin_buckets[4]);
}

TEST_CASE("csv bundle") {
  auto r = sample_report();
  TempDir dir;
  emit_report(r, dir / "csv1", ReportFormat::kCsvBundle);
  emit_report(r, dir / "csv2", ReportFormat::kCsvBundle);
  for (const char* f : {"summary.csv", "base_topk.csv", "sweep.csv", "margin_buckets.csv", "error_buckets.csv",
                        "order_accuracy.csv"}) {
    CAPTURE(f);
    REQUIRE(std::filesystem::exists(dir / "csv1" / f));
    CHECK(slurp(dir / "csv1" / f) == slurp(dir / "csv2" / f));
  }
  const auto sweep = lines(slurp(dir / "csv1" / "sweep.csv"));
  CHECK(sweep[0] == "param,accuracy,accuracy_hits,n_items,fraction_refined,refined_hits,refiner_calls,est_throughput");
  CHECK(sweep.size() == 4);
  CHECK(lines(slurp(dir / "csv1" / "margin_buckets.csv")).size() == 6);

  r.sweep_curve.clear();
  r.sweep_param.clear();
  emit_report(r, dir / "csv3", ReportFormat::kCsvBundle);
  const auto empty = lines(slurp(dir / "csv3" / "sweep.csv"));
  CHECK(empty.size() == 1);
  CHECK(empty[0] == sweep[0]);
}

TEST_CASE("unwritable path") {
  TempDir dir;
  dir.write("blocker", "x");
  CHECK_THROWS_AS(emit_report(sample_report(), dir / "blocker" / "r.json", ReportFormat::kJson), RuntimeFailure);
}

TEST_CASE("config json round trip") {
  CascadeConfig c;
  c.k = 7;
  c.tau = 0.75;
  c.few_shot = true;
  c.shots_per_class = 2;
  c.candidate_order = CandidateOrder::kReversed;
  c.parse_policy = ParsePolicy::kExact;
  c.few_shot_template = PromptTemplate::kFewShotAnswerOnly;
  c.explain = true;
  c.prompt_noun = "bird";
  c.refiner_ref = "replay";
  const auto back = config_from_json(nlohmann::json::parse(config_to_json(c).dump()));
  CHECK(config_to_json(back).dump() == config_to_json(c).dump());
}
