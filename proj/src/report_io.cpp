#include "cascade/report_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

namespace cascade {
namespace {

using ojson = nlohmann::ordered_json;

std::string sig6(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

ojson opt_num(const std::optional<double>& v) { return v ? ojson(round_sig6(*v)) : ojson(nullptr); }

std::optional<double> opt_from(const nlohmann::json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

ojson rate_json(const Rate& r) { return {{"hits", r.hits}, {"total", r.total}, {"rate", round_sig6(r.value())}}; }

Rate rate_from(const nlohmann::json& doc) {
  return {doc.at("hits").get<std::size_t>(), doc.at("total").get<std::size_t>()};
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  return out;
}

std::string cell(const std::optional<double>& v) { return v ? sig6(*v) : std::string(); }

}  // namespace

double round_sig6(double value) {
  if (!std::isfinite(value) || value == 0.0) return value;
  return std::stod(sig6(value));
}

ojson config_to_json(const CascadeConfig& c) {
  return {{"k", c.k},
          {"tau", round_sig6(c.tau)},
          {"temperature", round_sig6(c.temperature)},
          {"few_shot", c.few_shot},
          {"shots_per_class", c.shots_per_class},
          {"candidate_order", to_string(c.candidate_order)},
          {"seed", c.seed},
          {"refiner_ref", c.refiner_ref},
          {"parse_policy", to_string(c.parse_policy)},
          {"zero_shot_template", to_string(c.zero_shot_template)},
          {"few_shot_template", to_string(c.few_shot_template)},
          {"explain", c.explain},
          {"prompt_noun", c.prompt_noun}};
}

CascadeConfig config_from_json(const nlohmann::json& doc) {
  CascadeConfig c;
  c.k = doc.at("k").get<std::size_t>();
  c.tau = doc.at("tau").get<double>();
  c.temperature = doc.at("temperature").get<double>();
  c.few_shot = doc.at("few_shot").get<bool>();
  c.shots_per_class = doc.at("shots_per_class").get<std::size_t>();
  c.candidate_order = parse_candidate_order(doc.at("candidate_order").get<std::string>());
  c.seed = doc.at("seed").get<std::uint64_t>();
  c.refiner_ref = doc.at("refiner_ref").get<std::string>();
  c.parse_policy = parse_parse_policy(doc.at("parse_policy").get<std::string>());
  c.zero_shot_template = parse_prompt_template(doc.at("zero_shot_template").get<std::string>());
  c.few_shot_template = parse_prompt_template(doc.at("few_shot_template").get<std::string>());
  c.explain = doc.at("explain").get<bool>();
  c.prompt_noun = doc.at("prompt_noun").get<std::string>();
  return c;
}

ojson report_to_json(const EvalReport& r) {
  ojson doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["run_config"] = config_to_json(r.run_config);
  doc["n_items"] = r.n_items;

  auto& base = doc["base"];
  base["top1"] = rate_json(r.top1_base);
  base["topk"] = rate_json(r.topk_base);
  base["topk"]["k"] = r.run_config.k;
  base["extra_ks"] = ojson::array();
  for (const auto& [k, rate] : r.base_topk) {
    auto row = rate_json(rate);
    row["k"] = k;
    base["extra_ks"].push_back(std::move(row));
  }

  auto& cas = doc["cascade"];
  cas["accuracy"] = rate_json(r.cascade_accuracy);
  cas["fraction_refined"] = rate_json(r.refined);
  cas["refiner_calls"] = r.refiner_calls;
  cas["parse_fallbacks"] = r.parse_fallbacks;
  cas["refiner_errors"] = r.refiner_errors;

  doc["latency"] = {{"mean_base_ms", opt_num(r.mean_latency_base_ms)},
                    {"mean_refine_ms", opt_num(r.mean_latency_refine_ms)}};
  doc["cost_model"] = {{"base_latency_ms", round_sig6(r.cost_model.base_latency_ms)},
                       {"refine_latency_ms", round_sig6(r.cost_model.refine_latency_ms)},
                       {"est_throughput", round_sig6(r.est_throughput)}};

  auto& sweep = doc["sweep"];
  sweep["param"] = r.sweep_param;
  sweep["points"] = ojson::array();
  for (const auto& p : r.sweep_curve) {
    sweep["points"].push_back({{"param", round_sig6(p.param)},
                               {"accuracy", round_sig6(p.accuracy.value())},
                               {"accuracy_hits", p.accuracy.hits},
                               {"n_items", p.accuracy.total},
                               {"fraction_refined", round_sig6(p.refined.value())},
                               {"refined_hits", p.refined.hits},
                               {"refiner_calls", p.refiner_calls},
                               {"est_throughput", round_sig6(p.est_throughput)}});
  }

  doc["margin_buckets"] = ojson::array();
  for (const auto& b : r.margin_buckets) {
    doc["margin_buckets"].push_back({{"lo", round_sig6(b.lo)},
                                     {"hi", round_sig6(b.hi)},
                                     {"n", b.n},
                                     {"base_correct", b.base_correct},
                                     {"cascade_correct", b.cascade_correct},
                                     {"base_accuracy", opt_num(b.base_accuracy())},
                                     {"cascade_accuracy", opt_num(b.cascade_accuracy())},
                                     {"gap", opt_num(b.gap())}});
  }

  doc["error_buckets"] = {{"base_wrong_early_exit", r.error_buckets.base_wrong_early_exit},
                          {"refined_wrong_truth_absent", r.error_buckets.refined_wrong_truth_absent},
                          {"refined_wrong_truth_present", r.error_buckets.refined_wrong_truth_present},
                          {"total", r.error_buckets.total()}};

  doc["order_accuracy"] = ojson::object();
  for (const auto& [order, rate] : r.order_accuracy) doc["order_accuracy"][order] = rate_json(rate);
  return doc;
}

EvalReport report_from_json(const nlohmann::json& doc) {
  if (doc.value("schema_version", -1) != kReportSchemaVersion) throw ValidationError("unsupported report schema version");
  EvalReport r;
  try {
    r.run_config = config_from_json(doc.at("run_config"));
    r.n_items = doc.at("n_items").get<std::size_t>();
    const auto& base = doc.at("base");
    r.top1_base = rate_from(base.at("top1"));
    r.topk_base = rate_from(base.at("topk"));
    for (const auto& row : base.at("extra_ks")) r.base_topk[row.at("k").get<std::size_t>()] = rate_from(row);

    const auto& cas = doc.at("cascade");
    r.cascade_accuracy = rate_from(cas.at("accuracy"));
    r.refined = rate_from(cas.at("fraction_refined"));
    r.refiner_calls = cas.at("refiner_calls").get<std::size_t>();
    r.parse_fallbacks = cas.at("parse_fallbacks").get<std::size_t>();
    r.refiner_errors = cas.at("refiner_errors").get<std::size_t>();

    r.mean_latency_base_ms = opt_from(doc.at("latency").at("mean_base_ms"));
    r.mean_latency_refine_ms = opt_from(doc.at("latency").at("mean_refine_ms"));
    const auto& cost = doc.at("cost_model");
    r.cost_model = {cost.at("base_latency_ms").get<double>(), cost.at("refine_latency_ms").get<double>()};
    r.est_throughput = cost.at("est_throughput").get<double>();

    r.sweep_param = doc.at("sweep").at("param").get<std::string>();
    for (const auto& p : doc.at("sweep").at("points")) {
      SweepPoint pt;
      pt.param = p.at("param").get<double>();
      pt.accuracy = {p.at("accuracy_hits").get<std::size_t>(), p.at("n_items").get<std::size_t>()};
      pt.refined = {p.at("refined_hits").get<std::size_t>(), p.at("n_items").get<std::size_t>()};
      pt.refiner_calls = p.at("refiner_calls").get<std::size_t>();
      pt.est_throughput = p.at("est_throughput").get<double>();
      r.sweep_curve.push_back(pt);
    }
    for (const auto& b : doc.at("margin_buckets")) {
      r.margin_buckets.push_back({b.at("lo").get<double>(), b.at("hi").get<double>(), b.at("n").get<std::size_t>(),
                                  b.at("base_correct").get<std::size_t>(), b.at("cascade_correct").get<std::size_t>()});
    }
    const auto& e = doc.at("error_buckets");
    r.error_buckets = {e.at("base_wrong_early_exit").get<std::size_t>(),
                       e.at("refined_wrong_truth_absent").get<std::size_t>(),
                       e.at("refined_wrong_truth_present").get<std::size_t>()};
    for (const auto& [order, rate] : doc.at("order_accuracy").items()) r.order_accuracy[order] = rate_from(rate);
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("malformed report: ") + ex.what());
  }
  return r;
}

void ensure_directory(const std::filesystem::path& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw RuntimeFailure("cannot create " + dir.string() + ": " + ec.message());
}

void emit_report(const EvalReport& report, const std::filesystem::path& path, ReportFormat format) {
  if (format == ReportFormat::kJson) {
    ensure_directory(path.parent_path());
    auto out = open_output(path);
    out << report_to_json(report).dump(2) << '\n';
    return;
  }

  ensure_directory(path);

  {
    auto out = open_output(path / "summary.csv");
    out << "metric,value\n";
    out << "n_items," << report.n_items << '\n';
    out << "k," << report.run_config.k << '\n';
    out << "tau," << sig6(report.run_config.tau) << '\n';
    out << "top1_base," << sig6(report.top1_base.value()) << '\n';
    out << "topk_base," << sig6(report.topk_base.value()) << '\n';
    out << "cascade_accuracy," << sig6(report.cascade_accuracy.value()) << '\n';
    out << "fraction_refined," << sig6(report.refined.value()) << '\n';
    out << "refiner_calls," << report.refiner_calls << '\n';
    out << "parse_fallbacks," << report.parse_fallbacks << '\n';
    out << "refiner_errors," << report.refiner_errors << '\n';
    out << "mean_latency_base_ms," << cell(report.mean_latency_base_ms) << '\n';
    out << "mean_latency_refine_ms," << cell(report.mean_latency_refine_ms) << '\n';
    out << "est_throughput," << sig6(report.est_throughput) << '\n';
  }
  {
    auto out = open_output(path / "base_topk.csv");
    out << "k,hits,total,rate\n";
    std::map<std::size_t, Rate> all = report.base_topk;
    all[1] = report.top1_base;
    all[report.run_config.k] = report.topk_base;
    for (const auto& [k, r] : all) out << k << ',' << r.hits << ',' << r.total << ',' << sig6(r.value()) << '\n';
  }
  {
    auto out = open_output(path / "sweep.csv");
    out << "param,accuracy,accuracy_hits,n_items,fraction_refined,refined_hits,refiner_calls,est_throughput\n";
    for (const auto& p : report.sweep_curve) {
      out << sig6(p.param) << ',' << sig6(p.accuracy.value()) << ',' << p.accuracy.hits << ',' << p.accuracy.total
          << ',' << sig6(p.refined.value()) << ',' << p.refined.hits << ',' << p.refiner_calls << ','
          << sig6(p.est_throughput) << '\n';
    }
  }
  {
    auto out = open_output(path / "margin_buckets.csv");
    out << "lo,hi,n,base_correct,cascade_correct,base_accuracy,cascade_accuracy,gap\n";
    for (const auto& b : report.margin_buckets) {
      out << sig6(b.lo) << ',' << sig6(b.hi) << ',' << b.n << ',' << b.base_correct << ',' << b.cascade_correct << ','
          << cell(b.base_accuracy()) << ',' << cell(b.cascade_accuracy()) << ',' << cell(b.gap()) << '\n';
    }
  }
  {
    auto out = open_output(path / "error_buckets.csv");
    const auto& e = report.error_buckets;
    out << "base_wrong_early_exit,refined_wrong_truth_absent,refined_wrong_truth_present,total\n";
    out << e.base_wrong_early_exit << ',' << e.refined_wrong_truth_absent << ',' << e.refined_wrong_truth_present << ','
        << e.total() << '\n';
  }
  {
    auto out = open_output(path / "order_accuracy.csv");
    out << "order,hits,total,rate\n";
    for (const auto& [order, r] : report.order_accuracy)
      out << order << ',' << r.hits << ',' << r.total << ',' << sig6(r.value()) << '\n';
  }
}

EvalReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open report " + path.string());
  try {
    return report_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace cascade
