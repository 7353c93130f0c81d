#include "cascade/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace cascade {
namespace {

std::unordered_map<std::string_view, const ScoreRecord*> index_records(const std::vector<ScoreRecord>& records) {
  std::unordered_map<std::string_view, const ScoreRecord*> by_id;
  by_id.reserve(records.size());
  for (const auto& r : records) by_id.emplace(r.item_id, &r);
  return by_id;
}

void check_alignment(const std::vector<Prediction>& predictions, const std::vector<ScoreRecord>& records,
                     const std::unordered_map<std::string_view, const ScoreRecord*>& by_id) {
  if (predictions.size() != records.size()) {
    throw ValidationError("have " + std::to_string(predictions.size()) + " predictions for " +
                          std::to_string(records.size()) + " records");
  }
  std::unordered_map<std::string_view, int> seen;
  for (const auto& p : predictions) {
    auto it = by_id.find(p.item_id);
    if (it == by_id.end()) throw ValidationError("prediction for unknown item '" + p.item_id + "'");
    if (++seen[p.item_id] > 1) throw ValidationError("duplicate prediction for item '" + p.item_id + "'");
    if (it->second->truth != p.truth) throw ValidationError("truth mismatch for item '" + p.item_id + "'");
  }
}

std::optional<double> ratio(std::size_t hits, std::size_t n) {
  if (n == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace

double CostModel::throughput(double fraction_refined) const {
  const double per_item = base_latency_ms + fraction_refined * refine_latency_ms;
  if (!(per_item > 0.0)) throw ValidationError("cost model latencies must be positive");
  return 1000.0 / per_item;
}

std::optional<double> MarginBucket::base_accuracy() const { return ratio(base_correct, n); }
std::optional<double> MarginBucket::cascade_accuracy() const { return ratio(cascade_correct, n); }
std::optional<double> MarginBucket::gap() const {
  if (n == 0) return std::nullopt;
  return *cascade_accuracy() - *base_accuracy();
}

std::map<std::size_t, Rate> base_accuracies(const std::vector<ScoreRecord>& records, double temperature,
                                            const std::vector<std::size_t>& ks) {
  std::map<std::size_t, Rate> out;
  for (std::size_t k : ks) {
    if (k == 0) throw ValidationError("k must be at least 1");
    out[k].total = records.size();
  }
  for (const auto& r : records) {
    const std::size_t rank = rank_of(softmax(r.raw_scores, temperature), r.truth);
    for (auto& [k, rate] : out)
      if (rank <= k) ++rate.hits;
  }
  return out;
}

CostModel resolve_cost_model(const std::vector<Prediction>& predictions, std::optional<double> base_latency_ms,
                             std::optional<double> refine_latency_ms) {
  CostModel model;
  double base_sum = 0.0, refine_sum = 0.0;
  std::size_t base_n = 0, refine_n = 0;
  for (const auto& p : predictions) {
    if (p.latency_base_ms) base_sum += *p.latency_base_ms, ++base_n;
    if (p.latency_refine_ms) refine_sum += *p.latency_refine_ms, ++refine_n;
  }
  if (base_latency_ms) {
    model.base_latency_ms = *base_latency_ms;
  } else if (base_n > 0 && base_sum > 0.0) {
    model.base_latency_ms = base_sum / static_cast<double>(base_n);
  }
  if (refine_latency_ms) {
    model.refine_latency_ms = *refine_latency_ms;
  } else if (refine_n > 0 && refine_sum > 0.0) {
    model.refine_latency_ms = refine_sum / static_cast<double>(refine_n);
  }
  if (!(model.base_latency_ms > 0.0) || model.refine_latency_ms < 0.0)
    throw ValidationError("cost model needs a positive base latency and a non-negative refine latency");
  return model;
}

SweepPoint summarize(double param, const std::vector<Prediction>& predictions, const CostModel& cost) {
  SweepPoint pt;
  pt.param = param;
  pt.accuracy.total = pt.refined.total = predictions.size();
  for (const auto& p : predictions) {
    if (p.correct()) ++pt.accuracy.hits;
    if (p.stage == Stage::kRefined) ++pt.refined.hits;
  }
  pt.refiner_calls = pt.refined.hits;
  pt.est_throughput = cost.throughput(pt.refined.value());
  return pt;
}

std::vector<MarginBucket> margin_analysis(const std::vector<Prediction>& predictions,
                                          const std::vector<ScoreRecord>& records, double temperature,
                                          std::size_t n_buckets) {
  if (n_buckets == 0) throw ValidationError("need at least one margin bucket");
  const auto by_id = index_records(records);
  check_alignment(predictions, records, by_id);
  std::vector<MarginBucket> buckets(n_buckets);
  for (std::size_t b = 0; b < n_buckets; ++b) {
    buckets[b].lo = static_cast<double>(b) / static_cast<double>(n_buckets);
    buckets[b].hi = static_cast<double>(b + 1) / static_cast<double>(n_buckets);
  }
  for (const auto& p : predictions) {
    const double m = std::clamp(p.margin, 0.0, 1.0);
    const auto b = std::min(static_cast<std::size_t>(m * static_cast<double>(n_buckets)), n_buckets - 1);
    const auto& rec = *by_id.at(p.item_id);
    auto& bucket = buckets[b];
    ++bucket.n;
    if (static_cast<std::size_t>(softmax(rec.raw_scores, temperature).argmax()) == rec.truth) ++bucket.base_correct;
    if (p.correct()) ++bucket.cascade_correct;
  }
  return buckets;
}

ErrorBuckets error_analysis(const std::vector<Prediction>& predictions) {
  ErrorBuckets e;
  for (const auto& p : predictions) {
    if (p.correct()) continue;
    if (p.stage == Stage::kBase) {
      ++e.base_wrong_early_exit;
    } else if (p.truth_absent_from_candidates) {
      ++e.refined_wrong_truth_absent;
    } else {
      ++e.refined_wrong_truth_present;
    }
  }
  return e;
}

EvalReport evaluate(const std::vector<Prediction>& predictions, const std::vector<ScoreRecord>& records,
                    const CascadeConfig& config, const std::optional<CostModel>& cost_model,
                    const std::vector<std::size_t>& extra_ks) {
  const auto by_id = index_records(records);
  check_alignment(predictions, records, by_id);

  EvalReport r;
  r.run_config = config;
  r.n_items = predictions.size();
  std::vector<std::size_t> ks = extra_ks;
  ks.push_back(1);
  ks.push_back(config.k);
  auto base = base_accuracies(records, config.temperature, ks);
  r.top1_base = base.at(1);
  r.topk_base = base.at(config.k);
  for (std::size_t k : extra_ks) r.base_topk[k] = base.at(k);

  r.cost_model = cost_model ? *cost_model : resolve_cost_model(predictions, std::nullopt, std::nullopt);
  const auto point = summarize(config.tau, predictions, r.cost_model);
  r.cascade_accuracy = point.accuracy;
  r.refined = point.refined;
  r.refiner_calls = point.refiner_calls;
  r.est_throughput = point.est_throughput;

  double base_sum = 0.0, refine_sum = 0.0;
  std::size_t base_n = 0, refine_n = 0;
  for (const auto& p : predictions) {
    if (p.parse_outcome == ParseOutcome::kFallbackTop1) ++r.parse_fallbacks;
    if (p.error) ++r.refiner_errors;
    if (p.latency_base_ms) base_sum += *p.latency_base_ms, ++base_n;
    if (p.latency_refine_ms) refine_sum += *p.latency_refine_ms, ++refine_n;
  }
  if (base_n) r.mean_latency_base_ms = base_sum / static_cast<double>(base_n);
  if (refine_n) r.mean_latency_refine_ms = refine_sum / static_cast<double>(refine_n);

  r.margin_buckets = margin_analysis(predictions, records, config.temperature);
  r.error_buckets = error_analysis(predictions);
  return r;
}

std::vector<SweepPoint> sweep_tau(const std::vector<ScoreRecord>& records, const LabelSet& labels,
                                  const std::vector<double>& taus, const CascadeConfig& config, Refiner& refiner,
                                  const ExemplarBank* exemplars, const CostModel& cost, std::size_t max_in_flight) {
  if (!std::is_sorted(taus.begin(), taus.end())) throw ValidationError("tau grid must be sorted ascending");
  for (double t : taus)
    if (!(t >= 0.0)) throw ValidationError("tau values must be non-negative");
  if (taus.empty()) return {};

  CascadeConfig all_refined = config;
  all_refined.tau = 0.0;
  const auto refined = classify_batch(records, labels, all_refined, refiner, exemplars, max_in_flight);

  std::vector<std::size_t> argmax(records.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    argmax[i] = static_cast<std::size_t>(softmax(records[i].raw_scores, config.temperature).argmax());

  std::vector<SweepPoint> curve;
  curve.reserve(taus.size());
  for (double tau : taus) {
    std::vector<Prediction> at_tau;
    at_tau.reserve(refined.size());
    for (std::size_t i = 0; i < refined.size(); ++i) {
      if (refined[i].entropy < tau) {
        Prediction p;
        p.item_id = refined[i].item_id;
        p.truth = refined[i].truth;
        p.predicted = argmax[i];
        p.stage = Stage::kBase;
        p.entropy = refined[i].entropy;
        p.margin = refined[i].margin;
        p.candidate_order = refined[i].candidate_order;
        at_tau.push_back(std::move(p));
      } else {
        at_tau.push_back(refined[i]);
      }
    }
    curve.push_back(summarize(tau, at_tau, cost));
  }
  return curve;
}

std::vector<SweepPoint> sweep_k(const std::vector<ScoreRecord>& records, const LabelSet& labels,
                                const std::vector<std::size_t>& ks, const CascadeConfig& config, Refiner& refiner,
                                const ExemplarBank* exemplars, const CostModel& cost, std::size_t max_in_flight) {
  if (!std::is_sorted(ks.begin(), ks.end())) throw ValidationError("k grid must be sorted ascending");
  std::vector<SweepPoint> curve;
  curve.reserve(ks.size());
  for (std::size_t k : ks) {
    if (k == 0) throw ValidationError("k values must be at least 1");
    CascadeConfig at_k = config;
    at_k.k = k;
    curve.push_back(summarize(static_cast<double>(k),
                              classify_batch(records, labels, at_k, refiner, exemplars, max_in_flight), cost));
  }
  return curve;
}

std::map<std::string, Rate> order_sensitivity(const std::vector<ScoreRecord>& records, const LabelSet& labels,
                                              const CascadeConfig& config, Refiner& refiner,
                                              const ExemplarBank* exemplars,
                                              const std::vector<CandidateOrder>& orders, std::size_t max_in_flight) {
  std::map<std::string, Rate> out;
  for (auto order : orders) {
    CascadeConfig c = config;
    c.candidate_order = order;
    Rate rate;
    for (const auto& p : classify_batch(records, labels, c, refiner, exemplars, max_in_flight)) {
      ++rate.total;
      if (p.correct()) ++rate.hits;
    }
    out[std::string(to_string(order))] = rate;
  }
  return out;
}

}  // namespace cascade
