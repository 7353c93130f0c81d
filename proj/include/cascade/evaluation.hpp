#pragma once

// Metrics over completed runs: base top-k accuracy, cascade accuracy, tau and
// k sweeps with a two-parameter cost model, margin buckets, error buckets and
// candidate-order sensitivity.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cascade/engine.hpp"

namespace cascade {

/// Exact hit count over a total; value() is the float view.
struct Rate {
  std::size_t hits = 0;
  std::size_t total = 0;

  [[nodiscard]] double value() const noexcept {
    return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
  }
  friend bool operator==(const Rate&, const Rate&) = default;
};

/// Items per second from mean per-item latencies (ms): every item pays the
/// base cost, refined items add the refiner cost.
struct CostModel {
  double base_latency_ms = 5.0;
  double refine_latency_ms = 500.0;

  [[nodiscard]] double throughput(double fraction_refined) const;
  friend bool operator==(const CostModel&, const CostModel&) = default;
};

struct SweepPoint {
  double param = 0.0;
  Rate accuracy;
  Rate refined;
  std::size_t refiner_calls = 0;
  double est_throughput = 0.0;

  friend bool operator==(const SweepPoint&, const SweepPoint&) = default;
};

struct MarginBucket {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n = 0;
  std::size_t base_correct = 0;
  std::size_t cascade_correct = 0;

  [[nodiscard]] std::optional<double> base_accuracy() const;
  [[nodiscard]] std::optional<double> cascade_accuracy() const;
  [[nodiscard]] std::optional<double> gap() const;
  friend bool operator==(const MarginBucket&, const MarginBucket&) = default;
};

struct ErrorBuckets {
  std::size_t base_wrong_early_exit = 0;
  std::size_t refined_wrong_truth_absent = 0;
  std::size_t refined_wrong_truth_present = 0;

  [[nodiscard]] std::size_t total() const noexcept {
    return base_wrong_early_exit + refined_wrong_truth_absent + refined_wrong_truth_present;
  }
  friend bool operator==(const ErrorBuckets&, const ErrorBuckets&) = default;
};

struct EvalReport {
  CascadeConfig run_config;
  std::size_t n_items = 0;
  Rate top1_base;
  Rate topk_base;                           // at run_config.k
  std::map<std::size_t, Rate> base_topk;    // any extra ks requested
  Rate cascade_accuracy;
  Rate refined;
  std::size_t refiner_calls = 0;
  std::size_t parse_fallbacks = 0;
  std::size_t refiner_errors = 0;
  std::optional<double> mean_latency_base_ms;
  std::optional<double> mean_latency_refine_ms;
  CostModel cost_model;
  double est_throughput = 0.0;
  std::string sweep_param;  // "tau", "k" or empty
  std::vector<SweepPoint> sweep_curve;
  std::vector<MarginBucket> margin_buckets;
  ErrorBuckets error_buckets;
  std::map<std::string, Rate> order_accuracy;
};

/// Fraction of records whose truth is inside top_k of the softmaxed scores.
std::map<std::size_t, Rate> base_accuracies(const std::vector<ScoreRecord>& records, double temperature,
                                            const std::vector<std::size_t>& ks);

/// Predictions must match records one-to-one by item_id (any order).
EvalReport evaluate(const std::vector<Prediction>& predictions, const std::vector<ScoreRecord>& records,
                    const CascadeConfig& config, const std::optional<CostModel>& cost_model = std::nullopt,
                    const std::vector<std::size_t>& extra_ks = {});

/// Fills in measured latencies where the configured model leaves them unset.
CostModel resolve_cost_model(const std::vector<Prediction>& predictions, std::optional<double> base_latency_ms,
                             std::optional<double> refine_latency_ms);

std::vector<MarginBucket> margin_analysis(const std::vector<Prediction>& predictions,
                                          const std::vector<ScoreRecord>& records, double temperature,
                                          std::size_t n_buckets = 5);

ErrorBuckets error_analysis(const std::vector<Prediction>& predictions);

/// One point per tau (ascending). The refiner runs once per item with the gate
/// off and each point is derived by gating those results.
std::vector<SweepPoint> sweep_tau(const std::vector<ScoreRecord>& records, const LabelSet& labels,
                                  const std::vector<double>& taus, const CascadeConfig& config, Refiner& refiner,
                                  const ExemplarBank* exemplars, const CostModel& cost, std::size_t max_in_flight = 1);

/// One full classify_batch per k (ascending).
std::vector<SweepPoint> sweep_k(const std::vector<ScoreRecord>& records, const LabelSet& labels,
                                const std::vector<std::size_t>& ks, const CascadeConfig& config, Refiner& refiner,
                                const ExemplarBank* exemplars, const CostModel& cost, std::size_t max_in_flight = 1);

SweepPoint summarize(double param, const std::vector<Prediction>& predictions, const CostModel& cost);

std::map<std::string, Rate> order_sensitivity(const std::vector<ScoreRecord>& records, const LabelSet& labels,
                                              const CascadeConfig& config, Refiner& refiner,
                                              const ExemplarBank* exemplars,
                                              const std::vector<CandidateOrder>& orders,
                                              std::size_t max_in_flight = 1);

}  // namespace cascade
