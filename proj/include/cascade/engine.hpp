#pragma once

// Per-item pipeline: scores -> softmax -> entropy gate -> (early exit | top-k
// candidates -> prompt -> refiner -> parse), and ordered batch execution.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cascade/config.hpp"
#include "cascade/core_math.hpp"
#include "cascade/data.hpp"
#include "cascade/parse.hpp"
#include "cascade/refiner.hpp"
#include "json.hpp"

namespace cascade {

struct GateDecision {
  double entropy = 0.0;
  std::optional<std::size_t> early_exit;  // argmax when entropy < tau
  CandidateSet candidates;                // presentation order; empty on early exit

  [[nodiscard]] bool refine() const noexcept { return !early_exit.has_value(); }
};

/// Early exit iff entropy < tau. Otherwise carries top_k reordered per
/// config.candidate_order; shuffling draws from the item's shuffle stream.
GateDecision gate(const ProbabilityDistribution& dist, const CascadeConfig& config, std::uint64_t item_seed = 0);

/// Presentation order of a sorted candidate set.
CandidateSet apply_order(const CandidateSet& sorted, CandidateOrder order, std::uint64_t item_seed);

enum class Stage { kBase, kRefined };

std::string_view to_string(Stage stage);

struct Prediction {
  std::string item_id;
  std::size_t predicted = 0;
  std::size_t truth = 0;
  Stage stage = Stage::kBase;
  double entropy = 0.0;
  double margin = 0.0;
  CandidateOrder candidate_order = CandidateOrder::kSortedDesc;
  std::optional<CandidateSet> candidates;
  std::optional<std::string> raw_refiner_text;
  std::optional<ParseOutcome> parse_outcome;
  bool truth_absent_from_candidates = false;
  std::optional<std::string> error;
  std::optional<double> latency_base_ms;
  std::optional<double> latency_refine_ms;

  [[nodiscard]] bool correct() const noexcept { return predicted == truth; }
};

/// Runs one item. Refiner failures degrade to the top candidate with an
/// error annotation; replay gaps (RefinerError::fatal) propagate.
Prediction classify_item(const ScoreRecord& record, const LabelSet& labels, const CascadeConfig& config,
                         Refiner& refiner, const ExemplarBank* exemplars = nullptr);

/// Runs items with up to max_in_flight concurrent workers. Output order is
/// input order. Any record that fails validation aborts the batch naming it.
std::vector<Prediction> classify_batch(const std::vector<ScoreRecord>& records, const LabelSet& labels,
                                       const CascadeConfig& config, Refiner& refiner,
                                       const ExemplarBank* exemplars = nullptr, std::size_t max_in_flight = 1);

/// Checks a record against the label set; throws ValidationError naming the item.
void validate_record(const ScoreRecord& record, const LabelSet& labels);

// Persistence as newline-delimited JSON, labels written as strings.
nlohmann::ordered_json prediction_to_json(const Prediction& p, const LabelSet& labels, bool include_latency = true);
Prediction prediction_from_json(const nlohmann::json& doc, const LabelSet& labels);
void write_predictions(std::ostream& out, const std::vector<Prediction>& predictions, const LabelSet& labels,
                       bool include_latency = true);
std::vector<Prediction> load_predictions(const std::filesystem::path& path, const LabelSet& labels);
std::vector<Prediction> parse_predictions(std::istream& in, const LabelSet& labels, std::string_view source = "<stream>");

}  // namespace cascade
