#include "cascade/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "cascade/prompt.hpp"
#include "cascade/seeding.hpp"

namespace cascade {
namespace {

PromptBundle render_for(const CandidateSet& candidates, const ScoreRecord& record, const LabelSet& labels,
                        const CascadeConfig& config, const ExemplarBank* exemplars) {
  if (config.explain) return render_explanation(candidates, labels, record.image(), config.prompt_noun);
  if (config.few_shot) {
    if (exemplars == nullptr || exemplars->empty())
      throw ValidationError("few-shot run for item '" + record.item_id + "' has no exemplar bank");
    return render_few_shot(candidates, labels, *exemplars, record.image(), config.few_shot_template,
                           config.prompt_noun);
  }
  return render_zero_shot(candidates, labels, record.image(), config.zero_shot_template, config.prompt_noun);
}

}  // namespace

std::string_view to_string(Stage stage) { return stage == Stage::kBase ? "base" : "refined"; }

CandidateSet apply_order(const CandidateSet& sorted, CandidateOrder order, std::uint64_t item_seed) {
  std::vector<std::size_t> perm(sorted.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  switch (order) {
    case CandidateOrder::kSortedDesc:
      return sorted;
    case CandidateOrder::kReversed:
      std::reverse(perm.begin(), perm.end());
      break;
    case CandidateOrder::kShuffled: {
      std::mt19937_64 rng(derive_seed(item_seed, SeedStream::kCandidateShuffle));
      std::shuffle(perm.begin(), perm.end(), rng);
      break;
    }
  }
  return sorted.reordered(perm);
}

GateDecision gate(const ProbabilityDistribution& dist, const CascadeConfig& config, std::uint64_t item_seed) {
  GateDecision d;
  d.entropy = entropy(dist);
  if (d.entropy < config.tau) {
    d.early_exit = static_cast<std::size_t>(dist.argmax());
    return d;
  }
  d.candidates = apply_order(top_k(dist, config.k), config.candidate_order, item_seed);
  return d;
}

void validate_record(const ScoreRecord& record, const LabelSet& labels) {
  if (record.raw_scores.size() != labels.size()) {
    throw ValidationError("item '" + record.item_id + "' has " + std::to_string(record.raw_scores.size()) +
                          " scores, label set has " + std::to_string(labels.size()));
  }
  if (record.truth >= labels.size()) throw ValidationError("item '" + record.item_id + "' has an invalid truth index");
  for (std::size_t i = 0; i < record.raw_scores.size(); ++i) {
    if (!std::isfinite(record.raw_scores[i]))
      throw ValidationError("item '" + record.item_id + "': non-finite score at index " + std::to_string(i));
  }
}

Prediction classify_item(const ScoreRecord& record, const LabelSet& labels, const CascadeConfig& config,
                         Refiner& refiner, const ExemplarBank* exemplars) {
  validate_record(record, labels);
  const auto dist = softmax(record.raw_scores, config.temperature);
  const std::uint64_t seed = item_seed(config.seed, record.item_id);

  Prediction p;
  p.item_id = record.item_id;
  p.truth = record.truth;
  p.margin = margin(dist);
  p.candidate_order = config.candidate_order;

  auto decision = gate(dist, config, seed);
  p.entropy = decision.entropy;
  if (!decision.refine()) {
    p.stage = Stage::kBase;
    p.predicted = *decision.early_exit;
    return p;
  }

  p.stage = Stage::kRefined;
  p.truth_absent_from_candidates = !decision.candidates.contains(record.truth);
  const auto bundle = render_for(decision.candidates, record, labels, config, exemplars);
  const auto digest = prompt_digest(bundle);
  const RefineRequest request{bundle, record.item_id, digest, labels[record.truth],
                              derive_seed(seed, SeedStream::kRefiner)};
  try {
    auto response = refiner.refine(request);
    const std::string_view answer = config.explain ? first_line(response.text) : std::string_view(response.text);
    const auto parsed = parse_response(answer, decision.candidates, labels, config.parse_policy);
    p.predicted = parsed.label;
    p.parse_outcome = parsed.outcome;
    p.raw_refiner_text = std::move(response.text);
    p.latency_refine_ms = response.latency_ms;
  } catch (const RefinerError& e) {
    if (e.fatal()) throw;
    p.predicted = decision.candidates.best().label;
    p.parse_outcome = ParseOutcome::kFallbackTop1;
    p.error = std::string(to_string(e.kind())) + ": " + e.what();
  }
  p.candidates = std::move(decision.candidates);
  return p;
}

std::vector<Prediction> classify_batch(const std::vector<ScoreRecord>& records, const LabelSet& labels,
                                       const CascadeConfig& config, Refiner& refiner, const ExemplarBank* exemplars,
                                       std::size_t max_in_flight) {
  if (records.empty()) throw ValidationError("no records to classify");
  if (max_in_flight == 0) throw ValidationError("max_in_flight must be at least 1");
  config.validate();
  for (const auto& r : records) validate_record(r, labels);

  std::vector<Prediction> out(records.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mu;
  std::size_t error_index = records.size();
  std::exception_ptr error;

  const auto worker = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t i = next.fetch_add(1);
      if (i >= records.size()) return;
      try {
        out[i] = classify_item(records[i], labels, config, refiner, exemplars);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
        failed = true;
      }
    }
  };

  const std::size_t workers = std::min(max_in_flight, records.size());
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
  return out;
}

nlohmann::ordered_json prediction_to_json(const Prediction& p, const LabelSet& labels, bool include_latency) {
  nlohmann::ordered_json doc;
  doc["item_id"] = p.item_id;
  doc["predicted"] = labels[p.predicted];
  doc["truth"] = labels[p.truth];
  doc["stage"] = to_string(p.stage);
  doc["entropy"] = p.entropy;
  doc["margin"] = p.margin;
  doc["candidate_order"] = to_string(p.candidate_order);
  if (p.candidates) {
    auto& arr = doc["candidates"] = nlohmann::ordered_json::array();
    for (const auto& c : p.candidates->entries()) arr.push_back({{"label", labels[c.label]}, {"prob", c.prob}});
    doc["requested_k"] = p.candidates->requested_k();
  }
  if (p.raw_refiner_text) doc["raw_refiner_text"] = *p.raw_refiner_text;
  if (p.parse_outcome) doc["parse_outcome"] = to_string(*p.parse_outcome);
  doc["truth_absent_from_candidates"] = p.truth_absent_from_candidates;
  if (p.error) doc["error"] = *p.error;
  if (include_latency) {
    if (p.latency_base_ms) doc["latency_base_ms"] = *p.latency_base_ms;
    if (p.latency_refine_ms) doc["latency_refine_ms"] = *p.latency_refine_ms;
  }
  return doc;
}

Prediction prediction_from_json(const nlohmann::json& doc, const LabelSet& labels) {
  const auto index_of = [&](const std::string& label) {
    const long i = labels.find(label);
    if (i < 0) throw ValidationError("label '" + label + "' is not in the label set");
    return static_cast<std::size_t>(i);
  };
  Prediction p;
  p.item_id = doc.at("item_id").get<std::string>();
  p.predicted = index_of(doc.at("predicted").get<std::string>());
  p.truth = index_of(doc.at("truth").get<std::string>());
  const auto stage = doc.at("stage").get<std::string>();
  if (stage != "base" && stage != "refined") throw ValidationError("unknown stage '" + stage + "'");
  p.stage = stage == "base" ? Stage::kBase : Stage::kRefined;
  p.entropy = doc.at("entropy").get<double>();
  p.margin = doc.at("margin").get<double>();
  p.candidate_order = parse_candidate_order(doc.value("candidate_order", "sorted_desc"));
  if (auto it = doc.find("candidates"); it != doc.end()) {
    std::vector<Candidate> entries;
    for (const auto& c : *it) entries.push_back({index_of(c.at("label").get<std::string>()), c.at("prob").get<double>()});
    const auto requested = doc.value("requested_k", entries.size());
    p.candidates = CandidateSet(std::move(entries), requested);
  }
  if (auto it = doc.find("raw_refiner_text"); it != doc.end()) p.raw_refiner_text = it->get<std::string>();
  if (auto it = doc.find("parse_outcome"); it != doc.end()) p.parse_outcome = parse_parse_outcome(it->get<std::string>());
  p.truth_absent_from_candidates = doc.value("truth_absent_from_candidates", false);
  if (auto it = doc.find("error"); it != doc.end()) p.error = it->get<std::string>();
  if (auto it = doc.find("latency_base_ms"); it != doc.end()) p.latency_base_ms = it->get<double>();
  if (auto it = doc.find("latency_refine_ms"); it != doc.end()) p.latency_refine_ms = it->get<double>();
  return p;
}

void write_predictions(std::ostream& out, const std::vector<Prediction>& predictions, const LabelSet& labels,
                       bool include_latency) {
  for (const auto& p : predictions) out << prediction_to_json(p, labels, include_latency).dump() << '\n';
}

std::vector<Prediction> parse_predictions(std::istream& in, const LabelSet& labels, std::string_view source) {
  std::vector<Prediction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(prediction_from_json(nlohmann::json::parse(line), labels));
    } catch (const std::exception& e) {
      throw ValidationError(std::string(source) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path, const LabelSet& labels) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open predictions file " + path.string());
  return parse_predictions(in, labels, path.string());
}

}  // namespace cascade
