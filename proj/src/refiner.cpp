#include "cascade/refiner.hpp"

#include <fstream>
#include <random>

#include "json.hpp"

namespace cascade {

std::string_view to_string(RefinerError::Kind kind) {
  switch (kind) {
    case RefinerError::Kind::kTimeout: return "timeout";
    case RefinerError::Kind::kHttpStatus: return "http_status";
    case RefinerError::Kind::kMalformedResponse: return "malformed_response";
    case RefinerError::Kind::kTransport: return "transport";
    case RefinerError::Kind::kMissingRecording: return "missing_recording";
    case RefinerError::Kind::kDigestMismatch: return "digest_mismatch";
  }
  return "unknown";
}

OracleRefiner::OracleRefiner(double in_candidate_accuracy) : accuracy_(in_candidate_accuracy) {
  if (!(accuracy_ >= 0.0 && accuracy_ <= 1.0)) throw ValidationError("in_candidate_accuracy must lie in [0,1]");
}

RefinerResponse OracleRefiner::refine(const RefineRequest& request) {
  const auto& options = request.bundle.candidate_labels;
  if (options.empty()) throw ValidationError("oracle refiner received no options");
  std::mt19937_64 rng(request.seed);
  const double draw = std::uniform_real_distribution<double>(0.0, 1.0)(rng);

  const auto truth_norm = normalize_label(request.truth_label);
  std::size_t truth_pos = options.size();
  for (std::size_t i = 0; i < options.size(); ++i)
    if (normalize_label(options[i]) == truth_norm) truth_pos = i;

  RefinerResponse resp;
  if (truth_pos == options.size()) {
    resp.text = options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
  } else if (draw < accuracy_ || options.size() == 1) {
    resp.text = options[truth_pos];
  } else {
    std::size_t pick = std::uniform_int_distribution<std::size_t>(0, options.size() - 2)(rng);
    if (pick >= truth_pos) ++pick;
    resp.text = options[pick];
  }
  return resp;
}

RefinerResponse FirstPickRefiner::refine(const RefineRequest& request) {
  if (request.bundle.candidate_labels.empty()) throw ValidationError("first-pick refiner received no options");
  return {request.bundle.candidate_labels.front(), 0.0, {}};
}

ReplayRefiner::ReplayRefiner(std::vector<ReplayEntry> entries) {
  for (auto& e : entries) {
    auto& slot = by_item_[e.item_id];
    auto digest = e.prompt_digest;
    if (slot.emplace(std::move(digest), std::move(e)).second) ++count_;
  }
}

ReplayRefiner ReplayRefiner::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open replay file " + path.string());
  return ReplayRefiner(parse_replay(in, path.string()));
}

RefinerResponse ReplayRefiner::refine(const RefineRequest& request) {
  auto item = by_item_.find(request.item_id);
  if (item == by_item_.end())
    throw RefinerError(RefinerError::Kind::kMissingRecording,
                       "no recorded response for item '" + std::string(request.item_id) + "'");
  auto hit = item->second.find(std::string(request.digest));
  if (hit == item->second.end())
    throw RefinerError(RefinerError::Kind::kDigestMismatch,
                       "prompt for item '" + std::string(request.item_id) + "' changed since it was recorded");
  return {hit->second.text, hit->second.latency_ms, {{"source", "replay"}}};
}

void ReplayRecorder::record(ReplayEntry entry) {
  std::lock_guard lock(mu_);
  auto key = std::make_tuple(entry.item_id, entry.prompt_digest);
  entries_.insert_or_assign(std::move(key), std::move(entry));
}

std::vector<ReplayEntry> ReplayRecorder::entries() const {
  std::lock_guard lock(mu_);
  std::vector<ReplayEntry> out;
  out.reserve(entries_.size());
  for (const auto& [key, e] : entries_) out.push_back(e);
  return out;
}

void ReplayRecorder::write(std::ostream& out) const {
  for (const auto& e : entries()) {
    nlohmann::ordered_json doc;
    doc["item_id"] = e.item_id;
    doc["prompt_digest"] = e.prompt_digest;
    doc["text"] = e.text;
    doc["latency_ms"] = e.latency_ms;
    out << doc.dump() << '\n';
  }
}

void ReplayRecorder::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write replay file " + path.string());
  write(out);
}

std::vector<ReplayEntry> parse_replay(std::istream& in, std::string_view source) {
  std::vector<ReplayEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto doc = nlohmann::json::parse(line);
      out.push_back({doc.at("item_id").get<std::string>(), doc.at("prompt_digest").get<std::string>(),
                     doc.at("text").get<std::string>(), doc.value("latency_ms", 0.0)});
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string(source) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace cascade
