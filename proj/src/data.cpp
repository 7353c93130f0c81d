#include "cascade/data.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <unordered_map>

#include "cascade/seeding.hpp"
#include "json.hpp"

namespace cascade {
namespace {

using nlohmann::json;

std::string where(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line);
}

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    if (c < 0x80) {
      extra = 0;
    } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
      extra = 1;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
    } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
      extra = 3;
    } else {
      return false;
    }
    for (std::size_t j = 1; j <= extra; ++j) {
      if (i + j >= s.size() || (static_cast<unsigned char>(s[i + j]) & 0xC0) != 0x80) return false;
    }
    i += extra + 1;
  }
  return true;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return in;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

std::string trimmed(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

template <typename Fn>
void for_each_json_line(std::istream& in, std::string_view source, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (blank(line)) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(where(source, line_no) + ": malformed JSON: " + e.what());
    }
    if (!doc.is_object()) throw ValidationError(where(source, line_no) + ": expected a JSON object");
    try {
      fn(doc, line_no);
    } catch (const json::exception& e) {
      throw ValidationError(where(source, line_no) + ": " + e.what());
    }
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  return p.is_absolute() ? p : base / p;
}

// Bisection on the inverse temperature of a Zipf profile so that its softmax
// has the requested entropy.
double zipf_scale_for_entropy(const Eigen::VectorXd& profile, double target) {
  const auto entropy_at = [&](double beta) { return entropy(softmax(Eigen::VectorXd(beta * profile))); };
  double lo = 0.0;
  double hi = 1.0;
  while (entropy_at(hi) > target && hi < 1e6) hi *= 2.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (entropy_at(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

const std::vector<std::string>& ExemplarBank::refs(std::size_t label) const {
  static const std::vector<std::string> kNone;
  return label < refs_.size() ? refs_[label] : kNone;
}

LabelSet parse_label_set(std::istream& in, std::string_view source) {
  std::vector<std::string> labels;
  std::map<std::string, std::size_t> first_line;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (!valid_utf8(line)) throw ValidationError(where(source, line_no) + ": malformed UTF-8");
    std::string label = trimmed(line);
    if (label.empty()) continue;
    auto [it, inserted] = first_line.emplace(normalize_label(label), line_no);
    if (!inserted) {
      throw ValidationError(where(source, line_no) + ": duplicate label '" + label + "' (first seen on line " +
                            std::to_string(it->second) + ")");
    }
    labels.push_back(std::move(label));
  }
  if (labels.empty()) throw ValidationError(std::string(source) + ": label set is empty");
  return LabelSet(std::move(labels));
}

LabelSet load_label_set(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_label_set(in, path.string());
}

void write_label_set(std::ostream& out, const LabelSet& labels) {
  for (const auto& label : labels.labels()) out << label << '\n';
}

std::vector<ScoreRecord> parse_scores(std::istream& in, const LabelSet& labels, std::string_view source) {
  std::vector<ScoreRecord> records;
  std::set<std::string> seen;
  for_each_json_line(in, source, [&](const json& doc, std::size_t line_no) {
    ScoreRecord rec;
    rec.item_id = doc.at("item_id").get<std::string>();
    const auto at = [&] { return where(source, line_no) + ": item '" + rec.item_id + "'"; };
    if (!seen.insert(rec.item_id).second) throw ValidationError(at() + ": duplicate item_id");
    const auto truth = doc.at("truth").get<std::string>();
    const long idx = labels.find(truth);
    if (idx < 0) throw ValidationError(at() + ": truth label '" + truth + "' is not in the label set");
    rec.truth = static_cast<std::size_t>(idx);
    if (auto it = doc.find("image_ref"); it != doc.end() && !it->is_null()) rec.image_ref = it->get<std::string>();
    const auto& scores = doc.at("scores");
    if (!scores.is_array()) throw ValidationError(at() + ": scores must be an array");
    if (scores.size() != labels.size()) {
      throw ValidationError(at() + ": has " + std::to_string(scores.size()) + " scores, label set has " +
                            std::to_string(labels.size()));
    }
    rec.raw_scores.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (!scores[i].is_number()) throw ValidationError(at() + ": score " + std::to_string(i) + " is not a number");
      const double v = scores[i].get<double>();
      if (!std::isfinite(v)) throw ValidationError(at() + ": non-finite score at index " + std::to_string(i));
      rec.raw_scores.push_back(v);
    }
    records.push_back(std::move(rec));
  });
  return records;
}

std::vector<ScoreRecord> load_scores(const std::filesystem::path& path, const LabelSet& labels) {
  auto in = open_input(path);
  return parse_scores(in, labels, path.string());
}

void write_scores(std::ostream& out, const std::vector<ScoreRecord>& records, const LabelSet& labels) {
  for (const auto& rec : records) {
    nlohmann::ordered_json doc;
    doc["item_id"] = rec.item_id;
    doc["truth"] = labels[rec.truth];
    doc["image_ref"] = rec.image_ref ? nlohmann::ordered_json(*rec.image_ref) : nlohmann::ordered_json(nullptr);
    doc["scores"] = rec.raw_scores;
    out << doc.dump() << '\n';
  }
}

ExemplarListing parse_exemplar_listing(std::istream& in, const LabelSet& labels, std::string_view source) {
  ExemplarListing listing(labels.size());
  for_each_json_line(in, source, [&](const json& doc, std::size_t line_no) {
    const auto label = doc.at("label").get<std::string>();
    const long idx = labels.find(label);
    if (idx < 0) throw ValidationError(where(source, line_no) + ": exemplar label '" + label + "' is not in the label set");
    auto& refs = listing[static_cast<std::size_t>(idx)];
    for (const auto& ref : doc.at("refs")) refs.push_back(ref.get<std::string>());
  });
  return listing;
}

ExemplarListing load_exemplar_listing(const std::filesystem::path& path, const LabelSet& labels) {
  auto in = open_input(path);
  return parse_exemplar_listing(in, labels, path.string());
}

ExemplarBank build_exemplar_bank(const ExemplarListing& listing, std::size_t shots, std::uint64_t seed) {
  if (shots == 0) return ExemplarBank({}, 0, seed);
  std::vector<std::vector<std::string>> chosen(listing.size());
  for (std::size_t label = 0; label < listing.size(); ++label) {
    const auto& pool = listing[label];
    if (pool.size() < shots) {
      throw ValidationError("label index " + std::to_string(label) + " has " + std::to_string(pool.size()) +
                            " exemplars, " + std::to_string(shots) + " required");
    }
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(label)));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t s = 0; s < shots; ++s) chosen[label].push_back(pool[order[s]]);
  }
  return ExemplarBank(std::move(chosen), shots, seed);
}

ExemplarBank build_exemplar_bank(const DatasetManifest& manifest, const LabelSet& labels, std::size_t shots,
                                 std::uint64_t seed) {
  if (shots == 0) return ExemplarBank({}, 0, seed);
  if (!manifest.exemplars_path) throw ValidationError("manifest '" + manifest.name + "' has no exemplar listing");
  const auto listing = load_exemplar_listing(*manifest.exemplars_path, labels);
  for (std::size_t i = 0; i < listing.size(); ++i) {
    if (listing[i].size() < shots) {
      throw ValidationError("label '" + labels[i] + "' has " + std::to_string(listing[i].size()) + " exemplars, " +
                            std::to_string(shots) + " required");
    }
  }
  return build_exemplar_bank(listing, shots, seed);
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();
  const auto require = [&](const char* key) {
    if (!root[key]) throw ValidationError(path.string() + ": missing key '" + key + "'");
    return root[key].as<std::string>();
  };
  DatasetManifest m;
  m.name = root["name"] ? root["name"].as<std::string>() : path.stem().string();
  m.label_set_path = resolve(base, require("label_set"));
  m.scores_path = resolve(base, require("scores"));
  if (root["exemplars"]) m.exemplars_path = resolve(base, root["exemplars"].as<std::string>());
  if (root["split"]) {
    const auto split = root["split"].as<std::string>();
    if (split == "test") {
      m.split = Split::kTest;
    } else if (split == "validation") {
      m.split = Split::kValidation;
    } else {
      throw ValidationError(path.string() + ": split must be 'test' or 'validation'");
    }
  }
  for (const auto& p : {m.label_set_path, m.scores_path}) {
    if (!std::filesystem::exists(p)) throw ValidationError(path.string() + ": referenced file " + p.string() + " does not exist");
  }
  if (m.exemplars_path && !std::filesystem::exists(*m.exemplars_path))
    throw ValidationError(path.string() + ": referenced file " + m.exemplars_path->string() + " does not exist");
  return m;
}

Dataset load_dataset(const DatasetManifest& manifest) {
  Dataset ds;
  ds.labels = load_label_set(manifest.label_set_path);
  ds.records = load_scores(manifest.scores_path, ds.labels);
  return ds;
}

Dataset synthesize_dataset(const SynthesisSpec& spec) {
  const std::size_t n = spec.n_classes;
  const std::size_t k = spec.k;
  if (n == 0) throw ValidationError("n_classes must be positive");
  if (k < 1 || k > n) throw ValidationError("k must lie in [1, n_classes]");
  if (!(spec.target_top1 >= 0.0 && spec.target_top1 <= spec.target_topk && spec.target_topk <= 1.0))
    throw ValidationError("targets must satisfy 0 <= top1 <= topk <= 1");
  if (k == 1 && spec.target_topk > spec.target_top1)
    throw ValidationError("k = 1 requires target_topk == target_top1");
  if (spec.target_top1 < 1.0 && n == 1) throw ValidationError("a single class forces top-1 accuracy of 1");
  if (k == n && spec.target_topk < 1.0) throw ValidationError("k = n_classes forces top-k accuracy of 1");

  std::vector<std::string> names(n);
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "class_%04zu", i);
    names[i] = buf;
  }
  Dataset ds{LabelSet(std::move(names)), {}};
  ds.records.reserve(spec.n_items);

  Eigen::VectorXd profile(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) profile[static_cast<Eigen::Index>(j)] = -std::log(static_cast<double>(j + 1));
  const double max_entropy = std::log(static_cast<double>(n));

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> any_class(0, n - 1);
  std::vector<std::size_t> others(n > 0 ? n - 1 : 0);

  for (std::size_t item = 0; item < spec.n_items; ++item) {
    const std::size_t truth = any_class(rng);
    const double u = unit(rng);
    std::size_t rank = 1;
    if (u < spec.target_top1) {
      rank = 1;
    } else if (u < spec.target_topk) {
      rank = std::uniform_int_distribution<std::size_t>(2, k)(rng);
    } else {
      rank = std::uniform_int_distribution<std::size_t>(k + 1, n)(rng);
    }
    const bool confident = rank == 1;
    const double lo = confident ? kSynthEntropyLowTop1 : kSynthEntropyLowOther;
    const double hi = confident ? kSynthEntropyHighTop1 : kSynthEntropyHighOther;
    const double target = (lo + (hi - lo) * unit(rng)) * max_entropy;
    const double beta = n > 1 ? zipf_scale_for_entropy(profile, target) : 0.0;

    std::size_t w = 0;
    for (std::size_t c = 0; c < n; ++c)
      if (c != truth) others[w++] = c;
    std::shuffle(others.begin(), others.end(), rng);

    ScoreRecord rec;
    char id[32];
    std::snprintf(id, sizeof id, "item-%06zu", item);
    rec.item_id = id;
    rec.truth = truth;
    rec.raw_scores.assign(n, 0.0);
    std::size_t next_other = 0;
    for (std::size_t pos = 0; pos < n; ++pos) {
      const std::size_t label = (pos + 1 == rank) ? truth : others[next_other++];
      rec.raw_scores[label] = beta * profile[static_cast<Eigen::Index>(pos)];
    }
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

}  // namespace cascade
