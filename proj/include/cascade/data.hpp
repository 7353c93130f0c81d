#pragma once

// Loading and validation of label sets, score files, exemplar listings and
// dataset manifests, plus a seeded synthetic dataset generator.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/core_math.hpp"

namespace cascade {

struct ScoreRecord {
  std::string item_id;
  std::vector<double> raw_scores;
  std::size_t truth = 0;
  std::optional<std::string> image_ref;

  /// Image reference handed to the refiner; falls back to the item id.
  [[nodiscard]] const std::string& image() const { return image_ref ? *image_ref : item_id; }

  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

enum class Split { kTest, kValidation };

struct DatasetManifest {
  std::string name;
  std::filesystem::path label_set_path;
  std::filesystem::path scores_path;
  std::optional<std::filesystem::path> exemplars_path;
  Split split = Split::kTest;
};

struct Dataset {
  LabelSet labels;
  std::vector<ScoreRecord> records;
};

/// Per-label exemplar references chosen for few-shot context.
class ExemplarBank {
 public:
  ExemplarBank() = default;
  ExemplarBank(std::vector<std::vector<std::string>> refs_by_label, std::size_t shots, std::uint64_t seed)
      : refs_(std::move(refs_by_label)), shots_(shots), seed_(seed) {}

  [[nodiscard]] bool empty() const noexcept { return shots_ == 0; }
  [[nodiscard]] std::size_t shots_per_class() const noexcept { return shots_; }
  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] std::size_t label_count() const noexcept { return refs_.size(); }

  /// Selected refs for one label; empty when the label is not covered.
  [[nodiscard]] const std::vector<std::string>& refs(std::size_t label) const;

  friend bool operator==(const ExemplarBank&, const ExemplarBank&) = default;

 private:
  std::vector<std::vector<std::string>> refs_;
  std::size_t shots_ = 0;
  std::uint64_t seed_ = 0;
};

/// Full exemplar pool per label, as listed on disk.
using ExemplarListing = std::vector<std::vector<std::string>>;

LabelSet parse_label_set(std::istream& in, std::string_view source = "<stream>");
LabelSet load_label_set(const std::filesystem::path& path);
void write_label_set(std::ostream& out, const LabelSet& labels);

std::vector<ScoreRecord> parse_scores(std::istream& in, const LabelSet& labels, std::string_view source = "<stream>");
std::vector<ScoreRecord> load_scores(const std::filesystem::path& path, const LabelSet& labels);
void write_scores(std::ostream& out, const std::vector<ScoreRecord>& records, const LabelSet& labels);

ExemplarListing parse_exemplar_listing(std::istream& in, const LabelSet& labels, std::string_view source = "<stream>");
ExemplarListing load_exemplar_listing(const std::filesystem::path& path, const LabelSet& labels);

/// Seeded selection without replacement of `shots` refs per label. shots == 0 yields an empty bank.
ExemplarBank build_exemplar_bank(const ExemplarListing& listing, std::size_t shots, std::uint64_t seed);
ExemplarBank build_exemplar_bank(const DatasetManifest& manifest, const LabelSet& labels, std::size_t shots,
                                 std::uint64_t seed);

/// YAML manifest; relative paths resolve against the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
Dataset load_dataset(const DatasetManifest& manifest);

struct SynthesisSpec {
  std::size_t n_items = 0;
  std::size_t n_classes = 0;
  double target_top1 = 0.0;
  std::size_t k = 1;
  double target_topk = 0.0;
  std::uint64_t seed = 0;
};

// Per-item entropy windows, as fractions of ln(n_classes). Items whose truth
// is ranked first are drawn from the lower (more confident) window.
inline constexpr double kSynthEntropyLowTop1 = 0.1;
inline constexpr double kSynthEntropyHighTop1 = 0.7;
inline constexpr double kSynthEntropyLowOther = 0.4;
inline constexpr double kSynthEntropyHighOther = 0.9;

/// Planted-rank generator. Each item's truth lands at rank 1 with probability
/// target_top1, uniformly in ranks 2..k with probability target_topk - target_top1,
/// otherwise uniformly in ranks k+1..n_classes. Scores follow a Zipf profile
/// scaled to hit a per-item entropy target.
Dataset synthesize_dataset(const SynthesisSpec& spec);

}  // namespace cascade
