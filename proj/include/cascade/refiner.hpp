#pragma once

// The expensive second stage: a backend that reads a rendered prompt and
// answers with free text. Backends here are the test oracle, a first-pick
// stub, and record/replay; the HTTP backend lives in remote_refiner.hpp.

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "cascade/errors.hpp"
#include "cascade/prompt.hpp"

namespace cascade {

struct RefinerResponse {
  std::string text;
  double latency_ms = 0.0;
  std::map<std::string, std::string> backend_meta;
};

struct RefineRequest {
  const PromptBundle& bundle;
  std::string_view item_id;
  std::string_view digest;       // prompt_digest(bundle)
  std::string_view truth_label;  // only the oracle reads this
  std::uint64_t seed = 0;        // per-item refiner stream
};

class RefinerError : public RuntimeFailure {
 public:
  enum class Kind { kTimeout, kHttpStatus, kMalformedResponse, kTransport, kMissingRecording, kDigestMismatch };

  RefinerError(Kind kind, const std::string& what) : RuntimeFailure(what), kind_(kind) {}

  [[nodiscard]] Kind kind() const noexcept { return kind_; }

  /// Replay gaps mean the run is not reproducible and must stop; everything
  /// else degrades to the base scorer for that item.
  [[nodiscard]] bool fatal() const noexcept { return kind_ == Kind::kMissingRecording || kind_ == Kind::kDigestMismatch; }

 private:
  Kind kind_;
};

std::string_view to_string(RefinerError::Kind kind);

/// Implementations must be safe to call concurrently.
class Refiner {
 public:
  virtual ~Refiner() = default;
  virtual RefinerResponse refine(const RefineRequest& request) = 0;
  [[nodiscard]] virtual std::string_view name() const = 0;
};

/// Simulated refiner: with the truth among the options it answers the truth
/// with probability in_candidate_accuracy and a uniformly random other option
/// otherwise; with the truth absent it answers a uniformly random option.
/// The correctness draw is the first draw of the per-item stream, so whether
/// an item is answered correctly does not depend on option order.
class OracleRefiner final : public Refiner {
 public:
  explicit OracleRefiner(double in_candidate_accuracy = 1.0);
  RefinerResponse refine(const RefineRequest& request) override;
  [[nodiscard]] std::string_view name() const override { return "oracle"; }
  [[nodiscard]] double in_candidate_accuracy() const noexcept { return accuracy_; }

 private:
  double accuracy_;
};

/// Always answers the first option shown. Models position bias.
class FirstPickRefiner final : public Refiner {
 public:
  RefinerResponse refine(const RefineRequest& request) override;
  [[nodiscard]] std::string_view name() const override { return "first_pick"; }
};

struct ReplayEntry {
  std::string item_id;
  std::string prompt_digest;
  std::string text;
  double latency_ms = 0.0;

  friend bool operator==(const ReplayEntry&, const ReplayEntry&) = default;
};

/// Serves recorded replies keyed by (item_id, prompt digest).
class ReplayRefiner final : public Refiner {
 public:
  explicit ReplayRefiner(std::vector<ReplayEntry> entries);
  static ReplayRefiner from_file(const std::filesystem::path& path);

  RefinerResponse refine(const RefineRequest& request) override;
  [[nodiscard]] std::string_view name() const override { return "replay"; }
  [[nodiscard]] std::size_t size() const noexcept { return count_; }

 private:
  std::map<std::string, std::map<std::string, ReplayEntry>, std::less<>> by_item_;
  std::size_t count_ = 0;
};

/// Thread-safe sink for request/response pairs. Output is sorted by
/// (item_id, digest) so the file does not depend on completion order.
class ReplayRecorder {
 public:
  void record(ReplayEntry entry);
  [[nodiscard]] std::vector<ReplayEntry> entries() const;
  void write(std::ostream& out) const;
  void write(const std::filesystem::path& path) const;

 private:
  mutable std::mutex mu_;
  std::map<std::tuple<std::string, std::string>, ReplayEntry> entries_;
};

std::vector<ReplayEntry> parse_replay(std::istream& in, std::string_view source = "<stream>");

}  // namespace cascade
