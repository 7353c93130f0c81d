#pragma once

// Numeric primitives of the two-stage classifier: probability normalization,
// entropy, top1/top2 margin and deterministic top-k selection.
//
// Probability vectors are Eigen column vectors templated on the scalar type.
// Everything here is a pure function over immutable inputs.

#include <Eigen/Core>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cascade/errors.hpp"

namespace cascade {

/// Canonical form used for label comparison: ASCII case-fold, trim, strip
/// terminal punctuation, collapse inner whitespace runs to one space.
inline std::string normalize_label(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    const auto uc = static_cast<unsigned char>(ch);
    if (std::isspace(uc)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(uc < 0x80 ? std::tolower(uc) : uc));
  }
  constexpr std::string_view kTerminal = ".,;:!?\"'`)]}";
  while (!out.empty() && kTerminal.find(out.back()) != std::string_view::npos) {
    out.pop_back();
    while (!out.empty() && out.back() == ' ') out.pop_back();
  }
  constexpr std::string_view kLeading = "\"'`([{";
  std::size_t lead = 0;
  while (lead < out.size() && (kLeading.find(out[lead]) != std::string_view::npos || out[lead] == ' ')) ++lead;
  return out.substr(lead);
}

/// Ordered, fixed class set. Index i identifies class i for the lifetime of a run.
class LabelSet {
 public:
  LabelSet() = default;

  explicit LabelSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
    if (labels_.empty()) throw ValidationError("label set is empty");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      auto [it, inserted] = index_.emplace(normalize_label(labels_[i]), i);
      if (!inserted) {
        throw ValidationError("duplicate label '" + labels_[i] + "' (entries " + std::to_string(it->second) +
                              " and " + std::to_string(i) + ")");
      }
    }
  }

  [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }
  [[nodiscard]] const std::string& operator[](std::size_t i) const { return labels_.at(i); }
  [[nodiscard]] const std::vector<std::string>& labels() const noexcept { return labels_; }

  /// Index of a label by canonical form, or -1.
  [[nodiscard]] long find(std::string_view label) const {
    auto it = index_.find(normalize_label(label));
    return it == index_.end() ? -1 : static_cast<long>(it->second);
  }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Probability vector aligned to a LabelSet. Entries in [0,1], sum 1 within 1e-9.
template <typename Scalar>
class Distribution {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  static constexpr Scalar kSumTolerance = Scalar(1e-9);

  static Distribution from_probabilities(Vector probs) {
    if (probs.size() == 0) throw ValidationError("distribution is empty");
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
      if (!std::isfinite(probs[i]) || probs[i] < Scalar(0) || probs[i] > Scalar(1)) {
        throw ValidationError("probability at index " + std::to_string(i) + " is outside [0,1]");
      }
    }
    if (std::abs(probs.sum() - Scalar(1)) > kSumTolerance) throw ValidationError("probabilities do not sum to 1");
    return Distribution(std::move(probs));
  }

  [[nodiscard]] const Vector& probs() const noexcept { return probs_; }
  [[nodiscard]] Eigen::Index size() const noexcept { return probs_.size(); }
  [[nodiscard]] Scalar operator[](Eigen::Index i) const { return probs_[i]; }

  /// Index of the largest probability; ties go to the lowest index.
  [[nodiscard]] Eigen::Index argmax() const {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < probs_.size(); ++i)
      if (probs_[i] > probs_[best]) best = i;
    return best;
  }

 private:
  explicit Distribution(Vector probs) : probs_(std::move(probs)) {}

  Vector probs_;
};

using ProbabilityDistribution = Distribution<double>;

template <typename Scalar>
struct BasicCandidate {
  std::size_t label;
  Scalar prob;

  friend bool operator==(const BasicCandidate&, const BasicCandidate&) = default;
};

/// Top-k labels with their probabilities. As produced by top_k the entries are
/// sorted by non-increasing probability with ties on ascending label index;
/// reordered() yields the same entries in a different presentation order.
template <typename Scalar>
class BasicCandidateSet {
 public:
  using Candidate = BasicCandidate<Scalar>;

  BasicCandidateSet() = default;
  BasicCandidateSet(std::vector<Candidate> entries, std::size_t requested_k)
      : entries_(std::move(entries)), requested_k_(requested_k) {}

  [[nodiscard]] const std::vector<Candidate>& entries() const noexcept { return entries_; }
  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
  [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }
  [[nodiscard]] const Candidate& operator[](std::size_t i) const { return entries_.at(i); }
  [[nodiscard]] std::size_t requested_k() const noexcept { return requested_k_; }
  [[nodiscard]] bool clamped() const noexcept { return requested_k_ > entries_.size(); }

  [[nodiscard]] bool contains(std::size_t label) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const Candidate& c) { return c.label == label; });
  }

  /// Highest-probability entry (lowest label index on ties), independent of presentation order.
  [[nodiscard]] const Candidate& best() const {
    if (entries_.empty()) throw ValidationError("candidate set is empty");
    return *std::min_element(entries_.begin(), entries_.end(), [](const Candidate& a, const Candidate& b) {
      return a.prob > b.prob || (a.prob == b.prob && a.label < b.label);
    });
  }

  /// Same entries, presented as entries()[order[0]], entries()[order[1]], ...
  [[nodiscard]] BasicCandidateSet reordered(std::span<const std::size_t> order) const {
    if (order.size() != entries_.size()) throw ValidationError("reorder permutation has wrong length");
    std::vector<Candidate> out;
    out.reserve(order.size());
    for (std::size_t i : order) out.push_back(entries_.at(i));
    return BasicCandidateSet(std::move(out), requested_k_);
  }

  friend bool operator==(const BasicCandidateSet&, const BasicCandidateSet&) = default;

 private:
  std::vector<Candidate> entries_;
  std::size_t requested_k_ = 0;
};

using Candidate = BasicCandidate<double>;
using CandidateSet = BasicCandidateSet<double>;

/// Temperature-scaled softmax with max subtraction.
template <typename Derived>
Distribution<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& scores,
                                               typename Derived::Scalar temperature = 1) {
  using Scalar = typename Derived::Scalar;
  if (scores.size() == 0) throw ValidationError("softmax of an empty score vector");
  if (!(temperature > Scalar(0)) || !std::isfinite(temperature))
    throw ValidationError("temperature must be a positive finite number");
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores(i))) throw ValidationError("non-finite score at index " + std::to_string(i));
  }
  const auto scaled = (scores.derived().template cast<Scalar>().array() / temperature).eval();
  typename Distribution<Scalar>::Vector probs = (scaled - scaled.maxCoeff()).exp().matrix();
  probs /= probs.sum();
  return Distribution<Scalar>::from_probabilities(std::move(probs));
}

inline ProbabilityDistribution softmax(std::span<const double> scores, double temperature = 1.0) {
  return softmax(Eigen::Map<const Eigen::VectorXd>(scores.data(), static_cast<Eigen::Index>(scores.size())),
                 temperature);
}

/// Shannon entropy in nats with 0 ln 0 = 0, over the full distribution.
template <typename Scalar>
Scalar entropy(const Distribution<Scalar>& dist) {
  const auto& p = dist.probs().array();
  const Scalar h = -(p > Scalar(0)).select(p * p.log(), Scalar(0)).sum();
  return std::clamp(h, Scalar(0), std::log(static_cast<Scalar>(dist.size())));
}

/// Sorted top-k. k larger than the class count is clamped (see clamped()).
template <typename Scalar>
BasicCandidateSet<Scalar> top_k(const Distribution<Scalar>& dist, std::size_t k) {
  if (k == 0) throw ValidationError("k must be at least 1");
  const auto n = static_cast<std::size_t>(dist.size());
  const std::size_t kept = std::min(k, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto by_rank = [&](std::size_t a, std::size_t b) {
    const Scalar pa = dist[static_cast<Eigen::Index>(a)];
    const Scalar pb = dist[static_cast<Eigen::Index>(b)];
    return pa > pb || (pa == pb && a < b);
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kept), order.end(), by_rank);
  std::vector<BasicCandidate<Scalar>> entries;
  entries.reserve(kept);
  for (std::size_t i = 0; i < kept; ++i) entries.push_back({order[i], dist[static_cast<Eigen::Index>(order[i])]});
  return BasicCandidateSet<Scalar>(std::move(entries), k);
}

template <typename Scalar>
BasicCandidateSet<Scalar> top_k(const Distribution<Scalar>& dist, const LabelSet& labels, std::size_t k) {
  if (static_cast<std::size_t>(dist.size()) != labels.size())
    throw ValidationError("distribution width does not match label set");
  return top_k(dist, k);
}

/// p(1st) - p(2nd). A single-class distribution has margin 1.
template <typename Scalar>
Scalar margin(const Distribution<Scalar>& dist) {
  if (dist.size() < 2) return Scalar(1);
  const auto top = top_k(dist, 2);
  return top[0].prob - top[1].prob;
}

/// 1-based rank of a label under the top_k ordering.
template <typename Scalar>
std::size_t rank_of(const Distribution<Scalar>& dist, std::size_t label) {
  const Scalar p = dist[static_cast<Eigen::Index>(label)];
  std::size_t ahead = 0;
  for (Eigen::Index i = 0; i < dist.size(); ++i) {
    const Scalar q = dist[i];
    if (q > p || (q == p && static_cast<std::size_t>(i) < label)) ++ahead;
  }
  return ahead + 1;
}

}  // namespace cascade
