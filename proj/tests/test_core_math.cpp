#include <cmath>
#include <random>

#include "cascade/core_math.hpp"
#include "doctest.h"

using namespace cascade;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

ProbabilityDistribution dist(std::initializer_list<double> xs) { return ProbabilityDistribution::from_probabilities(vec(xs)); }

Eigen::VectorXd random_scores(std::mt19937_64& rng) {
  const auto n = std::uniform_int_distribution<Eigen::Index>(1, 200)(rng);
  const double spread = std::uniform_real_distribution<double>(0.01, 50.0)(rng);
  std::normal_distribution<double> normal(0.0, spread);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

}  // namespace

TEST_CASE("softmax examples") {
  const auto u = softmax(vec({0, 0, 0, 0}));
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(u[i] == doctest::Approx(0.25).epsilon(1e-15));

  const auto two = softmax(vec({std::log(2.0), 0.0}));
  CHECK(std::abs(two[0] - 2.0 / 3.0) < 1e-12);
  CHECK(std::abs(two[1] - 1.0 / 3.0) < 1e-12);

  for (double c : {-1e3, -7.5, 0.0, 3.25, 1e3}) {
    const auto base = softmax(vec({5, 5 + 1.5, 5, 5}));
    const auto shifted = softmax(vec({5 + c, 5 + 1.5 + c, 5 + c, 5 + c}));
    CHECK((base.probs() - shifted.probs()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("softmax temperature divides scores") {
  const auto hot = softmax(vec({2.0, 0.0}), 2.0);
  const auto ref = softmax(vec({1.0, 0.0}), 1.0);
  CHECK((hot.probs() - ref.probs()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(softmax(vec({1.0}), 0.0), ValidationError);
  CHECK_THROWS_AS(softmax(vec({1.0}), -1.0), ValidationError);
}

TEST_CASE("softmax rejects non-finite input naming the index") {
  try {
    (void)softmax(vec({0.0, 1.0, NAN}));
    FAIL("expected a ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("index 2") != std::string::npos);
  }
  CHECK_THROWS_AS(softmax(vec({INFINITY, 0.0})), ValidationError);
  CHECK_THROWS_AS(softmax(Eigen::VectorXd()), ValidationError);
}

TEST_CASE("softmax stays finite for extreme scores") {
  const auto d = softmax(vec({1e300, -1e300, 0.0}));
  CHECK(d[0] == doctest::Approx(1.0));
  CHECK(d.probs().allFinite());
}

TEST_CASE("softmax works on float scalars") {
  Eigen::VectorXf v(3);
  v << 1.0f, 2.0f, 3.0f;
  const auto d = softmax(v, 1.0f);
  CHECK(std::abs(d.probs().sum() - 1.0f) < 1e-6f);
  CHECK(d.argmax() == 2);
}

TEST_CASE("entropy examples") {
  CHECK(entropy(dist({1, 0, 0})) == 0.0);
  CHECK(std::abs(entropy(dist({0.25, 0.25, 0.25, 0.25})) - std::log(4.0)) < 1e-9);
  CHECK(std::abs(entropy(dist({0.5, 0.5, 0, 0})) - std::log(2.0)) < 1e-9);
}

TEST_CASE("margin examples") {
  CHECK(margin(dist({0.5, 0.3, 0.2})) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(margin(dist({0.2, 0.2, 0.2, 0.2, 0.2})) == 0.0);
  CHECK(margin(dist({0.997, 0.001, 0.001, 0.001})) == doctest::Approx(0.996).epsilon(1e-12));
  CHECK(margin(dist({1.0})) == 1.0);
  // Order of the top two does not matter.
  CHECK(margin(dist({0.3, 0.5, 0.2})) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("top_k examples") {
  const auto a = top_k(dist({0.1, 0.4, 0.2, 0.3}), 2);
  REQUIRE(a.size() == 2);
  CHECK(a[0] == Candidate{1, 0.4});
  CHECK(a[1] == Candidate{3, 0.3});

  const auto tie = top_k(dist({0.25, 0.25, 0.25, 0.25}), 2);
  CHECK(tie[0].label == 0);
  CHECK(tie[1].label == 1);

  const auto full = top_k(dist({0.1, 0.4, 0.2, 0.3}), 4);
  std::vector<std::size_t> order;
  for (const auto& c : full.entries()) order.push_back(c.label);
  CHECK(order == std::vector<std::size_t>{1, 3, 2, 0});
  CHECK_FALSE(full.clamped());
}

TEST_CASE("top_k clamps and rejects k = 0") {
  const auto d = dist({0.6, 0.4});
  const auto c = top_k(d, 10);
  CHECK(c.size() == 2);
  CHECK(c.clamped());
  CHECK(c.requested_k() == 10);
  CHECK_THROWS_AS(top_k(d, 0), ValidationError);
  const LabelSet labels({"a", "b", "c"});
  CHECK_THROWS_AS(top_k(d, labels, 1), ValidationError);
}

TEST_CASE("rank_of agrees with top_k order") {
  const auto d = dist({0.25, 0.25, 0.4, 0.1});
  CHECK(rank_of(d, 2) == 1);
  CHECK(rank_of(d, 0) == 2);
  CHECK(rank_of(d, 1) == 3);
  CHECK(rank_of(d, 3) == 4);
}

TEST_CASE("distribution validation") {
  CHECK_THROWS_AS(ProbabilityDistribution::from_probabilities(vec({0.5, 0.6})), ValidationError);
  CHECK_THROWS_AS(ProbabilityDistribution::from_probabilities(vec({-0.1, 1.1})), ValidationError);
  CHECK_THROWS_AS(ProbabilityDistribution::from_probabilities(Eigen::VectorXd()), ValidationError);
}

TEST_CASE("label set uniqueness uses canonical form") {
  CHECK_THROWS_AS(LabelSet({"Watercress", "watercress"}), ValidationError);
  CHECK_THROWS_AS(LabelSet(std::vector<std::string>{}), ValidationError);
  const LabelSet labels({"Parus Major", "titmouse"});
  CHECK(labels.find("parus  major.") == 0);
  CHECK(labels.find("owl") == -1);
}

TEST_CASE("normalize_label") {
  CHECK(normalize_label("  Green-Winged   Dove. ") == "green-winged dove");
  CHECK(normalize_label("\"striped owl\"!") == "striped owl");
  CHECK(normalize_label("") == "");
}

TEST_CASE("properties over random score vectors") {
  std::mt19937_64 rng(20240611);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto scores = random_scores(rng);
    const double shift = std::uniform_real_distribution<double>(-100.0, 100.0)(rng);
    const auto d = softmax(scores);
    const auto ds = softmax(Eigen::VectorXd(scores.array() + shift));
    const auto n = static_cast<double>(scores.size());

    REQUIRE(std::abs(d.probs().sum() - 1.0) < 1e-9);
    REQUIRE((d.probs() - ds.probs()).cwiseAbs().maxCoeff() < 1e-9);

    const double h = entropy(d);
    REQUIRE(h >= 0.0);
    REQUIRE(h <= std::log(n) + 1e-12);

    const auto all = top_k(d, static_cast<std::size_t>(scores.size()));
    REQUIRE(all[0].label == static_cast<std::size_t>(d.argmax()));
    for (std::size_t i = 1; i < all.size(); ++i) REQUIRE(all[i - 1].prob >= all[i].prob);

    const auto k1 = std::uniform_int_distribution<std::size_t>(1, all.size())(rng);
    const auto k2 = std::uniform_int_distribution<std::size_t>(k1, all.size())(rng);
    const auto a = top_k(d, k1);
    const auto b = top_k(d, k2);
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);

    if (all.size() >= 2 && all[0].prob == all[1].prob) REQUIRE(margin(d) == 0.0);
  }
}

TEST_CASE("entropy is zero exactly for one-hot distributions") {
  for (int n = 1; n <= 20; ++n) {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
    p[n - 1] = 1.0;
    CHECK(entropy(ProbabilityDistribution::from_probabilities(p)) < 1e-12);
    const Eigen::VectorXd u = Eigen::VectorXd::Constant(n, 1.0 / n);
    CHECK(std::abs(entropy(ProbabilityDistribution::from_probabilities(u)) - std::log(static_cast<double>(n))) < 1e-9);
    if (n >= 2) {
      Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
      q[0] = 1.0 - 1e-6;
      q[1] = 1e-6;
      CHECK(entropy(ProbabilityDistribution::from_probabilities(q)) > 1e-12);
    }
  }
}
