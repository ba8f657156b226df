#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "crowdrank/aggregate.hpp"
#include "crowdrank/errors.hpp"
#include "crowdrank/ranker_net.hpp"
#include "crowdrank/rng.hpp"

using namespace crowdrank;

namespace {

TopicVector uniform_topic(int t) { return TopicVector{std::vector<double>(t, 1.0 / t)}; }

FeatureVector random_feature(Rng& rng, const FeatureConfig& fc, const std::vector<double>& topic) {
  ForecastRecord rec;
  rec.probabilities.resize(2);
  rec.probabilities[0] = rng.uniform01();
  rec.probabilities[1] = 1.0 - rec.probabilities[0];
  rec.confidence = 1 + static_cast<int>(rng.below(5));
  ForecasterStats stats;
  stats.mean_past_brier = 2.0 * rng.uniform01();
  stats.prior_forecast_count = static_cast<std::int64_t>(rng.below(50));
  return build_features(rec, stats, TopicVector{topic}, fc.r_max);
}

PairExample random_pair(Rng& rng, const FeatureConfig& fc) {
  std::vector<double> topic(fc.num_topics, 0.0);
  double sum = 0.0;
  for (double& v : topic) {
    v = rng.uniform01();
    sum += v;
  }
  for (double& v : topic) v /= sum;
  return PairExample(random_feature(rng, fc, topic), random_feature(rng, fc, topic),
                     static_cast<int>(rng.below(2)));
}

// Independent forward pass: plain nested loops over std::vector copies of
// the parameters, no Eigen products.
std::vector<double> dense(const DenseLayer& layer, const std::vector<double>& x, bool relu) {
  std::vector<double> out(static_cast<std::size_t>(layer.weights.rows()), 0.0);
  for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
    double acc = layer.bias(r);
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
      acc += layer.weights(r, c) * x[static_cast<std::size_t>(c)];
    out[static_cast<std::size_t>(r)] = relu && acc < 0.0 ? 0.0 : acc;
  }
  return out;
}

struct ReferenceForward {
  std::vector<double> embedding_a;
  double p = 0.0;
};

ReferenceForward reference_forward(const SiameseNetwork& net, const PairExample& pair) {
  auto branch = [&net](const FeatureVector& f) {
    std::vector<double> a = f.flatten();
    for (const auto& layer : net.branch) a = dense(layer, a, true);
    return a;
  };
  ReferenceForward ref;
  ref.embedding_a = branch(pair.features_a);
  std::vector<double> h = ref.embedding_a;
  const std::vector<double> eb = branch(pair.features_b);
  h.insert(h.end(), eb.begin(), eb.end());
  for (const auto& layer : net.head) h = dense(layer, h, true);
  const std::vector<double> logit = dense(net.output, h, false);
  ref.p = 1.0 / (1.0 + std::exp(-logit[0]));
  return ref;
}

SiameseNetwork zero_net(const FeatureConfig& fc) {
  SiameseNetwork net = SiameseNetwork::init(fc, 0);
  for (std::size_t i = 0; i < parameter_count(net); ++i) set_parameter(net, i, 0.0);
  return net;
}

}  // namespace

TEST_CASE("build_features lays out the branch input") {
  ForecastRecord rec;
  rec.probabilities = {1.0, 0.0};
  rec.confidence = 5;
  ForecasterStats cold;  // no history: 0.5 prior, count 0
  TopicVector topic{std::vector<double>{1, 0, 0, 0, 0, 0}};

  const FeatureVector f = build_features(rec, cold, topic, 5);
  const std::vector<double> expected = {1, 0, 0, 0, 0, 1.0, 0.5, 0, 1, 0, 0, 0, 0, 0};
  CHECK(f.flatten() == expected);

  rec.confidence = 1;
  CHECK(build_features(rec, cold, topic, 5).confidence_norm == 0.0);

  ForecasterStats seven;
  seven.prior_forecast_count = 7;
  CHECK(build_features(rec, seven, topic, 5).log_prior_count ==
        doctest::Approx(std::log(8.0)).epsilon(1e-12));

  rec.probabilities = {0.2, 0.2, 0.2, 0.2, 0.1, 0.1};
  CHECK_THROWS_AS(build_features(rec, cold, topic, 5), DataError);
}

TEST_CASE("pair example enforces matching topic vectors") {
  FeatureVector a, b;
  a.padded_probabilities = b.padded_probabilities = {1, 0};
  a.topic = {0.5, 0.5};
  b.topic = {0.4, 0.6};
  CHECK_THROWS_AS(PairExample(a, b, 1), DataError);
  b.topic = a.topic;
  CHECK_NOTHROW(PairExample(a, b, 1));
}

TEST_CASE("zero network outputs one half everywhere") {
  const FeatureConfig fc{5, 4};
  const SiameseNetwork net = zero_net(fc);
  Rng rng(5);
  for (int i = 0; i < 10; ++i) CHECK(net.forward(random_pair(rng, fc)) == 0.5);
}

TEST_CASE("forward matches the loop-based reference oracle") {
  const FeatureConfig fc{5, 6};
  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const SiameseNetwork net = SiameseNetwork::init(fc, 1000 + trial);
    const PairExample pair = random_pair(rng, fc);
    const ReferenceForward ref = reference_forward(net, pair);
    CHECK(net.forward(pair) == doctest::Approx(ref.p).epsilon(1e-12));

    // weight sharing: the standalone branch embedding equals the first 32
    // head inputs the reference computed for branch 1
    const Eigen::VectorXd emb = net.branch_embedding(pair.features_a);
    REQUIRE(emb.size() == kBranchWidth);
    for (int i = 0; i < kBranchWidth; ++i)
      CHECK(emb(i) == doctest::Approx(ref.embedding_a[i]).epsilon(1e-12));
  }
}

TEST_CASE("forward is a pure function") {
  const FeatureConfig fc{5, 3};
  const SiameseNetwork net = SiameseNetwork::init(fc, 3);
  Rng rng(9);
  const PairExample pair = random_pair(rng, fc);
  const double p1 = net.forward(pair);
  CHECK(net.forward(pair) == p1);
  CHECK(p1 > 0.0);
  CHECK(p1 < 1.0);
}

TEST_CASE("bce_loss reference points") {
  CHECK(bce_loss(0.5, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_loss(0.5, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_loss(1.0 - 1e-12, 1) == doctest::Approx(1e-12).epsilon(0.01));
  CHECK(bce_loss(0.9, 0) == doctest::Approx(-std::log(0.1)).epsilon(1e-12));
  CHECK(bce_loss(1.0, 0) < 30.0);  // clamp keeps the loss finite
}

TEST_CASE("gradient is zero at the symmetric point") {
  const FeatureConfig fc{5, 2};
  const SiameseNetwork net = zero_net(fc);
  Rng rng(123);
  std::vector<PairExample> batch;
  for (int i = 0; i < 4; ++i) {
    PairExample pair = random_pair(rng, fc);
    batch.push_back(PairExample(pair.features_a, pair.features_b, 1));
    batch.push_back(PairExample(pair.features_b, pair.features_a, 0));
  }
  const NetGradients grads = gradient(net, batch);
  CHECK(grads.output.bias(0) == 0.0);
}

TEST_CASE("duplicated single-example batch has the single-example gradient") {
  const FeatureConfig fc{5, 3};
  const SiameseNetwork net = SiameseNetwork::init(fc, 77);
  Rng rng(31);
  const PairExample pair = random_pair(rng, fc);
  const std::vector<PairExample> one{pair};
  const std::vector<PairExample> many(512, pair);
  const NetGradients g1 = gradient(net, one);
  const NetGradients g512 = gradient(net, many);
  const std::size_t n = parameter_count(net);
  for (std::size_t i = 0; i < n; i += 97)
    CHECK(gradient_at(g512, i) == doctest::Approx(gradient_at(g1, i)).epsilon(1e-9));
}

TEST_CASE("analytic gradient matches central finite differences") {
  const FeatureConfig fc{5, 4};
  Rng rng(2024);
  const double h = 1e-5;

  for (int instance = 0; instance < 2; ++instance) {
    SiameseNetwork net = SiameseNetwork::init(fc, 400 + instance);
    std::vector<PairExample> batch;
    for (int i = 0; i < 3; ++i) batch.push_back(random_pair(rng, fc));
    const NetGradients grads = gradient(net, batch);

    auto batch_loss_and_kink = [&](double* min_preact) {
      double loss = 0.0;
      double min_abs = std::numeric_limits<double>::infinity();
      for (const auto& pair : batch) {
        const auto stats = net.forward_stats(pair);
        loss += bce_loss(stats.p, pair.label);
        min_abs = std::min(min_abs, stats.min_abs_preact);
      }
      if (min_preact) *min_preact = min_abs;
      return loss / static_cast<double>(batch.size());
    };

    const std::size_t total = parameter_count(net);
    const std::size_t step = std::max<std::size_t>(1, total / 400);
    std::size_t checked = 0;
    for (std::size_t idx = instance; idx < total; idx += step) {
      const double saved = get_parameter(net, idx);
      double kink_plus = 0.0, kink_minus = 0.0;
      set_parameter(net, idx, saved + h);
      const double plus = batch_loss_and_kink(&kink_plus);
      set_parameter(net, idx, saved - h);
      const double minus = batch_loss_and_kink(&kink_minus);
      set_parameter(net, idx, saved);
      if (std::min(kink_plus, kink_minus) < 1e-6) continue;  // rectifier kink nearby

      const double fd = (plus - minus) / (2.0 * h);
      const double analytic = gradient_at(grads, idx);
      const double scale = std::max(std::abs(fd), std::abs(analytic));
      if (scale < 1e-6) {
        CHECK(std::abs(fd - analytic) < 1e-6);
      } else {
        CHECK(std::abs(fd - analytic) / scale < 1e-4);
      }
      ++checked;
    }
    CHECK(checked > 200);
  }
}

TEST_CASE("make_pairs labels, ties and enumeration") {
  Question q;
  q.id = "q1";
  q.options = {"yes", "no"};
  q.open_date = 0;
  q.close_date = 5;
  q.outcome_index = 0;
  const TopicVector topic = uniform_topic(3);
  const StatsProvider stats = [](const std::string& id, Day) {
    ForecasterStats s;
    s.forecaster_id = id;
    return s;
  };
  auto rec = [](const std::string& fid, std::vector<double> p) {
    ForecastRecord r;
    r.question_id = "q1";
    r.forecaster_id = fid;
    r.timestamp = 100;
    r.probabilities = std::move(p);
    return r;
  };

  SUBCASE("extreme forecasts give the high-confidence label") {
    const std::vector<ForecastRecord> records = {rec("A", {1, 0}), rec("B", {0, 1})};
    const auto pairs = make_pairs(q, records, stats, topic, 0, 3, 5);
    REQUIRE(pairs.size() == 1);
    // whichever orientation was drawn, the label follows A (brier 0 vs 2)
    const bool a_first = pairs[0].features_a.padded_probabilities[0] == 1.0;
    CHECK(pairs[0].label == (a_first ? 1 : 0));
  }

  SUBCASE("identical forecasts tie and drop") {
    const std::vector<ForecastRecord> records = {rec("A", {0.5, 0.5}), rec("B", {0.5, 0.5})};
    CHECK(make_pairs(q, records, stats, topic, 0, 3, 5).empty());
  }

  SUBCASE("four forecasters enumerate C(4,2) pairs") {
    const std::vector<ForecastRecord> records = {rec("A", {0.9, 0.1}), rec("B", {0.8, 0.2}),
                                                 rec("C", {0.7, 0.3}), rec("D", {0.6, 0.4})};
    CHECK(make_pairs(q, records, stats, topic, 0, 3, 5).size() == 6);
    CHECK(make_pairs(q, records, stats, topic, 4, 3, 5).size() == 4);  // budget cap
  }

  SUBCASE("same-forecaster revisions never pair") {
    const std::vector<ForecastRecord> records = {rec("A", {0.9, 0.1}), rec("A", {0.2, 0.8}),
                                                 rec("B", {0.7, 0.3})};
    CHECK(make_pairs(q, records, stats, topic, 0, 3, 5).size() == 2);
  }

  SUBCASE("reproducible under a fixed seed, topic shared across branches") {
    const std::vector<ForecastRecord> records = {rec("A", {0.9, 0.1}), rec("B", {0.8, 0.2}),
                                                 rec("C", {0.7, 0.3})};
    const auto p1 = make_pairs(q, records, stats, topic, 2, 9, 5);
    const auto p2 = make_pairs(q, records, stats, topic, 2, 9, 5);
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
      CHECK(p1[i].features_a.flatten() == p2[i].features_a.flatten());
      CHECK(p1[i].label == p2[i].label);
      CHECK(p1[i].features_a.topic == p1[i].features_b.topic);
    }
  }

  SUBCASE("unresolved question is an error") {
    q.outcome_index.reset();
    const std::vector<ForecastRecord> records = {rec("A", {1, 0}), rec("B", {0, 1})};
    CHECK_THROWS_AS(make_pairs(q, records, stats, topic, 0, 3, 5), DataError);
  }
}

namespace {

// Separable fixture: one side always near-certain and correct with strong
// history, the other near-uniform with weak history.
std::vector<PairExample> separable_pairs(int n, std::uint64_t seed) {
  Rng rng(seed);
  const TopicVector topic = uniform_topic(4);
  std::vector<PairExample> pairs;
  for (int i = 0; i < n; ++i) {
    ForecastRecord good, bad;
    good.probabilities = {0.9 + 0.1 * rng.uniform01(), 0.0};
    good.probabilities[1] = 1.0 - good.probabilities[0];
    good.confidence = 5;
    bad.probabilities = {0.4 + 0.2 * rng.uniform01(), 0.0};
    bad.probabilities[1] = 1.0 - bad.probabilities[0];
    bad.confidence = 2;
    ForecasterStats good_stats, bad_stats;
    good_stats.mean_past_brier = 0.1;
    good_stats.prior_forecast_count = 40;
    bad_stats.mean_past_brier = 1.2;
    bad_stats.prior_forecast_count = 2;
    const FeatureVector fg = build_features(good, good_stats, topic, 5);
    const FeatureVector fb = build_features(bad, bad_stats, topic, 5);
    if (rng.below(2) == 1) {
      pairs.emplace_back(fg, fb, 1);
    } else {
      pairs.emplace_back(fb, fg, 0);
    }
  }
  return pairs;
}

}  // namespace

TEST_CASE("train: zero learning rate leaves parameters unchanged") {
  const FeatureConfig fc{5, 4};
  const SiameseNetwork net = SiameseNetwork::init(fc, 88);
  const auto pairs = separable_pairs(64, 1);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.batch_size = 16;
  cfg.max_epochs = 3;
  cfg.seed = 5;
  const TrainResult result = train(net, pairs, pairs, cfg);
  for (std::size_t i = 0; i < parameter_count(net); i += 53)
    CHECK(get_parameter(result.net, i) == get_parameter(net, i));
}

TEST_CASE("train reaches 95% on a separable fixture within 20 epochs") {
  const FeatureConfig fc{5, 4};
  const SiameseNetwork net = SiameseNetwork::init(fc, 42);
  const auto train_pairs = separable_pairs(512, 2);
  const auto val_pairs = separable_pairs(128, 3);
  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.max_epochs = 20;
  cfg.seed = 7;
  const TrainResult result = train(net, train_pairs, val_pairs, cfg);
  CHECK(pairwise_accuracy(result.net, train_pairs) >= 0.95);
  REQUIRE_FALSE(result.history.empty());
  CHECK(result.selected_epoch >= 1);
}

TEST_CASE("train is bit-deterministic given seeds") {
  const FeatureConfig fc{5, 4};
  const SiameseNetwork net = SiameseNetwork::init(fc, 11);
  const auto pairs = separable_pairs(128, 4);
  const auto val = separable_pairs(32, 5);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.max_epochs = 5;
  cfg.seed = 3;
  const TrainResult a = train(net, pairs, val, cfg);
  const TrainResult b = train(net, pairs, val, cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    CHECK(a.history[e].train_error == b.history[e].train_error);
    CHECK(a.history[e].mean_loss == b.history[e].mean_loss);
  }
  for (std::size_t i = 0; i < parameter_count(a.net); i += 101)
    CHECK(get_parameter(a.net, i) == get_parameter(b.net, i));
}

TEST_CASE("train aborts on numerical blowup with a diagnostic") {
  const FeatureConfig fc{5, 4};
  const SiameseNetwork net = SiameseNetwork::init(fc, 21);
  const auto pairs = separable_pairs(64, 6);
  TrainConfig cfg;
  cfg.learning_rate = 1e18;
  cfg.batch_size = 16;
  cfg.max_epochs = 4;
  cfg.seed = 2;
  CHECK_THROWS_AS(train(net, pairs, pairs, cfg), NumericError);
}

TEST_CASE("pairwise_accuracy threshold conventions") {
  const SiameseNetwork zero = zero_net(FeatureConfig{5, 4});
  const auto pairs = separable_pairs(50, 8);  // topic length 4
  CHECK(pairwise_accuracy(zero, pairs) == 0.0);  // p == 0.5 counts as incorrect
  CHECK_THROWS_AS(pairwise_accuracy(zero, {}), DataError);

  // labels produced by the net itself are matched perfectly
  const FeatureConfig fc{5, 2};
  const SiameseNetwork net = SiameseNetwork::init(fc, 61);
  std::vector<PairExample> self;
  Rng rng(77);
  while (self.size() < 40) {
    PairExample pair = random_pair(rng, fc);
    const double p = net.forward(pair);
    if (p == 0.5) continue;
    self.emplace_back(pair.features_a, pair.features_b, p > 0.5 ? 1 : 0);
  }
  CHECK(pairwise_accuracy(net, self) == 1.0);
}

TEST_CASE("random net on random labels sits near one half") {
  const FeatureConfig fc{5, 3};
  const SiameseNetwork net = SiameseNetwork::init(fc, 5150);
  Rng rng(6);
  std::vector<PairExample> pairs;
  for (int i = 0; i < 10000; ++i) pairs.push_back(random_pair(rng, fc));
  const double acc = pairwise_accuracy(net, pairs);
  CHECK(acc > 0.48);
  CHECK(acc < 0.52);
}

TEST_CASE("swap-augmented accuracy is the mean of both orientations") {
  const FeatureConfig fc{5, 3};
  const SiameseNetwork net = SiameseNetwork::init(fc, 31337);
  Rng rng(41);
  std::vector<PairExample> original, swapped, augmented;
  for (int i = 0; i < 200; ++i) {
    const PairExample pair = random_pair(rng, fc);
    original.push_back(pair);
    swapped.emplace_back(pair.features_b, pair.features_a, 1 - pair.label);
  }
  augmented = original;
  augmented.insert(augmented.end(), swapped.begin(), swapped.end());
  const double a = pairwise_accuracy(net, original);
  const double b = pairwise_accuracy(net, swapped);
  CHECK(pairwise_accuracy(net, augmented) == doctest::Approx((a + b) / 2.0).epsilon(1e-12));
}

TEST_CASE("checkpoint json round trip preserves behavior") {
  const FeatureConfig fc{5, 6};
  const SiameseNetwork net = SiameseNetwork::init(fc, 404);
  TrainingMeta meta;
  meta.seed = 9;
  meta.epochs_run = 12;
  meta.selected_epoch = 7;
  meta.final_train_error = 0.125;
  meta.final_val_error = 0.25;

  const auto [loaded, loaded_meta] = checkpoint_from_json(checkpoint_to_json(net, meta));
  CHECK(loaded_meta.selected_epoch == 7);
  CHECK(loaded_meta.final_train_error == 0.125);
  CHECK(loaded.features.r_max == 5);
  CHECK(loaded.features.num_topics == 6);
  const std::size_t n = parameter_count(net);
  CHECK(parameter_count(loaded) == n);
  for (std::size_t i = 0; i < n; i += 211) CHECK(get_parameter(loaded, i) == get_parameter(net, i));

  Rng rng(8);
  for (int i = 0; i < 5; ++i) {
    const PairExample pair = random_pair(rng, fc);
    CHECK(net.forward(pair) == loaded.forward(pair));
  }
}
