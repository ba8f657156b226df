#include <benchmark/benchmark.h>

#include <vector>

#include "crowdrank/aggregate.hpp"
#include "crowdrank/ranker_net.hpp"
#include "crowdrank/rng.hpp"
#include "crowdrank/synthcrowd.hpp"
#include "crowdrank/topics.hpp"
#include "crowdrank/tournament.hpp"

using namespace crowdrank;

namespace {

PairExample sample_pair(Rng& rng, const FeatureConfig& fc) {
  std::vector<double> topic(fc.num_topics);
  double sum = 0.0;
  for (double& v : topic) {
    v = rng.uniform01();
    sum += v;
  }
  for (double& v : topic) v /= sum;
  auto feature = [&]() {
    ForecastRecord rec;
    const double p = rng.uniform01();
    rec.probabilities = {p, 1.0 - p};
    rec.confidence = 1 + static_cast<int>(rng.below(5));
    ForecasterStats stats;
    stats.mean_past_brier = 2.0 * rng.uniform01();
    stats.prior_forecast_count = static_cast<std::int64_t>(rng.below(40));
    return build_features(rec, stats, TopicVector{topic}, fc.r_max);
  };
  return PairExample(feature(), feature(), static_cast<int>(rng.below(2)));
}

void BM_Forward(benchmark::State& state) {
  const FeatureConfig fc{5, 6};
  const SiameseNetwork net = SiameseNetwork::init(fc, 1);
  Rng rng(2);
  const PairExample pair = sample_pair(rng, fc);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(pair));
}
BENCHMARK(BM_Forward);

void BM_GradientBatch(benchmark::State& state) {
  const FeatureConfig fc{5, 6};
  const SiameseNetwork net = SiameseNetwork::init(fc, 1);
  Rng rng(3);
  std::vector<PairExample> batch;
  for (int i = 0; i < state.range(0); ++i) batch.push_back(sample_pair(rng, fc));
  for (auto _ : state) benchmark::DoNotOptimize(gradient(net, batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GradientBatch)->Arg(32)->Arg(512);

void BM_GibbsSweep(benchmark::State& state) {
  Rng rng(4);
  const int vocab = 200, topics = 6;
  std::vector<std::vector<int>> docs(64);
  for (auto& doc : docs) {
    doc.resize(60);
    for (int& w : doc) w = static_cast<int>(rng.below(vocab));
  }
  GibbsState gibbs(docs, topics, vocab, 50.0 / topics, 0.01, 5);
  for (auto _ : state) gibbs.sweep();
}
BENCHMARK(BM_GibbsSweep);

void BM_IncrIndeg(benchmark::State& state) {
  Rng rng(6);
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  TournamentMatrix t;
  for (std::size_t i = 0; i < n; ++i) t.forecaster_ids.push_back("f" + std::to_string(i));
  t.weights.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double w = rng.uniform01();
      t.weights[i][j] = w;
      t.weights[j][i] = 1.0 - w;
    }
  for (auto _ : state) benchmark::DoNotOptimize(incr_indeg(t, 9));
}
BENCHMARK(BM_IncrIndeg)->Arg(20)->Arg(200);

void BM_OrderedBrier(benchmark::State& state) {
  const std::vector<double> forecast = {0.1, 0.2, 0.3, 0.25, 0.15};
  for (auto _ : state) benchmark::DoNotOptimize(ordered_brier(forecast, 2));
}
BENCHMARK(BM_OrderedBrier);

void BM_SynthGenerate(benchmark::State& state) {
  SynthConfig cfg;
  cfg.n_questions = 20;
  cfg.n_forecasters = 10;
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate(cfg));
    ++cfg.seed;
  }
}
BENCHMARK(BM_SynthGenerate);

}  // namespace

BENCHMARK_MAIN();
