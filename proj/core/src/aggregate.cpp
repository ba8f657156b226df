#include "crowdrank/aggregate.hpp"

#include <algorithm>
#include <cmath>

#include "crowdrank/errors.hpp"
#include "crowdrank/mathutil.hpp"
#include "crowdrank/rng.hpp"

namespace crowdrank {

std::size_t CrowdWeights::selected_count() const {
  std::size_t n = 0;
  for (const auto& [id, w] : weights) n += (w == 1);
  return n;
}

bool CrowdWeights::selected(const std::string& forecaster_id) const {
  const auto it = weights.find(forecaster_id);
  return it != weights.end() && it->second == 1;
}

namespace {

std::size_t cutoff_count(std::size_t n, double cutoff_percentile) {
  // Epsilon guards against n*pct/100 landing a hair above an exact integer.
  const double raw = static_cast<double>(n) * cutoff_percentile / 100.0;
  const auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

CrowdWeights weights_from_order(std::span<const std::string> order, double cutoff_percentile) {
  CrowdWeights w;
  w.cutoff_percentile = cutoff_percentile;
  const std::size_t keep = cutoff_count(order.size(), cutoff_percentile);
  for (std::size_t i = 0; i < order.size(); ++i) w.weights[order[i]] = i < keep ? 1 : 0;
  return w;
}

}  // namespace

CrowdWeights select_top(const Ranking& ranking, double cutoff_percentile) {
  if (!(cutoff_percentile > 0.0) || cutoff_percentile > 100.0)
    throw DataError("select_top: cutoff percentile must be in (0, 100]");
  if (ranking.order.empty()) throw DataError("select_top: empty ranking");
  return weights_from_order(ranking.order, cutoff_percentile);
}

std::optional<std::vector<double>> crowd_forecast(const Question& question,
                                                  std::span<const ForecastRecord> records,
                                                  const CrowdWeights& w, Timestamp t) {
  const std::vector<ForecastRecord> windowed = in_window(question, records);
  const auto latest = latest_per_forecaster(question, windowed, t);

  std::vector<double> sum(static_cast<std::size_t>(question.option_count()), 0.0);
  std::size_t members = 0;
  for (const auto& [id, rec] : latest) {
    if (!w.selected(id)) continue;
    if (rec.probabilities.size() != sum.size())
      throw DataError("crowd_forecast: forecast by " + id + " has " +
                      std::to_string(rec.probabilities.size()) + " options, question " +
                      question.id + " has " + std::to_string(sum.size()));
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += rec.probabilities[k];
    ++members;
  }
  if (members == 0) return std::nullopt;
  for (double& v : sum) v /= static_cast<double>(members);
  return sum;
}

double brier(std::span<const double> forecast, int outcome_index) {
  if (outcome_index < 0 || outcome_index >= static_cast<int>(forecast.size()))
    throw DataError("brier: outcome index out of range");
  double score = 0.0;
  for (std::size_t j = 0; j < forecast.size(); ++j) {
    const double o = (static_cast<int>(j) == outcome_index) ? 1.0 : 0.0;
    score += (forecast[j] - o) * (forecast[j] - o);
  }
  return score;
}

double ordered_brier(std::span<const double> forecast, int outcome_index) {
  const int r = static_cast<int>(forecast.size());
  if (r < 2) throw DataError("ordered_brier: need at least 2 options");
  if (outcome_index < 0 || outcome_index >= r)
    throw DataError("ordered_brier: outcome index out of range");

  double total = 0.0;
  for (int split = 1; split <= r - 1; ++split) {
    double below = 0.0, above = 0.0;  // summed directly so r = 2 reduces to brier exactly
    for (int j = 0; j < r; ++j) (j < split ? below : above) += forecast[j];
    const double pair[2] = {below, above};
    total += brier(pair, outcome_index < split ? 0 : 1);
  }
  return total / static_cast<double>(r - 1);
}

double question_brier(const Question& question, std::span<const double> forecast) {
  if (!question.resolved()) throw DataError("question_brier: question " + question.id + " unresolved");
  if (static_cast<int>(forecast.size()) != question.option_count())
    throw DataError("question_brier: forecast length mismatch for " + question.id);
  return question.is_ordered ? ordered_brier(forecast, *question.outcome_index)
                             : brier(forecast, *question.outcome_index);
}

double mdb(const Question& question,
           std::span<const std::pair<Day, std::vector<double>>> daily_forecasts) {
  if (daily_forecasts.empty())
    throw DataError("mdb: no scoreable days for question " + question.id);
  double sum = 0.0;
  for (const auto& [day, forecast] : daily_forecasts) sum += question_brier(question, forecast);
  return sum / static_cast<double>(daily_forecasts.size());
}

double mmdb(std::span<const double> mdbs) {
  if (mdbs.empty()) throw DataError("mmdb: empty report");
  return mean(mdbs);
}

CrowdWeights weights_from_ranked_order(std::span<const std::string> order,
                                       double cutoff_percentile) {
  if (!(cutoff_percentile > 0.0) || cutoff_percentile > 100.0)
    throw DataError("weights_from_ranked_order: cutoff percentile must be in (0, 100]");
  if (order.empty()) throw DataError("weights_from_ranked_order: empty order");
  return weights_from_order(order, cutoff_percentile);
}

std::vector<std::string> baseline_order(std::span<const std::string> candidates,
                                        const StatsProvider& stats, Day as_of,
                                        std::uint64_t seed) {
  if (candidates.empty()) throw DataError("baseline_order: no candidates");

  struct Scored {
    std::string id;
    double score = 0.0;
    bool cold = false;
  };
  std::vector<Scored> scored;
  scored.reserve(candidates.size());
  for (const auto& id : candidates) {
    const ForecasterStats s = stats(id, as_of);
    scored.push_back({id, s.mean_past_brier, s.prior_forecast_count == 0});
  }

  // Random priority implements both the seeded tie-break among equal past
  // scores and the uniform ordering of cold-start forecasters.
  Rng rng(seed);
  std::vector<double> priority(scored.size());
  for (double& p : priority) p = rng.uniform01();
  std::vector<std::size_t> idx(scored.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scored[a].cold != scored[b].cold) return scored[b].cold;
    if (scored[a].score != scored[b].score) return scored[a].score < scored[b].score;
    return priority[a] < priority[b];
  });

  std::vector<std::string> order;
  order.reserve(idx.size());
  for (const std::size_t i : idx) order.push_back(scored[i].id);
  return order;
}

CrowdWeights baseline_weights(const Archive& history, const Question& question,
                              std::span<const std::string> candidates, double cutoff_percentile,
                              Day as_of, std::uint64_t seed) {
  (void)question;
  const StatsProvider stats = [&history](const std::string& id, Day day) {
    return forecaster_stats(id, history, day);
  };
  return weights_from_ranked_order(baseline_order(candidates, stats, as_of, seed),
                                   cutoff_percentile);
}

BrierReport make_report(const std::map<std::string, std::vector<std::pair<Day, double>>>& daily_scores) {
  BrierReport report;
  std::vector<double> mdbs;
  for (const auto& [qid, days] : daily_scores) {
    if (days.empty()) continue;
    report.per_question[qid] = days;
    double sum = 0.0;
    for (const auto& [day, score] : days) sum += score;
    const double m = sum / static_cast<double>(days.size());
    report.mdb[qid] = m;
    mdbs.push_back(m);
  }
  if (mdbs.empty()) throw DataError("make_report: no scored questions");
  report.mmdb = mmdb(mdbs);
  return report;
}

}  // namespace crowdrank
