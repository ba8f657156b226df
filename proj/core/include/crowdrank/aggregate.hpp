#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crowdrank/corpus.hpp"
#include "crowdrank/tournament.hpp"

namespace crowdrank {

// Binary inclusion weights: the top ceil(n * pct / 100) ranked forecasters
// get weight 1, everyone else 0.
struct CrowdWeights {
  std::map<std::string, int> weights;
  double cutoff_percentile = 100.0;

  std::size_t selected_count() const;
  bool selected(const std::string& forecaster_id) const;
};

CrowdWeights select_top(const Ranking& ranking, double cutoff_percentile);

// Weighted arithmetic mean of the selected forecasters' latest in-window
// forecasts at time t; nullopt when no selected forecaster has one (the
// day is skipped in scoring).
std::optional<std::vector<double>> crowd_forecast(const Question& question,
                                                  std::span<const ForecastRecord> records,
                                                  const CrowdWeights& w, Timestamp t);

// Sum of squared deviations from the one-hot outcome; range [0, 2].
double brier(std::span<const double> forecast, int outcome_index);

// Ordered-scale adaptation: mean plain Brier over the r-1 cumulative binary
// splits, so probability mass near the true category earns more credit.
// Coincides with brier() at r = 2.
double ordered_brier(std::span<const double> forecast, int outcome_index);

// Dispatches on the question's ordered flag; requires a resolved question.
double question_brier(const Question& question, std::span<const double> forecast);

// Mean daily Brier over the supplied (day, forecast) scores.
double mdb(const Question& question,
           std::span<const std::pair<Day, std::vector<double>>> daily_forecasts);

double mmdb(std::span<const double> mdbs);

// Binary weights over an already-ranked candidate list (best first).
CrowdWeights weights_from_ranked_order(std::span<const std::string> order,
                                       double cutoff_percentile);

// Candidates ordered by their own mean daily Brier over questions resolved
// before as_of (ascending); forecasters with no history rank after all
// scored ones; ties are shuffled from the seed.
std::vector<std::string> baseline_order(std::span<const std::string> candidates,
                                        const StatsProvider& stats, Day as_of,
                                        std::uint64_t seed);

// Past-performance selection over the question's candidate forecasters.
CrowdWeights baseline_weights(const Archive& history, const Question& question,
                              std::span<const std::string> candidates, double cutoff_percentile,
                              Day as_of, std::uint64_t seed);

struct BrierReport {
  std::map<std::string, std::vector<std::pair<Day, double>>> per_question;
  std::map<std::string, double> mdb;
  double mmdb = 0.0;
};

BrierReport make_report(const std::map<std::string, std::vector<std::pair<Day, double>>>& daily_scores);

}  // namespace crowdrank
