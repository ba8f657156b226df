#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "crowdrank/corpus.hpp"
#include "crowdrank/ranker_net.hpp"

namespace crowdrank {

// Pairwise win counts. Stored in half-win units (one evaluation awards 2 to
// the winner, or 1 to each side on a p == 0.5 verdict) so ties stay
// integral; wins() reports whole wins.
struct WinMatrix {
  std::vector<std::string> forecaster_ids;
  std::vector<std::vector<std::int64_t>> half_wins;

  std::size_t size() const { return forecaster_ids.size(); }
  double wins(std::size_t i, std::size_t j) const { return half_wins[i][j] / 2.0; }
  double total_wins() const;
};

// Complete weighted tournament: weights[i][j] + weights[j][i] == 1 off the
// diagonal.
struct TournamentMatrix {
  std::vector<std::string> forecaster_ids;
  std::vector<std::vector<double>> weights;

  std::size_t size() const { return forecaster_ids.size(); }
};

struct Ranking {
  std::vector<std::string> order;              // rank 1 first (best)
  std::unordered_map<std::string, int> sigma;  // id -> 1-based rank

  static Ranking from_order(std::vector<std::string> order);
};

using FeaturesProvider = std::function<FeatureVector(const ForecastRecord&)>;

// Evaluates every unordered pair in both orientations and credits the
// favored side; p == 0.5 splits the evaluation. Requires >= 2 forecasters.
WinMatrix run_tournament(const SiameseNetwork& net, const Question& question,
                         const std::map<std::string, ForecastRecord>& forecasts,
                         const FeaturesProvider& features_provider);

// weights[i][j] = wins[i][j] / (wins[i][j] + wins[j][i]); unplayed pairs
// fall back to 0.5 each way.
TournamentMatrix normalize(const WinMatrix& m);

std::vector<double> weighted_in_degrees(const TournamentMatrix& t);

// Sorts vertices by increasing weighted in-degree (fewest losses first);
// equal in-degrees are permuted uniformly at random from the seed.
Ranking incr_indeg(const TournamentMatrix& t, std::uint64_t seed);

// Total weight of edges pointing from lower- to higher-ranked vertices.
double backedge_weight(const TournamentMatrix& t, const Ranking& r);

}  // namespace crowdrank
