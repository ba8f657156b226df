#include "crowdrank/tournament.hpp"

#include <algorithm>

#include "crowdrank/errors.hpp"
#include "crowdrank/rng.hpp"

namespace crowdrank {

double WinMatrix::total_wins() const {
  std::int64_t sum = 0;
  for (const auto& row : half_wins)
    for (const std::int64_t v : row) sum += v;
  return sum / 2.0;
}

Ranking Ranking::from_order(std::vector<std::string> order) {
  Ranking r;
  r.order = std::move(order);
  for (std::size_t i = 0; i < r.order.size(); ++i)
    r.sigma[r.order[i]] = static_cast<int>(i) + 1;
  return r;
}

WinMatrix run_tournament(const SiameseNetwork& net, const Question& question,
                         const std::map<std::string, ForecastRecord>& forecasts,
                         const FeaturesProvider& features_provider) {
  if (forecasts.size() < 2)
    throw DataError("run_tournament: question " + question.id + " has fewer than 2 forecasters");

  WinMatrix m;
  std::vector<FeatureVector> features;
  for (const auto& [id, record] : forecasts) {
    m.forecaster_ids.push_back(id);
    features.push_back(features_provider(record));
  }
  const std::size_t n = m.size();
  m.half_wins.assign(n, std::vector<std::int64_t>(n, 0));

  auto credit = [&m](std::size_t winner, std::size_t loser, double p) {
    if (p == 0.5) {
      ++m.half_wins[winner][loser];
      ++m.half_wins[loser][winner];
    } else {
      m.half_wins[winner][loser] += 2;
    }
  };

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // Both orientations: the head is not swap-symmetric.
      const double p_ij = net.forward(PairExample(features[i], features[j], 0));
      credit(p_ij > 0.5 ? i : j, p_ij > 0.5 ? j : i, p_ij);
      const double p_ji = net.forward(PairExample(features[j], features[i], 0));
      credit(p_ji > 0.5 ? j : i, p_ji > 0.5 ? i : j, p_ji);
    }
  }
  return m;
}

TournamentMatrix normalize(const WinMatrix& m) {
  TournamentMatrix t;
  t.forecaster_ids = m.forecaster_ids;
  const std::size_t n = m.size();
  t.weights.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double mij = static_cast<double>(m.half_wins[i][j]);
      const double mji = static_cast<double>(m.half_wins[j][i]);
      if (mij + mji == 0.0) {
        t.weights[i][j] = t.weights[j][i] = 0.5;
      } else {
        t.weights[i][j] = mij / (mij + mji);
        t.weights[j][i] = mji / (mij + mji);
      }
    }
  }
  return t;
}

std::vector<double> weighted_in_degrees(const TournamentMatrix& t) {
  const std::size_t n = t.size();
  std::vector<double> indeg(n, 0.0);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v)
      if (u != v) indeg[v] += t.weights[u][v];
  return indeg;
}

Ranking incr_indeg(const TournamentMatrix& t, std::uint64_t seed) {
  const std::size_t n = t.size();
  const std::vector<double> indeg = weighted_in_degrees(t);

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(),
                   [&indeg](std::size_t a, std::size_t b) { return indeg[a] < indeg[b]; });

  // Permute each group of exactly equal in-degrees uniformly at random.
  Rng rng(seed);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && indeg[idx[j + 1]] == indeg[idx[i]]) ++j;
    if (j > i) {
      std::vector<std::size_t> group(idx.begin() + i, idx.begin() + j + 1);
      rng.shuffle(group);
      std::copy(group.begin(), group.end(), idx.begin() + i);
    }
    i = j + 1;
  }

  std::vector<std::string> order;
  order.reserve(n);
  for (const std::size_t k : idx) order.push_back(t.forecaster_ids[k]);
  return Ranking::from_order(std::move(order));
}

double backedge_weight(const TournamentMatrix& t, const Ranking& r) {
  const std::size_t n = t.size();
  if (r.order.size() != n) throw DataError("backedge_weight: ranking size mismatch");
  std::vector<int> rank_of(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = r.sigma.find(t.forecaster_ids[i]);
    if (it == r.sigma.end())
      throw DataError("backedge_weight: ranking missing forecaster " + t.forecaster_ids[i]);
    rank_of[i] = it->second;
  }
  double total = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b && rank_of[a] > rank_of[b]) total += t.weights[a][b];
  return total;
}

}  // namespace crowdrank
