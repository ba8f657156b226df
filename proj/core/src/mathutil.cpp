#include "crowdrank/mathutil.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crowdrank/errors.hpp"

namespace crowdrank {

double mean(std::span<const double> values) {
  if (values.empty()) throw DataError("mean of empty range");
  double sum = 0.0;
  for (const double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

std::vector<double> rank_data(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("spearman: size mismatch");
  if (a.size() < 2) throw DataError("spearman: need at least 2 observations");
  const std::vector<double> ra = rank_data(a);
  const std::vector<double> rb = rank_data(b);
  const double ma = mean(ra), mb = mean(rb);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - ma, db = rb[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

bool on_simplex(std::span<const double> v, double tol) {
  double sum = 0.0;
  for (const double x : v) {
    if (!(x >= 0.0)) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= tol;
}

}  // namespace crowdrank
