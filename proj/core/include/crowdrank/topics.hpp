#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "crowdrank/rng.hpp"

namespace crowdrank {

// Lowercases, strips punctuation and digits, splits on whitespace, removes
// bundled English stopwords and tokens shorter than 2 characters.
std::vector<std::string> tokenize(std::string_view text);

bool is_stopword(std::string_view token);

struct TopicVector {
  std::vector<double> proportions;  // on the T-simplex
};

// Fitted topic model. The count tables are the canonical state; p(w|t) is
// derived as (n_wk + beta) / (n_k + M*beta).
struct LdaModel {
  int num_topics = 0;
  std::vector<std::string> vocabulary;                   // sorted, index = word id
  std::vector<std::vector<std::int64_t>> word_topic_counts;  // [T][M]
  std::vector<std::int64_t> topic_counts;                // [T]
  double alpha = 1.0;
  double beta = 0.01;
  std::uint64_t seed = 0;

  std::size_t vocab_size() const { return vocabulary.size(); }
  double word_given_topic(int topic, int word) const;
  std::vector<std::vector<double>> word_topic() const;  // normalized T x M rows
  std::vector<std::pair<std::string, double>> top_words(int topic, std::size_t k) const;
  int word_id(std::string_view word) const;  // -1 if unknown

  std::string to_json_string() const;
  static LdaModel from_json_string(const std::string& text);
};

// Unnormalized collapsed-Gibbs full conditional
//   P(z = k | .) proportional to (n_wk + beta) / (n_k + M*beta) * (n_dk + alpha)
double gibbs_weight(std::int64_t n_wk, std::int64_t n_k, std::size_t vocab_size, double beta,
                    std::int64_t n_dk, double alpha);

// Collapsed Gibbs sampler state over a fixed corpus of word-id documents.
class GibbsState {
 public:
  GibbsState(std::vector<std::vector<int>> documents, int num_topics, std::size_t vocab_size,
             double alpha, double beta, std::uint64_t seed);

  void sweep();  // one full pass over every token
  int sweeps_done() const { return sweeps_; }

  // Count tables recomputed from assignments must match the incremental
  // tables after every sweep.
  bool counts_consistent() const;

  std::vector<double> doc_proportions(std::size_t doc) const;  // fraction per topic
  const std::vector<std::vector<std::int64_t>>& word_topic_counts() const { return n_wk_; }
  const std::vector<std::int64_t>& topic_counts() const { return n_k_; }

 private:
  std::vector<std::vector<int>> docs_;
  std::vector<std::vector<int>> z_;  // per-token topic assignments
  std::vector<std::vector<std::int64_t>> n_wk_;
  std::vector<std::vector<std::int64_t>> n_dk_;
  std::vector<std::int64_t> n_k_;
  int num_topics_;
  std::size_t vocab_size_;
  double alpha_, beta_;
  Rng rng_;
  int sweeps_ = 0;
};

struct LdaFit {
  LdaModel model;
  std::vector<TopicVector> doc_topics;  // realized proportions per training document
};

using SweepObserver = std::function<void(const GibbsState&, int sweep)>;

// Collapsed Gibbs for `iterations` full sweeps; deterministic given seed.
// Vocabulary is the sorted set of tokens across documents. Throws DataError
// when every document is empty.
LdaFit fit_lda(const std::vector<std::vector<std::string>>& documents, int num_topics,
               double alpha, double beta, int iterations, std::uint64_t seed,
               const SweepObserver& observer = {});

// Folds an unseen document in with p(w|t) held fixed and returns the
// fraction of tokens assigned to each topic. Unknown tokens are skipped;
// with no known tokens the vector is uniform.
TopicVector topic_vector(const LdaModel& model, const std::vector<std::string>& tokens,
                         int fold_in_iterations, std::uint64_t seed);

}  // namespace crowdrank
