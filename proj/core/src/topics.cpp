#include "crowdrank/topics.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "crowdrank/errors.hpp"

namespace crowdrank {

namespace {

// Common English function words plus the modal/auxiliary verbs that dominate
// forecasting-question phrasing ("will X happen by ...").
const std::unordered_set<std::string>& stopword_set() {
  static const std::unordered_set<std::string> words = {
      "a",       "about",  "above",   "after",  "again",   "against", "all",     "am",
      "an",      "and",    "any",     "are",    "as",      "at",      "be",      "because",
      "been",    "before", "being",   "below",  "between", "both",    "but",     "by",
      "can",     "cannot", "could",   "did",    "do",      "does",    "doing",   "down",
      "during",  "each",   "few",     "for",    "from",    "further", "had",     "has",
      "have",    "having", "he",      "her",    "here",    "hers",    "herself", "him",
      "himself", "his",    "how",     "i",      "if",      "in",      "into",    "is",
      "it",      "its",    "itself",  "just",   "may",     "me",      "might",   "more",
      "most",    "must",   "my",      "myself", "no",      "nor",     "not",     "now",
      "of",      "off",    "on",      "once",   "only",    "or",      "other",   "our",
      "ours",    "out",    "over",    "own",    "same",    "shall",   "she",     "should",
      "so",      "some",   "such",    "than",   "that",    "the",     "their",   "theirs",
      "them",    "themselves", "then", "there", "these",   "they",    "this",    "those",
      "through", "to",     "too",     "under",  "until",   "up",      "upon",    "very",
      "was",     "we",     "were",    "what",   "when",    "where",   "which",   "while",
      "who",     "whom",   "why",     "with",   "would",   "will",    "you",     "your",
      "yours",   "yourself", "yourselves"};
  return words;
}

}  // namespace

bool is_stopword(std::string_view token) {
  return stopword_set().count(std::string(token)) > 0;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&]() {
    if (current.size() >= 2 && !is_stopword(current)) tokens.push_back(current);
    current.clear();
  };
  for (const char c : text) {
    const unsigned char uc = static_cast<unsigned char>(c);
    if (std::isalpha(uc)) {
      current.push_back(static_cast<char>(std::tolower(uc)));
    } else {
      flush();  // punctuation, digits and whitespace all separate tokens
    }
  }
  flush();
  return tokens;
}

double LdaModel::word_given_topic(int topic, int word) const {
  const double denom = static_cast<double>(topic_counts[topic]) +
                       static_cast<double>(vocab_size()) * beta;
  return (static_cast<double>(word_topic_counts[topic][word]) + beta) / denom;
}

std::vector<std::vector<double>> LdaModel::word_topic() const {
  std::vector<std::vector<double>> rows(num_topics);
  for (int k = 0; k < num_topics; ++k) {
    rows[k].resize(vocab_size());
    for (std::size_t w = 0; w < vocab_size(); ++w)
      rows[k][w] = word_given_topic(k, static_cast<int>(w));
  }
  return rows;
}

std::vector<std::pair<std::string, double>> LdaModel::top_words(int topic, std::size_t k) const {
  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(vocab_size());
  for (std::size_t w = 0; w < vocab_size(); ++w)
    scored.emplace_back(vocabulary[w], word_given_topic(topic, static_cast<int>(w)));
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (scored.size() > k) scored.resize(k);
  return scored;
}

int LdaModel::word_id(std::string_view word) const {
  const auto it = std::lower_bound(vocabulary.begin(), vocabulary.end(), word);
  if (it == vocabulary.end() || *it != word) return -1;
  return static_cast<int>(it - vocabulary.begin());
}

std::string LdaModel::to_json_string() const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["num_topics"] = num_topics;
  j["vocabulary"] = vocabulary;
  j["word_topic_counts"] = word_topic_counts;
  j["topic_counts"] = topic_counts;
  j["alpha"] = alpha;
  j["beta"] = beta;
  j["seed"] = seed;
  return j.dump(2);
}

LdaModel LdaModel::from_json_string(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("format_version", 0) != 1) throw DataError("lda model: unsupported format version");
  LdaModel m;
  m.num_topics = j.at("num_topics").get<int>();
  m.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
  if (!std::is_sorted(m.vocabulary.begin(), m.vocabulary.end()))
    throw DataError("lda model: vocabulary must be sorted");
  m.word_topic_counts = j.at("word_topic_counts").get<std::vector<std::vector<std::int64_t>>>();
  m.topic_counts = j.at("topic_counts").get<std::vector<std::int64_t>>();
  m.alpha = j.at("alpha").get<double>();
  m.beta = j.at("beta").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  return m;
}

double gibbs_weight(std::int64_t n_wk, std::int64_t n_k, std::size_t vocab_size, double beta,
                    std::int64_t n_dk, double alpha) {
  const double word_term = (static_cast<double>(n_wk) + beta) /
                           (static_cast<double>(n_k) + static_cast<double>(vocab_size) * beta);
  return word_term * (static_cast<double>(n_dk) + alpha);
}

GibbsState::GibbsState(std::vector<std::vector<int>> documents, int num_topics,
                       std::size_t vocab_size, double alpha, double beta, std::uint64_t seed)
    : docs_(std::move(documents)),
      num_topics_(num_topics),
      vocab_size_(vocab_size),
      alpha_(alpha),
      beta_(beta),
      rng_(seed) {
  n_wk_.assign(num_topics_, std::vector<std::int64_t>(vocab_size_, 0));
  n_dk_.assign(docs_.size(), std::vector<std::int64_t>(num_topics_, 0));
  n_k_.assign(num_topics_, 0);
  z_.resize(docs_.size());
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    z_[d].resize(docs_[d].size());
    for (std::size_t i = 0; i < docs_[d].size(); ++i) {
      const int k = static_cast<int>(rng_.below(static_cast<std::size_t>(num_topics_)));
      z_[d][i] = k;
      ++n_wk_[k][docs_[d][i]];
      ++n_dk_[d][k];
      ++n_k_[k];
    }
  }
}

void GibbsState::sweep() {
  std::vector<double> cumulative(static_cast<std::size_t>(num_topics_));
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    for (std::size_t i = 0; i < docs_[d].size(); ++i) {
      const int w = docs_[d][i];
      const int old_k = z_[d][i];
      --n_wk_[old_k][w];
      --n_dk_[d][old_k];
      --n_k_[old_k];

      double total = 0.0;
      for (int k = 0; k < num_topics_; ++k) {
        total += gibbs_weight(n_wk_[k][w], n_k_[k], vocab_size_, beta_, n_dk_[d][k], alpha_);
        cumulative[k] = total;
      }
      const double u = rng_.uniform01() * total;
      int new_k = num_topics_ - 1;
      for (int k = 0; k < num_topics_; ++k) {
        if (u < cumulative[k]) {
          new_k = k;
          break;
        }
      }
      z_[d][i] = new_k;
      ++n_wk_[new_k][w];
      ++n_dk_[d][new_k];
      ++n_k_[new_k];
    }
  }
  ++sweeps_;
}

bool GibbsState::counts_consistent() const {
  std::vector<std::vector<std::int64_t>> wk(num_topics_, std::vector<std::int64_t>(vocab_size_, 0));
  std::vector<std::vector<std::int64_t>> dk(docs_.size(), std::vector<std::int64_t>(num_topics_, 0));
  std::vector<std::int64_t> k_tot(num_topics_, 0);
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    for (std::size_t i = 0; i < docs_[d].size(); ++i) {
      const int k = z_[d][i];
      ++wk[k][docs_[d][i]];
      ++dk[d][k];
      ++k_tot[k];
    }
  }
  return wk == n_wk_ && dk == n_dk_ && k_tot == n_k_;
}

std::vector<double> GibbsState::doc_proportions(std::size_t doc) const {
  const std::size_t len = docs_[doc].size();
  std::vector<double> props(static_cast<std::size_t>(num_topics_));
  if (len == 0) {
    std::fill(props.begin(), props.end(), 1.0 / num_topics_);
    return props;
  }
  for (int k = 0; k < num_topics_; ++k)
    props[k] = static_cast<double>(n_dk_[doc][k]) / static_cast<double>(len);
  return props;
}

LdaFit fit_lda(const std::vector<std::vector<std::string>>& documents, int num_topics,
               double alpha, double beta, int iterations, std::uint64_t seed,
               const SweepObserver& observer) {
  if (num_topics < 1) throw DataError("fit_lda: num_topics must be >= 1");
  bool any_token = false;
  for (const auto& doc : documents) any_token = any_token || !doc.empty();
  if (!any_token) throw DataError("empty corpus");

  std::set<std::string> vocab_set;
  for (const auto& doc : documents)
    for (const auto& tok : doc) vocab_set.insert(tok);
  std::vector<std::string> vocabulary(vocab_set.begin(), vocab_set.end());

  std::map<std::string, int> ids;
  for (std::size_t w = 0; w < vocabulary.size(); ++w) ids[vocabulary[w]] = static_cast<int>(w);
  std::vector<std::vector<int>> docs_ids(documents.size());
  for (std::size_t d = 0; d < documents.size(); ++d) {
    docs_ids[d].reserve(documents[d].size());
    for (const auto& tok : documents[d]) docs_ids[d].push_back(ids[tok]);
  }

  GibbsState state(std::move(docs_ids), num_topics, vocabulary.size(), alpha, beta, seed);
  for (int it = 0; it < iterations; ++it) {
    state.sweep();
    if (observer) observer(state, it + 1);
  }

  LdaFit fit;
  fit.model.num_topics = num_topics;
  fit.model.vocabulary = std::move(vocabulary);
  fit.model.word_topic_counts = state.word_topic_counts();
  fit.model.topic_counts = state.topic_counts();
  fit.model.alpha = alpha;
  fit.model.beta = beta;
  fit.model.seed = seed;
  fit.doc_topics.resize(documents.size());
  for (std::size_t d = 0; d < documents.size(); ++d)
    fit.doc_topics[d].proportions = state.doc_proportions(d);
  return fit;
}

TopicVector topic_vector(const LdaModel& model, const std::vector<std::string>& tokens,
                         int fold_in_iterations, std::uint64_t seed) {
  const int T = model.num_topics;
  TopicVector tv;
  tv.proportions.assign(static_cast<std::size_t>(T), 1.0 / T);

  std::vector<int> words;
  for (const auto& tok : tokens) {
    const int w = model.word_id(tok);
    if (w >= 0) words.push_back(w);
  }
  if (words.empty()) return tv;

  Rng rng(seed);
  std::vector<int> z(words.size());
  std::vector<std::int64_t> n_dk(static_cast<std::size_t>(T), 0);
  for (std::size_t i = 0; i < words.size(); ++i) {
    z[i] = static_cast<int>(rng.below(static_cast<std::size_t>(T)));
    ++n_dk[z[i]];
  }
  std::vector<double> cumulative(static_cast<std::size_t>(T));
  for (int it = 0; it < fold_in_iterations; ++it) {
    for (std::size_t i = 0; i < words.size(); ++i) {
      --n_dk[z[i]];
      double total = 0.0;
      for (int k = 0; k < T; ++k) {
        total += model.word_given_topic(k, words[i]) *
                 (static_cast<double>(n_dk[k]) + model.alpha);
        cumulative[k] = total;
      }
      const double u = rng.uniform01() * total;
      int new_k = T - 1;
      for (int k = 0; k < T; ++k) {
        if (u < cumulative[k]) {
          new_k = k;
          break;
        }
      }
      z[i] = new_k;
      ++n_dk[new_k];
    }
  }
  for (int k = 0; k < T; ++k)
    tv.proportions[k] = static_cast<double>(n_dk[k]) / static_cast<double>(words.size());
  return tv;
}

}  // namespace crowdrank
