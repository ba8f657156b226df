#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "crowdrank/errors.hpp"
#include "crowdrank/topics.hpp"

using namespace crowdrank;

namespace {

// Two document groups with disjoint vocabularies; forces near-one-hot
// topic proportions under any sensible 2-topic fit.
std::vector<std::vector<std::string>> separable_corpus() {
  std::vector<std::vector<std::string>> docs;
  const std::vector<std::string> group1 = {"kremlin", "moscow", "sanction", "pipeline", "ruble"};
  const std::vector<std::string> group2 = {"tariff", "peso", "election", "senate", "ballot"};
  for (int d = 0; d < 8; ++d) {
    std::vector<std::string> doc;
    const auto& words = (d % 2 == 0) ? group1 : group2;
    for (int i = 0; i < 30; ++i) doc.push_back(words[(d + i * 7) % words.size()]);
    docs.push_back(std::move(doc));
  }
  return docs;
}

double max_component(const std::vector<double>& v) {
  return *std::max_element(v.begin(), v.end());
}

}  // namespace

TEST_CASE("tokenize strips stopwords, digits and short tokens") {
  CHECK(tokenize("Will Putin win?") == std::vector<std::string>{"putin", "win"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("THE the The").empty());
  CHECK(tokenize("x2 2x a1b2c").empty());  // digits split; leftovers too short
  CHECK(tokenize("Ukraine-Russia border!") ==
        std::vector<std::string>{"ukraine", "russia", "border"});
}

TEST_CASE("tokenize matches a hand-applied rule trace on a 40-word question") {
  const std::string text =
      "Before 30 June 2024, will the central bank of Ruritania raise its benchmark "
      "interest rate above 7%, and will at least 2 coalition parties formally object? "
      "The question resolves early if a snap election is called, or if the finance "
      "minister resigns before the vote.";
  // hand trace: lowercase, split on non-letters, drop stopwords (before,
  // will, the, of, its, above, and, at, if, a, is, or) and tokens under 2
  const std::vector<std::string> expected = {
      "june",     "central",  "bank",    "ruritania", "raise",   "benchmark",
      "interest", "rate",     "least",   "coalition", "parties", "formally",
      "object",   "question", "resolves", "early",    "snap",    "election",
      "called",   "finance",  "minister", "resigns",  "vote"};
  CHECK(tokenize(text) == expected);
}

TEST_CASE("gibbs_weight reproduces the full-conditional by hand") {
  // (n_wk + beta) / (n_k + M*beta) * (n_dk + alpha) with
  // n_wk=2, n_k=10, M=5, beta=0.01, n_dk=3, alpha=1 -> (2.01/10.05)*4
  CHECK(gibbs_weight(2, 10, 5, 0.01, 3, 1.0) == doctest::Approx((2.01 / 10.05) * 4.0).epsilon(1e-15));
}

TEST_CASE("fit_lda single document single topic") {
  const LdaFit fit = fit_lda({{"alpha", "beta", "alpha"}}, 1, 1.0, 0.01, 10, 42);
  CHECK(fit.model.topic_counts[0] == 3);
  REQUIRE(fit.doc_topics.size() == 1);
  CHECK(fit.doc_topics[0].proportions == std::vector<double>{1.0});
  // word_topic rows sum to 1
  double row_sum = 0.0;
  for (std::size_t w = 0; w < fit.model.vocab_size(); ++w)
    row_sum += fit.model.word_given_topic(0, static_cast<int>(w));
  CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("fit_lda rejects an empty corpus") {
  CHECK_THROWS_WITH_AS(fit_lda({{}, {}}, 2, 1.0, 0.01, 5, 1), "empty corpus", DataError);
}

TEST_CASE("fit_lda separates disjoint vocabulary groups") {
  const auto docs = separable_corpus();
  const LdaFit fit = fit_lda(docs, 2, 1.0, 0.01, 500, 11);

  double mean_max = 0.0;
  for (const auto& tv : fit.doc_topics) {
    CHECK(tv.proportions.size() == 2);
    double sum = 0.0;
    for (const double p : tv.proportions) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    mean_max += max_component(tv.proportions);
  }
  mean_max /= static_cast<double>(fit.doc_topics.size());
  CHECK(mean_max >= 0.9);

  // held-out fold-in lands on the right topic
  const std::vector<std::string> held_out = {"kremlin", "ruble", "moscow", "kremlin", "pipeline",
                                             "sanction", "ruble", "moscow", "kremlin", "pipeline"};
  const TopicVector tv = topic_vector(fit.model, held_out, 100, 5);
  CHECK(max_component(tv.proportions) >= 0.9);
  // same dominant topic as the training documents of group 1
  const auto dominant = [](const std::vector<double>& v) {
    return std::max_element(v.begin(), v.end()) - v.begin();
  };
  CHECK(dominant(tv.proportions) == dominant(fit.doc_topics[0].proportions));
}

TEST_CASE("fit_lda is deterministic given a seed") {
  const auto docs = separable_corpus();
  const LdaFit a = fit_lda(docs, 2, 1.0, 0.01, 50, 99);
  const LdaFit b = fit_lda(docs, 2, 1.0, 0.01, 50, 99);
  CHECK(a.model.word_topic_counts == b.model.word_topic_counts);
  CHECK(a.model.topic_counts == b.model.topic_counts);
  for (std::size_t d = 0; d < a.doc_topics.size(); ++d)
    CHECK(a.doc_topics[d].proportions == b.doc_topics[d].proportions);

  // before convergence, a different seed leaves different count tables
  const LdaFit c1 = fit_lda(docs, 2, 1.0, 0.01, 1, 100);
  const LdaFit c2 = fit_lda(docs, 2, 1.0, 0.01, 1, 101);
  CHECK(c1.model.word_topic_counts != c2.model.word_topic_counts);
}

TEST_CASE("count tables stay consistent after every sweep") {
  const auto docs = separable_corpus();
  int checked = 0;
  fit_lda(docs, 3, 1.0, 0.01, 25, 7, [&checked](const GibbsState& state, int) {
    CHECK(state.counts_consistent());
    ++checked;
  });
  CHECK(checked == 25);
}

TEST_CASE("topic_vector fallbacks") {
  const LdaFit fit = fit_lda(separable_corpus(), 2, 1.0, 0.01, 30, 3);
  const TopicVector unknown = topic_vector(fit.model, {"zzzunseen", "qqq"}, 50, 1);
  CHECK(unknown.proportions == std::vector<double>{0.5, 0.5});
  const TopicVector empty = topic_vector(fit.model, {}, 50, 1);
  CHECK(empty.proportions == std::vector<double>{0.5, 0.5});
}

TEST_CASE("lda model json round trip") {
  const LdaFit fit = fit_lda(separable_corpus(), 2, 1.5, 0.02, 20, 8);
  const LdaModel loaded = LdaModel::from_json_string(fit.model.to_json_string());
  CHECK(loaded.num_topics == fit.model.num_topics);
  CHECK(loaded.vocabulary == fit.model.vocabulary);
  CHECK(loaded.word_topic_counts == fit.model.word_topic_counts);
  CHECK(loaded.topic_counts == fit.model.topic_counts);
  CHECK(loaded.alpha == fit.model.alpha);
  CHECK(loaded.beta == fit.model.beta);
  CHECK(loaded.seed == fit.model.seed);

  // fold-in through the reloaded model is identical
  const auto before = topic_vector(fit.model, {"kremlin", "moscow"}, 40, 9).proportions;
  const auto after = topic_vector(loaded, {"kremlin", "moscow"}, 40, 9).proportions;
  CHECK(before == after);
}

TEST_CASE("top_words ranks by word-given-topic") {
  const LdaFit fit = fit_lda(separable_corpus(), 2, 1.0, 0.01, 200, 21);
  for (int k = 0; k < 2; ++k) {
    const auto top = fit.model.top_words(k, 5);
    REQUIRE(top.size() == 5);
    for (std::size_t i = 1; i < top.size(); ++i) CHECK(top[i - 1].second >= top[i].second);
    // each topic's top words come from one group
    const std::set<std::string> g1 = {"kremlin", "moscow", "sanction", "pipeline", "ruble"};
    const bool all_g1 = std::all_of(top.begin(), top.end(),
                                    [&g1](const auto& p) { return g1.count(p.first) > 0; });
    const bool none_g1 = std::none_of(top.begin(), top.end(),
                                      [&g1](const auto& p) { return g1.count(p.first) > 0; });
    CHECK((all_g1 || none_g1));
  }
}
