#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crowdrank/corpus.hpp"
#include "crowdrank/tournament.hpp"

namespace crowdrank {

struct IntRange {
  int lo = 1;
  int hi = 1;
};

struct SynthConfig {
  int n_forecasters = 20;
  int n_questions = 40;
  int n_topics = 4;
  IntRange options_range{2, 5};
  double skill_spread = 0.35;  // std of per-topic skill around 0.5
  double noise = 0.05;         // forecast jitter
  IntRange days_open_range{4, 10};
  IntRange revisions_range{1, 3};
  std::uint64_t seed = 7;
};

// Generated dataset with its latent ground truth. Questions carry synthetic
// per-topic vocabulary text so the topic-model stage has signal to find.
struct SynthData {
  std::vector<Question> questions;
  std::vector<ForecastRecord> forecasts;
  std::vector<std::string> forecaster_ids;
  std::vector<std::vector<double>> topic_skills;     // [forecaster][topic], in [0,1]
  std::vector<std::vector<double>> question_topics;  // [question][topic] mixture

  // Mean per-topic skill, the forecaster-level summary of the skill table.
  std::vector<double> mean_skills() const;
  // skill . mixture for one question: the latent quality of each
  // forecaster's signal on that question.
  std::vector<double> question_alignments(std::size_t question_index) const;
};

SynthData generate(const SynthConfig& cfg);

// Same generator with the skill table pinned by the caller.
SynthData generate_with_skills(const SynthConfig& cfg,
                               std::vector<std::vector<double>> topic_skills);

// Spearman correlation between latent skill (higher is better) and the
// induced ranking (rank 1 is best). +1 when the ranking matches skill order.
double skill_rank_agreement(std::span<const double> latent_skills,
                            std::span<const std::string> forecaster_ids, const Ranking& ranking);

}  // namespace crowdrank
