#include "crowdrank/synthcrowd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "crowdrank/errors.hpp"
#include "crowdrank/mathutil.hpp"
#include "crowdrank/rng.hpp"

namespace crowdrank {

namespace {

constexpr int kWordsPerTopic = 24;
constexpr int kSharedWords = 8;
constexpr double kSharedWordProb = 0.1;
constexpr Day kBaseDay = 19358;  // 2023-01-01

// Purely alphabetic tokens; the tokenizer strips digits.
std::string topic_word(int topic, int i) {
  std::string w;
  w.push_back(static_cast<char>('a' + topic % 26));
  w.push_back('z');
  w.push_back(static_cast<char>('a' + (i / 26) % 26));
  w.push_back(static_cast<char>('a' + i % 26));
  return w;
}

std::string shared_word(int i) {
  std::string w = "zz";
  w.push_back(static_cast<char>('a' + (i / 26) % 26));
  w.push_back(static_cast<char>('a' + i % 26));
  return w;
}

int draw_range(Rng& rng, const IntRange& range) {
  return range.lo + static_cast<int>(rng.below(static_cast<std::size_t>(range.hi - range.lo + 1)));
}

int draw_categorical(Rng& rng, std::span<const double> weights) {
  double total = 0.0;
  for (const double w : weights) total += w;
  const double u = rng.uniform01() * total;
  double acc = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    acc += weights[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(weights.size()) - 1;
}

std::string sample_word(Rng& rng, std::span<const double> theta) {
  if (rng.uniform01() < kSharedWordProb)
    return shared_word(static_cast<int>(rng.below(kSharedWords)));
  const int topic = draw_categorical(rng, theta);
  return topic_word(topic, static_cast<int>(rng.below(kWordsPerTopic)));
}

std::string sample_text(Rng& rng, std::span<const double> theta, int n_words) {
  std::string text;
  for (int i = 0; i < n_words; ++i) {
    if (i) text.push_back(' ');
    text += sample_word(rng, theta);
  }
  return text;
}

void validate(const SynthConfig& cfg) {
  if (cfg.n_forecasters < 1 || cfg.n_questions < 1 || cfg.n_topics < 1)
    throw DataError("synth config: counts must be >= 1");
  if (cfg.options_range.lo < 2 || cfg.options_range.hi < cfg.options_range.lo)
    throw DataError("synth config: options range must start at >= 2");
  if (cfg.days_open_range.lo < 1 || cfg.days_open_range.hi < cfg.days_open_range.lo ||
      cfg.revisions_range.lo < 1 || cfg.revisions_range.hi < cfg.revisions_range.lo)
    throw DataError("synth config: empty range");
  if (cfg.skill_spread < 0.0 || cfg.noise < 0.0)
    throw DataError("synth config: negative spread or noise");
}

}  // namespace

std::vector<double> SynthData::mean_skills() const {
  std::vector<double> means(topic_skills.size(), 0.0);
  for (std::size_t f = 0; f < topic_skills.size(); ++f) means[f] = mean(topic_skills[f]);
  return means;
}

std::vector<double> SynthData::question_alignments(std::size_t question_index) const {
  const auto& theta = question_topics.at(question_index);
  std::vector<double> aligns(topic_skills.size(), 0.0);
  for (std::size_t f = 0; f < topic_skills.size(); ++f)
    for (std::size_t k = 0; k < theta.size(); ++k) aligns[f] += topic_skills[f][k] * theta[k];
  return aligns;
}

SynthData generate(const SynthConfig& cfg) {
  validate(cfg);
  Rng skill_rng(Rng::mix(cfg.seed, 0x511ULL));
  std::vector<std::vector<double>> skills(cfg.n_forecasters,
                                          std::vector<double>(cfg.n_topics, 0.5));
  for (auto& row : skills)
    for (double& s : row) s = std::clamp(0.5 + cfg.skill_spread * skill_rng.normal(), 0.0, 1.0);
  return generate_with_skills(cfg, std::move(skills));
}

SynthData generate_with_skills(const SynthConfig& cfg,
                               std::vector<std::vector<double>> topic_skills) {
  validate(cfg);
  if (topic_skills.size() != static_cast<std::size_t>(cfg.n_forecasters))
    throw DataError("synth: skill table size mismatch");
  for (const auto& row : topic_skills)
    if (row.size() != static_cast<std::size_t>(cfg.n_topics))
      throw DataError("synth: skill table topic count mismatch");

  SynthData data;
  data.topic_skills = std::move(topic_skills);
  Rng rng(Rng::mix(cfg.seed, 0xDA7AULL));

  char buf[32];
  for (int f = 0; f < cfg.n_forecasters; ++f) {
    std::snprintf(buf, sizeof(buf), "f%03d", f);
    data.forecaster_ids.emplace_back(buf);
  }

  for (int qi = 0; qi < cfg.n_questions; ++qi) {
    Question q;
    std::snprintf(buf, sizeof(buf), "q%03d", qi);
    q.id = buf;

    const int r = draw_range(rng, cfg.options_range);
    for (int j = 0; j < r; ++j) {
      std::snprintf(buf, sizeof(buf), "option %d", j + 1);
      q.options.emplace_back(buf);
    }
    q.is_ordered = rng.below(2) == 1;
    q.open_date = kBaseDay + qi * 2;  // staggered, overlapping windows
    q.close_date = q.open_date + draw_range(rng, cfg.days_open_range);

    std::vector<double> theta(cfg.n_topics, 0.0);
    const int dominant = static_cast<int>(rng.below(static_cast<std::size_t>(cfg.n_topics)));
    double total = 0.0;
    for (double& v : theta) {
      double u = rng.uniform01();
      while (u <= 0.0) u = rng.uniform01();
      v = 0.25 * -std::log(u);
      total += v;
    }
    theta[dominant] += 2.0;
    total += 2.0;
    for (double& v : theta) v /= total;

    q.text = sample_text(rng, theta, 50);
    q.description = sample_text(rng, theta, 25);
    const int outcome = static_cast<int>(rng.below(static_cast<std::size_t>(r)));
    q.outcome_index = outcome;
    q.validate();

    const Timestamp window_lo = start_of_day(q.open_date);
    const auto window_len =
        static_cast<std::size_t>(end_of_day(q.close_date) - window_lo + 1);

    for (int f = 0; f < cfg.n_forecasters; ++f) {
      double align = 0.0;
      for (int k = 0; k < cfg.n_topics; ++k) align += data.topic_skills[f][k] * theta[k];
      const double blend = std::clamp(1.0 - align, 0.0, 1.0);

      const int n_rev = draw_range(rng, cfg.revisions_range);
      std::vector<Timestamp> stamps(n_rev);
      for (auto& ts : stamps) ts = window_lo + static_cast<Timestamp>(rng.below(window_len));
      std::sort(stamps.begin(), stamps.end());

      for (const Timestamp ts : stamps) {
        ForecastRecord rec;
        rec.question_id = q.id;
        rec.forecaster_id = data.forecaster_ids[f];
        rec.timestamp = ts;
        rec.probabilities.assign(r, blend / r);
        rec.probabilities[outcome] += 1.0 - blend;
        if (cfg.noise > 0.0) {
          double sum = 0.0;
          for (double& p : rec.probabilities) {
            p = std::max(0.0, p + cfg.noise * rng.normal());
            sum += p;
          }
          if (sum <= 0.0) {
            rec.probabilities.assign(r, 1.0 / r);
          } else {
            for (double& p : rec.probabilities) p /= sum;
          }
        }
        double conf_signal = align;
        if (cfg.noise > 0.0) conf_signal += 0.3 * cfg.noise * rng.normal();
        rec.confidence =
            1 + static_cast<int>(std::floor(std::clamp(conf_signal, 0.0, 0.9999) * 5.0));
        data.forecasts.push_back(std::move(rec));
      }
    }
    data.questions.push_back(std::move(q));
    data.question_topics.push_back(std::move(theta));
  }
  return data;
}

double skill_rank_agreement(std::span<const double> latent_skills,
                            std::span<const std::string> forecaster_ids, const Ranking& ranking) {
  if (latent_skills.size() != forecaster_ids.size() ||
      ranking.order.size() != forecaster_ids.size())
    throw DataError("skill_rank_agreement: size mismatch");
  std::vector<double> negated_skill(latent_skills.size());
  std::vector<double> rank(latent_skills.size());
  for (std::size_t i = 0; i < forecaster_ids.size(); ++i) {
    const auto it = ranking.sigma.find(forecaster_ids[i]);
    if (it == ranking.sigma.end())
      throw DataError("skill_rank_agreement: ranking missing " + forecaster_ids[i]);
    negated_skill[i] = -latent_skills[i];
    rank[i] = static_cast<double>(it->second);
  }
  return spearman(negated_skill, rank);
}

}  // namespace crowdrank
