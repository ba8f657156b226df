#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crowdrank/corpus.hpp"
#include "crowdrank/topics.hpp"

namespace crowdrank {

inline constexpr int kBranchWidth = 32;
inline constexpr int kBranchDepth = 3;
inline constexpr int kHeadWidth = 64;
inline constexpr int kHeadDepth = 4;

struct FeatureConfig {
  int r_max = 5;       // probability vector padding length
  int num_topics = 6;  // topic vector length
  int dimension() const { return r_max + 3 + num_topics; }
};

// One branch input: zero-padded forecast, normalized confidence, past
// performance and the question's topic vector.
struct FeatureVector {
  std::vector<double> padded_probabilities;  // length r_max
  double confidence_norm = 0.0;              // (confidence - 1) / 4
  double past_brier = 0.5;
  double log_prior_count = 0.0;              // ln(1 + prior forecasts)
  std::vector<double> topic;

  std::vector<double> flatten() const;
  Eigen::VectorXd to_eigen() const;
};

FeatureVector build_features(const ForecastRecord& record, const ForecasterStats& stats,
                             const TopicVector& topic, int r_max);

// label == 1 means forecast A is strictly closer to the truth. Both sides
// must carry the same topic vector (one question per pair).
struct PairExample {
  FeatureVector features_a;
  FeatureVector features_b;
  int label = 0;

  PairExample() = default;
  PairExample(FeatureVector a, FeatureVector b, int lbl);
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

// Two weight-sharing ReLU branches feeding a ReLU head with one logistic
// output unit. Branch parameters are stored once; both branches read them.
struct SiameseNetwork {
  FeatureConfig features;
  std::vector<DenseLayer> branch;  // kBranchDepth layers, width kBranchWidth
  std::vector<DenseLayer> head;    // kHeadDepth layers, width kHeadWidth
  DenseLayer output;               // kHeadWidth -> 1

  static SiameseNetwork init(const FeatureConfig& features, std::uint64_t seed);

  Eigen::VectorXd branch_embedding(const FeatureVector& input) const;
  double forward(const PairExample& pair) const;

  // forward plus the smallest |pre-activation| seen at any rectifier, used
  // to skip kink-adjacent parameters in finite-difference checks.
  struct ForwardStats {
    double p = 0.0;
    double min_abs_preact = 0.0;
  };
  ForwardStats forward_stats(const PairExample& pair) const;

  bool finite() const;
};

// Binary cross-entropy with p clamped to [1e-12, 1 - 1e-12].
double bce_loss(double p, int label);

// Same tensor layout as the network parameters.
struct NetGradients {
  std::vector<DenseLayer> branch;
  std::vector<DenseLayer> head;
  DenseLayer output;

  static NetGradients zeros_like(const SiameseNetwork& net);
};

// Exact mean gradient of the batch loss by reverse-mode differentiation;
// the shared branch tensors accumulate contributions from both branches.
NetGradients gradient(const SiameseNetwork& net, std::span<const PairExample> batch);

// Flat parameter indexing in a fixed order (branch, head, output; weights
// before bias). Intended for optimizers and derivative checks.
std::size_t parameter_count(const SiameseNetwork& net);
double get_parameter(const SiameseNetwork& net, std::size_t index);
void set_parameter(SiameseNetwork& net, std::size_t index, double value);
double gradient_at(const NetGradients& grads, std::size_t index);

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 512;
  int max_epochs = 30;
  int patience = 3;  // consecutive epochs of val error above train error
  std::uint64_t seed = 0;
};

struct EpochMetrics {
  int epoch = 0;
  double train_error = 0.0;  // misclassification rate at threshold 0.5
  double val_error = 0.0;
  double mean_loss = 0.0;
};

struct TrainResult {
  SiameseNetwork net;  // parameters from the selected epoch
  std::vector<EpochMetrics> history;
  int selected_epoch = 0;
};

// SGD with momentum: v <- rho*v - lambda*g, theta <- theta + v. Data is
// reshuffled each epoch from the config seed. Returns the parameters from
// the end of the latest epoch where training error did not fall below
// validation error (the final epoch if that never happened). Throws
// NumericError with a diagnostic when the loss goes non-finite.
TrainResult train(SiameseNetwork net, std::span<const PairExample> train_set,
                  std::span<const PairExample> validation_set, const TrainConfig& cfg);

// Fraction of pairs where (p > 0.5) matches the label; p == 0.5 counts as
// incorrect. Throws DataError on an empty set.
double pairwise_accuracy(const SiameseNetwork& net, std::span<const PairExample> pairs);

using StatsProvider = std::function<ForecasterStats(const std::string& forecaster_id, Day as_of)>;

// Labeled pairs from distinct forecasters on one resolved question. Ties in
// individual Brier (tolerance 1e-9) are dropped; up to sample_budget pairs
// are drawn uniformly without replacement (budget 0 = no limit) and each
// emitted pair's orientation is randomized.
std::vector<PairExample> make_pairs(const Question& question,
                                    std::span<const ForecastRecord> records,
                                    const StatsProvider& stats_provider, const TopicVector& topic,
                                    std::size_t sample_budget, std::uint64_t seed, int r_max);

struct TrainingMeta {
  std::uint64_t seed = 0;
  int epochs_run = 0;
  int selected_epoch = 0;
  double final_train_error = 0.0;
  double final_val_error = 0.0;
};

std::string checkpoint_to_json(const SiameseNetwork& net, const TrainingMeta& meta);
std::pair<SiameseNetwork, TrainingMeta> checkpoint_from_json(const std::string& text);

}  // namespace crowdrank
