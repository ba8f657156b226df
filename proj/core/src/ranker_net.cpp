#include "crowdrank/ranker_net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "crowdrank/aggregate.hpp"
#include "crowdrank/errors.hpp"
#include "crowdrank/rng.hpp"

namespace crowdrank {

namespace {

constexpr double kProbClamp = 1e-12;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void relu_inplace(Eigen::VectorXd& v) { v = v.cwiseMax(0.0); }

DenseLayer init_layer(int out, int in, Rng& rng) {
  DenseLayer layer;
  layer.weights.resize(out, in);
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (int r = 0; r < out; ++r)
    for (int c = 0; c < in; ++c)
      layer.weights(r, c) = (2.0 * rng.uniform01() - 1.0) * limit;
  layer.bias = Eigen::VectorXd::Zero(out);
  return layer;
}

// Per-example activations cached for the backward pass.
struct BranchTrace {
  std::vector<Eigen::VectorXd> pre;   // z_l per layer
  std::vector<Eigen::VectorXd> post;  // relu(z_l)
};

BranchTrace branch_forward(const SiameseNetwork& net, const Eigen::VectorXd& x) {
  BranchTrace trace;
  Eigen::VectorXd a = x;
  for (const auto& layer : net.branch) {
    Eigen::VectorXd z = layer.weights * a + layer.bias;
    trace.pre.push_back(z);
    relu_inplace(z);
    trace.post.push_back(z);
    a = std::move(z);
  }
  return trace;
}

struct PairTrace {
  Eigen::VectorXd input_a, input_b;
  BranchTrace branch_a, branch_b;
  std::vector<Eigen::VectorXd> head_pre, head_post;
  Eigen::VectorXd head_input;  // concat of branch embeddings
  double logit = 0.0;
  double p = 0.0;
};

PairTrace full_forward(const SiameseNetwork& net, const PairExample& pair) {
  PairTrace t;
  t.input_a = pair.features_a.to_eigen();
  t.input_b = pair.features_b.to_eigen();
  if (t.input_a.size() != net.features.dimension() || t.input_b.size() != net.features.dimension())
    throw DataError("forward: feature dimension mismatch");
  t.branch_a = branch_forward(net, t.input_a);
  t.branch_b = branch_forward(net, t.input_b);

  t.head_input.resize(2 * kBranchWidth);
  t.head_input << t.branch_a.post.back(), t.branch_b.post.back();
  Eigen::VectorXd a = t.head_input;
  for (const auto& layer : net.head) {
    Eigen::VectorXd z = layer.weights * a + layer.bias;
    t.head_pre.push_back(z);
    relu_inplace(z);
    t.head_post.push_back(z);
    a = std::move(z);
  }
  t.logit = (net.output.weights * a + net.output.bias)(0);
  t.p = sigmoid(t.logit);
  return t;
}

void accumulate_branch_backward(const SiameseNetwork& net, const BranchTrace& trace,
                                const Eigen::VectorXd& input, Eigen::VectorXd d_embedding,
                                NetGradients& grads) {
  Eigen::VectorXd d_post = std::move(d_embedding);
  for (int l = kBranchDepth - 1; l >= 0; --l) {
    const Eigen::VectorXd d_pre =
        d_post.cwiseProduct((trace.pre[l].array() > 0.0).cast<double>().matrix());
    const Eigen::VectorXd& below = (l == 0) ? input : trace.post[l - 1];
    grads.branch[l].weights.noalias() += d_pre * below.transpose();
    grads.branch[l].bias += d_pre;
    if (l > 0) d_post = net.branch[l].weights.transpose() * d_pre;
  }
}

void scale(std::vector<DenseLayer>& layers, double s) {
  for (auto& l : layers) {
    l.weights *= s;
    l.bias *= s;
  }
}

// Fixed tensor order used by the flat parameter view and the optimizer.
template <class Net, class Fn>
void visit_layers(Net& net, Fn&& fn) {
  for (auto& layer : net.branch) fn(layer);
  for (auto& layer : net.head) fn(layer);
  fn(net.output);
}

nlohmann::json layer_to_json(const DenseLayer& layer) {
  nlohmann::json j;
  j["rows"] = layer.weights.rows();
  j["cols"] = layer.weights.cols();
  std::vector<double> w(layer.weights.size());
  Eigen::Map<Eigen::MatrixXd>(w.data(), layer.weights.rows(), layer.weights.cols()) = layer.weights;
  j["weights"] = w;
  j["bias"] = std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size());
  return j;
}

DenseLayer layer_from_json(const nlohmann::json& j) {
  DenseLayer layer;
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto w = j.at("weights").get<std::vector<double>>();
  const auto b = j.at("bias").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(w.size()) != rows * cols ||
      static_cast<Eigen::Index>(b.size()) != rows)
    throw DataError("checkpoint: layer shape mismatch");
  layer.weights = Eigen::Map<const Eigen::MatrixXd>(w.data(), rows, cols);
  layer.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
  return layer;
}

struct EvalStats {
  double error = 0.0;
  double mean_loss = 0.0;
};

EvalStats evaluate_set(const SiameseNetwork& net, std::span<const PairExample> pairs) {
  EvalStats stats;
  std::size_t wrong = 0;
  for (const auto& pair : pairs) {
    const double p = net.forward(pair);
    stats.mean_loss += bce_loss(p, pair.label);
    const bool correct = (p != 0.5) && ((p > 0.5) == (pair.label == 1));
    if (!correct) ++wrong;
  }
  stats.error = static_cast<double>(wrong) / static_cast<double>(pairs.size());
  stats.mean_loss /= static_cast<double>(pairs.size());
  return stats;
}

}  // namespace

std::vector<double> FeatureVector::flatten() const {
  std::vector<double> out;
  out.reserve(padded_probabilities.size() + 3 + topic.size());
  out.insert(out.end(), padded_probabilities.begin(), padded_probabilities.end());
  out.push_back(confidence_norm);
  out.push_back(past_brier);
  out.push_back(log_prior_count);
  out.insert(out.end(), topic.begin(), topic.end());
  return out;
}

Eigen::VectorXd FeatureVector::to_eigen() const {
  const std::vector<double> flat = flatten();
  return Eigen::Map<const Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

FeatureVector build_features(const ForecastRecord& record, const ForecasterStats& stats,
                             const TopicVector& topic, int r_max) {
  if (static_cast<int>(record.probabilities.size()) > r_max)
    throw DataError("option count exceeds model capacity (r=" +
                    std::to_string(record.probabilities.size()) +
                    ", r_max=" + std::to_string(r_max) + ")");
  FeatureVector f;
  f.padded_probabilities = record.probabilities;
  f.padded_probabilities.resize(static_cast<std::size_t>(r_max), 0.0);
  f.confidence_norm = (record.confidence - 1) / 4.0;
  f.past_brier = stats.mean_past_brier;
  f.log_prior_count = std::log1p(static_cast<double>(stats.prior_forecast_count));
  f.topic = topic.proportions;
  return f;
}

PairExample::PairExample(FeatureVector a, FeatureVector b, int lbl)
    : features_a(std::move(a)), features_b(std::move(b)), label(lbl) {
  if (features_a.topic != features_b.topic)
    throw DataError("pair example: topic vectors differ between branches");
}

SiameseNetwork SiameseNetwork::init(const FeatureConfig& features, std::uint64_t seed) {
  SiameseNetwork net;
  net.features = features;
  Rng rng(seed);
  int in = features.dimension();
  for (int l = 0; l < kBranchDepth; ++l) {
    net.branch.push_back(init_layer(kBranchWidth, in, rng));
    in = kBranchWidth;
  }
  in = 2 * kBranchWidth;
  for (int l = 0; l < kHeadDepth; ++l) {
    net.head.push_back(init_layer(kHeadWidth, in, rng));
    in = kHeadWidth;
  }
  net.output = init_layer(1, kHeadWidth, rng);
  return net;
}

Eigen::VectorXd SiameseNetwork::branch_embedding(const FeatureVector& input) const {
  const Eigen::VectorXd x = input.to_eigen();
  if (x.size() != features.dimension()) throw DataError("branch: feature dimension mismatch");
  return branch_forward(*this, x).post.back();
}

double SiameseNetwork::forward(const PairExample& pair) const {
  return full_forward(*this, pair).p;
}

SiameseNetwork::ForwardStats SiameseNetwork::forward_stats(const PairExample& pair) const {
  const PairTrace t = full_forward(*this, pair);
  double min_abs = std::numeric_limits<double>::infinity();
  for (const auto& z : t.branch_a.pre) min_abs = std::min(min_abs, z.cwiseAbs().minCoeff());
  for (const auto& z : t.branch_b.pre) min_abs = std::min(min_abs, z.cwiseAbs().minCoeff());
  for (const auto& z : t.head_pre) min_abs = std::min(min_abs, z.cwiseAbs().minCoeff());
  return {t.p, min_abs};
}

bool SiameseNetwork::finite() const {
  bool ok = true;
  visit_layers(*this, [&ok](const DenseLayer& l) {
    ok = ok && l.weights.allFinite() && l.bias.allFinite();
  });
  return ok;
}

double bce_loss(double p, int label) {
  const double q = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return label == 1 ? -std::log(q) : -std::log(1.0 - q);
}

NetGradients NetGradients::zeros_like(const SiameseNetwork& net) {
  NetGradients g;
  auto zero_of = [](const DenseLayer& l) {
    return DenseLayer{Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                      Eigen::VectorXd::Zero(l.bias.size())};
  };
  for (const auto& l : net.branch) g.branch.push_back(zero_of(l));
  for (const auto& l : net.head) g.head.push_back(zero_of(l));
  g.output = zero_of(net.output);
  return g;
}

NetGradients gradient(const SiameseNetwork& net, std::span<const PairExample> batch) {
  if (batch.empty()) throw DataError("gradient: empty batch");
  NetGradients grads = NetGradients::zeros_like(net);

  for (const auto& pair : batch) {
    const PairTrace t = full_forward(net, pair);
    const double d_logit = t.p - static_cast<double>(pair.label);

    grads.output.weights.noalias() += d_logit * t.head_post.back().transpose();
    grads.output.bias(0) += d_logit;

    Eigen::VectorXd d_post = net.output.weights.transpose() * d_logit;
    for (int l = kHeadDepth - 1; l >= 0; --l) {
      const Eigen::VectorXd d_pre =
          d_post.cwiseProduct((t.head_pre[l].array() > 0.0).cast<double>().matrix());
      const Eigen::VectorXd& below = (l == 0) ? t.head_input : t.head_post[l - 1];
      grads.head[l].weights.noalias() += d_pre * below.transpose();
      grads.head[l].bias += d_pre;
      d_post = net.head[l].weights.transpose() * d_pre;
    }
    accumulate_branch_backward(net, t.branch_a, t.input_a, d_post.head(kBranchWidth), grads);
    accumulate_branch_backward(net, t.branch_b, t.input_b, d_post.tail(kBranchWidth), grads);
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  scale(grads.branch, inv);
  scale(grads.head, inv);
  grads.output.weights *= inv;
  grads.output.bias *= inv;
  return grads;
}

std::size_t parameter_count(const SiameseNetwork& net) {
  std::size_t n = 0;
  visit_layers(net, [&n](const DenseLayer& l) {
    n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  });
  return n;
}

namespace {

// Resolves a flat index to (layer tensor, offset). Weights are indexed in
// Eigen's column-major storage order, biases follow their weight matrix.
template <class Net>
double* locate_parameter(Net& net, std::size_t index) {
  double* found = nullptr;
  visit_layers(net, [&](auto& layer) {
    if (found) return;
    const std::size_t wn = static_cast<std::size_t>(layer.weights.size());
    const std::size_t bn = static_cast<std::size_t>(layer.bias.size());
    if (index < wn) {
      found = const_cast<double*>(layer.weights.data()) + index;
      return;
    }
    index -= wn;
    if (index < bn) {
      found = const_cast<double*>(layer.bias.data()) + index;
      return;
    }
    index -= bn;
  });
  if (!found) throw DataError("parameter index out of range");
  return found;
}

}  // namespace

double get_parameter(const SiameseNetwork& net, std::size_t index) {
  return *locate_parameter(net, index);
}

void set_parameter(SiameseNetwork& net, std::size_t index, double value) {
  *locate_parameter(net, index) = value;
}

double gradient_at(const NetGradients& grads, std::size_t index) {
  return *locate_parameter(grads, index);
}

TrainResult train(SiameseNetwork net, std::span<const PairExample> train_set,
                  std::span<const PairExample> validation_set, const TrainConfig& cfg) {
  if (train_set.empty() || validation_set.empty())
    throw DataError("train: empty training or validation set");
  if (cfg.learning_rate < 0.0 || cfg.momentum < 0.0 || cfg.momentum >= 1.0 || cfg.batch_size < 1)
    throw DataError("train: invalid config");

  NetGradients velocity = NetGradients::zeros_like(net);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  SiameseNetwork selected = net;
  int selected_epoch = 0;
  int consecutive_overfit = 0;
  std::vector<PairExample> batch;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train_set[order[i]]);
      const NetGradients grads = gradient(net, batch);

      auto step = [&](DenseLayer& theta, DenseLayer& v, const DenseLayer& g) {
        v.weights = cfg.momentum * v.weights - cfg.learning_rate * g.weights;
        v.bias = cfg.momentum * v.bias - cfg.learning_rate * g.bias;
        theta.weights += v.weights;
        theta.bias += v.bias;
      };
      for (int l = 0; l < kBranchDepth; ++l) step(net.branch[l], velocity.branch[l], grads.branch[l]);
      for (int l = 0; l < kHeadDepth; ++l) step(net.head[l], velocity.head[l], grads.head[l]);
      step(net.output, velocity.output, grads.output);

      if (!net.finite()) {
        std::ostringstream os;
        os << "non-finite parameters at epoch " << epoch << ", batch offset " << start
           << " (lr=" << cfg.learning_rate << ", momentum=" << cfg.momentum << ")";
        throw NumericError(os.str());
      }
    }

    const EvalStats train_stats = evaluate_set(net, train_set);
    const EvalStats val_stats = evaluate_set(net, validation_set);
    if (!std::isfinite(train_stats.mean_loss)) {
      std::ostringstream os;
      os << "non-finite training loss " << train_stats.mean_loss << " at epoch " << epoch;
      throw NumericError(os.str());
    }
    result.history.push_back({epoch, train_stats.error, val_stats.error, train_stats.mean_loss});

    if (train_stats.error >= val_stats.error) {
      selected = net;
      selected_epoch = epoch;
    }
    consecutive_overfit = (val_stats.error > train_stats.error) ? consecutive_overfit + 1 : 0;
    if (consecutive_overfit > cfg.patience) break;
  }

  if (selected_epoch == 0) {
    result.net = std::move(net);
    result.selected_epoch = result.history.empty() ? 0 : result.history.back().epoch;
  } else {
    result.net = std::move(selected);
    result.selected_epoch = selected_epoch;
  }
  return result;
}

double pairwise_accuracy(const SiameseNetwork& net, std::span<const PairExample> pairs) {
  if (pairs.empty()) throw DataError("pairwise_accuracy: empty pair set");
  std::size_t correct = 0;
  for (const auto& pair : pairs) {
    const double p = net.forward(pair);
    if (p != 0.5 && (p > 0.5) == (pair.label == 1)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

std::vector<PairExample> make_pairs(const Question& question,
                                    std::span<const ForecastRecord> records,
                                    const StatsProvider& stats_provider, const TopicVector& topic,
                                    std::size_t sample_budget, std::uint64_t seed, int r_max) {
  if (!question.resolved()) throw DataError("make_pairs: question " + question.id + " unresolved");
  constexpr double kTieTolerance = 1e-9;

  std::vector<double> briers(records.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    briers[i] = question_brier(question, records[i].probabilities);

  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t i = 0; i < records.size(); ++i)
    for (std::size_t j = i + 1; j < records.size(); ++j) {
      if (records[i].forecaster_id == records[j].forecaster_id) continue;
      if (std::abs(briers[i] - briers[j]) <= kTieTolerance) continue;  // tie: no label
      candidates.emplace_back(i, j);
    }

  Rng rng(seed);
  rng.shuffle(candidates);
  if (sample_budget > 0 && candidates.size() > sample_budget) candidates.resize(sample_budget);

  std::vector<PairExample> pairs;
  pairs.reserve(candidates.size());
  for (const auto& [i, j] : candidates) {
    std::size_t a = i, b = j;
    if (rng.below(2) == 1) std::swap(a, b);
    const ForecastRecord& ra = records[a];
    const ForecastRecord& rb = records[b];
    const FeatureVector fa =
        build_features(ra, stats_provider(ra.forecaster_id, day_of(ra.timestamp)), topic, r_max);
    const FeatureVector fb =
        build_features(rb, stats_provider(rb.forecaster_id, day_of(rb.timestamp)), topic, r_max);
    pairs.emplace_back(fa, fb, briers[a] < briers[b] ? 1 : 0);
  }
  return pairs;
}

std::string checkpoint_to_json(const SiameseNetwork& net, const TrainingMeta& meta) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["feature_config"] = {{"r_max", net.features.r_max},
                         {"num_topics", net.features.num_topics},
                         {"features",
                          {"padded_probabilities", "confidence_norm", "past_brier",
                           "log_prior_count", "topic"}}};
  nlohmann::json branch = nlohmann::json::array();
  for (const auto& l : net.branch) branch.push_back(layer_to_json(l));
  nlohmann::json head = nlohmann::json::array();
  for (const auto& l : net.head) head.push_back(layer_to_json(l));
  j["branch"] = std::move(branch);
  j["head"] = std::move(head);
  j["output"] = layer_to_json(net.output);
  j["training"] = {{"seed", meta.seed},
                   {"epochs_run", meta.epochs_run},
                   {"selected_epoch", meta.selected_epoch},
                   {"final_train_error", meta.final_train_error},
                   {"final_val_error", meta.final_val_error}};
  return j.dump(2);
}

std::pair<SiameseNetwork, TrainingMeta> checkpoint_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("format_version", 0) != 1) throw DataError("checkpoint: unsupported format version");
  SiameseNetwork net;
  net.features.r_max = j.at("feature_config").at("r_max").get<int>();
  net.features.num_topics = j.at("feature_config").at("num_topics").get<int>();
  for (const auto& layer : j.at("branch")) net.branch.push_back(layer_from_json(layer));
  for (const auto& layer : j.at("head")) net.head.push_back(layer_from_json(layer));
  net.output = layer_from_json(j.at("output"));
  if (net.branch.size() != static_cast<std::size_t>(kBranchDepth) ||
      net.head.size() != static_cast<std::size_t>(kHeadDepth))
    throw DataError("checkpoint: unexpected layer count");

  TrainingMeta meta;
  const auto& tr = j.at("training");
  meta.seed = tr.at("seed").get<std::uint64_t>();
  meta.epochs_run = tr.at("epochs_run").get<int>();
  meta.selected_epoch = tr.at("selected_epoch").get<int>();
  meta.final_train_error = tr.at("final_train_error").get<double>();
  meta.final_val_error = tr.at("final_val_error").get<double>();
  return {std::move(net), meta};
}

}  // namespace crowdrank
