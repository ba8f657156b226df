#include "crowdrank/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "crowdrank/aggregate.hpp"
#include "crowdrank/csv.hpp"
#include "crowdrank/errors.hpp"
#include "crowdrank/report_svg.hpp"
#include "crowdrank/rng.hpp"
#include "crowdrank/topics.hpp"
#include "crowdrank/tournament.hpp"

namespace fs = std::filesystem;

namespace crowdrank {

namespace {

// ---------------------------------------------------------------------------
// small file helpers

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Removes everything it tracked unless dismissed, so failed runs do not
// leave partial artifacts behind.
class OutputGuard {
 public:
  ~OutputGuard() {
    if (dismissed_) return;
    std::error_code ec;
    for (const auto& p : paths_) fs::remove(p, ec);
  }
  void track(const fs::path& p) { paths_.push_back(p); }
  void dismiss() { dismissed_ = true; }

 private:
  std::vector<fs::path> paths_;
  bool dismissed_ = false;
};

void write_text_file(const fs::path& path, const std::string& content, OutputGuard& guard) {
  fs::create_directories(path.parent_path());
  guard.track(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot create file: " + path.string());
  out << content;
  if (!out.good()) throw DataError("failed writing file: " + path.string());
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_manifest(const PipelineConfig& cfg, const std::string& subcommand,
                    const std::vector<fs::path>& inputs, const std::vector<std::string>& outputs,
                    OutputGuard& guard) {
  nlohmann::json j;
  j["subcommand"] = subcommand;
  j["config_hash"] = cfg.config_hash();
  j["config"] = nlohmann::json::parse(cfg.to_json_string());
  j["seed"] = cfg.seed;
  nlohmann::json digests = nlohmann::json::object();
  for (const auto& p : inputs) digests[p.string()] = "fnv1a64:" + hex64(Rng::hash_bytes(read_text_file(p)));
  j["inputs"] = std::move(digests);
  j["outputs"] = outputs;
  write_text_file(cfg.run_dir() / ("manifest_" + subcommand + ".json"), j.dump(2) + "\n", guard);
}

// ---------------------------------------------------------------------------
// data loading

std::vector<Question> load_questions(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open questions file: " + path.string());
  return parse_questions(in);
}

ForecastParseResult load_forecasts(const fs::path& path, const ForecastSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open forecasts file: " + path.string());
  return parse_forecasts(in, schema);
}

using ForecastsByQuestion = std::map<std::string, std::vector<ForecastRecord>>;

// Drops forecasts for unknown questions or with the wrong option count, the
// same checks `ingest` reports; later stages tolerate un-ingested files.
ForecastsByQuestion group_and_validate(const std::vector<ForecastRecord>& records,
                                       const std::vector<Question>& questions,
                                       std::ostream& log) {
  std::map<std::string, std::size_t> option_counts;
  for (const auto& q : questions) option_counts[q.id] = static_cast<std::size_t>(q.option_count());
  ForecastsByQuestion grouped;
  std::size_t dropped = 0;
  for (const auto& rec : records) {
    const auto it = option_counts.find(rec.question_id);
    if (it == option_counts.end() || rec.probabilities.size() != it->second) {
      ++dropped;
      continue;
    }
    grouped[rec.question_id].push_back(rec);
  }
  if (dropped > 0)
    log << "warning: dropped " << dropped
        << " forecasts with unknown question ids or mismatched option counts\n";
  return grouped;
}

Archive build_archive(const std::vector<Question>& questions, const ForecastsByQuestion& grouped) {
  Archive archive;
  for (const auto& q : questions) {
    if (!q.resolved()) continue;
    const auto it = grouped.find(q.id);
    archive.add(q, it == grouped.end() ? std::vector<ForecastRecord>{} : it->second);
  }
  return archive;
}

class StatsCache {
 public:
  explicit StatsCache(const Archive& archive) : archive_(archive) {}

  ForecasterStats get(const std::string& id, Day as_of) {
    const auto key = std::make_pair(id, as_of);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, forecaster_stats(id, archive_, as_of)).first;
    return it->second;
  }

  StatsProvider provider() {
    return [this](const std::string& id, Day as_of) { return get(id, as_of); };
  }

 private:
  const Archive& archive_;
  std::map<std::pair<std::string, Day>, ForecasterStats> cache_;
};

// ---------------------------------------------------------------------------
// topic model artifact: fitted model plus the per-question training-state
// proportions, so training questions reuse their realized topic vectors and
// only unseen questions are folded in.

struct TopicModelFile {
  LdaModel model;
  std::map<std::string, std::vector<double>> question_topics;
};

void save_topic_model(const fs::path& path, const TopicModelFile& tm, OutputGuard& guard) {
  nlohmann::json j;
  j["model"] = nlohmann::json::parse(tm.model.to_json_string());
  j["question_topics"] = tm.question_topics;
  write_text_file(path, j.dump(2) + "\n", guard);
}

TopicModelFile load_topic_model(const fs::path& path) {
  const nlohmann::json j = nlohmann::json::parse(read_text_file(path));
  TopicModelFile tm;
  tm.model = LdaModel::from_json_string(j.at("model").dump());
  tm.question_topics =
      j.at("question_topics").get<std::map<std::string, std::vector<double>>>();
  return tm;
}

TopicVector topic_for_question(const TopicModelFile& tm, const Question& q,
                               const PipelineConfig& cfg) {
  const auto it = tm.question_topics.find(q.id);
  if (it != tm.question_topics.end()) return TopicVector{it->second};
  return topic_vector(tm.model, tokenize(q.text + " " + q.description), cfg.fold_in_iterations,
                      Rng::mix(cfg.seed, Rng::hash_bytes("foldin:" + q.id)));
}

std::pair<SiameseNetwork, TrainingMeta> load_checkpoint(const fs::path& path) {
  return checkpoint_from_json(read_text_file(path));
}

// Ranking of the active forecasters: the comparator tournament for two or
// more, trivial for a single active forecaster.
Ranking neural_ranking(const SiameseNetwork& net, const Question& q,
                       const std::map<std::string, ForecastRecord>& latest,
                       const FeaturesProvider& features, std::uint64_t seed) {
  if (latest.size() == 1) return Ranking::from_order({latest.begin()->first});
  return incr_indeg(normalize(run_tournament(net, q, latest, features)), seed);
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration

PipelineConfig PipelineConfig::from_json_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("config: invalid JSON: ") + e.what());
  }
  PipelineConfig cfg;
  try {
    cfg.questions_path = j.value("questions", cfg.questions_path);
    cfg.forecasts_path = j.value("forecasts", cfg.forecasts_path);
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.run_id = j.value("run_id", cfg.run_id);
    cfg.lda_model_path = j.value("lda_model", cfg.lda_model_path);
    cfg.checkpoint_path = j.value("checkpoint", cfg.checkpoint_path);

    const std::string fmt = j.value("schema_format", std::string("wide"));
    if (fmt == "wide") cfg.schema.format = ForecastSchema::Format::kWide;
    else if (fmt == "long") cfg.schema.format = ForecastSchema::Format::kLong;
    else throw DataError("config: schema_format must be 'wide' or 'long'");
    cfg.schema.question_id = j.value("schema_question_id", cfg.schema.question_id);
    cfg.schema.forecaster_id = j.value("schema_forecaster_id", cfg.schema.forecaster_id);
    cfg.schema.timestamp = j.value("schema_timestamp", cfg.schema.timestamp);
    cfg.schema.confidence = j.value("schema_confidence", cfg.schema.confidence);
    cfg.schema.prob_prefix = j.value("schema_prob_prefix", cfg.schema.prob_prefix);
    cfg.schema.option_index = j.value("schema_option_index", cfg.schema.option_index);
    cfg.schema.value = j.value("schema_value", cfg.schema.value);

    cfg.num_topics = j.value("num_topics", cfg.num_topics);
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.beta = j.value("beta", cfg.beta);
    cfg.lda_iterations = j.value("lda_iterations", cfg.lda_iterations);
    cfg.fold_in_iterations = j.value("fold_in_iterations", cfg.fold_in_iterations);
    cfg.topics_use_all_questions = j.value("topics_use_all_questions", cfg.topics_use_all_questions);

    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.momentum = j.value("momentum", cfg.momentum);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
    cfg.patience = j.value("patience", cfg.patience);
    cfg.sample_budget = j.value("sample_budget", cfg.sample_budget);
    cfg.r_max = j.value("r_max", cfg.r_max);
    cfg.train_fraction = j.value("train_fraction", cfg.train_fraction);
    cfg.validation_fraction = j.value("validation_fraction", cfg.validation_fraction);

    cfg.cutoffs = j.value("cutoffs", cfg.cutoffs);
    cfg.rank_once = j.value("rank_once", cfg.rank_once);
    cfg.brier_mode = j.value("brier_mode", cfg.brier_mode);

    cfg.seed = j.value("seed", cfg.seed);

    cfg.synth.n_forecasters = j.value("synth_n_forecasters", cfg.synth.n_forecasters);
    cfg.synth.n_questions = j.value("synth_n_questions", cfg.synth.n_questions);
    cfg.synth.n_topics = j.value("synth_n_topics", cfg.synth.n_topics);
    cfg.synth.options_range.lo = j.value("synth_options_lo", cfg.synth.options_range.lo);
    cfg.synth.options_range.hi = j.value("synth_options_hi", cfg.synth.options_range.hi);
    cfg.synth.skill_spread = j.value("synth_skill_spread", cfg.synth.skill_spread);
    cfg.synth.noise = j.value("synth_noise", cfg.synth.noise);
    cfg.synth.days_open_range.lo = j.value("synth_days_open_lo", cfg.synth.days_open_range.lo);
    cfg.synth.days_open_range.hi = j.value("synth_days_open_hi", cfg.synth.days_open_range.hi);
    cfg.synth.revisions_range.lo = j.value("synth_revisions_lo", cfg.synth.revisions_range.lo);
    cfg.synth.revisions_range.hi = j.value("synth_revisions_hi", cfg.synth.revisions_range.hi);
    cfg.synth.seed = j.value("synth_seed", cfg.seed);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  return cfg;
}

std::string PipelineConfig::to_json_string() const {
  nlohmann::json j;
  j["questions"] = questions_path;
  j["forecasts"] = forecasts_path;
  j["output_dir"] = output_dir;
  j["run_id"] = run_id;
  j["lda_model"] = lda_model_path;
  j["checkpoint"] = checkpoint_path;
  j["schema_format"] = schema.format == ForecastSchema::Format::kWide ? "wide" : "long";
  j["schema_question_id"] = schema.question_id;
  j["schema_forecaster_id"] = schema.forecaster_id;
  j["schema_timestamp"] = schema.timestamp;
  j["schema_confidence"] = schema.confidence;
  j["schema_prob_prefix"] = schema.prob_prefix;
  j["schema_option_index"] = schema.option_index;
  j["schema_value"] = schema.value;
  j["num_topics"] = num_topics;
  j["alpha"] = alpha;
  j["beta"] = beta;
  j["lda_iterations"] = lda_iterations;
  j["fold_in_iterations"] = fold_in_iterations;
  j["topics_use_all_questions"] = topics_use_all_questions;
  j["learning_rate"] = learning_rate;
  j["momentum"] = momentum;
  j["batch_size"] = batch_size;
  j["max_epochs"] = max_epochs;
  j["patience"] = patience;
  j["sample_budget"] = sample_budget;
  j["r_max"] = r_max;
  j["train_fraction"] = train_fraction;
  j["validation_fraction"] = validation_fraction;
  j["cutoffs"] = cutoffs;
  j["rank_once"] = rank_once;
  j["brier_mode"] = brier_mode;
  j["seed"] = seed;
  j["synth_n_forecasters"] = synth.n_forecasters;
  j["synth_n_questions"] = synth.n_questions;
  j["synth_n_topics"] = synth.n_topics;
  j["synth_options_lo"] = synth.options_range.lo;
  j["synth_options_hi"] = synth.options_range.hi;
  j["synth_skill_spread"] = synth.skill_spread;
  j["synth_noise"] = synth.noise;
  j["synth_days_open_lo"] = synth.days_open_range.lo;
  j["synth_days_open_hi"] = synth.days_open_range.hi;
  j["synth_revisions_lo"] = synth.revisions_range.lo;
  j["synth_revisions_hi"] = synth.revisions_range.hi;
  j["synth_seed"] = synth.seed;
  return j.dump(2);
}

void PipelineConfig::validate() const {
  if (cutoffs.empty()) throw DataError("config: cutoffs must be non-empty");
  for (const double c : cutoffs)
    if (!(c > 0.0) || c > 100.0) throw DataError("config: cutoffs must lie in (0, 100]");
  if (brier_mode != "aggregate" && brier_mode != "mean_individual")
    throw DataError("config: brier_mode must be 'aggregate' or 'mean_individual'");
  if (!(train_fraction > 0.0) || train_fraction >= 1.0)
    throw DataError("config: train_fraction must be in (0, 1)");
  if (!(validation_fraction > 0.0) || validation_fraction >= 1.0)
    throw DataError("config: validation_fraction must be in (0, 1)");
  if (num_topics < 1) throw DataError("config: num_topics must be >= 1");
  if (r_max < 2) throw DataError("config: r_max must be >= 2");
  if (batch_size < 1 || max_epochs < 1 || patience < 0)
    throw DataError("config: invalid training parameters");
  if (learning_rate < 0.0 || momentum < 0.0 || momentum >= 1.0)
    throw DataError("config: invalid learning rate or momentum");
  if (lda_iterations < 1 || fold_in_iterations < 0)
    throw DataError("config: invalid LDA iteration counts");
}

std::string PipelineConfig::config_hash() const { return hex64(Rng::hash_bytes(to_json_string())); }

fs::path PipelineConfig::run_dir() const {
  const std::string tag = run_id.empty() ? "run-" + config_hash().substr(0, 8) : run_id;
  return fs::path(output_dir) / tag;
}

fs::path PipelineConfig::lda_model_file() const {
  return lda_model_path.empty() ? run_dir() / "lda_model.json" : fs::path(lda_model_path);
}

fs::path PipelineConfig::checkpoint_file() const {
  return checkpoint_path.empty() ? run_dir() / "checkpoint.json" : fs::path(checkpoint_path);
}

QuestionSplit chronological_split(std::vector<Question> questions, double train_fraction) {
  if (questions.size() < 2) throw DataError("split: need at least 2 questions");
  std::sort(questions.begin(), questions.end(), [](const Question& a, const Question& b) {
    return a.close_date != b.close_date ? a.close_date < b.close_date : a.id < b.id;
  });
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(
          std::ceil(train_fraction * static_cast<double>(questions.size()) - 1e-9)),
      1, questions.size() - 1);
  QuestionSplit split;
  split.train.assign(questions.begin(), questions.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.eval.assign(questions.begin() + static_cast<std::ptrdiff_t>(n_train), questions.end());
  return split;
}

// ---------------------------------------------------------------------------
// subcommands

fs::path run_simulate(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  const SynthData data = generate(cfg.synth);
  const fs::path dir = cfg.run_dir();
  OutputGuard guard;

  {
    std::ostringstream out;
    write_questions(out, data.questions);
    write_text_file(dir / "questions.csv", out.str(), guard);
  }
  {
    std::ostringstream out;
    write_forecasts(out, data.forecasts, cfg.schema);
    write_text_file(dir / "forecasts.csv", out.str(), guard);
  }
  {
    std::ostringstream out;
    std::vector<std::string> header{"forecaster_id"};
    for (int k = 0; k < cfg.synth.n_topics; ++k) header.push_back("skill_topic_" + std::to_string(k));
    header.push_back("mean_skill");
    csv::write_row(out, header);
    const std::vector<double> means = data.mean_skills();
    for (std::size_t f = 0; f < data.forecaster_ids.size(); ++f) {
      std::vector<std::string> row{data.forecaster_ids[f]};
      for (const double s : data.topic_skills[f]) row.push_back(csv::format_double(s));
      row.push_back(csv::format_double(means[f]));
      csv::write_row(out, row);
    }
    write_text_file(dir / "skills.csv", out.str(), guard);
  }

  write_manifest(cfg, "simulate", {}, {"questions.csv", "forecasts.csv", "skills.csv"}, guard);
  log << "simulate: wrote " << data.questions.size() << " questions, " << data.forecasts.size()
      << " forecasts to " << dir.string() << "\n";
  guard.dismiss();
  return dir;
}

fs::path run_ingest(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  const std::vector<Question> questions = load_questions(cfg.questions_path);
  ForecastParseResult parsed = load_forecasts(cfg.forecasts_path, cfg.schema);

  std::map<std::string, int> option_counts;
  for (const auto& q : questions) option_counts[q.id] = q.option_count();

  std::vector<ForecastRecord> kept;
  kept.reserve(parsed.records.size());
  for (std::size_t i = 0; i < parsed.records.size(); ++i) {
    const auto& rec = parsed.records[i];
    const std::size_t line = i < parsed.record_lines.size() ? parsed.record_lines[i] : 0;
    const auto it = option_counts.find(rec.question_id);
    if (it == option_counts.end()) {
      parsed.rejects.push_back({line, "unknown question id '" + rec.question_id + "'"});
      continue;
    }
    if (static_cast<int>(rec.probabilities.size()) != it->second) {
      parsed.rejects.push_back({line, "probability count does not match question options"});
      continue;
    }
    kept.push_back(rec);
  }
  std::sort(parsed.rejects.begin(), parsed.rejects.end(),
            [](const RejectedRow& a, const RejectedRow& b) { return a.line < b.line; });

  const fs::path dir = cfg.run_dir();
  OutputGuard guard;
  {
    std::ostringstream out;
    write_forecasts(out, kept, cfg.schema);
    write_text_file(dir / "normalized_forecasts.csv", out.str(), guard);
  }
  {
    std::ostringstream out;
    write_rejects(out, parsed.rejects);
    write_text_file(dir / "rejects.csv", out.str(), guard);
  }
  write_manifest(cfg, "ingest", {cfg.questions_path, cfg.forecasts_path},
                 {"normalized_forecasts.csv", "rejects.csv"}, guard);
  log << "ingest: " << kept.size() << " records kept, " << parsed.rejects.size()
      << " rejected across " << questions.size() << " questions\n";
  guard.dismiss();
  return dir;
}

fs::path run_topics(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  std::vector<Question> questions = load_questions(cfg.questions_path);
  std::vector<Question> corpus;
  if (cfg.topics_use_all_questions || questions.size() < 2) {
    corpus = std::move(questions);
  } else {
    corpus = chronological_split(std::move(questions), cfg.train_fraction).train;
  }

  std::vector<std::vector<std::string>> documents;
  documents.reserve(corpus.size());
  for (const auto& q : corpus) documents.push_back(tokenize(q.text + " " + q.description));

  const LdaFit fit = fit_lda(documents, cfg.num_topics, cfg.effective_alpha(), cfg.beta,
                             cfg.lda_iterations, Rng::mix(cfg.seed, Rng::hash_bytes("lda")));

  TopicModelFile tm;
  tm.model = fit.model;
  for (std::size_t d = 0; d < corpus.size(); ++d)
    tm.question_topics[corpus[d].id] = fit.doc_topics[d].proportions;

  const fs::path dir = cfg.run_dir();
  OutputGuard guard;
  save_topic_model(cfg.lda_model_file(), tm, guard);

  std::ostringstream terms;
  for (int k = 0; k < cfg.num_topics; ++k) {
    terms << "topic " << k << ":";
    for (const auto& [word, p] : tm.model.top_words(k, 10)) terms << ' ' << word;
    terms << '\n';
  }
  write_text_file(dir / "topic_terms.txt", terms.str(), guard);
  log << terms.str();
  write_manifest(cfg, "topics", {cfg.questions_path},
                 {cfg.lda_model_file().filename().string(), "topic_terms.txt"}, guard);
  log << "topics: fitted " << cfg.num_topics << " topics over " << corpus.size()
      << " documents (vocabulary " << tm.model.vocab_size() << ")\n";
  guard.dismiss();
  return dir;
}

fs::path run_train(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  const std::vector<Question> questions = load_questions(cfg.questions_path);
  const ForecastParseResult parsed = load_forecasts(cfg.forecasts_path, cfg.schema);
  const ForecastsByQuestion grouped = group_and_validate(parsed.records, questions, log);
  const TopicModelFile tm = load_topic_model(cfg.lda_model_file());

  const QuestionSplit split = chronological_split(questions, cfg.train_fraction);
  std::vector<Question> trainable;
  for (const auto& q : split.train)
    if (q.resolved()) trainable.push_back(q);
  if (trainable.size() < 2)
    throw DataError("train: need at least 2 resolved training questions for a validation split");

  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(cfg.validation_fraction *
                                         static_cast<double>(trainable.size()) - 1e-9)),
      1, trainable.size() - 1);
  const std::size_t n_core = trainable.size() - n_val;

  const Archive archive = build_archive(questions, grouped);
  StatsCache stats(archive);
  const std::uint64_t per_q_budget =
      cfg.sample_budget == 0
          ? 0
          : (cfg.sample_budget + trainable.size() - 1) / trainable.size();

  auto pairs_for = [&](const Question& q) -> std::vector<PairExample> {
    const auto it = grouped.find(q.id);
    if (it == grouped.end()) return {};
    const std::vector<ForecastRecord> windowed = in_window(q, it->second);
    if (windowed.size() < 2) return {};
    const TopicVector topic = topic_for_question(tm, q, cfg);
    return make_pairs(q, windowed, stats.provider(), topic, per_q_budget,
                      Rng::mix(cfg.seed, Rng::hash_bytes("pairs:" + q.id)), cfg.r_max);
  };

  std::vector<PairExample> train_pairs, val_pairs;
  for (std::size_t i = 0; i < trainable.size(); ++i) {
    std::vector<PairExample> pairs = pairs_for(trainable[i]);
    auto& sink = i < n_core ? train_pairs : val_pairs;
    std::move(pairs.begin(), pairs.end(), std::back_inserter(sink));
  }
  if (train_pairs.empty() || val_pairs.empty())
    throw DataError("train: empty training or validation pair set after sampling");
  log << "train: " << train_pairs.size() << " training pairs from " << n_core << " questions, "
      << val_pairs.size() << " validation pairs from " << n_val << " questions\n";

  const FeatureConfig features{cfg.r_max, tm.model.num_topics};
  SiameseNetwork net = SiameseNetwork::init(features, Rng::mix(cfg.seed, Rng::hash_bytes("init")));
  TrainConfig tc;
  tc.learning_rate = cfg.learning_rate;
  tc.momentum = cfg.momentum;
  tc.batch_size = cfg.batch_size;
  tc.max_epochs = cfg.max_epochs;
  tc.patience = cfg.patience;
  tc.seed = Rng::mix(cfg.seed, Rng::hash_bytes("sgd"));
  const TrainResult result = train(std::move(net), train_pairs, val_pairs, tc);

  TrainingMeta meta;
  meta.seed = cfg.seed;
  meta.epochs_run = static_cast<int>(result.history.size());
  meta.selected_epoch = result.selected_epoch;
  if (!result.history.empty()) {
    meta.final_train_error = result.history.back().train_error;
    meta.final_val_error = result.history.back().val_error;
  }

  const fs::path dir = cfg.run_dir();
  OutputGuard guard;
  write_text_file(cfg.checkpoint_file(), checkpoint_to_json(result.net, meta) + "\n", guard);
  {
    std::ostringstream out;
    csv::write_row(out, {"epoch", "train_error", "val_error", "mean_loss"});
    for (const auto& m : result.history)
      csv::write_row(out, {std::to_string(m.epoch), csv::format_double(m.train_error),
                           csv::format_double(m.val_error), csv::format_double(m.mean_loss)});
    write_text_file(dir / "training_log.csv", out.str(), guard);
  }
  write_manifest(cfg, "train",
                 {cfg.questions_path, cfg.forecasts_path, cfg.lda_model_file()},
                 {cfg.checkpoint_file().filename().string(), "training_log.csv"}, guard);
  for (const auto& m : result.history)
    log << "  epoch " << m.epoch << ": train_error=" << m.train_error
        << " val_error=" << m.val_error << " mean_loss=" << m.mean_loss << "\n";
  log << "train: selected epoch " << result.selected_epoch << " of " << result.history.size()
      << "\n";
  guard.dismiss();
  return dir;
}

fs::path run_rank(const PipelineConfig& cfg, bool dump_matrices, std::ostream& log) {
  cfg.validate();
  const std::vector<Question> questions = load_questions(cfg.questions_path);
  const ForecastParseResult parsed = load_forecasts(cfg.forecasts_path, cfg.schema);
  const ForecastsByQuestion grouped = group_and_validate(parsed.records, questions, log);
  const TopicModelFile tm = load_topic_model(cfg.lda_model_file());
  const auto [net, meta] = load_checkpoint(cfg.checkpoint_file());

  const Archive archive = build_archive(questions, grouped);
  StatsCache stats(archive);

  const fs::path dir = cfg.run_dir();
  OutputGuard guard;
  std::ostringstream out;
  csv::write_row(out, {"question_id", "rank", "forecaster_id", "weighted_in_degree"});
  std::vector<std::string> outputs{"rankings.csv"};

  std::vector<Question> ordered = questions;
  std::sort(ordered.begin(), ordered.end(),
            [](const Question& a, const Question& b) { return a.id < b.id; });
  for (const auto& q : ordered) {
    const auto it = grouped.find(q.id);
    if (it == grouped.end()) continue;
    const std::vector<ForecastRecord> windowed = in_window(q, it->second);
    const auto latest = latest_per_forecaster(q, windowed, end_of_day(q.close_date));
    if (latest.size() < 2) {
      log << "rank: skipping " << q.id << " (fewer than 2 forecasters)\n";
      continue;
    }
    const TopicVector topic = topic_for_question(tm, q, cfg);
    const FeaturesProvider features = [&](const ForecastRecord& rec) {
      return build_features(rec, stats.get(rec.forecaster_id, day_of(rec.timestamp)), topic,
                            cfg.r_max);
    };
    const WinMatrix m = run_tournament(net, q, latest, features);
    const TournamentMatrix t = normalize(m);
    const Ranking ranking = incr_indeg(t, Rng::mix(cfg.seed, Rng::hash_bytes("rank:" + q.id)));

    std::map<std::string, double> indeg;
    const std::vector<double> degrees = weighted_in_degrees(t);
    for (std::size_t i = 0; i < t.forecaster_ids.size(); ++i)
      indeg[t.forecaster_ids[i]] = degrees[i];
    for (std::size_t r = 0; r < ranking.order.size(); ++r)
      csv::write_row(out, {q.id, std::to_string(r + 1), ranking.order[r],
                           csv::format_double(indeg[ranking.order[r]])});

    if (dump_matrices) {
      auto dump = [&](const std::string& name, const auto& cell) {
        std::ostringstream mout;
        std::vector<std::string> head{""};
        head.insert(head.end(), t.forecaster_ids.begin(), t.forecaster_ids.end());
        csv::write_row(mout, head);
        for (std::size_t i = 0; i < t.size(); ++i) {
          std::vector<std::string> row{t.forecaster_ids[i]};
          for (std::size_t jj = 0; jj < t.size(); ++jj) row.push_back(cell(i, jj));
          csv::write_row(mout, row);
        }
        const std::string rel = "matrices/" + q.id + "_" + name + ".csv";
        write_text_file(dir / rel, mout.str(), guard);
        outputs.push_back(rel);
      };
      dump("win", [&m](std::size_t i, std::size_t jj) { return csv::format_double(m.wins(i, jj)); });
      dump("tournament",
           [&t](std::size_t i, std::size_t jj) { return csv::format_double(t.weights[i][jj]); });
    }
  }
  write_text_file(dir / "rankings.csv", out.str(), guard);
  write_manifest(cfg, "rank",
                 {cfg.questions_path, cfg.forecasts_path, cfg.lda_model_file(),
                  cfg.checkpoint_file()},
                 outputs, guard);
  log << "rank: wrote rankings to " << (dir / "rankings.csv").string() << "\n";
  guard.dismiss();
  return dir;
}

fs::path run_evaluate(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  const std::vector<Question> questions = load_questions(cfg.questions_path);
  const ForecastParseResult parsed = load_forecasts(cfg.forecasts_path, cfg.schema);
  const ForecastsByQuestion grouped = group_and_validate(parsed.records, questions, log);
  const TopicModelFile tm = load_topic_model(cfg.lda_model_file());
  const auto [net, meta] = load_checkpoint(cfg.checkpoint_file());
  if (net.features.num_topics != tm.model.num_topics)
    throw DataError("evaluate: checkpoint and topic model disagree on topic count");
  if (net.features.r_max != cfg.r_max)
    throw DataError("evaluate: checkpoint r_max differs from config");

  const QuestionSplit split = chronological_split(questions, cfg.train_fraction);
  const Archive archive = build_archive(questions, grouped);
  StatsCache stats(archive);

  // method -> cutoff -> question -> (day, score)
  using DayScores = std::map<std::string, std::vector<std::pair<Day, double>>>;
  std::map<std::string, std::map<double, DayScores>> scores;

  for (const auto& q : split.eval) {
    if (!q.resolved()) {
      log << "evaluate: skipping unresolved question " << q.id << "\n";
      continue;
    }
    const auto grouped_it = grouped.find(q.id);
    if (grouped_it == grouped.end()) continue;
    const std::vector<ForecastRecord> windowed = in_window(q, grouped_it->second);
    if (windowed.empty()) continue;

    const TopicVector topic = topic_for_question(tm, q, cfg);
    const FeaturesProvider features = [&](const ForecastRecord& rec) {
      return build_features(rec, stats.get(rec.forecaster_id, day_of(rec.timestamp)), topic,
                            cfg.r_max);
    };
    const std::uint64_t qseed = Rng::mix(cfg.seed, Rng::hash_bytes(q.id));

    std::optional<Ranking> fixed_ranking;
    if (cfg.rank_once) {
      const auto latest_close = latest_per_forecaster(q, windowed, end_of_day(q.close_date));
      fixed_ranking = neural_ranking(net, q, latest_close, features, Rng::mix(qseed, 1));
    }

    for (Day d = q.open_date; d <= q.close_date; ++d) {
      const Timestamp t = end_of_day(d);
      const auto latest = latest_per_forecaster(q, windowed, t);
      if (latest.empty()) continue;
      std::vector<std::string> actives;
      actives.reserve(latest.size());
      for (const auto& [id, rec] : latest) actives.push_back(id);

      auto record_score = [&](const std::string& method, double cutoff, const CrowdWeights& w) {
        std::optional<double> day_score;
        if (cfg.brier_mode == "aggregate") {
          const auto cf = crowd_forecast(q, windowed, w, t);
          if (cf) day_score = question_brier(q, *cf);
        } else {
          double sum = 0.0;
          int members = 0;
          for (const auto& [id, rec] : latest) {
            if (!w.selected(id)) continue;
            sum += question_brier(q, rec.probabilities);
            ++members;
          }
          if (members > 0) day_score = sum / members;
        }
        if (day_score) scores[method][cutoff][q.id].emplace_back(d, *day_score);
      };

      const Ranking ranking =
          cfg.rank_once && fixed_ranking
              ? *fixed_ranking
              : neural_ranking(net, q, latest, features,
                               Rng::mix(qseed, static_cast<std::uint64_t>(d) * 2 + 1));
      for (const double cutoff : cfg.cutoffs) {
        // With rank_once the fixed ranking may list forecasters who have no
        // forecast yet; selection still applies, absent members simply do
        // not contribute to the mean.
        record_score("neural", cutoff, select_top(ranking, cutoff));
      }

      const std::vector<std::string> order = baseline_order(
          actives, stats.provider(), d, Rng::mix(qseed, static_cast<std::uint64_t>(d) * 2));
      for (const double cutoff : cfg.cutoffs)
        record_score("baseline", cutoff, weights_from_ranked_order(order, cutoff));

      record_score("unweighted", 100.0, weights_from_ranked_order(actives, 100.0));
    }
  }

  // Assemble rows and per-(method, cutoff) summaries.
  struct Row {
    std::string qid;
    Day day;
    double cutoff;
    std::string method;
    double score;
  };
  std::vector<Row> rows;
  std::vector<SummaryRow> summary;
  for (const auto& [method, by_cutoff] : scores) {
    for (const auto& [cutoff, by_question] : by_cutoff) {
      for (const auto& [qid, days] : by_question)
        for (const auto& [day, score] : days) rows.push_back({qid, day, cutoff, method, score});
      const BrierReport report = make_report(by_question);
      summary.push_back({cutoff, method, report.mmdb});
    }
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.qid, a.day, a.cutoff, a.method) < std::tie(b.qid, b.day, b.cutoff, b.method);
  });
  std::sort(summary.begin(), summary.end(), [](const SummaryRow& a, const SummaryRow& b) {
    return std::tie(a.cutoff, a.method) < std::tie(b.cutoff, b.method);
  });

  const fs::path dir = cfg.run_dir();
  OutputGuard guard;
  {
    std::ostringstream out;
    csv::write_row(out, {"question_id", "date", "cutoff", "method", "daily_brier"});
    for (const auto& row : rows)
      csv::write_row(out, {row.qid, format_date(row.day), csv::format_double(row.cutoff),
                           row.method, csv::format_double(row.score)});
    write_text_file(dir / "daily_scores.csv", out.str(), guard);
  }
  {
    std::ostringstream out;
    csv::write_row(out, {"cutoff", "method", "mmdb"});
    for (const auto& s : summary)
      csv::write_row(out, {csv::format_double(s.cutoff), s.method, csv::format_double(s.mmdb)});
    write_text_file(dir / "summary.csv", out.str(), guard);
  }
  write_manifest(cfg, "evaluate",
                 {cfg.questions_path, cfg.forecasts_path, cfg.lda_model_file(),
                  cfg.checkpoint_file()},
                 {"daily_scores.csv", "summary.csv"}, guard);
  for (const auto& s : summary)
    log << "evaluate: cutoff " << s.cutoff << "% " << s.method << " MMDB = " << s.mmdb << "\n";
  guard.dismiss();
  return dir;
}

fs::path run_report(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  const fs::path dir = cfg.run_dir();
  const fs::path summary_path = dir / "summary.csv";
  const std::string text = read_text_file(summary_path);
  std::istringstream in(text);
  csv::Reader reader(in);
  const auto header = reader.next_row();
  if (!header || header->size() != 3) throw DataError("report: malformed summary.csv");

  std::vector<SummaryRow> rows;
  while (auto row = reader.next_row()) {
    if (row->size() == 1 && (*row)[0].empty()) continue;
    if (row->size() != 3) throw DataError("report: malformed summary row");
    SummaryRow s;
    s.cutoff = std::stod((*row)[0]);
    s.method = (*row)[1];
    s.mmdb = std::stod((*row)[2]);
    rows.push_back(std::move(s));
  }

  OutputGuard guard;
  write_text_file(dir / "report.svg", render_summary_svg(rows), guard);
  write_manifest(cfg, "report", {summary_path}, {"report.svg"}, guard);
  log << "report: wrote " << (dir / "report.svg").string() << "\n";
  guard.dismiss();
  return dir;
}

}  // namespace crowdrank
