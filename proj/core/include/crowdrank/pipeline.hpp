#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "crowdrank/corpus.hpp"
#include "crowdrank/ranker_net.hpp"
#include "crowdrank/synthcrowd.hpp"

namespace crowdrank {

// Flat configuration mirrored by the JSON config file; CLI flags override
// individual keys. Every artifact a run writes is a pure function of
// (inputs, config, seed).
struct PipelineConfig {
  // io
  std::string questions_path;
  std::string forecasts_path;
  std::string output_dir = "out";
  std::string run_id;           // empty -> "run-" + first 8 hash hex digits
  std::string lda_model_path;   // empty -> <run dir>/lda_model.json
  std::string checkpoint_path;  // empty -> <run dir>/checkpoint.json
  ForecastSchema schema;

  // topics
  int num_topics = 6;
  double alpha = 0.0;  // 0 -> 50 / num_topics
  double beta = 0.01;
  int lda_iterations = 1000;
  int fold_in_iterations = 100;
  bool topics_use_all_questions = false;

  // training
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 512;
  int max_epochs = 30;
  int patience = 3;
  std::uint64_t sample_budget = 200000;  // total labeled pairs, 0 = no cap
  int r_max = 5;
  double train_fraction = 0.5;       // chronological question split
  double validation_fraction = 0.15; // tail of the training questions

  // evaluation
  std::vector<double> cutoffs{10, 25, 50, 100};
  bool rank_once = false;
  std::string brier_mode = "aggregate";  // or "mean_individual"

  // synthetic data
  SynthConfig synth;

  std::uint64_t seed = 42;

  static PipelineConfig from_json_string(const std::string& text);
  std::string to_json_string() const;
  void validate() const;

  std::string config_hash() const;  // hex digest of the canonical JSON
  std::filesystem::path run_dir() const;
  std::filesystem::path lda_model_file() const;
  std::filesystem::path checkpoint_file() const;

  double effective_alpha() const { return alpha > 0.0 ? alpha : 50.0 / num_topics; }
};

// Chronological split: questions ordered by (close_date, id); the first
// ceil(n * train_fraction) are the training set. Ids are disjoint by
// construction.
struct QuestionSplit {
  std::vector<Question> train;
  std::vector<Question> eval;
};
QuestionSplit chronological_split(std::vector<Question> questions, double train_fraction);

// Subcommand drivers. Each writes its artifacts plus a manifest into the
// run directory and returns that directory. Failures remove partial
// outputs and rethrow.
std::filesystem::path run_ingest(const PipelineConfig& cfg, std::ostream& log);
std::filesystem::path run_topics(const PipelineConfig& cfg, std::ostream& log);
std::filesystem::path run_train(const PipelineConfig& cfg, std::ostream& log);
std::filesystem::path run_rank(const PipelineConfig& cfg, bool dump_matrices, std::ostream& log);
std::filesystem::path run_evaluate(const PipelineConfig& cfg, std::ostream& log);
std::filesystem::path run_simulate(const PipelineConfig& cfg, std::ostream& log);
std::filesystem::path run_report(const PipelineConfig& cfg, std::ostream& log);

}  // namespace crowdrank
