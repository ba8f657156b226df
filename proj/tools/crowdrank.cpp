// crowdrank: rank crowd forecasters with a siamese comparator and score
// the resulting crowd forecasts.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crowdrank/errors.hpp"
#include "crowdrank/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct Overrides {
  std::optional<std::string> questions, forecasts, output_dir, run_id, lda_model, checkpoint;
  std::optional<std::string> brier_mode;
  std::optional<std::uint64_t> seed, synth_seed, sample_budget;
  std::optional<int> num_topics, lda_iterations, max_epochs, batch_size, r_max;
  std::optional<double> learning_rate;
  std::optional<std::vector<double>> cutoffs;
  std::optional<bool> rank_once;
};

void add_override_flags(CLI::App& cmd, std::optional<std::string>& config_path, Overrides& ov) {
  cmd.add_option("--config", config_path, "JSON config file (flat keys; flags override)")
      ->check(CLI::ExistingFile);
  cmd.add_option("--questions", ov.questions, "Questions CSV path (overrides config)");
  cmd.add_option("--forecasts", ov.forecasts, "Forecasts CSV path (overrides config)");
  cmd.add_option("--out", ov.output_dir, "Output directory (overrides config)");
  cmd.add_option("--run-id", ov.run_id, "Run directory name (default: run-<config hash>)");
  cmd.add_option("--lda-model", ov.lda_model, "Topic model file path");
  cmd.add_option("--checkpoint", ov.checkpoint, "Network checkpoint path");
  cmd.add_option("--seed", ov.seed, "Global seed");
  cmd.add_option("--synth-seed", ov.synth_seed, "Synthetic data seed (defaults to --seed)");
  cmd.add_option("--num-topics", ov.num_topics, "Topic count T");
  cmd.add_option("--lda-iterations", ov.lda_iterations, "Gibbs sweeps");
  cmd.add_option("--learning-rate", ov.learning_rate, "SGD learning rate");
  cmd.add_option("--max-epochs", ov.max_epochs, "Training epoch cap");
  cmd.add_option("--batch-size", ov.batch_size, "Mini-batch size");
  cmd.add_option("--sample-budget", ov.sample_budget, "Total training pairs (0 = no cap)");
  cmd.add_option("--r-max", ov.r_max, "Padded option-vector length");
  cmd.add_option("--cutoffs", ov.cutoffs, "Ranking cutoffs in (0,100]")->delimiter(',');
  cmd.add_option("--brier-mode", ov.brier_mode, "aggregate | mean_individual");
  cmd.add_flag("--rank-once,!--rank-daily", ov.rank_once,
               "Rank once per question instead of daily");
}

crowdrank::PipelineConfig make_config(const std::optional<std::string>& config_path,
                                      const Overrides& ov) {
  crowdrank::PipelineConfig cfg;
  if (config_path) {
    std::ifstream in(*config_path, std::ios::binary);
    if (!in) throw crowdrank::DataError("cannot open config file: " + *config_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    cfg = crowdrank::PipelineConfig::from_json_string(buf.str());
  }
  const bool synth_seed_tied = !ov.synth_seed && !config_path;
  if (ov.questions) cfg.questions_path = *ov.questions;
  if (ov.forecasts) cfg.forecasts_path = *ov.forecasts;
  if (ov.output_dir) cfg.output_dir = *ov.output_dir;
  if (ov.run_id) cfg.run_id = *ov.run_id;
  if (ov.lda_model) cfg.lda_model_path = *ov.lda_model;
  if (ov.checkpoint) cfg.checkpoint_path = *ov.checkpoint;
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.num_topics) cfg.num_topics = *ov.num_topics;
  if (ov.lda_iterations) cfg.lda_iterations = *ov.lda_iterations;
  if (ov.learning_rate) cfg.learning_rate = *ov.learning_rate;
  if (ov.max_epochs) cfg.max_epochs = *ov.max_epochs;
  if (ov.batch_size) cfg.batch_size = *ov.batch_size;
  if (ov.sample_budget) cfg.sample_budget = *ov.sample_budget;
  if (ov.r_max) cfg.r_max = *ov.r_max;
  if (ov.cutoffs) cfg.cutoffs = *ov.cutoffs;
  if (ov.brier_mode) cfg.brier_mode = *ov.brier_mode;
  if (ov.rank_once) cfg.rank_once = *ov.rank_once;
  if (ov.synth_seed) cfg.synth.seed = *ov.synth_seed;
  else if (synth_seed_tied || ov.seed) cfg.synth.seed = cfg.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crowdrank: neural ranking and aggregation of crowd forecasts"};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  Overrides ov;
  bool dump_matrices = false;

  CLI::App* ingest = app.add_subcommand("ingest", "Validate and normalize input data");
  CLI::App* topics = app.add_subcommand("topics", "Fit the topic model and print top words");
  CLI::App* train = app.add_subcommand("train", "Build pairs and train the comparator");
  CLI::App* rank = app.add_subcommand("rank", "Emit per-question forecaster rankings");
  rank->add_flag("--dump-matrices", dump_matrices, "Also write win/tournament matrices");
  CLI::App* evaluate = app.add_subcommand("evaluate", "Score crowd forecasts daily");
  CLI::App* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
  CLI::App* report = app.add_subcommand("report", "Render the summary bar chart");
  for (CLI::App* cmd : {ingest, topics, train, rank, evaluate, simulate, report})
    add_override_flags(*cmd, config_path, ov);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const crowdrank::PipelineConfig cfg = make_config(config_path, ov);
    std::filesystem::path dir;
    if (ingest->parsed()) dir = crowdrank::run_ingest(cfg, std::cout);
    else if (topics->parsed()) dir = crowdrank::run_topics(cfg, std::cout);
    else if (train->parsed()) dir = crowdrank::run_train(cfg, std::cout);
    else if (rank->parsed()) dir = crowdrank::run_rank(cfg, dump_matrices, std::cout);
    else if (evaluate->parsed()) dir = crowdrank::run_evaluate(cfg, std::cout);
    else if (simulate->parsed()) dir = crowdrank::run_simulate(cfg, std::cout);
    else if (report->parsed()) dir = crowdrank::run_report(cfg, std::cout);
    std::cout << "run directory: " << dir.string() << "\n";
    return kExitOk;
  } catch (const crowdrank::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const crowdrank::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
