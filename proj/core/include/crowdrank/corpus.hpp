#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "crowdrank/timeutil.hpp"

namespace crowdrank {

struct Question {
  std::string id;
  std::string text;
  std::string description;
  Day open_date = 0;
  Day close_date = 0;
  std::vector<std::string> options;  // length r >= 2, in answer-scale order
  bool is_ordered = false;
  std::optional<int> outcome_index;

  int option_count() const { return static_cast<int>(options.size()); }
  bool resolved() const { return outcome_index.has_value(); }
  void validate() const;  // throws DataError on invariant violations
};

struct ForecastRecord {
  std::string question_id;
  std::string forecaster_id;
  Timestamp timestamp = 0;
  std::vector<double> probabilities;  // componentwise >= 0, sums to 1 within 1e-6
  int confidence = 3;                 // self-reported, integer 1..5

  bool operator==(const ForecastRecord&) const = default;
};

struct ForecasterStats {
  std::string forecaster_id;
  Day as_of = 0;
  double mean_past_brier = 0.5;  // cold-start prior
  std::int64_t prior_forecast_count = 0;
};

// Column mapping for delimiter-separated forecast files. Wide format keeps
// the probability vector in columns <prob_prefix>1..<prob_prefix>r; long
// format spreads one forecast over r consecutive rows keyed by option_index.
struct ForecastSchema {
  enum class Format { kWide, kLong };
  Format format = Format::kWide;
  std::string question_id = "ifp_id";
  std::string forecaster_id = "user_id";
  std::string timestamp = "timestamp";
  std::string confidence = "confidence";
  std::string prob_prefix = "p";          // wide
  std::string option_index = "option_index";  // long, 1-based
  std::string value = "value";                // long
};

struct RejectedRow {
  std::size_t line = 0;
  std::string reason;
};

struct ForecastParseResult {
  std::vector<ForecastRecord> records;
  std::vector<std::size_t> record_lines;  // source line of each accepted record
  std::vector<RejectedRow> rejects;
};

// Malformed header throws DataError; bad rows land in `rejects` and
// processing continues. Probability vectors whose sum falls in
// [1-1e-3, 1+1e-3] are renormalized, anything further off is rejected.
ForecastParseResult parse_forecasts(std::istream& in, const ForecastSchema& schema);
void write_forecasts(std::ostream& out, std::span<const ForecastRecord> records,
                     const ForecastSchema& schema);
void write_rejects(std::ostream& out, std::span<const RejectedRow> rejects);

// Questions file: id,text,description,open_date,close_date,options
// (pipe-separated),ordered,outcome_index (empty while unresolved).
std::vector<Question> parse_questions(std::istream& in);
void write_questions(std::ostream& out, std::span<const Question> questions);

// Latest record per forecaster with timestamp <= t; forecasters without a
// record by t are absent. Timestamp ties go to the later input position.
std::map<std::string, ForecastRecord> latest_per_forecaster(const Question& question,
                                                            std::span<const ForecastRecord> records,
                                                            Timestamp t);

// Records inside the question's open window [open 00:00, close 23:59:59].
// Out-of-window forecasts are kept at ingest and dropped here, at query time.
std::vector<ForecastRecord> in_window(const Question& question,
                                      std::span<const ForecastRecord> records);

// Resolved questions plus their forecasts, used for past-performance stats.
struct Archive {
  std::vector<Question> questions;
  std::unordered_map<std::string, std::vector<ForecastRecord>> forecasts_by_question;

  void add(const Question& q, std::vector<ForecastRecord> records);
};

// Mean of the forecaster's per-question daily Brier means over questions
// resolved strictly before `as_of` (a question counts as resolved at its
// close date). No history yields the documented (0.5, 0) prior.
ForecasterStats forecaster_stats(const std::string& forecaster_id, const Archive& history,
                                 Day as_of);

}  // namespace crowdrank
