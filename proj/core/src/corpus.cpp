#include "crowdrank/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "crowdrank/aggregate.hpp"
#include "crowdrank/csv.hpp"
#include "crowdrank/errors.hpp"
#include "crowdrank/mathutil.hpp"

namespace crowdrank {

namespace {

constexpr double kSumTolerance = 1e-3;

double parse_double(const std::string& s, const char* what) {
  double v = 0.0;
  const char* first = s.c_str();
  auto [ptr, ec] = std::from_chars(first, first + s.size(), v);
  if (ec != std::errc() || ptr != first + s.size() || !std::isfinite(v))
    throw DataError(std::string("bad ") + what + ": '" + s + "'");
  return v;
}

long parse_long(const std::string& s, const char* what) {
  long v = 0;
  const char* first = s.c_str();
  auto [ptr, ec] = std::from_chars(first, first + s.size(), v);
  if (ec != std::errc() || ptr != first + s.size())
    throw DataError(std::string("bad ") + what + ": '" + s + "'");
  return v;
}

std::size_t column_of(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError("missing required column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

// Renormalizes in place; returns false when the sum is outside tolerance.
bool normalize_probabilities(std::vector<double>& probs, std::string& reason) {
  double sum = 0.0;
  for (const double p : probs) {
    if (!std::isfinite(p) || p < 0.0) {
      reason = "negative or non-finite probability";
      return false;
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    std::ostringstream os;
    os << "probability sum " << sum << " outside tolerance";
    reason = os.str();
    return false;
  }
  // Skip the division for already-normalized vectors so that reparsing a
  // serialized record reproduces it bit for bit.
  if (std::abs(sum - 1.0) > 1e-12)
    for (double& p : probs) p /= sum;
  return true;
}

struct WideColumns {
  std::size_t question, forecaster, timestamp, confidence;
  std::vector<std::size_t> probs;
};

}  // namespace

void Question::validate() const {
  if (id.empty()) throw DataError("question with empty id");
  if (options.size() < 2) throw DataError("question " + id + ": fewer than 2 options");
  if (open_date > close_date) throw DataError("question " + id + ": open_date after close_date");
  if (outcome_index && (*outcome_index < 0 || *outcome_index >= option_count()))
    throw DataError("question " + id + ": outcome_index out of range");
}

ForecastParseResult parse_forecasts(std::istream& in, const ForecastSchema& schema) {
  csv::Reader reader(in);
  const auto header = reader.next_row();
  if (!header || header->size() < 2) throw DataError("forecast file: missing or malformed header");

  ForecastParseResult result;
  const std::size_t qcol = column_of(*header, schema.question_id);
  const std::size_t fcol = column_of(*header, schema.forecaster_id);
  const std::size_t tcol = column_of(*header, schema.timestamp);
  const std::size_t ccol = column_of(*header, schema.confidence);

  auto reject = [&result](std::size_t line, std::string reason) {
    result.rejects.push_back({line, std::move(reason)});
  };

  auto finish_record = [&](ForecastRecord&& rec, std::size_t line) {
    std::string reason;
    if (rec.question_id.empty() || rec.forecaster_id.empty()) {
      reject(line, "empty question or forecaster id");
      return;
    }
    if (rec.confidence < 1 || rec.confidence > 5) {
      reject(line, "confidence outside 1..5");
      return;
    }
    if (rec.probabilities.empty()) {
      reject(line, "no probabilities");
      return;
    }
    if (!normalize_probabilities(rec.probabilities, reason)) {
      reject(line, reason);
      return;
    }
    result.records.push_back(std::move(rec));
    result.record_lines.push_back(line);
  };

  if (schema.format == ForecastSchema::Format::kWide) {
    WideColumns cols{qcol, fcol, tcol, ccol, {}};
    for (int k = 1;; ++k) {
      const std::string name = schema.prob_prefix + std::to_string(k);
      const auto it = std::find(header->begin(), header->end(), name);
      if (it == header->end()) break;
      cols.probs.push_back(static_cast<std::size_t>(it - header->begin()));
    }
    if (cols.probs.empty())
      throw DataError("forecast file: no probability columns with prefix '" + schema.prob_prefix + "'");

    while (auto row = reader.next_row()) {
      const std::size_t line = reader.row_line();
      if (row->size() == 1 && (*row)[0].empty()) continue;  // blank line
      if (row->size() != header->size()) {
        reject(line, "wrong field count");
        continue;
      }
      try {
        ForecastRecord rec;
        rec.question_id = (*row)[cols.question];
        rec.forecaster_id = (*row)[cols.forecaster];
        rec.timestamp = parse_timestamp((*row)[cols.timestamp]);
        rec.confidence = static_cast<int>(parse_long((*row)[cols.confidence], "confidence"));
        for (const std::size_t pc : cols.probs) {
          const std::string& cell = (*row)[pc];
          if (cell.empty()) break;  // shorter option scale than the file maximum
          rec.probabilities.push_back(parse_double(cell, "probability"));
        }
        finish_record(std::move(rec), line);
      } catch (const DataError& e) {
        reject(line, e.what());
      }
    }
    return result;
  }

  // Long format: consecutive rows sharing (question, forecaster, timestamp)
  // assemble one probability vector indexed by option_index (1-based).
  const std::size_t ocol = column_of(*header, schema.option_index);
  const std::size_t vcol = column_of(*header, schema.value);

  struct Group {
    ForecastRecord rec;
    std::size_t line = 0;
    std::vector<std::pair<long, double>> entries;
    bool active = false;
    bool bad = false;
    std::string bad_reason;
  } group;

  auto flush_group = [&]() {
    if (!group.active) return;
    if (group.bad) {
      reject(group.line, group.bad_reason);
    } else {
      std::sort(group.entries.begin(), group.entries.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      bool dense = !group.entries.empty();
      for (std::size_t i = 0; i < group.entries.size(); ++i)
        dense = dense && group.entries[i].first == static_cast<long>(i) + 1;
      if (!dense) {
        reject(group.line, "option_index values not 1..r");
      } else {
        for (const auto& [ignored, v] : group.entries) group.rec.probabilities.push_back(v);
        finish_record(std::move(group.rec), group.line);
      }
    }
    group = Group{};
  };

  while (auto row = reader.next_row()) {
    const std::size_t line = reader.row_line();
    if (row->size() == 1 && (*row)[0].empty()) continue;
    if (row->size() != header->size()) {
      flush_group();
      reject(line, "wrong field count");
      continue;
    }
    try {
      ForecastRecord rec;
      rec.question_id = (*row)[qcol];
      rec.forecaster_id = (*row)[fcol];
      rec.timestamp = parse_timestamp((*row)[tcol]);
      rec.confidence = static_cast<int>(parse_long((*row)[ccol], "confidence"));
      const long opt = parse_long((*row)[ocol], "option_index");
      const double value = parse_double((*row)[vcol], "value");

      const bool same_group = group.active && group.rec.question_id == rec.question_id &&
                              group.rec.forecaster_id == rec.forecaster_id &&
                              group.rec.timestamp == rec.timestamp;
      if (!same_group) flush_group();
      if (!group.active) {
        group.active = true;
        group.rec = std::move(rec);
        group.line = line;
      }
      group.entries.emplace_back(opt, value);
    } catch (const DataError& e) {
      if (group.active) {
        group.bad = true;
        group.bad_reason = e.what();
      } else {
        reject(line, e.what());
      }
    }
  }
  flush_group();
  return result;
}

void write_forecasts(std::ostream& out, std::span<const ForecastRecord> records,
                     const ForecastSchema& schema) {
  std::size_t r_max = 0;
  for (const auto& rec : records) r_max = std::max(r_max, rec.probabilities.size());
  if (r_max == 0) r_max = 1;

  std::vector<std::string> row{schema.question_id, schema.forecaster_id, schema.timestamp,
                               schema.confidence};
  if (schema.format == ForecastSchema::Format::kWide) {
    for (std::size_t k = 1; k <= r_max; ++k) row.push_back(schema.prob_prefix + std::to_string(k));
    csv::write_row(out, row);
    for (const auto& rec : records) {
      row = {rec.question_id, rec.forecaster_id, format_timestamp(rec.timestamp),
             std::to_string(rec.confidence)};
      for (const double p : rec.probabilities) row.push_back(csv::format_double(p));
      row.resize(4 + r_max);  // trailing empties for shorter option scales
      csv::write_row(out, row);
    }
    return;
  }
  row.push_back(schema.option_index);
  row.push_back(schema.value);
  csv::write_row(out, row);
  for (const auto& rec : records) {
    for (std::size_t k = 0; k < rec.probabilities.size(); ++k) {
      row = {rec.question_id,
             rec.forecaster_id,
             format_timestamp(rec.timestamp),
             std::to_string(rec.confidence),
             std::to_string(k + 1),
             csv::format_double(rec.probabilities[k])};
      csv::write_row(out, row);
    }
  }
}

void write_rejects(std::ostream& out, std::span<const RejectedRow> rejects) {
  csv::write_row(out, {"line", "reason"});
  for (const auto& r : rejects) csv::write_row(out, {std::to_string(r.line), r.reason});
}

std::vector<Question> parse_questions(std::istream& in) {
  csv::Reader reader(in);
  const auto header = reader.next_row();
  static const std::vector<std::string> expected = {"id",         "text",    "description",
                                                    "open_date",  "close_date", "options",
                                                    "ordered",    "outcome_index"};
  if (!header) throw DataError("questions file: empty");
  for (const auto& name : expected) column_of(*header, name);

  const std::size_t c_id = column_of(*header, "id");
  const std::size_t c_text = column_of(*header, "text");
  const std::size_t c_desc = column_of(*header, "description");
  const std::size_t c_open = column_of(*header, "open_date");
  const std::size_t c_close = column_of(*header, "close_date");
  const std::size_t c_opts = column_of(*header, "options");
  const std::size_t c_ord = column_of(*header, "ordered");
  const std::size_t c_out = column_of(*header, "outcome_index");

  std::vector<Question> questions;
  while (auto row = reader.next_row()) {
    if (row->size() == 1 && (*row)[0].empty()) continue;
    if (row->size() != header->size())
      throw DataError("questions file: wrong field count at line " + std::to_string(reader.row_line()));
    Question q;
    q.id = (*row)[c_id];
    q.text = (*row)[c_text];
    q.description = (*row)[c_desc];
    q.open_date = parse_date((*row)[c_open]);
    q.close_date = parse_date((*row)[c_close]);
    std::stringstream opts((*row)[c_opts]);
    std::string opt;
    while (std::getline(opts, opt, '|')) q.options.push_back(opt);
    const std::string& ord = (*row)[c_ord];
    q.is_ordered = (ord == "1" || ord == "true");
    if (!(*row)[c_out].empty()) q.outcome_index = static_cast<int>(parse_long((*row)[c_out], "outcome_index"));
    q.validate();
    questions.push_back(std::move(q));
  }
  std::set<std::string> ids;
  for (const auto& q : questions)
    if (!ids.insert(q.id).second) throw DataError("questions file: duplicate id '" + q.id + "'");
  return questions;
}

void write_questions(std::ostream& out, std::span<const Question> questions) {
  csv::write_row(out, {"id", "text", "description", "open_date", "close_date", "options",
                       "ordered", "outcome_index"});
  for (const auto& q : questions) {
    std::string opts;
    for (std::size_t i = 0; i < q.options.size(); ++i) {
      if (i) opts.push_back('|');
      opts += q.options[i];
    }
    csv::write_row(out, {q.id, q.text, q.description, format_date(q.open_date),
                         format_date(q.close_date), opts, q.is_ordered ? "1" : "0",
                         q.outcome_index ? std::to_string(*q.outcome_index) : ""});
  }
}

std::map<std::string, ForecastRecord> latest_per_forecaster(const Question& question,
                                                            std::span<const ForecastRecord> records,
                                                            Timestamp t) {
  std::map<std::string, ForecastRecord> latest;
  for (const auto& rec : records) {
    if (rec.question_id != question.id || rec.timestamp > t) continue;
    const auto it = latest.find(rec.forecaster_id);
    if (it == latest.end() || rec.timestamp >= it->second.timestamp)
      latest[rec.forecaster_id] = rec;  // >= keeps the later input occurrence on ties
  }
  return latest;
}

std::vector<ForecastRecord> in_window(const Question& question,
                                      std::span<const ForecastRecord> records) {
  std::vector<ForecastRecord> kept;
  const Timestamp lo = start_of_day(question.open_date);
  const Timestamp hi = end_of_day(question.close_date);
  for (const auto& rec : records)
    if (rec.question_id == question.id && rec.timestamp >= lo && rec.timestamp <= hi)
      kept.push_back(rec);
  return kept;
}

void Archive::add(const Question& q, std::vector<ForecastRecord> records) {
  questions.push_back(q);
  forecasts_by_question[q.id] = std::move(records);
}

ForecasterStats forecaster_stats(const std::string& forecaster_id, const Archive& history,
                                 Day as_of) {
  ForecasterStats stats;
  stats.forecaster_id = forecaster_id;
  stats.as_of = as_of;

  std::vector<double> question_means;
  std::int64_t count = 0;
  for (const auto& q : history.questions) {
    if (!q.resolved() || q.close_date >= as_of) continue;  // strictly-before rule
    const auto it = history.forecasts_by_question.find(q.id);
    if (it == history.forecasts_by_question.end()) continue;

    std::vector<ForecastRecord> mine;
    for (const auto& rec : in_window(q, it->second))
      if (rec.forecaster_id == forecaster_id) mine.push_back(rec);
    if (mine.empty()) continue;
    count += static_cast<std::int64_t>(mine.size());

    double sum = 0.0;
    int days = 0;
    for (Day d = q.open_date; d <= q.close_date; ++d) {
      const auto latest = latest_per_forecaster(q, mine, end_of_day(d));
      const auto rec_it = latest.find(forecaster_id);
      if (rec_it == latest.end()) continue;
      sum += question_brier(q, rec_it->second.probabilities);
      ++days;
    }
    if (days > 0) question_means.push_back(sum / days);
  }

  if (!question_means.empty()) {
    stats.mean_past_brier = mean(question_means);
    stats.prior_forecast_count = count;
  }
  return stats;
}

}  // namespace crowdrank
