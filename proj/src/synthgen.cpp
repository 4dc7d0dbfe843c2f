#include "das/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include "das/error.hpp"
#include "das/ingest.hpp"
#include "das/optim.hpp"
#include "das/util.hpp"

namespace das::data {

namespace {

// 2019-03-01 00:00:00 UTC; generated activity starts in the month after.
constexpr int64_t kEpochBaseMs = 1551398400000;
constexpr int64_t kHourMs = 3600 * 1000;

int64_t pick(std::mt19937_64& rng, int64_t lo, int64_t hi) {
  return lo + static_cast<int64_t>(rng() % static_cast<uint64_t>(hi - lo + 1));
}

}  // namespace

int64_t SynthResult::interactions() const { return static_cast<int64_t>(truth.size()); }

int64_t SynthResult::sessions() const {
  int64_t n = 0;
  for (const auto& row : truth) n += row.dropout;
  return n;
}

double hazard_probability(const HazardSpec& spec, double prev_elapsed_secs, int32_t sp,
                          int prev_correct) {
  const double x_elapsed = std::min(prev_elapsed_secs, 120.0) / 120.0;
  const double x_position = std::min(static_cast<double>(sp), 16.0) / 16.0;
  const double z = spec.base_log_odds + spec.w_elapsed * x_elapsed +
                   spec.w_position * x_position + spec.w_correct * prev_correct;
  const double p = 1.0 / (1.0 + std::exp(-z));
  return std::min(0.99, std::max(0.01, p));
}

SynthResult generate(const SynthConfig& cfg) {
  if (cfg.users < 1) raise(ErrorCategory::config, "generate: users must be >= 1");
  if (cfg.questions < 1) raise(ErrorCategory::config, "generate: questions must be >= 1");
  if (cfg.min_sessions < 1 || cfg.max_sessions < cfg.min_sessions) {
    raise(ErrorCategory::config, "generate: session count range is empty");
  }
  if (cfg.max_session_len < 1) {
    raise(ErrorCategory::config, "generate: max_session_len must be >= 1");
  }

  std::mt19937_64 rng(cfg.seed);
  SynthResult result;
  result.users.reserve(static_cast<size_t>(cfg.users));

  for (int64_t u = 0; u < cfg.users; ++u) {
    UserLog log;
    log.user_id = strfmt("synth%05lld", static_cast<long long>(u));

    int64_t t = kEpochBaseMs + pick(rng, 0, 30 * 24 * kHourMs);
    const int64_t session_count = pick(rng, cfg.min_sessions, cfg.max_sessions);
    double prev_elapsed_secs = 0.0;  // before any interaction: neutral history
    int prev_correct = 1;
    int64_t index = 0;

    for (int64_t session = 1; session <= session_count; ++session) {
      for (int32_t sp = 1;; ++sp) {
        // Skewed answer durations: mostly 3..120 s, occasionally up to 300 s.
        // Integral seconds, so the second-resolution view downstream loses
        // nothing of the planted signal.
        const double shape = train::uniform01(rng);
        double elapsed_secs = std::floor(3.0 + 117.0 * shape * shape);
        if (rng() % 16 == 0) elapsed_secs = std::floor(120.0 + 180.0 * train::uniform01(rng));
        const int64_t elapsed_ms = static_cast<int64_t>(elapsed_secs) * 1000;

        InteractionRecord rec;
        rec.user_id = log.user_id;
        rec.timestamp_ms = t;
        rec.question_id = strfmt("q%lld", static_cast<long long>(rng() % static_cast<uint64_t>(
                                                                     cfg.questions)));
        rec.user_answer = static_cast<char>('a' + rng() % 4);
        rec.correctness = train::uniform01(rng) < 0.7 ? 1 : 0;
        rec.elapsed_ms = elapsed_ms;
        rec.part = static_cast<int>(rng() % 7) + 1;

        const double hazard = hazard_probability(cfg.hazard, prev_elapsed_secs, sp, prev_correct);
        const bool forced = sp >= cfg.max_session_len;
        const int dropout = forced || train::uniform01(rng) < hazard ? 1 : 0;

        log.records.push_back(rec);
        result.truth.push_back({log.user_id, index, session, sp, hazard, dropout});
        ++index;
        prev_elapsed_secs = static_cast<double>(rec.elapsed_ms) / 1000.0;
        prev_correct = rec.correctness;

        if (dropout == 1) {
          // next session starts two hours to two days later
          t += elapsed_ms + pick(rng, 2 * kHourMs, 48 * kHourMs);
          break;
        }
        // same session: answer time plus up to two minutes of thinking
        t += elapsed_ms + pick(rng, 1000, 120 * 1000);
      }
    }
    result.users.push_back(std::move(log));
  }
  return result;
}

void write_log(const SynthResult& result, std::ostream& out) {
  out << "user_id,timestamp,question_id,user_answer,correctness,elapsed_time,part\n";
  for (const auto& user : result.users) {
    for (const auto& rec : user.records) {
      out << rec.user_id << ',' << rec.timestamp_ms << ',' << rec.question_id << ','
          << rec.user_answer << ',' << rec.correctness << ',' << rec.elapsed_ms << ','
          << rec.part << '\n';
    }
  }
}

void write_log_file(const SynthResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.good()) raise(ErrorCategory::io, strfmt("cannot open '%s' for writing", path.c_str()));
  write_log(result, out);
  out.flush();
  if (!out.good()) raise(ErrorCategory::io, strfmt("failed writing '%s'", path.c_str()));
}

void write_truth(const SynthResult& result, std::ostream& out) {
  out << "user_id\tindex\tsession_id\tsp\thazard\tdropout\n";
  for (const auto& row : result.truth) {
    out << row.user_id << '\t' << row.index << '\t' << row.session_id << '\t' << row.sp << '\t'
        << strfmt("%.17g", row.hazard) << '\t' << row.dropout << '\n';
  }
}

void write_truth_file(const SynthResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.good()) raise(ErrorCategory::io, strfmt("cannot open '%s' for writing", path.c_str()));
  write_truth(result, out);
  out.flush();
  if (!out.good()) raise(ErrorCategory::io, strfmt("failed writing '%s'", path.c_str()));
}

std::vector<TruthRow> read_truth(std::istream& in) {
  std::vector<TruthRow> rows;
  std::string line;
  if (!std::getline(in, line)) {
    raise(ErrorCategory::schema, "truth file is empty: expected a header row");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "user_id\tindex\tsession_id\tsp\thazard\tdropout") {
    raise(ErrorCategory::schema, "truth file header does not match the sidecar format");
  }
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 6) {
      raise(ErrorCategory::schema,
            strfmt("truth line %zu has %zu fields, expected 6", line_no, fields.size()));
    }
    TruthRow row;
    row.user_id = fields[0];
    try {
      row.index = std::stoll(fields[1]);
      row.session_id = std::stoll(fields[2]);
      row.sp = static_cast<int32_t>(std::stol(fields[3]));
      row.hazard = std::stod(fields[4]);
      row.dropout = std::stoi(fields[5]);
    } catch (const std::exception&) {
      raise(ErrorCategory::schema, strfmt("truth line %zu has a malformed number", line_no));
    }
    if (row.dropout != 0 && row.dropout != 1) {
      raise(ErrorCategory::schema, strfmt("truth line %zu has a non-binary dropout", line_no));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<TruthRow> read_truth_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) raise(ErrorCategory::io, strfmt("cannot open truth file '%s'", path.c_str()));
  return read_truth(in);
}

}  // namespace das::data
