#include "das/sessionizer.hpp"

#include <cmath>
#include <ostream>

#include "das/error.hpp"
#include "das/ingest.hpp"
#include "das/util.hpp"

namespace das::data {

SessionizedSequence sessionize(const UserLog& user, int64_t threshold_secs) {
  if (threshold_secs <= 0) raise(ErrorCategory::config, "session threshold must be positive");

  SessionizedSequence seq;
  seq.user_id = user.user_id;
  seq.records.reserve(user.records.size());

  const int64_t threshold_ms = threshold_secs * 1000;
  int64_t session_id = 1;
  int64_t sp = 0;
  for (size_t i = 0; i < user.records.size(); ++i) {
    const auto& rec = user.records[i];
    if (i > 0) {
      const int64_t gap = rec.timestamp_ms - user.records[i - 1].timestamp_ms;
      if (gap < 0) {
        raise(ErrorCategory::contract,
              strfmt("records for user '%s' are not sorted by timestamp (index %zu)",
                     user.user_id.c_str(), i));
      }
      if (gap >= threshold_ms) {
        seq.records.back().dropout = 1;
        ++session_id;
        sp = 0;
      }
    }
    ++sp;
    seq.records.push_back({rec, session_id, sp, 0});
  }
  if (!seq.records.empty()) seq.records.back().dropout = 1;
  return seq;
}

std::vector<SessionizedSequence> sessionize_all(const std::vector<UserLog>& users,
                                                int64_t threshold_secs) {
  std::vector<SessionizedSequence> out;
  out.reserve(users.size());
  for (const auto& u : users) out.push_back(sessionize(u, threshold_secs));
  return out;
}

SessionStats session_stats(const std::vector<SessionizedSequence>& sequences) {
  SessionStats s;
  double total_minutes = 0.0;
  for (const auto& seq : sequences) {
    if (seq.records.empty()) continue;
    ++s.user_count;
    s.interaction_count += static_cast<int64_t>(seq.records.size());

    size_t start = 0;
    for (size_t i = 0; i < seq.records.size(); ++i) {
      if (seq.records[i].dropout == 1) {
        ++s.session_count;
        const int64_t span_ms = seq.records[i].rec.timestamp_ms -
                                seq.records[start].rec.timestamp_ms +
                                seq.records[i].rec.elapsed_ms;
        total_minutes += static_cast<double>(span_ms) / 60000.0;
        start = i + 1;
      }
    }
  }
  if (s.user_count > 0) {
    s.sessions_per_user = static_cast<double>(s.session_count) / static_cast<double>(s.user_count);
  }
  if (s.session_count > 0) {
    s.questions_per_session =
        static_cast<double>(s.interaction_count) / static_cast<double>(s.session_count);
    s.dropout_fraction =
        static_cast<double>(s.session_count) / static_cast<double>(s.interaction_count);
    s.mean_session_minutes = total_minutes / static_cast<double>(s.session_count);
  }
  return s;
}

std::map<int, int64_t> gap_histogram(const std::vector<SessionizedSequence>& sequences) {
  std::map<int, int64_t> hist;
  for (const auto& seq : sequences) {
    for (size_t i = 1; i < seq.records.size(); ++i) {
      const int64_t gap = seq.records[i].rec.timestamp_ms - seq.records[i - 1].rec.timestamp_ms;
      const int bin = gap <= 1 ? 0 : static_cast<int>(std::floor(std::log2(static_cast<double>(gap))));
      ++hist[bin];
    }
  }
  return hist;
}

void write_sessionized(const std::vector<SessionizedSequence>& sequences, std::ostream& out) {
  out << "user_id\ttimestamp\tquestion_id\tuser_answer\tcorrectness\telapsed_time\tpart\t"
         "session_id\tdropout\n";
  for (const auto& seq : sequences) {
    for (const auto& sr : seq.records) {
      const auto& r = sr.rec;
      out << seq.user_id << '\t' << format_timestamp_ms(r.timestamp_ms) << '\t' << r.question_id
          << '\t' << r.user_answer << '\t' << r.correctness << '\t' << r.elapsed_ms << '\t'
          << r.part << '\t' << sr.session_id << '\t' << sr.dropout << '\n';
    }
  }
  if (!out) raise(ErrorCategory::io, "write failure while emitting sessionized rows");
}

void write_stats(const SessionStats& stats, std::ostream& out) {
  out << "users\t" << stats.user_count << '\n';
  out << "interactions\t" << stats.interaction_count << '\n';
  out << "sessions\t" << stats.session_count << '\n';
  out << "sessions_per_user\t" << stats.sessions_per_user << '\n';
  out << "questions_per_session\t" << stats.questions_per_session << '\n';
  out << "dropout_fraction\t" << stats.dropout_fraction << '\n';
  out << "mean_session_minutes\t" << stats.mean_session_minutes << '\n';
}

void write_gap_histogram(const std::map<int, int64_t>& hist, std::ostream& out) {
  out << "log2_gap_ms_bin\tcount\n";
  for (const auto& [bin, count] : hist) out << bin << '\t' << count << '\n';
}

}  // namespace das::data
