#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <vector>

#include "das/records.hpp"

namespace das::data {

// One interaction annotated with its study-session membership.
struct SessionizedRecord {
  InteractionRecord rec;
  int64_t session_id = 1;  // per user, starting at 1
  int64_t sp = 1;          // 1-based position within the session
  int dropout = 0;         // 1 exactly at the last interaction of a session
};

struct SessionizedSequence {
  std::string user_id;
  std::vector<SessionizedRecord> records;
};

struct SessionStats {
  int64_t user_count = 0;
  int64_t interaction_count = 0;
  int64_t session_count = 0;
  double sessions_per_user = 0.0;
  double questions_per_session = 0.0;
  double dropout_fraction = 0.0;
  // First question start to last question start, plus the last response's
  // elapsed time, averaged over sessions.
  double mean_session_minutes = 0.0;
};

// Splits a user's timestamp-sorted stream wherever the gap between
// consecutive question starts reaches the threshold; a gap exactly equal to
// the threshold starts a new session. Every session's final interaction is
// labelled dropout=1.
SessionizedSequence sessionize(const UserLog& user, int64_t threshold_secs);
std::vector<SessionizedSequence> sessionize_all(const std::vector<UserLog>& users,
                                                int64_t threshold_secs);

SessionStats session_stats(const std::vector<SessionizedSequence>& sequences);

// Histogram of gaps between consecutive question starts within a user:
// bin k counts gaps with 2^k <= gap_ms < 2^(k+1) (gaps of 0 ms land in bin 0).
std::map<int, int64_t> gap_histogram(const std::vector<SessionizedSequence>& sequences);

// Input rows plus session_id and dropout columns, tab-separated.
void write_sessionized(const std::vector<SessionizedSequence>& sequences, std::ostream& out);
void write_stats(const SessionStats& stats, std::ostream& out);
void write_gap_histogram(const std::map<int, int64_t>& hist, std::ostream& out);

}  // namespace das::data
