#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "das/records.hpp"

namespace das::data {

struct Rejection {
  size_t line_no = 0;  // 1-based, header is line 1
  std::string reason;
};

struct ParsedLog {
  std::vector<UserLog> users;  // sorted by user_id
  std::vector<Rejection> rejections;
  size_t accepted = 0;

  size_t total_interactions() const {
    size_t n = 0;
    for (const auto& u : users) n += u.records.size();
    return n;
  }
};

// Parses a delimiter-separated activity log (comma or tab, auto-detected
// from the header). Required columns: timestamp, question_id, user_answer,
// correctness, elapsed_time, part. Optional: user_id (single-user logs omit
// it). Extra columns are ignored. Malformed rows are skipped and reported.
ParsedLog parse_log(std::istream& in);
ParsedLog parse_log_file(const std::string& path);

// Canonical serialization (tab-separated, epoch-ms timestamps). Parsing the
// output reproduces the records exactly.
void serialize_records(const std::vector<UserLog>& users, std::ostream& out);

// Accepts "YYYY-MM-DD HH:MM:SS" (treated as UTC) or epoch milliseconds.
// Returns false when the text is neither.
bool parse_timestamp(const std::string& text, int64_t& out_ms);
std::string format_timestamp_ms(int64_t ms);

struct UserPartition {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

// Deterministic per-user split: users are ordered by a seeded hash and cut
// into ratio-weighted buckets by largest remainder, so bucket sizes match
// the exact quota within one user.
UserPartition split_users(const std::vector<std::string>& users, std::array<int, 3> ratio,
                          uint64_t seed);

void write_partition(const UserPartition& p, const std::string& path);
UserPartition read_partition(const std::string& path);

}  // namespace das::data
