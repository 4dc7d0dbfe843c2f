#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace das::data {

// One row of a raw activity log, validated and normalized.
struct InteractionRecord {
  std::string user_id;
  int64_t timestamp_ms = 0;  // question start, epoch milliseconds (UTC)
  std::string question_id;
  char user_answer = 'a';  // 'a'..'d'
  int correctness = 0;     // 0 or 1
  int64_t elapsed_ms = 0;  // response time, milliseconds
  int part = 1;            // TOEIC part, 1..7
};

struct UserLog {
  std::string user_id;
  std::vector<InteractionRecord> records;  // sorted by timestamp
};

}  // namespace das::data
