#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "das/records.hpp"

namespace das::data {

// Logistic-linear end-of-session process over features the predictor can
// observe at decision time: the previous interaction's answer duration and
// correctness, and the current position within the session.
struct HazardSpec {
  double base_log_odds = -6.0;
  double w_elapsed = 6.5;   // on min(previous elapsed seconds, 120)/120
  double w_position = 5.5;  // on min(session position, 16)/16
  double w_correct = -1.5;  // on previous correctness (1 = answered right)
};

struct SynthConfig {
  int64_t users = 100;
  int64_t questions = 500;  // size of the question-id pool
  int64_t min_sessions = 2;
  int64_t max_sessions = 3;  // sessions per user drawn uniformly, inclusive
  int64_t max_session_len = 40;  // safety cap; sessions normally end by draw
  HazardSpec hazard;
  uint64_t seed = 1;
};

// Ground truth for one generated interaction.
struct TruthRow {
  std::string user_id;
  int64_t index = 0;       // interaction index within the user's log, 0-based
  int64_t session_id = 0;  // 1-based
  int32_t sp = 0;          // position within the session, 1-based
  double hazard = 0;       // probability the session ends at this interaction
  int dropout = 0;         // the sampled label
};

struct SynthResult {
  std::vector<UserLog> users;
  std::vector<TruthRow> truth;  // rows in user order, then interaction order
  int64_t interactions() const;
  int64_t sessions() const;
};

// The planted probability, clamped to (0.01, 0.99).
double hazard_probability(const HazardSpec& spec, double prev_elapsed_secs, int32_t sp,
                          int prev_correct);

// Deterministic generation: same config (including seed) gives byte-identical
// output files. Intra-session timestamp gaps stay under 8 minutes and
// inter-session gaps at 2 hours or more, so sessionizing at 3600 s recovers
// the generative sessions exactly. Raises: config on non-positive counts.
SynthResult generate(const SynthConfig& cfg);

// Activity log in the ingest schema (CSV with header).
void write_log(const SynthResult& result, std::ostream& out);
void write_log_file(const SynthResult& result, const std::string& path);

// Ground-truth sidecar (TSV with header), one row per interaction.
void write_truth(const SynthResult& result, std::ostream& out);
void write_truth_file(const SynthResult& result, const std::string& path);
std::vector<TruthRow> read_truth(std::istream& in);
std::vector<TruthRow> read_truth_file(const std::string& path);

}  // namespace das::data
