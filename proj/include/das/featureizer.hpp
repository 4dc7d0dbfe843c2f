#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "das/sessionizer.hpp"

namespace das::data {

// Question-id lookup built from the training split only. Index 0 is reserved
// for out-of-vocabulary ids so unseen test-time questions stay representable.
class Vocab {
 public:
  static constexpr int32_t kOov = 0;

  // First occurrence order decides indices 1..Q.
  void add(const std::string& question_id);
  int32_t lookup(const std::string& question_id) const;
  int32_t question_count() const { return static_cast<int32_t>(ids_.size()); }
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::unordered_map<std::string, int32_t> index_;
  std::vector<std::string> ids_;
};

Vocab build_vocab(const std::vector<SessionizedSequence>& train_sequences);
void write_vocab(const Vocab& v, std::ostream& out);
Vocab read_vocab(std::istream& in);
void write_vocab_file(const Vocab& v, const std::string& path);
Vocab read_vocab_file(const std::string& path);

// Per-part response-time limits (milliseconds) for the on-time flag.
struct LimitsConfig {
  // Defaults: listening parts get shorter limits than reading parts.
  // part:        1      2      3      4      5      6      7
  std::vector<int64_t> limit_ms = {30000, 25000, 45000, 45000, 60000, 75000, 120000};

  int64_t limit_for_part(int part) const;  // config error when part unknown
};

void write_limits(const LimitsConfig& limits, std::ostream& out);
LimitsConfig read_limits(std::istream& in);
void write_limits_file(const LimitsConfig& limits, const std::string& path);
LimitsConfig read_limits_file(const std::string& path);

// One interaction reduced to the model's nine features. Question-side values
// (id, category, start-time buckets, sp) are known when the question is
// shown; response-side values (r, et, iot, d) only afterwards. The window
// position p is assigned during window assembly.
struct FeatureFrame {
  int32_t id_index = 0;   // 0 = OOV, 1..Q known
  int32_t category = 1;   // part, 1..7
  int32_t hour = 0;       // 0..23, UTC
  int32_t dow = 0;        // 0 = Sunday .. 6 = Saturday, UTC
  int32_t sp = 1;         // session position, 1-based, clipped at sp_max
  int32_t r = 0;          // response correctness
  int32_t et_bucket = 0;  // elapsed seconds 0..300, 301 = overflow
  int32_t iot = 0;        // responded within the part's time limit
  int32_t d = 0;          // session-dropout label
};

constexpr int32_t kEtBuckets = 302;  // 0..300 seconds plus overflow
constexpr int32_t kDefaultSpMax = 1024;

std::vector<FeatureFrame> extract_features(const SessionizedSequence& seq, const Vocab& vocab,
                                           const LimitsConfig& limits,
                                           int32_t sp_max = kDefaultSpMax);

// Fixed-length model input ending at one target interaction. Slots before
// first_real are padding; real frames keep chronological order and the
// window's last slot is always the target.
struct TrainingWindow {
  std::vector<FeatureFrame> frames;  // size seq_size
  int32_t first_real = 0;            // slots [first_real, seq_size) are real
  int32_t target_label = 0;          // d of the last slot
};

// Stride-1 sliding windows: one per interaction, left-padded until enough
// history exists. Windows may span session boundaries so the history's d and
// sp features can vary within a window.
std::vector<TrainingWindow> make_windows(const std::vector<FeatureFrame>& frames,
                                         int32_t seq_size);

}  // namespace das::data
