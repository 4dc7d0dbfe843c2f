#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "das/model.hpp"
#include "das/synthgen.hpp"
#include "das/trainer.hpp"

namespace das::cli {

// Every tunable knob of the toolkit in one flat struct. Values are resolved
// in increasing precedence: struct defaults, preset, config file, DAS_*
// environment variables, command-line flags.
struct RunConfig {
  std::string preset;  // "", "paper", or "desk"

  // Model shape.
  int64_t num_blocks = 2;
  int64_t d_model = 64;
  int64_t num_heads = 4;
  int64_t d_ff = 256;
  int64_t seq_size = 5;
  double dropout_rate = 0.1;
  int64_t sp_max = data::kDefaultSpMax;

  // Optimization.
  int64_t warmup_steps = 400;
  int64_t batch_size = 128;
  int64_t epochs = 10;
  double clip_norm = 5.0;
  double oversample_ratio = 1.0;
  std::string loss = "bce_last";
  uint64_t seed = 1;

  // Data handling.
  int64_t threshold_secs = 3600;
  std::string out_dir = "out";

  // Synthetic-data generation.
  int64_t users = 100;
  int64_t questions = 500;
  int64_t min_sessions = 2;
  int64_t max_sessions = 3;
  int64_t max_session_len = 40;
  double hazard_base = data::HazardSpec{}.base_log_odds;
  double hazard_w_elapsed = data::HazardSpec{}.w_elapsed;
  double hazard_w_position = data::HazardSpec{}.w_position;
  double hazard_w_correct = data::HazardSpec{}.w_correct;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Flat "key = value" lines; blank lines and '#' comments are skipped.
// Raises: config on lines without '=' or with an empty key.
KeyValues parse_config_text(std::istream& in);
KeyValues parse_config_file(const std::string& path);  // io when unreadable

// Applies one key. Raises: config on an unknown key or unparsable value,
// naming the key in the message.
void apply_key(RunConfig& rc, const std::string& key, const std::string& value);

// "paper" (N=4, d_model=512, h=8, ws=6000, dropout 0.5) or "desk"
// (N=2, d_model=64, h=4, ws=400). Empty name is a no-op.
void apply_preset(RunConfig& rc, const std::string& name);

// DAS_<UPPERCASED KEY> environment variables for every known key.
KeyValues env_overrides();

// Full resolution pipeline. The preset comes from `preset_flag` when
// nonempty, otherwise from a "preset" key in the file.
RunConfig resolve_config(const KeyValues& file_kv, const KeyValues& env_kv,
                         const KeyValues& flag_kv, const std::string& preset_flag = "");

// Every key in declaration order as "key=value" lines. Feeding the text back
// through parse_config_text + resolve_config reproduces the same RunConfig.
std::string render_config(const RunConfig& rc);

// Views for the owning modules. model_config raises config when the shape
// knobs are invalid.
model::ModelConfig model_config(const RunConfig& rc, int32_t question_vocab);
train::TrainConfig train_config(const RunConfig& rc);
data::SynthConfig synth_config(const RunConfig& rc);

}  // namespace das::cli
