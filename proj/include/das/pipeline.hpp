#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "das/eval.hpp"
#include "das/runconfig.hpp"
#include "das/sessionizer.hpp"
#include "das/trainer.hpp"

namespace das::pipeline {

// Every operation creates rc.out_dir (recursively) and echoes the effective
// configuration into <out_dir>/run_config.txt before doing anything else, so
// any run can be reproduced from its output directory alone.

struct SynthSummary {
  int64_t users = 0;
  int64_t interactions = 0;
  int64_t sessions = 0;
  std::string log_path;
  std::string truth_path;
};

// Generates a synthetic activity log plus its ground-truth sidecar.
SynthSummary run_synth(const cli::RunConfig& rc);

struct SessionizeSummary {
  data::SessionStats stats;
  size_t rejected_rows = 0;
  std::string sessions_path;   // input rows + session_id, sp, dropout
  std::string stats_path;      // key=value lines
  std::string histogram_path;  // log2-binned inter-action gap counts
};

SessionizeSummary run_sessionize(const cli::RunConfig& rc, const std::string& input_path);

struct TrainSummary {
  std::vector<train::EpochLog> epochs;
  int64_t best_epoch = 0;
  double best_val_auc = 0.0;
  bool diverged = false;
  size_t train_users = 0, val_users = 0, test_users = 0;
  size_t train_windows = 0, val_windows = 0;
  std::string checkpoint_path;
  std::string metrics_path;
  std::string partition_path;
  std::string vocab_path;
  std::string limits_path;
};

// Full training pipeline: parse, sessionize, 7:1:2 user split, vocabulary
// from the training split only, window assembly, training with best-epoch
// retention, and artifact writing. A leakage audit (no validation/test user
// contributes any training window) runs on every invocation and fails the
// run with a contract error if violated.
TrainSummary run_train(const cli::RunConfig& rc, const std::string& input_path);

struct EvaluateSummary {
  eval::EvalReport report;
  std::string report_path;
};

// Scores every interaction of the input log with a trained checkpoint. The
// vocabulary and limits files referenced by the checkpoint metadata must sit
// next to the checkpoint. When `partition_path` is nonempty, only users
// labelled `split` ("train" / "validation" / "test") are evaluated.
EvaluateSummary run_evaluate(const cli::RunConfig& rc, const std::string& checkpoint_path,
                             const std::string& input_path,
                             const std::string& partition_path = "",
                             const std::string& split = "");

struct Prediction {
  std::string user_id;
  int64_t index = 0;  // interaction index within the user's log, 0-based
  double probability = 0.0;
};

struct PredictSummary {
  std::vector<Prediction> predictions;  // users in sorted order, interactions in time order
  std::string predictions_path;
};

PredictSummary run_predict(const cli::RunConfig& rc, const std::string& checkpoint_path,
                           const std::string& input_path);

struct AblateSummary {
  std::vector<eval::AblationResult> results;
  std::string table_path;   // one row per run: name, seq_size, test_auc, best_val_auc
  std::string curves_path;  // one row per (run, epoch): plot-ready learning curves
};

// grid = "features" (cumulative feature ladder) or "seq" (window lengths
// 2, 5, 8, 10, 25 with the full feature set).
AblateSummary run_ablate(const cli::RunConfig& rc, const std::string& input_path,
                         const std::string& grid);

}  // namespace das::pipeline
