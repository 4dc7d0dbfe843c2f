#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "das/featureizer.hpp"
#include "das/model.hpp"
#include "das/trainer.hpp"

namespace das::eval {

// Parallel score/label lists with the identity of each scored interaction.
struct ScoredSet {
  std::vector<double> scores;      // model probability for "session ends here"
  std::vector<int> labels;         // observed end-of-session flag, 0/1
  std::vector<std::string> users;  // owning user of each interaction
  std::vector<int64_t> indices;    // interaction index within the user's log
};

// Area under the ROC curve via the Mann-Whitney rank-sum with average ranks
// for ties: P(score+ > score-) + 0.5 * P(tie), computed exactly.
// Raises: metric if only one class is present or a score is non-finite,
// contract on length mismatch or labels outside {0,1}.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);
double auc(const ScoredSet& scored);

// Mean of the per-user AUCs over users whose interactions contain both
// classes; empty when no user qualifies.
std::optional<double> auc_macro(const ScoredSet& scored);

// Probability at the final window position for each window, batched at
// `batch_size`. The result is independent of the batch partitioning.
std::vector<double> score_windows(const model::ModelParams<float>& params,
                                  const model::ModelConfig& cfg,
                                  const std::vector<data::TrainingWindow>& windows,
                                  size_t batch_size = 256);

// Feature rows for one user, in interaction order.
struct UserFrames {
  std::string user_id;
  std::vector<data::FeatureFrame> frames;
};

// Scores every interaction of every user exactly once, through the stride-1
// window that ends at it (window length = cfg.seq_size).
ScoredSet score_users(const model::ModelParams<float>& params, const model::ModelConfig& cfg,
                      const std::vector<UserFrames>& users, size_t batch_size = 256);

struct EvalReport {
  double auc = 0;                   // pooled over all interactions
  std::optional<double> macro_auc;  // per-user mean, when computable
  size_t interactions = 0;
  size_t positives = 0;
  size_t negatives = 0;
  size_t users = 0;
};

// Pooled evaluation over a split: one score per interaction, AUC across all
// users together (macro mean reported alongside).
EvalReport evaluate_users(const model::ModelParams<float>& params, const model::ModelConfig& cfg,
                          const std::vector<UserFrames>& users, size_t batch_size = 256);

// One experiment cell: a feature subset and a window length.
struct AblationRun {
  std::string name;
  model::FeatureToggles features;
  int64_t seq_size = 5;
};

// The cumulative feature ladder: base (question id + category + position on
// the question side, correctness + position on the response side), then
// adding start time, on-time flag, elapsed time, and finally session
// position + previous-dropout.
std::vector<AblationRun> feature_ablation_runs(int64_t seq_size = 5);

// Full feature set across a list of window lengths.
std::vector<AblationRun> sequence_size_runs(std::vector<int64_t> sizes = {2, 5, 8, 10, 25});

struct AblationResult {
  std::string name;
  int64_t seq_size = 0;
  double test_auc = 0;
  double best_val_auc = 0;
  std::vector<train::EpochLog> epochs;  // per-epoch loss / validation-AUC curve
};

struct AblationData {
  std::vector<UserFrames> train;
  std::vector<UserFrames> validation;
  std::vector<UserFrames> test;
};

// Trains and evaluates one model per run on shared splits and seed. Windows
// are rebuilt per run so each cell sees its own seq_size.
std::vector<AblationResult> run_ablation(const std::vector<AblationRun>& runs,
                                         const AblationData& data, model::ModelConfig mcfg,
                                         train::TrainConfig tcfg);

}  // namespace das::eval
