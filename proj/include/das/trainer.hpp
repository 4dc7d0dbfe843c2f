#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "das/featureizer.hpp"
#include "das/model.hpp"
#include "das/optim.hpp"

namespace das::train {

// Knobs for one training run. Model shape lives in model::ModelConfig;
// this struct only controls the optimization loop itself.
struct TrainConfig {
  int64_t warmup_steps = 400;
  int64_t batch_size = 128;
  int64_t epochs = 10;
  uint64_t seed = 1;
  double clip_norm = 5.0;         // global gradient-norm ceiling; <=0 disables
  double oversample_ratio = 1.0;  // positive:negative target per epoch; only 1.0 is supported
  std::string loss = "bce_last";  // cross-entropy at the final window position
  bool verbose = false;           // print one line per epoch to stderr
};

// One row of the per-epoch training log.
struct EpochLog {
  int64_t epoch = 0;       // 1-based
  double train_loss = 0;   // mean balanced-batch loss over the epoch
  double val_auc = 0;      // pooled AUC on the validation windows
  double lr = 0;           // learning rate at the last step of the epoch
};

// Outcome of train(): the best-validation weights plus the full log.
struct TrainResult {
  model::ModelParams<float> params;  // weights from the best validation epoch
  std::vector<EpochLog> log;
  int64_t best_epoch = 0;   // 1-based; 0 if no epoch completed
  double best_val_auc = 0;  // AUC of that epoch
  bool diverged = false;    // loss became non-finite; training stopped early
};

// Trains a model on stride-1 windows. Each epoch draws a freshly
// rebalanced (1:1 by final-position label) shuffled pass over the training
// windows, steps Adam under the warmup-then-decay schedule, clips gradients
// by global norm, and scores the validation windows by pooled AUC. The
// weights returned are those of the epoch with the highest validation AUC.
// A non-finite training loss stops the run and returns the best weights
// seen so far with `diverged` set.
//
// Raises: config for bad TrainConfig values, data if the training windows
// are single-class, metric if the validation windows are single-class.
TrainResult train(const std::vector<data::TrainingWindow>& train_windows,
                  const std::vector<data::TrainingWindow>& val_windows,
                  const model::ModelConfig& mcfg, const TrainConfig& tcfg);

}  // namespace das::train
