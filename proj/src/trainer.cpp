#include "das/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "das/error.hpp"
#include "das/eval.hpp"
#include "das/util.hpp"

namespace das::train {

TrainResult train(const std::vector<data::TrainingWindow>& train_windows,
                  const std::vector<data::TrainingWindow>& val_windows,
                  const model::ModelConfig& mcfg, const TrainConfig& tcfg) {
  mcfg.validate();
  if (tcfg.epochs < 0) raise(ErrorCategory::config, "train: epochs must be >= 0");
  if (tcfg.batch_size < 1) raise(ErrorCategory::config, "train: batch_size must be >= 1");
  if (tcfg.warmup_steps < 1) raise(ErrorCategory::config, "train: warmup_steps must be >= 1");
  if (tcfg.oversample_ratio != 1.0) {
    raise(ErrorCategory::config, "train: only a 1:1 oversample_ratio is supported");
  }
  if (tcfg.loss != "bce_last") {
    raise(ErrorCategory::config,
          strfmt("train: unknown loss '%s' (supported: bce_last)", tcfg.loss.c_str()));
  }
  if (train_windows.empty()) raise(ErrorCategory::data, "train: no training windows");
  if (val_windows.empty()) raise(ErrorCategory::data, "train: no validation windows");

  TrainResult result;
  result.params = model::init_params<float>(mcfg, tcfg.seed);
  const model::ModelParams<float> initial = result.params;  // divergence fallback

  std::vector<int> train_labels;
  train_labels.reserve(train_windows.size());
  for (const auto& w : train_windows) train_labels.push_back(w.target_label);
  std::vector<int> val_labels;
  val_labels.reserve(val_windows.size());
  for (const auto& w : val_windows) val_labels.push_back(w.target_label);

  // Separate streams so the balanced-resample draws and the dropout masks
  // are each reproducible on their own.
  std::mt19937_64 sample_rng(tcfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::mt19937_64 dropout_rng(tcfg.seed ^ 0xc2b2ae3d27d4eb4full);

  // Pointer/name lists in the fixed traversal order shared with the
  // optimizer state and checkpoints.
  std::vector<num::Tensor<float>*> param_ptrs;
  std::vector<std::string> names;
  result.params.for_each([&](const std::string& name, num::Tensor<float>& t) {
    names.push_back(name);
    param_ptrs.push_back(&t);
  });

  AdamState<float> adam;
  int64_t global_step = 0;
  model::ModelParams<float> best;
  double best_auc = -1.0;
  int64_t best_epoch = 0;
  const size_t batch_size = static_cast<size_t>(tcfg.batch_size);

  for (int64_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    const std::vector<size_t> order = oversample_indices(train_labels, sample_rng);
    double loss_sum = 0.0;
    double loss_count = 0.0;
    double last_lr = 0.0;
    bool diverged = false;

    for (size_t begin = 0; begin < order.size(); begin += batch_size) {
      const size_t end = std::min(order.size(), begin + batch_size);
      const model::WindowBatch batch =
          model::make_batch_gather(train_windows, order, begin, end, mcfg);

      num::Graph<float> g;
      const model::ParamNodes pn = model::register_params(g, result.params);
      const std::vector<float> targets = batch.targets;
      const model::ForwardNodes fw =
          model::das_forward<float>(g, pn, mcfg, batch, mcfg.dropout_rate, &dropout_rng, &targets);

      const double loss = static_cast<double>(g.value(fw.loss)[0]);
      if (!std::isfinite(loss)) {
        diverged = true;
        break;
      }
      g.backward(fw.loss);

      std::vector<num::Tensor<float>> grads;
      grads.reserve(names.size());
      for (const auto& name : names) grads.push_back(g.grad(pn.at(name)));
      std::vector<num::Tensor<float>*> grad_ptrs;
      std::vector<const num::Tensor<float>*> grad_cptrs;
      grad_ptrs.reserve(grads.size());
      grad_cptrs.reserve(grads.size());
      for (auto& t : grads) {
        grad_ptrs.push_back(&t);
        grad_cptrs.push_back(&t);
      }
      if (tcfg.clip_norm > 0) clip_global_norm(grad_ptrs, tcfg.clip_norm);

      ++global_step;
      last_lr = noam_lr(global_step, mcfg.d_model, tcfg.warmup_steps);
      adam_step(param_ptrs, grad_cptrs, names, adam, last_lr);

      const double weight = static_cast<double>(end - begin);
      loss_sum += loss * weight;
      loss_count += weight;
    }

    if (diverged) {
      result.diverged = true;
      break;
    }

    const double train_loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
    const std::vector<double> val_scores =
        eval::score_windows(result.params, mcfg, val_windows, 256);
    const double val_auc = eval::auc(val_scores, val_labels);
    result.log.push_back({epoch, train_loss, val_auc, last_lr});
    if (tcfg.verbose) {
      std::fprintf(stderr, "epoch %lld  train_loss %.4f  val_auc %.4f  lr %.3g\n",
                   static_cast<long long>(epoch), train_loss, val_auc, last_lr);
    }
    if (val_auc > best_auc) {
      best_auc = val_auc;
      best_epoch = epoch;
      best = result.params;
    }
  }

  if (best_epoch > 0) {
    result.params = std::move(best);
    result.best_epoch = best_epoch;
    result.best_val_auc = best_auc;
  } else if (result.diverged) {
    result.params = initial;  // no epoch finished cleanly; hand back the start point
  }
  return result;
}

}  // namespace das::train
