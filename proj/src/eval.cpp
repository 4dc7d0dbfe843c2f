#include "das/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "das/error.hpp"
#include "das/util.hpp"

namespace das::eval {

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    raise(ErrorCategory::contract,
          strfmt("auc: %zu scores vs %zu labels", scores.size(), labels.size()));
  }
  const size_t n = scores.size();
  size_t positives = 0;
  for (size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      raise(ErrorCategory::contract, strfmt("auc: label %d is not 0/1", labels[i]));
    }
    if (!std::isfinite(scores[i])) {
      raise(ErrorCategory::metric, "auc: scores must be finite");
    }
    positives += static_cast<size_t>(labels[i]);
  }
  const size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    raise(ErrorCategory::metric, "auc is undefined when only one class is present");
  }

  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Rank-sum over positives with average ranks across each tied block.
  double positive_rank_sum = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (size_t k = i; k < j; ++k) {
      if (labels[idx[k]] == 1) positive_rank_sum += avg_rank;
    }
    i = j;
  }
  const double p = static_cast<double>(positives);
  const double u = positive_rank_sum - 0.5 * p * (p + 1.0);
  return u / (p * static_cast<double>(negatives));
}

double auc(const ScoredSet& scored) { return auc(scored.scores, scored.labels); }

std::optional<double> auc_macro(const ScoredSet& scored) {
  if (scored.users.size() != scored.scores.size() || scored.labels.size() != scored.scores.size()) {
    raise(ErrorCategory::contract, "auc_macro: parallel lists have different lengths");
  }
  // Group interactions by user, preserving first-seen order.
  std::vector<std::string> order;
  std::unordered_map<std::string, std::pair<std::vector<double>, std::vector<int>>> groups;
  for (size_t i = 0; i < scored.scores.size(); ++i) {
    auto [it, inserted] = groups.try_emplace(scored.users[i]);
    if (inserted) order.push_back(scored.users[i]);
    it->second.first.push_back(scored.scores[i]);
    it->second.second.push_back(scored.labels[i]);
  }
  double sum = 0.0;
  size_t counted = 0;
  for (const auto& user : order) {
    const auto& [s, l] = groups.at(user);
    const bool has_pos = std::find(l.begin(), l.end(), 1) != l.end();
    const bool has_neg = std::find(l.begin(), l.end(), 0) != l.end();
    if (!has_pos || !has_neg) continue;  // AUC undefined for this user
    sum += auc(s, l);
    ++counted;
  }
  if (counted == 0) return std::nullopt;
  return sum / static_cast<double>(counted);
}

std::vector<double> score_windows(const model::ModelParams<float>& params,
                                  const model::ModelConfig& cfg,
                                  const std::vector<data::TrainingWindow>& windows,
                                  size_t batch_size) {
  if (batch_size == 0) raise(ErrorCategory::config, "score_windows: batch_size must be >= 1");
  std::vector<double> out;
  out.reserve(windows.size());
  for (size_t begin = 0; begin < windows.size(); begin += batch_size) {
    const size_t end = std::min(windows.size(), begin + batch_size);
    model::WindowBatch batch = model::make_batch(windows, begin, end, cfg);
    num::Graph<float> g;
    model::ParamNodes pn = model::register_params(g, params);
    model::ForwardNodes fw = model::das_forward<float>(g, pn, cfg, batch, 0.0f, nullptr, nullptr);
    const num::Tensor<float>& probs = g.value(fw.probs);
    for (int64_t b = 0; b < batch.batch; ++b) {
      out.push_back(static_cast<double>(probs[b * batch.n + (batch.n - 1)]));
    }
  }
  return out;
}

ScoredSet score_users(const model::ModelParams<float>& params, const model::ModelConfig& cfg,
                      const std::vector<UserFrames>& users, size_t batch_size) {
  ScoredSet scored;
  for (const auto& user : users) {
    if (user.frames.empty()) continue;
    const auto windows = data::make_windows(user.frames, cfg.seq_size);
    const auto scores = score_windows(params, cfg, windows, batch_size);
    for (size_t i = 0; i < windows.size(); ++i) {
      scored.scores.push_back(scores[i]);
      scored.labels.push_back(windows[i].target_label);
      scored.users.push_back(user.user_id);
      scored.indices.push_back(static_cast<int64_t>(i));
    }
  }
  return scored;
}

EvalReport evaluate_users(const model::ModelParams<float>& params, const model::ModelConfig& cfg,
                          const std::vector<UserFrames>& users, size_t batch_size) {
  const ScoredSet scored = score_users(params, cfg, users, batch_size);
  if (scored.scores.empty()) {
    raise(ErrorCategory::data, "evaluate: no interactions to score");
  }
  EvalReport report;
  report.interactions = scored.scores.size();
  for (int label : scored.labels) {
    if (label == 1) {
      ++report.positives;
    } else {
      ++report.negatives;
    }
  }
  report.users = users.size();
  report.auc = auc(scored);
  report.macro_auc = auc_macro(scored);
  return report;
}

std::vector<AblationRun> feature_ablation_runs(int64_t seq_size) {
  model::FeatureToggles base;
  base.e_id = true;
  base.e_cat = true;
  base.e_st = false;
  base.e_p = true;
  base.e_sp = false;
  base.l_r = true;
  base.l_et = false;
  base.l_st = false;
  base.l_iot = false;
  base.l_d = false;
  base.l_p = true;
  base.l_sp = false;

  std::vector<AblationRun> runs;
  runs.push_back({"base", base, seq_size});

  base.e_st = true;
  base.l_st = true;
  runs.push_back({"add_st", base, seq_size});

  base.l_iot = true;
  runs.push_back({"add_iot", base, seq_size});

  base.l_et = true;
  runs.push_back({"add_et", base, seq_size});

  base.e_sp = true;
  base.l_sp = true;
  base.l_d = true;
  runs.push_back({"add_sp_d", base, seq_size});
  return runs;
}

std::vector<AblationRun> sequence_size_runs(std::vector<int64_t> sizes) {
  std::vector<AblationRun> runs;
  for (int64_t size : sizes) {
    runs.push_back({strfmt("seq_%lld", static_cast<long long>(size)), model::FeatureToggles{},
                    size});
  }
  return runs;
}

namespace {

std::vector<data::TrainingWindow> windows_for(const std::vector<UserFrames>& users,
                                              int64_t seq_size) {
  std::vector<data::TrainingWindow> windows;
  for (const auto& user : users) {
    if (user.frames.empty()) continue;
    auto w = data::make_windows(user.frames, seq_size);
    windows.insert(windows.end(), std::make_move_iterator(w.begin()),
                   std::make_move_iterator(w.end()));
  }
  return windows;
}

}  // namespace

std::vector<AblationResult> run_ablation(const std::vector<AblationRun>& runs,
                                         const AblationData& data, model::ModelConfig mcfg,
                                         train::TrainConfig tcfg) {
  if (runs.empty()) raise(ErrorCategory::config, "run_ablation: no runs given");
  std::vector<AblationResult> results;
  results.reserve(runs.size());
  for (const auto& run : runs) {
    model::ModelConfig cell = mcfg;
    cell.features = run.features;
    cell.seq_size = run.seq_size;
    cell.validate();

    const auto train_windows = windows_for(data.train, cell.seq_size);
    const auto val_windows = windows_for(data.validation, cell.seq_size);
    const train::TrainResult trained = train::train(train_windows, val_windows, cell, tcfg);
    const EvalReport report = evaluate_users(trained.params, cell, data.test);

    AblationResult row;
    row.name = run.name;
    row.seq_size = run.seq_size;
    row.test_auc = report.auc;
    row.best_val_auc = trained.best_val_auc;
    row.epochs = trained.log;
    results.push_back(std::move(row));
  }
  return results;
}

}  // namespace das::eval
