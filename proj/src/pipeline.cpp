#include "das/pipeline.hpp"

#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "das/checkpoint.hpp"
#include "das/error.hpp"
#include "das/featureizer.hpp"
#include "das/ingest.hpp"
#include "das/synthgen.hpp"
#include "das/util.hpp"

namespace das::pipeline {

namespace fs = std::filesystem;

namespace {

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.good()) raise(ErrorCategory::io, strfmt("cannot open '%s' for writing", path.c_str()));
  out << text;
  out.flush();
  if (!out.good()) raise(ErrorCategory::io, strfmt("failed writing '%s'", path.c_str()));
}

// Creates the output directory and logs the effective configuration so the
// run can be replayed with `--config <out_dir>/run_config.txt`.
void prepare_out_dir(const cli::RunConfig& rc) {
  if (rc.out_dir.empty()) raise(ErrorCategory::config, "out_dir must not be empty");
  std::error_code ec;
  fs::create_directories(rc.out_dir, ec);
  if (ec) {
    raise(ErrorCategory::io,
          strfmt("cannot create output directory '%s': %s", rc.out_dir.c_str(),
                 ec.message().c_str()));
  }
  write_text_file(join(rc.out_dir, "run_config.txt"), cli::render_config(rc));
}

data::ParsedLog load_log(const std::string& input_path) {
  auto parsed = data::parse_log_file(input_path);
  if (parsed.users.empty()) {
    raise(ErrorCategory::data,
          strfmt("'%s' contains no valid interactions", input_path.c_str()));
  }
  return parsed;
}

std::vector<eval::UserFrames> frames_of(const std::vector<data::SessionizedSequence>& seqs,
                                        const data::Vocab& vocab,
                                        const data::LimitsConfig& limits, int32_t sp_max) {
  std::vector<eval::UserFrames> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) {
    out.push_back({s.user_id, data::extract_features(s, vocab, limits, sp_max)});
  }
  return out;
}

struct SplitSequences {
  data::UserPartition partition;
  std::vector<data::SessionizedSequence> train, validation, test;
};

SplitSequences split_sequences(const std::vector<data::SessionizedSequence>& seqs,
                               uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(seqs.size());
  for (const auto& s : seqs) ids.push_back(s.user_id);

  SplitSequences out;
  out.partition = data::split_users(ids, {7, 1, 2}, seed);
  std::unordered_set<std::string> train_set(out.partition.train.begin(),
                                            out.partition.train.end());
  std::unordered_set<std::string> val_set(out.partition.validation.begin(),
                                          out.partition.validation.end());
  for (const auto& s : seqs) {
    if (train_set.count(s.user_id)) {
      out.train.push_back(s);
    } else if (val_set.count(s.user_id)) {
      out.validation.push_back(s);
    } else {
      out.test.push_back(s);
    }
  }
  if (out.train.empty() || out.validation.empty() || out.test.empty()) {
    raise(ErrorCategory::data,
          strfmt("7:1:2 user split needs more users (got %zu: %zu train, %zu validation, "
                 "%zu test)",
                 seqs.size(), out.train.size(), out.validation.size(), out.test.size()));
  }
  return out;
}

// Independent check that no validation/test user contributed a training
// window. `window_users[i]` is the owner of training window i.
void audit_leakage(const std::vector<std::string>& window_users,
                   const data::UserPartition& partition) {
  std::unordered_set<std::string> train_set(partition.train.begin(), partition.train.end());
  std::unordered_set<std::string> held_out(partition.validation.begin(),
                                           partition.validation.end());
  held_out.insert(partition.test.begin(), partition.test.end());
  for (const auto& u : partition.train) {
    if (held_out.count(u)) {
      raise(ErrorCategory::contract,
            strfmt("leakage audit failed: user '%s' is in two splits", u.c_str()));
    }
  }
  for (const auto& u : window_users) {
    if (held_out.count(u) || !train_set.count(u)) {
      raise(ErrorCategory::contract,
            strfmt("leakage audit failed: training window from non-training user '%s'",
                   u.c_str()));
    }
  }
}

std::string format_metric(double v) { return strfmt("%.10g", v); }

std::string metrics_text(const std::vector<train::EpochLog>& epochs) {
  std::ostringstream out;
  out << "epoch\ttrain_loss\tval_auc\tlr\n";
  for (const auto& e : epochs) {
    out << e.epoch << '\t' << format_metric(e.train_loss) << '\t' << format_metric(e.val_auc)
        << '\t' << format_metric(e.lr) << '\n';
  }
  return out.str();
}

struct LoadedModel {
  model::Checkpoint ckpt;
  data::Vocab vocab;
  data::LimitsConfig limits;
  int64_t threshold_secs = 3600;
};

LoadedModel load_model(const std::string& checkpoint_path, const cli::RunConfig& rc) {
  LoadedModel lm;
  lm.ckpt = model::load_checkpoint(checkpoint_path);
  const std::string dir = fs::path(checkpoint_path).parent_path().string();

  auto sibling = [&dir](const std::string& name) {
    if (fs::path(name).is_absolute()) return name;
    return dir.empty() ? name : join(dir, name);
  };
  auto meta_or = [&lm](const char* key, const std::string& fallback) {
    auto it = lm.ckpt.meta.find(key);
    return it == lm.ckpt.meta.end() ? fallback : it->second;
  };

  lm.vocab = data::read_vocab_file(sibling(meta_or("vocab_file", "vocab.txt")));
  lm.limits = data::read_limits_file(sibling(meta_or("limits_file", "limits.txt")));
  if (lm.vocab.question_count() != lm.ckpt.config.question_vocab) {
    raise(ErrorCategory::compat,
          strfmt("vocabulary has %d questions but the checkpoint expects %d",
                 lm.vocab.question_count(), lm.ckpt.config.question_vocab));
  }

  lm.threshold_secs = rc.threshold_secs;
  auto it = lm.ckpt.meta.find("threshold_secs");
  if (it != lm.ckpt.meta.end()) {
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(it->second.c_str(), &end, 10);
    if (errno != 0 || end == it->second.c_str() || *end != '\0' || v <= 0) {
      raise(ErrorCategory::compat,
            strfmt("checkpoint records an invalid threshold_secs '%s'", it->second.c_str()));
    }
    lm.threshold_secs = v;
  }
  return lm;
}

std::vector<data::UserLog> filter_by_partition(std::vector<data::UserLog> users,
                                               const std::string& partition_path,
                                               const std::string& split) {
  auto partition = data::read_partition(partition_path);
  const std::vector<std::string>* wanted = nullptr;
  if (split == "train") {
    wanted = &partition.train;
  } else if (split == "validation") {
    wanted = &partition.validation;
  } else if (split == "test") {
    wanted = &partition.test;
  } else {
    raise(ErrorCategory::config,
          strfmt("unknown split '%s' (expected train, validation, or test)", split.c_str()));
  }
  std::unordered_set<std::string> keep(wanted->begin(), wanted->end());
  std::vector<data::UserLog> out;
  for (auto& u : users) {
    if (keep.count(u.user_id)) out.push_back(std::move(u));
  }
  if (out.empty()) {
    raise(ErrorCategory::data,
          strfmt("no users of the input log are labelled '%s' in '%s'", split.c_str(),
                 partition_path.c_str()));
  }
  return out;
}

}  // namespace

SynthSummary run_synth(const cli::RunConfig& rc) {
  prepare_out_dir(rc);
  auto result = data::generate(cli::synth_config(rc));

  SynthSummary summary;
  summary.users = static_cast<int64_t>(result.users.size());
  summary.interactions = result.interactions();
  summary.sessions = result.sessions();
  summary.log_path = join(rc.out_dir, "synth_log.csv");
  summary.truth_path = join(rc.out_dir, "synth_truth.tsv");
  data::write_log_file(result, summary.log_path);
  data::write_truth_file(result, summary.truth_path);
  return summary;
}

SessionizeSummary run_sessionize(const cli::RunConfig& rc, const std::string& input_path) {
  prepare_out_dir(rc);
  auto parsed = load_log(input_path);
  auto seqs = data::sessionize_all(parsed.users, rc.threshold_secs);

  SessionizeSummary summary;
  summary.stats = data::session_stats(seqs);
  summary.rejected_rows = parsed.rejections.size();
  summary.sessions_path = join(rc.out_dir, "sessions.tsv");
  summary.stats_path = join(rc.out_dir, "session_stats.txt");
  summary.histogram_path = join(rc.out_dir, "gap_histogram.tsv");

  std::ostringstream rows;
  rows << "user_id\ttimestamp\tquestion_id\tuser_answer\tcorrectness\telapsed_time\tpart"
          "\tsession_id\tsp\tdropout\n";
  for (const auto& seq : seqs) {
    for (const auto& sr : seq.records) {
      const auto& r = sr.rec;
      rows << r.user_id << '\t' << r.timestamp_ms << '\t' << r.question_id << '\t'
           << r.user_answer << '\t' << r.correctness << '\t' << r.elapsed_ms << '\t' << r.part
           << '\t' << sr.session_id << '\t' << sr.sp << '\t' << sr.dropout << '\n';
    }
  }
  write_text_file(summary.sessions_path, rows.str());

  const auto& st = summary.stats;
  std::ostringstream stats;
  stats << "users=" << st.user_count << '\n'
        << "interactions=" << st.interaction_count << '\n'
        << "sessions=" << st.session_count << '\n'
        << "sessions_per_user=" << format_metric(st.sessions_per_user) << '\n'
        << "questions_per_session=" << format_metric(st.questions_per_session) << '\n'
        << "dropout_fraction=" << format_metric(st.dropout_fraction) << '\n'
        << "mean_session_minutes=" << format_metric(st.mean_session_minutes) << '\n'
        << "rejected_rows=" << summary.rejected_rows << '\n';
  write_text_file(summary.stats_path, stats.str());

  std::ostringstream hist;
  hist << "bin\tgap_ms_low\tgap_ms_high\tcount\n";
  for (const auto& [bin, count] : data::gap_histogram(seqs)) {
    int64_t low = bin == 0 ? 0 : (int64_t{1} << bin);
    int64_t high = (int64_t{1} << (bin + 1)) - 1;
    hist << bin << '\t' << low << '\t' << high << '\t' << count << '\n';
  }
  write_text_file(summary.histogram_path, hist.str());
  return summary;
}

TrainSummary run_train(const cli::RunConfig& rc, const std::string& input_path) {
  prepare_out_dir(rc);
  auto parsed = load_log(input_path);
  auto seqs = data::sessionize_all(parsed.users, rc.threshold_secs);
  auto splits = split_sequences(seqs, rc.seed);

  TrainSummary summary;
  summary.partition_path = join(rc.out_dir, "partition.tsv");
  data::write_partition(splits.partition, summary.partition_path);

  auto vocab = data::build_vocab(splits.train);
  summary.vocab_path = join(rc.out_dir, "vocab.txt");
  data::write_vocab_file(vocab, summary.vocab_path);

  data::LimitsConfig limits;
  summary.limits_path = join(rc.out_dir, "limits.txt");
  data::write_limits_file(limits, summary.limits_path);

  auto mcfg = cli::model_config(rc, vocab.question_count());

  std::vector<data::TrainingWindow> train_windows, val_windows;
  std::vector<std::string> window_users;
  for (const auto& s : splits.train) {
    auto frames = data::extract_features(s, vocab, limits, mcfg.sp_max);
    for (auto& w : data::make_windows(frames, mcfg.seq_size)) {
      train_windows.push_back(std::move(w));
      window_users.push_back(s.user_id);
    }
  }
  for (const auto& s : splits.validation) {
    auto frames = data::extract_features(s, vocab, limits, mcfg.sp_max);
    for (auto& w : data::make_windows(frames, mcfg.seq_size)) {
      val_windows.push_back(std::move(w));
    }
  }
  audit_leakage(window_users, splits.partition);

  summary.train_users = splits.train.size();
  summary.val_users = splits.validation.size();
  summary.test_users = splits.test.size();
  summary.train_windows = train_windows.size();
  summary.val_windows = val_windows.size();

  auto tcfg = cli::train_config(rc);
  tcfg.verbose = true;
  auto result = train::train(train_windows, val_windows, mcfg, tcfg);
  summary.epochs = result.log;
  summary.best_epoch = result.best_epoch;
  summary.best_val_auc = result.best_val_auc;
  summary.diverged = result.diverged;

  summary.metrics_path = join(rc.out_dir, "metrics.tsv");
  write_text_file(summary.metrics_path, metrics_text(result.log));

  std::map<std::string, std::string> meta = {
      {"vocab_file", "vocab.txt"},
      {"limits_file", "limits.txt"},
      {"threshold_secs", std::to_string(rc.threshold_secs)},
      {"seed", std::to_string(rc.seed)},
      {"best_epoch", std::to_string(result.best_epoch)},
      {"best_val_auc", format_metric(result.best_val_auc)},
      {"leakage_audit", "pass"},
  };
  summary.checkpoint_path = join(rc.out_dir, "checkpoint.das");
  model::save_checkpoint(summary.checkpoint_path, mcfg, result.params, meta);

  if (result.diverged) {
    raise(ErrorCategory::data,
          strfmt("training diverged (non-finite loss) after epoch %zu; the best checkpoint "
                 "so far was kept at '%s'",
                 result.log.size(), summary.checkpoint_path.c_str()));
  }
  return summary;
}

EvaluateSummary run_evaluate(const cli::RunConfig& rc, const std::string& checkpoint_path,
                             const std::string& input_path, const std::string& partition_path,
                             const std::string& split) {
  prepare_out_dir(rc);
  auto lm = load_model(checkpoint_path, rc);
  auto parsed = load_log(input_path);
  auto users = std::move(parsed.users);
  if (!partition_path.empty()) {
    users = filter_by_partition(std::move(users), partition_path, split);
  }
  auto seqs = data::sessionize_all(users, lm.threshold_secs);
  auto frames = frames_of(seqs, lm.vocab, lm.limits, lm.ckpt.config.sp_max);

  EvaluateSummary summary;
  summary.report = eval::evaluate_users(lm.ckpt.params, lm.ckpt.config, frames);
  summary.report_path = join(rc.out_dir, "eval_report.tsv");

  std::ostringstream out;
  out << "metric\tvalue\n";
  out << "auc\t" << format_metric(summary.report.auc) << '\n';
  if (summary.report.macro_auc) {
    out << "macro_auc\t" << format_metric(*summary.report.macro_auc) << '\n';
  }
  out << "interactions\t" << summary.report.interactions << '\n';
  out << "positives\t" << summary.report.positives << '\n';
  out << "negatives\t" << summary.report.negatives << '\n';
  out << "users\t" << summary.report.users << '\n';
  write_text_file(summary.report_path, out.str());
  return summary;
}

PredictSummary run_predict(const cli::RunConfig& rc, const std::string& checkpoint_path,
                           const std::string& input_path) {
  prepare_out_dir(rc);
  auto lm = load_model(checkpoint_path, rc);
  auto parsed = load_log(input_path);
  auto seqs = data::sessionize_all(parsed.users, lm.threshold_secs);
  auto frames = frames_of(seqs, lm.vocab, lm.limits, lm.ckpt.config.sp_max);
  auto scored = eval::score_users(lm.ckpt.params, lm.ckpt.config, frames);

  PredictSummary summary;
  summary.predictions.reserve(scored.scores.size());
  for (size_t i = 0; i < scored.scores.size(); ++i) {
    summary.predictions.push_back({scored.users[i], scored.indices[i], scored.scores[i]});
  }
  summary.predictions_path = join(rc.out_dir, "predictions.tsv");
  std::ostringstream out;
  out << "user_id\tindex\tprobability\n";
  for (const auto& p : summary.predictions) {
    out << p.user_id << '\t' << p.index << '\t' << format_metric(p.probability) << '\n';
  }
  write_text_file(summary.predictions_path, out.str());
  return summary;
}

AblateSummary run_ablate(const cli::RunConfig& rc, const std::string& input_path,
                         const std::string& grid) {
  prepare_out_dir(rc);

  std::vector<eval::AblationRun> runs;
  if (grid == "features") {
    runs = eval::feature_ablation_runs(rc.seq_size);
  } else if (grid == "seq") {
    runs = eval::sequence_size_runs();
  } else {
    raise(ErrorCategory::config,
          strfmt("unknown ablation grid '%s' (expected 'features' or 'seq')", grid.c_str()));
  }

  auto parsed = load_log(input_path);
  auto seqs = data::sessionize_all(parsed.users, rc.threshold_secs);
  auto splits = split_sequences(seqs, rc.seed);
  auto vocab = data::build_vocab(splits.train);
  data::LimitsConfig limits;
  auto mcfg = cli::model_config(rc, vocab.question_count());

  eval::AblationData ablation_data;
  ablation_data.train = frames_of(splits.train, vocab, limits, mcfg.sp_max);
  ablation_data.validation = frames_of(splits.validation, vocab, limits, mcfg.sp_max);
  ablation_data.test = frames_of(splits.test, vocab, limits, mcfg.sp_max);

  AblateSummary summary;
  summary.results = eval::run_ablation(runs, ablation_data, mcfg, cli::train_config(rc));

  summary.table_path = join(rc.out_dir, "ablation.tsv");
  std::ostringstream table;
  table << "name\tseq_size\ttest_auc\tbest_val_auc\n";
  for (const auto& r : summary.results) {
    table << r.name << '\t' << r.seq_size << '\t' << format_metric(r.test_auc) << '\t'
          << format_metric(r.best_val_auc) << '\n';
  }
  write_text_file(summary.table_path, table.str());

  summary.curves_path = join(rc.out_dir, "curves.tsv");
  std::ostringstream curves;
  curves << "name\tepoch\ttrain_loss\tval_auc\tlr\n";
  for (const auto& r : summary.results) {
    for (const auto& e : r.epochs) {
      curves << r.name << '\t' << e.epoch << '\t' << format_metric(e.train_loss) << '\t'
             << format_metric(e.val_auc) << '\t' << format_metric(e.lr) << '\n';
    }
  }
  write_text_file(summary.curves_path, curves.str());
  return summary;
}

}  // namespace das::pipeline
