// Command-line entry point: sessionize / train / evaluate / predict /
// ablate / synth. Every failure is reported as a single
// "error: <category>: <message>" line and the matching exit code.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "das/error.hpp"
#include "das/pipeline.hpp"
#include "das/runconfig.hpp"
#include "das/util.hpp"

namespace {

using das::cli::KeyValues;
using das::cli::RunConfig;

struct CommonFlags {
  std::string config_path;
  std::string preset;
  std::string seed;
  std::string threshold_secs;
  std::string seq_size;
  std::string out_dir;
  std::vector<std::string> sets;  // generic key=value overrides
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "Flat key=value config file");
  cmd->add_option("--preset", flags.preset, "Named preset: 'paper' or 'desk'");
  cmd->add_option("--seed", flags.seed, "Seed for splitting, initialization, and sampling");
  cmd->add_option("--threshold-secs", flags.threshold_secs,
                  "Inactivity gap that starts a new session");
  cmd->add_option("--seq-size", flags.seq_size, "Model window length");
  cmd->add_option("--out-dir", flags.out_dir, "Directory for artifacts (default 'out')");
  cmd->add_option("--set", flags.sets, "Extra key=value override (repeatable)")
      ->expected(-1);
}

RunConfig resolve(const CommonFlags& flags) {
  KeyValues file_kv;
  if (!flags.config_path.empty()) {
    file_kv = das::cli::parse_config_file(flags.config_path);
  }

  KeyValues flag_kv;
  for (const auto& kv : flags.sets) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      das::raise(das::ErrorCategory::config,
                 das::strfmt("--set expects key=value, got '%s'", kv.c_str()));
    }
    flag_kv.emplace_back(das::trim(kv.substr(0, eq)), das::trim(kv.substr(eq + 1)));
  }
  if (!flags.seed.empty()) flag_kv.emplace_back("seed", flags.seed);
  if (!flags.threshold_secs.empty()) flag_kv.emplace_back("threshold_secs", flags.threshold_secs);
  if (!flags.seq_size.empty()) flag_kv.emplace_back("seq_size", flags.seq_size);
  if (!flags.out_dir.empty()) flag_kv.emplace_back("out_dir", flags.out_dir);

  return das::cli::resolve_config(file_kv, das::cli::env_overrides(), flag_kv, flags.preset);
}

void print_epochs(const std::vector<das::train::EpochLog>& epochs) {
  for (const auto& e : epochs) {
    std::fprintf(stdout, "epoch %lld  train_loss %.6f  val_auc %.6f  lr %.6g\n",
                 static_cast<long long>(e.epoch), e.train_loss, e.val_auc, e.lr);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Study-session dropout prediction toolkit"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic activity log with ground truth");
  add_common_flags(synth, flags);

  std::string sessionize_input;
  auto* sessionize =
      app.add_subcommand("sessionize", "Split activity logs into study sessions");
  add_common_flags(sessionize, flags);
  sessionize->add_option("--input", sessionize_input, "Activity log (CSV/TSV)")->required();

  std::string train_input;
  auto* train = app.add_subcommand("train", "Train a dropout model on an activity log");
  add_common_flags(train, flags);
  train->add_option("--input", train_input, "Activity log (CSV/TSV)")->required();

  std::string eval_input, eval_checkpoint, eval_partition, eval_split = "test";
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on an activity log");
  add_common_flags(evaluate, flags);
  evaluate->add_option("--input", eval_input, "Activity log (CSV/TSV)")->required();
  evaluate->add_option("--checkpoint", eval_checkpoint, "Trained checkpoint file")->required();
  evaluate->add_option("--partition", eval_partition,
                       "Partition manifest; restricts evaluation to --split users");
  evaluate->add_option("--split", eval_split, "Which partition split to evaluate (default test)");

  std::string predict_input, predict_checkpoint;
  auto* predict =
      app.add_subcommand("predict", "Print one dropout probability per interaction");
  add_common_flags(predict, flags);
  predict->add_option("--input", predict_input, "Activity log (CSV/TSV)")->required();
  predict->add_option("--checkpoint", predict_checkpoint, "Trained checkpoint file")->required();

  std::string ablate_input, ablate_grid = "features";
  auto* ablate = app.add_subcommand("ablate", "Train and compare feature or window-size grids");
  add_common_flags(ablate, flags);
  ablate->add_option("--input", ablate_input, "Activity log (CSV/TSV)")->required();
  ablate->add_option("--grid", ablate_grid, "'features' or 'seq' (default features)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: config: %s\n", e.what());
    return das::category_exit_code(das::ErrorCategory::config);
  }

  try {
    RunConfig rc = resolve(flags);

    if (synth->parsed()) {
      auto s = das::pipeline::run_synth(rc);
      std::printf("users        %lld\n", static_cast<long long>(s.users));
      std::printf("interactions %lld\n", static_cast<long long>(s.interactions));
      std::printf("sessions     %lld\n", static_cast<long long>(s.sessions));
      std::printf("log          %s\n", s.log_path.c_str());
      std::printf("truth        %s\n", s.truth_path.c_str());
    } else if (sessionize->parsed()) {
      auto s = das::pipeline::run_sessionize(rc, sessionize_input);
      std::printf("%-22s %lld\n", "users", static_cast<long long>(s.stats.user_count));
      std::printf("%-22s %lld\n", "interactions",
                  static_cast<long long>(s.stats.interaction_count));
      std::printf("%-22s %lld\n", "sessions", static_cast<long long>(s.stats.session_count));
      std::printf("%-22s %.4f\n", "sessions_per_user", s.stats.sessions_per_user);
      std::printf("%-22s %.4f\n", "questions_per_session", s.stats.questions_per_session);
      std::printf("%-22s %.4f\n", "dropout_fraction", s.stats.dropout_fraction);
      std::printf("%-22s %.2f\n", "mean_session_minutes", s.stats.mean_session_minutes);
      std::printf("%-22s %zu\n", "rejected_rows", s.rejected_rows);
      std::printf("%-22s %s\n", "sessions_file", s.sessions_path.c_str());
    } else if (train->parsed()) {
      auto s = das::pipeline::run_train(rc, train_input);
      print_epochs(s.epochs);
      std::printf("best_epoch %lld  best_val_auc %.6f\n",
                  static_cast<long long>(s.best_epoch), s.best_val_auc);
      std::printf("checkpoint %s\n", s.checkpoint_path.c_str());
    } else if (evaluate->parsed()) {
      auto s = das::pipeline::run_evaluate(rc, eval_checkpoint, eval_input, eval_partition,
                                           eval_split);
      std::printf("auc          %.6f\n", s.report.auc);
      if (s.report.macro_auc) std::printf("macro_auc    %.6f\n", *s.report.macro_auc);
      std::printf("interactions %zu\n", s.report.interactions);
      std::printf("positives    %zu\n", s.report.positives);
      std::printf("negatives    %zu\n", s.report.negatives);
      std::printf("users        %zu\n", s.report.users);
    } else if (predict->parsed()) {
      auto s = das::pipeline::run_predict(rc, predict_checkpoint, predict_input);
      for (const auto& p : s.predictions) std::printf("%.10g\n", p.probability);
    } else if (ablate->parsed()) {
      auto s = das::pipeline::run_ablate(rc, ablate_input, ablate_grid);
      std::printf("%-12s %-8s %-10s %-12s\n", "name", "seq", "test_auc", "best_val_auc");
      for (const auto& r : s.results) {
        std::printf("%-12s %-8lld %-10.6f %-12.6f\n", r.name.c_str(),
                    static_cast<long long>(r.seq_size), r.test_auc, r.best_val_auc);
      }
    }
    return 0;
  } catch (const das::Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", das::category_name(e.category()), e.what());
    return das::category_exit_code(e.category());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
}
