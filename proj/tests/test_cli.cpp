#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "das/checkpoint.hpp"
#include "das/error.hpp"
#include "das/ingest.hpp"
#include "das/pipeline.hpp"
#include "das/runconfig.hpp"
#include "das/synthgen.hpp"
#include "doctest.h"

using das::Error;
using das::ErrorCategory;
using namespace das::cli;

namespace fs = std::filesystem;

namespace {

KeyValues parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config_text(in);
}

ErrorCategory category_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.category();
  }
  FAIL("expected an error");
  return ErrorCategory::config;
}

// Fresh scratch directory per test case.
struct TempDir {
  fs::path path;
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path = fs::temp_directory_path() / ("das_cli_test_" + std::to_string(rng()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string sub(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

size_t line_count(const std::string& text) {
  size_t n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

// Small but trainable dataset shared by the pipeline cases.
RunConfig tiny_run_config(const TempDir& dir, const std::string& out_name) {
  RunConfig rc;
  rc.out_dir = dir.sub(out_name);
  rc.users = 40;
  rc.questions = 30;
  rc.d_model = 16;
  rc.num_heads = 2;
  rc.d_ff = 32;
  rc.epochs = 1;
  rc.warmup_steps = 20;
  rc.seed = 3;
  return rc;
}

std::string make_tiny_log(const TempDir& dir) {
  RunConfig rc = tiny_run_config(dir, "gen");
  auto summary = das::pipeline::run_synth(rc);
  return summary.log_path;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("config text parses keys, comments, and blank lines") {
  auto kv = parse_text("# comment\n\n d_model = 128 \nseed=9\r\npreset=desk\n");
  REQUIRE(kv.size() == 3);
  CHECK(kv[0].first == "d_model");
  CHECK(kv[0].second == "128");
  CHECK(kv[1].first == "seed");
  CHECK(kv[1].second == "9");
  CHECK(kv[2].first == "preset");
  CHECK(kv[2].second == "desk");

  CHECK(category_of([] { parse_text("novalue\n"); }) == ErrorCategory::config);
  CHECK(category_of([] { parse_text("=5\n"); }) == ErrorCategory::config);
}

TEST_CASE("presets pin the published model shapes") {
  RunConfig rc;
  apply_preset(rc, "paper");
  CHECK(rc.num_blocks == 4);
  CHECK(rc.d_model == 512);
  CHECK(rc.num_heads == 8);
  CHECK(rc.d_ff == 2048);
  CHECK(rc.seq_size == 5);
  CHECK(rc.dropout_rate == doctest::Approx(0.5));
  CHECK(rc.warmup_steps == 6000);

  apply_preset(rc, "desk");
  CHECK(rc.num_blocks == 2);
  CHECK(rc.d_model == 64);
  CHECK(rc.num_heads == 4);
  CHECK(rc.d_ff == 256);
  CHECK(rc.warmup_steps == 400);

  CHECK(category_of([&] { apply_preset(rc, "huge"); }) == ErrorCategory::config);
  apply_preset(rc, "");  // no-op
  CHECK(rc.d_model == 64);
}

TEST_CASE("precedence runs defaults < preset < file < env < flags") {
  KeyValues file_kv = {{"preset", "paper"}, {"d_model", "128"}, {"epochs", "4"}};
  KeyValues env_kv = {{"epochs", "6"}, {"seed", "42"}};
  KeyValues flag_kv = {{"seed", "7"}};
  RunConfig rc = resolve_config(file_kv, env_kv, flag_kv);
  CHECK(rc.preset == "paper");
  CHECK(rc.num_blocks == 4);    // from the preset
  CHECK(rc.d_model == 128);     // file overrides the preset
  CHECK(rc.epochs == 6);        // env overrides the file
  CHECK(rc.seed == 7);          // flag overrides env
  CHECK(rc.batch_size == 128);  // untouched default

  // A preset flag beats the file's preset key.
  RunConfig rc2 = resolve_config(file_kv, {}, {}, "desk");
  CHECK(rc2.d_model == 128);  // file keys still apply on top
  CHECK(rc2.num_blocks == 2);
}

TEST_CASE("unknown keys and unparsable values name the key") {
  RunConfig rc;
  try {
    apply_key(rc, "learning_rate", "0.1");
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::config);
    CHECK(std::string(e.what()).find("learning_rate") != std::string::npos);
  }
  try {
    apply_key(rc, "d_model", "tiny");
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::config);
    CHECK(std::string(e.what()).find("d_model") != std::string::npos);
  }
  CHECK(category_of([&] { apply_key(rc, "seed", "-1"); }) == ErrorCategory::config);
}

TEST_CASE("rendered config reproduces the same effective config") {
  RunConfig rc = resolve_config({{"preset", "paper"}, {"dropout_rate", "0.3"}}, {},
                                {{"seed", "123"}, {"hazard_base", "-5.25"}});
  auto kv = parse_text(render_config(rc));
  RunConfig back = resolve_config(kv, {}, {});
  CHECK(render_config(back) == render_config(rc));
  CHECK(back.dropout_rate == rc.dropout_rate);
  CHECK(back.seed == rc.seed);
  CHECK(back.hazard_base == rc.hazard_base);
}

TEST_CASE("environment overrides are read for known keys only") {
  setenv("DAS_EPOCHS", "3", 1);
  setenv("DAS_UNRELATED", "x", 1);
  auto kv = env_overrides();
  unsetenv("DAS_EPOCHS");
  unsetenv("DAS_UNRELATED");
  bool saw_epochs = false;
  for (const auto& [k, v] : kv) {
    CHECK(k != "unrelated");
    if (k == "epochs") {
      saw_epochs = true;
      CHECK(v == "3");
    }
  }
  CHECK(saw_epochs);
}

TEST_CASE("module views carry the resolved knobs") {
  RunConfig rc;
  rc.d_model = 32;
  rc.num_heads = 2;
  rc.d_ff = 64;
  rc.dropout_rate = 0.25;
  auto mcfg = model_config(rc, 17);
  CHECK(mcfg.d_model == 32);
  CHECK(mcfg.question_vocab == 17);
  CHECK(mcfg.dropout_rate == doctest::Approx(0.25f));

  rc.d_model = 30;  // not divisible by heads after validate
  rc.num_heads = 4;
  CHECK(category_of([&] { model_config(rc, 17); }) == ErrorCategory::config);

  rc = RunConfig{};
  rc.batch_size = 77;
  rc.seed = 5;
  auto tcfg = train_config(rc);
  CHECK(tcfg.batch_size == 77);
  CHECK(tcfg.seed == 5);

  rc.users = 9;
  rc.hazard_w_elapsed = 1.25;
  auto scfg = synth_config(rc);
  CHECK(scfg.users == 9);
  CHECK(scfg.hazard.w_elapsed == 1.25);
}

TEST_CASE("synth writes a log, a truth sidecar, and the effective config") {
  TempDir dir;
  RunConfig rc = tiny_run_config(dir, "gen");
  auto s = das::pipeline::run_synth(rc);
  CHECK(s.users == 40);
  CHECK(s.interactions > 0);
  CHECK(s.sessions >= 2 * 40);
  CHECK(fs::exists(s.log_path));
  CHECK(fs::exists(s.truth_path));
  auto echoed = slurp(dir.sub("gen/run_config.txt"));
  CHECK(echoed.find("users=40") != std::string::npos);

  auto truth = das::data::read_truth_file(s.truth_path);
  CHECK(static_cast<int64_t>(truth.size()) == s.interactions);
}

TEST_CASE("sessionize writes rows, stats, and the gap histogram") {
  TempDir dir;
  auto log_path = make_tiny_log(dir);
  RunConfig rc = tiny_run_config(dir, "sess");
  auto s = das::pipeline::run_sessionize(rc, log_path);
  CHECK(s.stats.user_count == 40);
  CHECK(s.rejected_rows == 0);

  auto rows = slurp(s.sessions_path);
  CHECK(line_count(rows) == static_cast<size_t>(s.stats.interaction_count) + 1);
  CHECK(rows.rfind("user_id\ttimestamp\tquestion_id\tuser_answer\tcorrectness\telapsed_time"
                   "\tpart\tsession_id\tsp\tdropout\n",
                   0) == 0);

  auto stats = slurp(s.stats_path);
  CHECK(stats.find("sessions=") != std::string::npos);
  auto hist = slurp(s.histogram_path);
  CHECK(hist.rfind("bin\t", 0) == 0);
  CHECK(line_count(hist) >= 2);

  CHECK(category_of([&] {
          das::pipeline::run_sessionize(rc, dir.sub("missing.csv"));
        }) == ErrorCategory::io);
}

TEST_CASE("train writes every artifact and survives a replay of its config") {
  TempDir dir;
  auto log_path = make_tiny_log(dir);
  RunConfig rc = tiny_run_config(dir, "run");
  auto s = das::pipeline::run_train(rc, log_path);

  CHECK(s.epochs.size() == 1);
  CHECK(!s.diverged);
  CHECK(s.best_epoch == 1);
  CHECK(s.train_users + s.val_users + s.test_users == 40);
  CHECK(s.val_users == 4);
  CHECK(s.test_users == 8);
  CHECK(s.train_windows > 0);
  for (const char* name :
       {"checkpoint.das", "metrics.tsv", "partition.tsv", "vocab.txt", "limits.txt",
        "run_config.txt"}) {
    CHECK(fs::exists(dir.sub(std::string("run/") + name)));
  }

  auto metrics = slurp(s.metrics_path);
  CHECK(metrics.rfind("epoch\ttrain_loss\tval_auc\tlr\n", 0) == 0);
  CHECK(line_count(metrics) == 2);

  auto ckpt = das::model::load_checkpoint(s.checkpoint_path);
  CHECK(ckpt.meta.at("vocab_file") == "vocab.txt");
  CHECK(ckpt.meta.at("leakage_audit") == "pass");
  CHECK(ckpt.meta.at("threshold_secs") == "3600");

  // Same seed, fresh directory: byte-identical metrics and checkpoint.
  RunConfig rc2 = tiny_run_config(dir, "run_b");
  auto s2 = das::pipeline::run_train(rc2, log_path);
  CHECK(slurp(s2.metrics_path) == metrics);
  CHECK(slurp(s2.checkpoint_path) == slurp(s.checkpoint_path));
}

TEST_CASE("evaluate scores held-out users against a trained checkpoint") {
  TempDir dir;
  auto log_path = make_tiny_log(dir);
  RunConfig rc = tiny_run_config(dir, "run");
  auto trained = das::pipeline::run_train(rc, log_path);

  RunConfig erc = tiny_run_config(dir, "eval");
  auto s = das::pipeline::run_evaluate(erc, trained.checkpoint_path, log_path,
                                       trained.partition_path, "test");
  CHECK(s.report.users == trained.test_users);
  CHECK(s.report.interactions > 0);
  CHECK(s.report.positives + s.report.negatives == s.report.interactions);
  CHECK(s.report.auc > 0.0);
  CHECK(s.report.auc < 1.0);
  auto report = slurp(s.report_path);
  CHECK(report.rfind("metric\tvalue\n", 0) == 0);
  CHECK(report.find("auc\t") != std::string::npos);

  // Whole-log evaluation covers every user.
  auto s_all = das::pipeline::run_evaluate(erc, trained.checkpoint_path, log_path);
  CHECK(s_all.report.users == 40);

  CHECK(category_of([&] {
          das::pipeline::run_evaluate(erc, trained.checkpoint_path, log_path,
                                      trained.partition_path, "holdout");
        }) == ErrorCategory::config);
}

TEST_CASE("evaluate refuses a checkpoint whose sidecar files are missing") {
  TempDir dir;
  auto log_path = make_tiny_log(dir);
  RunConfig rc = tiny_run_config(dir, "run");
  auto trained = das::pipeline::run_train(rc, log_path);

  fs::create_directories(dir.sub("moved"));
  fs::copy_file(trained.checkpoint_path, dir.sub("moved/checkpoint.das"));
  RunConfig erc = tiny_run_config(dir, "eval");
  CHECK(category_of([&] {
          das::pipeline::run_evaluate(erc, dir.sub("moved/checkpoint.das"), log_path);
        }) == ErrorCategory::io);

  // A vocabulary that disagrees with the checkpoint is a compatibility error.
  fs::copy_file(trained.checkpoint_path, dir.sub("run/checkpoint2.das"));
  auto vocab = das::data::read_vocab_file(dir.sub("run/vocab.txt"));
  vocab.add("q_extra_question");
  das::data::write_vocab_file(vocab, dir.sub("run/vocab.txt"));
  CHECK(category_of([&] {
          das::pipeline::run_evaluate(erc, dir.sub("run/checkpoint2.das"), log_path);
        }) == ErrorCategory::compat);
}

TEST_CASE("predict emits one probability per interaction in log order") {
  TempDir dir;
  auto log_path = make_tiny_log(dir);
  RunConfig rc = tiny_run_config(dir, "run");
  auto trained = das::pipeline::run_train(rc, log_path);

  RunConfig prc = tiny_run_config(dir, "pred");
  auto s = das::pipeline::run_predict(prc, trained.checkpoint_path, log_path);

  auto parsed = das::data::parse_log_file(log_path);
  CHECK(s.predictions.size() == parsed.total_interactions());
  size_t k = 0;
  for (const auto& u : parsed.users) {
    for (size_t i = 0; i < u.records.size(); ++i, ++k) {
      REQUIRE(k < s.predictions.size());
      CHECK(s.predictions[k].user_id == u.user_id);
      CHECK(s.predictions[k].index == static_cast<int64_t>(i));
      CHECK(s.predictions[k].probability > 0.0);
      CHECK(s.predictions[k].probability < 1.0);
    }
  }
  auto file = slurp(s.predictions_path);
  CHECK(line_count(file) == s.predictions.size() + 1);
}

TEST_CASE("ablate trains one model per grid cell and logs curves") {
  TempDir dir;
  auto log_path = make_tiny_log(dir);
  RunConfig rc = tiny_run_config(dir, "ab");
  auto s = das::pipeline::run_ablate(rc, log_path, "features");
  REQUIRE(s.results.size() == 5);
  CHECK(s.results.front().name == "base");
  CHECK(s.results.back().name == "add_sp_d");
  for (const auto& r : s.results) CHECK(r.epochs.size() == 1);

  auto table = slurp(s.table_path);
  CHECK(line_count(table) == 6);
  auto curves = slurp(s.curves_path);
  CHECK(line_count(curves) == 6);  // header + 5 runs x 1 epoch

  CHECK(category_of([&] {
          das::pipeline::run_ablate(rc, log_path, "everything");
        }) == ErrorCategory::config);
}

TEST_CASE("training refuses datasets with too few users to split") {
  TempDir dir;
  RunConfig gen = tiny_run_config(dir, "gen_small");
  gen.users = 3;
  auto small = das::pipeline::run_synth(gen);
  RunConfig rc = tiny_run_config(dir, "run_small");
  CHECK(category_of([&] {
          das::pipeline::run_train(rc, small.log_path);
        }) == ErrorCategory::data);
}

namespace {

// Runs the installed binary; returns its exit code. Used only when the test
// harness exports DAS_BIN (the ctest wiring does).
int run_cli(const std::string& args, const std::string& out_path, const std::string& err_path) {
  const char* bin = std::getenv("DAS_BIN");
  REQUIRE(bin != nullptr);
  std::string cmd = std::string(bin) + " " + args + " >" + out_path + " 2>" + err_path;
  int status = std::system(cmd.c_str());
  REQUIRE(status >= 0);
  return WEXITSTATUS(status);
}

bool has_das_bin() { return std::getenv("DAS_BIN") != nullptr; }

}  // namespace

TEST_CASE("binary: --help exits 0 and lists all six subcommands") {
  if (!has_das_bin()) return;
  TempDir dir;
  int code = run_cli("--help", dir.sub("out.txt"), dir.sub("err.txt"));
  CHECK(code == 0);
  auto text = slurp(dir.sub("out.txt"));
  for (const char* name : {"sessionize", "train", "evaluate", "predict", "ablate", "synth"}) {
    CHECK(text.find(name) != std::string::npos);
  }
}

TEST_CASE("binary: error lines are machine-parsable and map to exit codes") {
  if (!has_das_bin()) return;
  TempDir dir;

  int code = run_cli("synth --set nonsense_key=1 --out-dir " + dir.sub("x"),
                     dir.sub("out.txt"), dir.sub("err.txt"));
  CHECK(code == das::category_exit_code(ErrorCategory::config));
  auto err = slurp(dir.sub("err.txt"));
  CHECK(err.rfind("error: config:", 0) == 0);
  CHECK(err.find("nonsense_key") != std::string::npos);

  code = run_cli("sessionize --input " + dir.sub("missing.csv") + " --out-dir " + dir.sub("y"),
                 dir.sub("out.txt"), dir.sub("err.txt"));
  CHECK(code == das::category_exit_code(ErrorCategory::io));
  CHECK(slurp(dir.sub("err.txt")).rfind("error: io:", 0) == 0);

  code = run_cli("frobnicate", dir.sub("out.txt"), dir.sub("err.txt"));
  CHECK(code == das::category_exit_code(ErrorCategory::config));
}

TEST_CASE("binary: predict prints exactly one probability per interaction") {
  if (!has_das_bin()) return;
  TempDir dir;

  RunConfig gen = tiny_run_config(dir, "gen");
  auto synth = das::pipeline::run_synth(gen);
  RunConfig rc = tiny_run_config(dir, "run");
  auto trained = das::pipeline::run_train(rc, synth.log_path);

  int code = run_cli("predict --checkpoint " + trained.checkpoint_path + " --input " +
                         synth.log_path + " --out-dir " + dir.sub("pred"),
                     dir.sub("out.txt"), dir.sub("err.txt"));
  CHECK(code == 0);
  auto out = slurp(dir.sub("out.txt"));
  CHECK(line_count(out) == static_cast<size_t>(synth.interactions));
  std::istringstream lines(out);
  std::string line;
  while (std::getline(lines, line)) {
    double p = std::stod(line);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
}

TEST_SUITE_END();
