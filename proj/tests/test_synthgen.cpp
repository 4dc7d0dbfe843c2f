#include <cmath>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "das/error.hpp"
#include "das/eval.hpp"
#include "das/ingest.hpp"
#include "das/sessionizer.hpp"
#include "das/synthgen.hpp"
#include "doctest.h"

using das::Error;
using das::ErrorCategory;
using namespace das::data;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string log_text(const SynthResult& r) {
  std::ostringstream out;
  write_log(r, out);
  return out.str();
}

std::string truth_text(const SynthResult& r) {
  std::ostringstream out;
  write_truth(r, out);
  return out.str();
}

SynthConfig small_config(uint64_t seed = 3) {
  SynthConfig cfg;
  cfg.users = 40;
  cfg.questions = 50;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("synthgen");

TEST_CASE("hazard probability follows the logistic form and its clamps") {
  HazardSpec zero;
  zero.base_log_odds = 0.0;
  zero.w_elapsed = 0.0;
  zero.w_position = 0.0;
  zero.w_correct = 0.0;
  CHECK(hazard_probability(zero, 0.0, 1, 0) == doctest::Approx(0.5).epsilon(1e-12));

  HazardSpec spec;
  spec.base_log_odds = -1.0;
  spec.w_elapsed = 2.0;
  spec.w_position = 1.5;
  spec.w_correct = -0.5;
  double expected = sigmoid(-1.0 + 2.0 * (60.0 / 120.0) + 1.5 * (4.0 / 16.0) - 0.5);
  CHECK(hazard_probability(spec, 60.0, 4, 1) == doctest::Approx(expected).epsilon(1e-12));

  // Saturation: the elapsed-time input caps at 120 s, session position at 16.
  CHECK(hazard_probability(spec, 121.0, 4, 1) == hazard_probability(spec, 500.0, 4, 1));
  CHECK(hazard_probability(spec, 120.0, 4, 1) == hazard_probability(spec, 121.0, 4, 1));
  CHECK(hazard_probability(spec, 60.0, 17, 1) == hazard_probability(spec, 60.0, 400, 1));

  HazardSpec high;
  high.base_log_odds = 50.0;
  CHECK(hazard_probability(high, 120.0, 16, 0) == 0.99);
  HazardSpec low;
  low.base_log_odds = -50.0;
  CHECK(hazard_probability(low, 0.0, 1, 1) == 0.01);
}

TEST_CASE("same seed reproduces byte-identical outputs, different seed differs") {
  auto a = generate(small_config(11));
  auto b = generate(small_config(11));
  CHECK(log_text(a) == log_text(b));
  CHECK(truth_text(a) == truth_text(b));

  auto c = generate(small_config(12));
  CHECK(log_text(a) != log_text(c));
}

TEST_CASE("generated logs and truth rows stay structurally aligned") {
  auto r = generate(small_config());
  REQUIRE(static_cast<int64_t>(r.users.size()) == 40);
  CHECK(r.interactions() == static_cast<int64_t>(r.truth.size()));

  size_t row = 0;
  for (const auto& u : r.users) {
    REQUIRE(!u.records.empty());
    int64_t session = 1;
    int32_t sp = 1;
    for (size_t i = 0; i < u.records.size(); ++i, ++row) {
      REQUIRE(row < r.truth.size());
      const auto& t = r.truth[row];
      CHECK(t.user_id == u.user_id);
      CHECK(t.index == static_cast<int64_t>(i));
      CHECK(t.session_id == session);
      CHECK(t.sp == sp);
      CHECK(t.hazard > 0.0);
      CHECK(t.hazard < 1.0);
      if (t.dropout == 1) {
        ++session;
        sp = 1;
      } else {
        ++sp;
      }
      if (i + 1 < u.records.size()) {
        CHECK(u.records[i + 1].timestamp_ms > u.records[i].timestamp_ms);
      }
    }
    // Every user's log ends exactly at a session end.
    CHECK(r.truth[row - 1].dropout == 1);
  }
  CHECK(row == r.truth.size());
}

TEST_CASE("written activity log parses back with zero rejections") {
  auto r = generate(small_config());
  std::istringstream in(log_text(r));
  auto parsed = parse_log(in);
  CHECK(parsed.rejections.empty());
  CHECK(parsed.users.size() == r.users.size());
  CHECK(parsed.total_interactions() == static_cast<size_t>(r.interactions()));
}

TEST_CASE("sessionizing the generated log at one hour recovers the planted sessions") {
  SynthConfig cfg;
  cfg.users = 1000;
  cfg.questions = 200;
  cfg.seed = 21;
  auto r = generate(cfg);

  // Round-trip through the text format so the recovery check covers the
  // same path a user of the CLI would exercise.
  std::istringstream in(log_text(r));
  auto parsed = parse_log(in);
  REQUIRE(parsed.rejections.empty());
  auto seqs = sessionize_all(parsed.users, 3600);

  std::unordered_map<std::string, const SessionizedSequence*> by_user;
  for (const auto& s : seqs) by_user[s.user_id] = &s;

  for (const auto& t : r.truth) {
    auto it = by_user.find(t.user_id);
    REQUIRE(it != by_user.end());
    const auto& recs = it->second->records;
    REQUIRE(t.index < static_cast<int64_t>(recs.size()));
    const auto& rec = recs[static_cast<size_t>(t.index)];
    REQUIRE(rec.session_id == t.session_id);
    REQUIRE(rec.sp == t.sp);
    REQUIRE(rec.dropout == t.dropout);
  }
}

TEST_CASE("planted hazards are recomputable from the written log") {
  auto r = generate(small_config(17));
  std::istringstream in(log_text(r));
  auto parsed = parse_log(in);
  REQUIRE(parsed.rejections.empty());

  std::unordered_map<std::string, const UserLog*> by_user;
  for (const auto& u : parsed.users) by_user[u.user_id] = &u;

  SynthConfig cfg = small_config(17);
  for (const auto& t : r.truth) {
    const auto& recs = by_user.at(t.user_id)->records;
    double prev_secs = 0.0;
    int prev_correct = 1;
    if (t.index > 0) {
      const auto& prev = recs[static_cast<size_t>(t.index - 1)];
      prev_secs = static_cast<double>(prev.elapsed_ms) / 1000.0;
      prev_correct = prev.correctness;
    }
    double expected = hazard_probability(cfg.hazard, prev_secs, t.sp, prev_correct);
    CHECK(t.hazard == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("constant hazard produces the matching empirical dropout rate") {
  SynthConfig cfg;
  cfg.users = 400;
  cfg.questions = 100;
  cfg.max_session_len = 10000;  // keep the safety cap out of the way
  cfg.hazard.base_log_odds = std::log(0.25 / 0.75);
  cfg.hazard.w_elapsed = 0.0;
  cfg.hazard.w_position = 0.0;
  cfg.hazard.w_correct = 0.0;
  cfg.seed = 5;
  auto r = generate(cfg);

  double p = 0.25;
  double n = static_cast<double>(r.interactions());
  double rate = static_cast<double>(r.sessions()) / n;
  double margin = 4.0 * std::sqrt(p * (1.0 - p) / n);
  CHECK(std::abs(rate - p) < margin);
  for (const auto& t : r.truth) CHECK(t.hazard == doctest::Approx(p).epsilon(1e-12));
}

TEST_CASE("default hazard plants a signal the truth scores can detect") {
  SynthConfig cfg;
  cfg.users = 300;
  cfg.seed = 9;
  auto r = generate(cfg);
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& t : r.truth) {
    scores.push_back(t.hazard);
    labels.push_back(t.dropout);
  }
  CHECK(das::eval::auc(scores, labels) > 0.8);
}

TEST_CASE("session gaps land on the intended sides of the one-hour threshold") {
  auto r = generate(small_config(23));
  size_t row = 0;
  for (const auto& u : r.users) {
    for (size_t i = 0; i + 1 < u.records.size(); ++i) {
      const auto& cur = u.records[i];
      const auto& next = u.records[i + 1];
      int64_t gap_ms = next.timestamp_ms - cur.timestamp_ms;
      if (r.truth[row + i].dropout == 1) {
        CHECK(gap_ms >= 2 * 3600 * 1000);
      } else {
        CHECK(gap_ms < 30 * 60 * 1000);
      }
    }
    row += u.records.size();
  }
}

TEST_CASE("truth rows round-trip through the sidecar text format") {
  auto r = generate(small_config(29));
  std::istringstream in(truth_text(r));
  auto rows = read_truth(in);
  REQUIRE(rows.size() == r.truth.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].user_id == r.truth[i].user_id);
    CHECK(rows[i].index == r.truth[i].index);
    CHECK(rows[i].session_id == r.truth[i].session_id);
    CHECK(rows[i].sp == r.truth[i].sp);
    CHECK(rows[i].hazard == r.truth[i].hazard);  // %.17g is lossless for doubles
    CHECK(rows[i].dropout == r.truth[i].dropout);
  }
}

TEST_CASE("malformed truth sidecars are rejected as schema errors") {
  auto check_schema = [](const std::string& text) {
    std::istringstream in(text);
    try {
      read_truth(in);
      FAIL("expected a schema error for: " << text);
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::schema);
    }
  };
  check_schema("not\ta\theader\n");
  check_schema("user_id\tindex\tsession_id\tsp\thazard\tdropout\nu\t0\t1\t1\tnotanumber\t0\n");
  check_schema("user_id\tindex\tsession_id\tsp\thazard\tdropout\nu\t0\t1\t1\t0.5\t7\n");
  check_schema("user_id\tindex\tsession_id\tsp\thazard\tdropout\nu\t0\t1\n");
}

TEST_CASE("invalid generator configurations are rejected") {
  auto expect_config = [](SynthConfig cfg) {
    try {
      generate(cfg);
      FAIL("expected a config error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::config);
    }
  };
  SynthConfig cfg;
  cfg.users = 0;
  expect_config(cfg);
  cfg = SynthConfig{};
  cfg.questions = 0;
  expect_config(cfg);
  cfg = SynthConfig{};
  cfg.min_sessions = 3;
  cfg.max_sessions = 2;
  expect_config(cfg);
  cfg = SynthConfig{};
  cfg.min_sessions = 0;
  expect_config(cfg);
  cfg = SynthConfig{};
  cfg.max_session_len = 0;
  expect_config(cfg);
}

TEST_SUITE_END();
