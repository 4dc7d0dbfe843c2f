#include <cmath>
#include <random>

#include "das/error.hpp"
#include "das/model.hpp"
#include "das/ops.hpp"
#include "doctest.h"
#include "support/gradcheck.hpp"

using das::Error;
using das::ErrorCategory;
using das::num::Graph;
using das::num::kMaskSentinel;
using das::num::Tensor;
using namespace das::model;
using das::data::FeatureFrame;
using das::data::TrainingWindow;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.num_blocks = 1;
  cfg.d_model = 8;
  cfg.num_heads = 2;
  cfg.d_ff = 16;
  cfg.seq_size = 3;
  cfg.dropout_rate = 0.0f;
  cfg.question_vocab = 5;
  cfg.sp_max = 4;
  return cfg;
}

FeatureFrame random_frame(std::mt19937_64& rng, const ModelConfig& cfg) {
  FeatureFrame f;
  f.id_index = static_cast<int32_t>(rng() % static_cast<uint64_t>(cfg.question_vocab + 1));
  f.category = static_cast<int32_t>(rng() % 7) + 1;
  f.hour = static_cast<int32_t>(rng() % 24);
  f.dow = static_cast<int32_t>(rng() % 7);
  f.sp = static_cast<int32_t>(rng() % static_cast<uint64_t>(cfg.sp_max)) + 1;
  f.r = static_cast<int32_t>(rng() % 2);
  f.et_bucket = static_cast<int32_t>(rng() % das::data::kEtBuckets);
  f.iot = static_cast<int32_t>(rng() % 2);
  f.d = static_cast<int32_t>(rng() % 2);
  return f;
}

TrainingWindow random_window(std::mt19937_64& rng, const ModelConfig& cfg, int32_t first_real) {
  TrainingWindow w;
  w.frames.resize(static_cast<size_t>(cfg.seq_size));
  w.first_real = first_real;
  for (int32_t s = first_real; s < cfg.seq_size; ++s) {
    w.frames[static_cast<size_t>(s)] = random_frame(rng, cfg);
  }
  w.target_label = w.frames[static_cast<size_t>(cfg.seq_size - 1)].d;
  return w;
}

std::vector<float> forward_window(ModelParams<float>& params, const ModelConfig& cfg,
                                  const TrainingWindow& w) {
  return forward_probs(params, cfg, {w})[0];
}

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("build_masks: single position allows only itself in all three masks") {
  auto ms = build_masks(1, {1});
  for (const auto* m : {&ms.enc_self, &ms.dec_self, &ms.enc_dec}) {
    REQUIRE(m->rows == 1);
    CHECK(m->at(0, 0));
  }
}

TEST_CASE("build_masks: three real positions give the lower-triangular pattern") {
  auto ms = build_masks(3, {1, 1, 1});
  for (const auto* m : {&ms.enc_self, &ms.dec_self, &ms.enc_dec}) {
    for (int64_t i = 0; i < 3; ++i) {
      for (int64_t j = 0; j < 3; ++j) {
        CHECK(m->at(i, j) == (j <= i));
      }
    }
  }
}

TEST_CASE("build_masks: padded position is disallowed as a key everywhere") {
  auto ms = build_masks(3, {0, 1, 1});
  for (const auto* m : {&ms.enc_self, &ms.dec_self, &ms.enc_dec}) {
    for (int64_t i = 0; i < 3; ++i) CHECK_FALSE(m->at(i, 0));
    CHECK(m->at(1, 1));
    CHECK(m->at(2, 1));
    CHECK(m->at(2, 2));
    CHECK_FALSE(m->at(1, 2));
  }
}

TEST_CASE("additive mask matches the boolean mask and patches all-pad rows") {
  ModelConfig cfg = tiny_config();
  std::mt19937_64 rng(5);
  auto w = random_window(rng, cfg, 2);  // slots 0,1 padded
  auto batch = make_batch({w}, 0, 1, cfg);
  auto mask = additive_mask<float>(batch);
  auto ms = build_masks(3, {0, 0, 1});
  for (int64_t i = 0; i < 3; ++i) {
    for (int64_t j = 0; j < 3; ++j) {
      const float v = mask[i * 3 + j];
      if (ms.enc_self.at(i, j)) {
        CHECK(v == 0.0f);
      } else if (i == j && i < 2) {
        CHECK(v == 0.0f);  // all-pad row falls back to the diagonal
      } else {
        CHECK(v == doctest::Approx(kMaskSentinel));
      }
    }
  }
}

TEST_CASE("embedding sums are linear in the individual lookups") {
  ModelConfig cfg = tiny_config();
  auto params = init_params<double>(cfg, 11);
  std::mt19937_64 rng(3);
  FeatureFrame f = random_frame(rng, cfg);
  const int32_t p = 2;

  auto out = embed_question(params, cfg, f, p);
  const int64_t d = cfg.d_model;
  for (int64_t j = 0; j < d; ++j) {
    const double expected = params.emb_id[f.id_index * d + j] + params.emb_cat[f.category * d + j] +
                            params.emb_hour_e[f.hour * d + j] + params.emb_dow_e[f.dow * d + j] +
                            params.emb_p_e[p * d + j] + params.emb_sp_e[f.sp * d + j];
    CHECK(out[static_cast<size_t>(j)] == doctest::Approx(expected).epsilon(1e-12));
  }

  auto lout = embed_response(params, cfg, f, p);
  for (int64_t j = 0; j < d; ++j) {
    const double expected = params.emb_r[f.r * d + j] + params.emb_et[f.et_bucket * d + j] +
                            params.emb_hour_l[f.hour * d + j] + params.emb_dow_l[f.dow * d + j] +
                            params.emb_iot[f.iot * d + j] + params.emb_d[f.d * d + j] +
                            params.emb_p_l[p * d + j] + params.emb_sp_l[f.sp * d + j];
    CHECK(lout[static_cast<size_t>(j)] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("all-zero embedding tables produce the zero vector") {
  ModelConfig cfg = tiny_config();
  auto params = zero_params<double>(cfg);
  std::mt19937_64 rng(4);
  FeatureFrame f = random_frame(rng, cfg);
  for (double v : embed_question(params, cfg, f, 1)) CHECK(v == 0.0);
  for (double v : embed_response(params, cfg, f, 1)) CHECK(v == 0.0);
}

TEST_CASE("changing sp moves the question embedding by exactly the table-row difference") {
  ModelConfig cfg = tiny_config();
  auto params = init_params<double>(cfg, 19);
  std::mt19937_64 rng(6);
  FeatureFrame f = random_frame(rng, cfg);
  f.sp = 1;
  auto a = embed_question(params, cfg, f, 1);
  f.sp = 3;
  auto b = embed_question(params, cfg, f, 1);
  const int64_t d = cfg.d_model;
  for (int64_t j = 0; j < d; ++j) {
    const double diff = params.emb_sp_e[3 * d + j] - params.emb_sp_e[1 * d + j];
    CHECK(b[static_cast<size_t>(j)] - a[static_cast<size_t>(j)] ==
          doctest::Approx(diff).epsilon(1e-12));
  }
}

TEST_CASE("question-side and response-side tables for shared features are independent") {
  ModelConfig cfg = tiny_config();
  auto params = init_params<double>(cfg, 23);
  std::mt19937_64 rng(7);
  FeatureFrame f = random_frame(rng, cfg);

  auto l_before = embed_response(params, cfg, f, 1);
  for (int64_t i = 0; i < params.emb_sp_e.numel(); ++i) params.emb_sp_e[i] += 0.7;
  for (int64_t i = 0; i < params.emb_hour_e.numel(); ++i) params.emb_hour_e[i] -= 0.3;
  auto l_after = embed_response(params, cfg, f, 1);
  CHECK(l_before == l_after);

  auto e_before = embed_question(params, cfg, f, 1);
  for (int64_t i = 0; i < params.emb_hour_l.numel(); ++i) params.emb_hour_l[i] += 1.5;
  auto e_after = embed_question(params, cfg, f, 1);
  CHECK(e_before == e_after);
}

TEST_CASE("forward emits one probability per position, all strictly inside (0,1)") {
  ModelConfig cfg = tiny_config();
  auto params = init_params<float>(cfg, 31);
  std::mt19937_64 rng(8);
  for (int32_t fr : {0, 1, 2}) {
    auto probs = forward_window(params, cfg, random_window(rng, cfg, fr));
    REQUIRE(probs.size() == 3);
    for (float p : probs) {
      CHECK(p > 0.0f);
      CHECK(p < 1.0f);
    }
  }
}

TEST_CASE("zeroed output head predicts exactly one half everywhere") {
  ModelConfig cfg = tiny_config();
  auto params = init_params<float>(cfg, 37);
  for (int64_t i = 0; i < params.head_w.numel(); ++i) params.head_w[i] = 0.0f;
  params.head_b[0] = 0.0f;
  std::mt19937_64 rng(9);
  auto probs = forward_window(params, cfg, random_window(rng, cfg, 0));
  for (float p : probs) CHECK(p == 0.5f);
}

TEST_CASE("forward is deterministic with dropout disabled") {
  ModelConfig cfg = tiny_config();
  auto params = init_params<float>(cfg, 41);
  std::mt19937_64 rng(10);
  auto w = random_window(rng, cfg, 0);
  CHECK(forward_window(params, cfg, w) == forward_window(params, cfg, w));
}

TEST_CASE("training-mode dropout perturbs activations but follows the seed") {
  ModelConfig cfg = tiny_config();
  auto params = init_params<float>(cfg, 43);
  std::mt19937_64 data_rng(11);
  auto w = random_window(data_rng, cfg, 0);
  auto batch = make_batch({w}, 0, 1, cfg);

  auto run = [&](uint64_t seed) {
    Graph<float> g;
    auto pn = register_params(g, params);
    std::mt19937_64 drop_rng(seed);
    auto fw = das_forward<float>(g, pn, cfg, batch, 0.5f, &drop_rng, nullptr);
    return g.value(fw.probs).data;
  };
  CHECK(run(1) == run(1));
  CHECK(run(1) != run(2));
}

TEST_CASE("causality: probabilities depend only on earlier questions and strictly earlier "
          "responses") {
  ModelConfig cfg = tiny_config();
  cfg.seq_size = 4;
  auto params = init_params<float>(cfg, 47);
  std::mt19937_64 rng(12);

  int e_effect_hits = 0, e_effect_trials = 0;
  for (int trial = 0; trial < 12; ++trial) {
    const int32_t first_real = static_cast<int32_t>(rng() % 3);  // 1..4 real slots
    auto w = random_window(rng, cfg, first_real);
    auto base = forward_window(params, cfg, w);

    for (int32_t j = first_real; j < cfg.seq_size; ++j) {
      // Question-side change at slot j: positions before j must not move.
      {
        auto w2 = w;
        auto& f = w2.frames[static_cast<size_t>(j)];
        f.id_index = (f.id_index + 1) % (cfg.question_vocab + 1);
        f.category = f.category % 7 + 1;
        auto probs = forward_window(params, cfg, w2);
        for (int32_t i = first_real; i < j; ++i) {
          CHECK(std::abs(probs[static_cast<size_t>(i)] - base[static_cast<size_t>(i)]) < 1e-6f);
        }
        ++e_effect_trials;
        if (std::abs(probs[static_cast<size_t>(j)] - base[static_cast<size_t>(j)]) > 1e-6f) {
          ++e_effect_hits;
        }
      }
      // Response-side change at slot j: positions up to and including j must
      // not move (the response feeds the decoder only from slot j+1 on).
      {
        auto w2 = w;
        auto& f = w2.frames[static_cast<size_t>(j)];
        f.r = 1 - f.r;
        f.et_bucket = (f.et_bucket + 17) % das::data::kEtBuckets;
        f.iot = 1 - f.iot;
        f.d = 1 - f.d;
        auto probs = forward_window(params, cfg, w2);
        for (int32_t i = first_real; i <= j; ++i) {
          CHECK(std::abs(probs[static_cast<size_t>(i)] - base[static_cast<size_t>(i)]) < 1e-6f);
        }
      }
    }
  }
  // The current question must actually influence its own prediction.
  CHECK(e_effect_hits >= (e_effect_trials * 95) / 100);
}

TEST_CASE("make_batch encodes pads with reserved indices and real slots with window positions") {
  ModelConfig cfg = tiny_config();
  std::mt19937_64 rng(13);
  auto w = random_window(rng, cfg, 1);
  auto b = make_batch({w}, 0, 1, cfg);
  REQUIRE(b.batch == 1);
  REQUIRE(b.n == 3);
  CHECK(b.real == std::vector<uint8_t>{0, 1, 1});
  CHECK(b.id[0] == cfg.id_pad());
  CHECK(b.cat[0] == ModelConfig::kCatPad);
  CHECK(b.hour[0] == ModelConfig::kHourPad);
  CHECK(b.dow[0] == ModelConfig::kDowPad);
  CHECK(b.p[0] == ModelConfig::kPPad);
  CHECK(b.sp[0] == ModelConfig::kSpPad);
  CHECK(b.r[0] == ModelConfig::kBinaryPad);
  CHECK(b.et[0] == ModelConfig::kEtPad);
  CHECK(b.p[1] == 2);
  CHECK(b.p[2] == 3);
  CHECK(b.id[1] == w.frames[1].id_index);
  CHECK(b.targets[0] == static_cast<float>(w.target_label));
}

TEST_CASE("make_batch rejects question indices outside the configured vocab") {
  ModelConfig cfg = tiny_config();
  std::mt19937_64 rng(14);
  auto w = random_window(rng, cfg, 0);
  w.frames[1].id_index = cfg.question_vocab + 3;
  try {
    make_batch({w}, 0, 1, cfg);
    FAIL("expected compatibility error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::compat);
  }
}

TEST_CASE("end-to-end analytic gradients match finite differences for every parameter") {
  ModelConfig cfg = tiny_config();  // N=1, d_model=8, h=2, seq 3
  auto params = init_params<double>(cfg, 53);
  std::mt19937_64 rng(15);
  std::vector<TrainingWindow> windows = {random_window(rng, cfg, 0), random_window(rng, cfg, 1)};
  auto batch = make_batch(windows, 0, 2, cfg);
  std::vector<double> targets(batch.targets.begin(), batch.targets.end());

  std::vector<Tensor<double>> values;
  std::vector<std::string> names;
  params.for_each([&](const std::string& name, Tensor<double>& t) {
    values.push_back(t);
    names.push_back(name);
  });

  auto loss_at = [&](const std::vector<Tensor<double>>& vals) {
    ModelParams<double> p = params;
    size_t k = 0;
    p.for_each([&](const std::string&, Tensor<double>& t) { t = vals[k++]; });
    Graph<double> g;
    auto pn = register_params(g, p);
    auto fw = das_forward<double>(g, pn, cfg, batch, 0.0, nullptr, &targets);
    return g.value(fw.loss)[0];
  };

  Graph<double> g;
  auto pn = register_params(g, params);
  auto fw = das_forward<double>(g, pn, cfg, batch, 0.0, nullptr, &targets);
  g.backward(fw.loss);
  std::vector<Tensor<double>> analytic;
  for (const auto& name : names) analytic.push_back(g.grad(pn.at(name)));

  auto report = das::testing::compare_gradients(loss_at, values, analytic, names, 1e-5, 1e-7);
  INFO("worst tensor element: " << report.worst);
  CHECK(report.max_rel_err < 1e-4);
  CHECK(report.checked > 4000);
}

TEST_CASE("mismatched sequence size is a contract error") {
  ModelConfig cfg = tiny_config();
  std::mt19937_64 rng(16);
  auto w = random_window(rng, cfg, 0);
  auto batch = make_batch({w}, 0, 1, cfg);
  ModelConfig other = cfg;
  other.seq_size = 5;
  auto params = init_params<float>(other, 3);
  Graph<float> g;
  auto pn = register_params(g, params);
  try {
    das_forward<float>(g, pn, other, batch, 0.0f, nullptr, nullptr);
    FAIL("expected contract error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::contract);
  }
}

TEST_SUITE_END();
