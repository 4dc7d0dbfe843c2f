#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "das/checkpoint.hpp"
#include "das/error.hpp"
#include "doctest.h"

using das::Error;
using das::ErrorCategory;
using namespace das::model;

namespace {

namespace fs = std::filesystem;

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.num_blocks = 1;
  cfg.d_model = 8;
  cfg.num_heads = 2;
  cfg.d_ff = 16;
  cfg.seq_size = 3;
  cfg.dropout_rate = 0.25f;
  cfg.question_vocab = 5;
  cfg.sp_max = 4;
  return cfg;
}

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / ("das_test_" + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

bool params_equal(const ModelParams<float>& a, const ModelParams<float>& b) {
  bool equal = true;
  std::vector<const das::num::Tensor<float>*> lhs;
  a.for_each([&](const std::string&, const das::num::Tensor<float>& t) { lhs.push_back(&t); });
  size_t k = 0;
  b.for_each([&](const std::string&, const das::num::Tensor<float>& t) {
    equal = equal && k < lhs.size() && lhs[k]->shape == t.shape && lhs[k]->data == t.data;
    ++k;
  });
  return equal && k == lhs.size();
}

// Rewrites the serialized value of a config key with an equal-length
// replacement, exploiting the length-prefixed string layout.
std::string patch_value(std::string bytes, const std::string& key, const std::string& old_value,
                        const std::string& new_value) {
  REQUIRE(old_value.size() == new_value.size());
  const size_t key_at = bytes.find(key);
  REQUIRE(key_at != std::string::npos);
  const size_t value_at = key_at + key.size() + 4;  // skip the value-length prefix
  REQUIRE(bytes.compare(value_at, old_value.size(), old_value) == 0);
  bytes.replace(value_at, new_value.size(), new_value);
  return bytes;
}

}  // namespace

TEST_SUITE("checkpoint") {
  TEST_CASE("weights, configuration, and metadata survive a round trip") {
    const ModelConfig cfg = tiny_config();
    const auto params = init_params<float>(cfg, 77);
    const std::string path = temp_path("roundtrip.das");

    save_checkpoint(path, cfg, params, {{"vocab_file", "vocab.txt"}, {"note", "hello"}});
    const Checkpoint loaded = load_checkpoint(path);

    CHECK(loaded.config.num_blocks == cfg.num_blocks);
    CHECK(loaded.config.d_model == cfg.d_model);
    CHECK(loaded.config.num_heads == cfg.num_heads);
    CHECK(loaded.config.d_ff == cfg.d_ff);
    CHECK(loaded.config.seq_size == cfg.seq_size);
    CHECK(loaded.config.dropout_rate == cfg.dropout_rate);
    CHECK(loaded.config.question_vocab == cfg.question_vocab);
    CHECK(loaded.config.sp_max == cfg.sp_max);
    CHECK(loaded.config.features.e_sp == cfg.features.e_sp);
    CHECK(params_equal(loaded.params, params));

    REQUIRE(loaded.meta.size() == 2);
    CHECK(loaded.meta.at("vocab_file") == "vocab.txt");
    CHECK(loaded.meta.at("note") == "hello");
    fs::remove(path);
  }

  TEST_CASE("feature toggles round-trip through the bit field") {
    ModelConfig cfg = tiny_config();
    cfg.features.e_st = false;
    cfg.features.l_iot = false;
    cfg.features.l_d = false;
    const auto params = init_params<float>(cfg, 3);
    const std::string path = temp_path("toggles.das");
    save_checkpoint(path, cfg, params);
    const Checkpoint loaded = load_checkpoint(path);
    CHECK_FALSE(loaded.config.features.e_st);
    CHECK_FALSE(loaded.config.features.l_iot);
    CHECK_FALSE(loaded.config.features.l_d);
    CHECK(loaded.config.features.e_id);
    CHECK(loaded.config.features.l_r);
    fs::remove(path);
  }

  TEST_CASE("writes are atomic and byte-deterministic") {
    const ModelConfig cfg = tiny_config();
    const auto params = init_params<float>(cfg, 9);
    const std::string path = temp_path("atomic.das");

    save_checkpoint(path, cfg, params);
    CHECK_FALSE(fs::exists(path + ".tmp"));
    const std::string first = slurp(path);

    // overwriting produces the identical file: nothing time- or run-dependent
    save_checkpoint(path, cfg, params);
    CHECK(slurp(path) == first);
    fs::remove(path);
  }

  TEST_CASE("a missing file raises an I/O error") {
    try {
      load_checkpoint(temp_path("nowhere.das"));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::io);
    }
  }

  TEST_CASE("a foreign file is rejected as incompatible") {
    const std::string path = temp_path("foreign.das");
    spit(path, "this is surely not a weights file");
    try {
      load_checkpoint(path);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::compat);
    }
    fs::remove(path);
  }

  TEST_CASE("an unsupported format version is rejected") {
    const ModelConfig cfg = tiny_config();
    const auto params = init_params<float>(cfg, 1);
    const std::string path = temp_path("version.das");
    save_checkpoint(path, cfg, params);
    std::string bytes = slurp(path);
    bytes[8] = 99;  // version word follows the 8-byte magic
    spit(path, bytes);
    try {
      load_checkpoint(path);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::compat);
      CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
    fs::remove(path);
  }

  TEST_CASE("truncated and padded files are rejected") {
    const ModelConfig cfg = tiny_config();
    const auto params = init_params<float>(cfg, 2);
    const std::string path = temp_path("trunc.das");
    save_checkpoint(path, cfg, params);
    const std::string bytes = slurp(path);

    spit(path, bytes.substr(0, bytes.size() / 2));
    try {
      load_checkpoint(path);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::compat);
    }

    spit(path, bytes + "junk");
    try {
      load_checkpoint(path);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::compat);
      CHECK(std::string(e.what()).find("trailing") != std::string::npos);
    }
    fs::remove(path);
  }

  TEST_CASE("tensors that disagree with the stored configuration are rejected") {
    const ModelConfig cfg = tiny_config();
    const auto params = init_params<float>(cfg, 4);
    const std::string path = temp_path("mismatch.das");
    save_checkpoint(path, cfg, params);

    // claim seq_size 4 while the position tables were sized for 3
    spit(path, patch_value(slurp(path), "seq_size", "3", "4"));
    try {
      load_checkpoint(path);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::compat);
    }
    fs::remove(path);
  }

  TEST_CASE("an invalid stored configuration is rejected as incompatible") {
    const ModelConfig cfg = tiny_config();
    const auto params = init_params<float>(cfg, 4);
    const std::string path = temp_path("badcfg.das");
    save_checkpoint(path, cfg, params);

    // d_model 9 is not divisible by the 2 attention heads
    spit(path, patch_value(slurp(path), "d_model", "8", "9"));
    try {
      load_checkpoint(path);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::compat);
    }
    fs::remove(path);
  }

  TEST_CASE("saving rejects parameters shaped for a different configuration") {
    const ModelConfig cfg = tiny_config();
    ModelConfig other = cfg;
    other.d_model = 16;
    other.d_ff = 32;
    const auto params = init_params<float>(other, 5);
    try {
      save_checkpoint(temp_path("shape.das"), cfg, params);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::contract);
    }
    CHECK_FALSE(fs::exists(temp_path("shape.das")));
    CHECK_FALSE(fs::exists(temp_path("shape.das") + ".tmp"));
  }
}
