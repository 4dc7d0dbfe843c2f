#include "das/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "das/error.hpp"
#include "das/util.hpp"

namespace das::model {

namespace {

constexpr char kMagic[8] = {'D', 'A', 'S', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;

// Feature toggles serialize as a fixed-order bit string.
std::string toggles_to_bits(const FeatureToggles& f) {
  const bool bits[] = {f.e_id, f.e_cat, f.e_st, f.e_p,  f.e_sp, f.l_r,
                       f.l_et, f.l_st,  f.l_iot, f.l_d, f.l_p,  f.l_sp};
  std::string s;
  for (bool b : bits) s.push_back(b ? '1' : '0');
  return s;
}

FeatureToggles toggles_from_bits(const std::string& s) {
  if (s.size() != 12 || s.find_first_not_of("01") != std::string::npos) {
    raise(ErrorCategory::compat, strfmt("checkpoint has a malformed feature field '%s'", s.c_str()));
  }
  FeatureToggles f;
  bool* slots[] = {&f.e_id, &f.e_cat, &f.e_st, &f.e_p,  &f.e_sp, &f.l_r,
                   &f.l_et, &f.l_st,  &f.l_iot, &f.l_d, &f.l_p,  &f.l_sp};
  for (size_t i = 0; i < 12; ++i) *slots[i] = s[i] == '1';
  return f;
}

class Writer {
 public:
  explicit Writer(const std::string& path) : path_(path), f_(std::fopen(path.c_str(), "wb")) {
    if (!f_) raise(ErrorCategory::io, strfmt("cannot open '%s' for writing", path.c_str()));
  }
  ~Writer() {
    if (f_) std::fclose(f_);
  }
  void bytes(const void* p, size_t n) {
    if (std::fwrite(p, 1, n, f_) != n) {
      raise(ErrorCategory::io, strfmt("short write to '%s'", path_.c_str()));
    }
  }
  void u32(uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 4);
  }
  void i64(int64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(static_cast<uint64_t>(v) >> (8 * i));
    bytes(b, 8);
  }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void close() {
    if (std::fclose(f_) != 0) {
      f_ = nullptr;
      raise(ErrorCategory::io, strfmt("cannot finish writing '%s'", path_.c_str()));
    }
    f_ = nullptr;
  }

 private:
  std::string path_;
  std::FILE* f_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) raise(ErrorCategory::io, strfmt("cannot open checkpoint '%s'", path.c_str()));
    std::fseek(f, 0, SEEK_END);
    const long size = std::ftell(f);
    std::fseek(f, 0, SEEK_SET);
    buf_.resize(size > 0 ? static_cast<size_t>(size) : 0);
    if (!buf_.empty() && std::fread(buf_.data(), 1, buf_.size(), f) != buf_.size()) {
      std::fclose(f);
      raise(ErrorCategory::io, strfmt("cannot read checkpoint '%s'", path.c_str()));
    }
    std::fclose(f);
  }
  void bytes(void* p, size_t n) {
    if (pos_ + n > buf_.size()) {
      raise(ErrorCategory::compat, strfmt("checkpoint '%s' is truncated", path_.c_str()));
    }
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
  }
  int64_t i64() {
    unsigned char b[8];
    bytes(b, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return static_cast<int64_t>(v);
  }
  std::string str() {
    const uint32_t n = u32();
    if (n > 1u << 20) {
      raise(ErrorCategory::compat, strfmt("checkpoint '%s' has an implausible string", path_.c_str()));
    }
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  std::string path_;
  std::vector<unsigned char> buf_;
  size_t pos_ = 0;
};

int64_t parse_i64_field(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) {
    raise(ErrorCategory::compat, strfmt("checkpoint is missing the '%s' field", key.c_str()));
  }
  char* end = nullptr;
  const long long v = std::strtoll(it->second.c_str(), &end, 10);
  if (end == it->second.c_str() || *end != '\0') {
    raise(ErrorCategory::compat,
          strfmt("checkpoint field '%s' has a non-numeric value '%s'", key.c_str(),
                 it->second.c_str()));
  }
  return static_cast<int64_t>(v);
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ModelParams<float>& params,
                     const std::map<std::string, std::string>& meta) {
  cfg.validate();

  // The tensor set must be exactly what cfg implies, in traversal order.
  {
    std::vector<std::pair<std::string, Shape>> expected;
    const ModelParams<float> shaped = zero_params<float>(cfg);
    shaped.for_each([&](const std::string& name, const Tensor<float>& t) {
      expected.emplace_back(name, t.shape);
    });
    size_t k = 0;
    bool ok = true;
    params.for_each([&](const std::string& name, const Tensor<float>& t) {
      ok = ok && k < expected.size() && expected[k].first == name && expected[k].second == t.shape;
      ++k;
    });
    if (!ok || k != expected.size()) {
      raise(ErrorCategory::contract, "save_checkpoint: parameters do not match the configuration");
    }
  }

  std::map<std::string, std::string> kv = meta;
  kv["num_blocks"] = std::to_string(cfg.num_blocks);
  kv["d_model"] = std::to_string(cfg.d_model);
  kv["num_heads"] = std::to_string(cfg.num_heads);
  kv["d_ff"] = std::to_string(cfg.d_ff);
  kv["seq_size"] = std::to_string(cfg.seq_size);
  kv["dropout_rate"] = strfmt("%.9g", static_cast<double>(cfg.dropout_rate));
  kv["question_vocab"] = std::to_string(cfg.question_vocab);
  kv["sp_max"] = std::to_string(cfg.sp_max);
  kv["features"] = toggles_to_bits(cfg.features);

  const std::string tmp = path + ".tmp";
  {
    Writer w(tmp);
    w.bytes(kMagic, sizeof(kMagic));
    w.u32(kVersion);
    w.u32(static_cast<uint32_t>(kv.size()));
    for (const auto& [key, value] : kv) {
      w.str(key);
      w.str(value);
    }
    uint32_t tensor_count = 0;
    params.for_each([&](const std::string&, const Tensor<float>&) { ++tensor_count; });
    w.u32(tensor_count);
    params.for_each([&](const std::string& name, const Tensor<float>& t) {
      w.str(name);
      w.u32(static_cast<uint32_t>(t.shape.size()));
      for (int64_t d : t.shape) w.i64(d);
      static_assert(sizeof(float) == 4);
      w.bytes(t.data.data(), t.data.size() * sizeof(float));
    });
    w.close();
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    raise(ErrorCategory::io, strfmt("cannot move checkpoint into place at '%s'", path.c_str()));
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    raise(ErrorCategory::compat, strfmt("'%s' is not a checkpoint file", path.c_str()));
  }
  const uint32_t version = r.u32();
  if (version != kVersion) {
    raise(ErrorCategory::compat,
          strfmt("checkpoint '%s' uses unsupported format version %u", path.c_str(), version));
  }

  std::map<std::string, std::string> kv;
  const uint32_t kv_count = r.u32();
  for (uint32_t i = 0; i < kv_count; ++i) {
    std::string key = r.str();
    std::string value = r.str();
    kv[std::move(key)] = std::move(value);
  }

  Checkpoint ckpt;
  ckpt.config.num_blocks = parse_i64_field(kv, "num_blocks");
  ckpt.config.d_model = parse_i64_field(kv, "d_model");
  ckpt.config.num_heads = parse_i64_field(kv, "num_heads");
  ckpt.config.d_ff = parse_i64_field(kv, "d_ff");
  ckpt.config.seq_size = parse_i64_field(kv, "seq_size");
  ckpt.config.question_vocab = static_cast<int32_t>(parse_i64_field(kv, "question_vocab"));
  ckpt.config.sp_max = static_cast<int32_t>(parse_i64_field(kv, "sp_max"));
  {
    auto it = kv.find("dropout_rate");
    if (it == kv.end()) {
      raise(ErrorCategory::compat, "checkpoint is missing the 'dropout_rate' field");
    }
    char* end = nullptr;
    ckpt.config.dropout_rate = std::strtof(it->second.c_str(), &end);
    if (end == it->second.c_str() || *end != '\0') {
      raise(ErrorCategory::compat,
            strfmt("checkpoint field 'dropout_rate' has a non-numeric value '%s'",
                   it->second.c_str()));
    }
  }
  {
    auto it = kv.find("features");
    if (it == kv.end()) raise(ErrorCategory::compat, "checkpoint is missing the 'features' field");
    ckpt.config.features = toggles_from_bits(it->second);
  }
  try {
    ckpt.config.validate();
  } catch (const Error& e) {
    raise(ErrorCategory::compat,
          strfmt("checkpoint '%s' carries an invalid configuration: %s", path.c_str(), e.what()));
  }

  static const char* kConfigKeys[] = {"num_blocks", "d_model",       "num_heads",
                                      "d_ff",       "seq_size",      "dropout_rate",
                                      "question_vocab", "sp_max",    "features"};
  for (auto& [key, value] : kv) {
    bool is_config = false;
    for (const char* ck : kConfigKeys) is_config = is_config || key == ck;
    if (!is_config) ckpt.meta.emplace(key, value);
  }

  std::unordered_map<std::string, Tensor<float>> tensors;
  const uint32_t tensor_count = r.u32();
  for (uint32_t i = 0; i < tensor_count; ++i) {
    const std::string name = r.str();
    const uint32_t rank = r.u32();
    if (rank > 8) {
      raise(ErrorCategory::compat, strfmt("checkpoint tensor '%s' has rank %u", name.c_str(), rank));
    }
    Shape shape;
    for (uint32_t d = 0; d < rank; ++d) {
      const int64_t dim = r.i64();
      if (dim <= 0 || dim > (int64_t{1} << 32)) {
        raise(ErrorCategory::compat,
              strfmt("checkpoint tensor '%s' has a bad dimension", name.c_str()));
      }
      shape.push_back(dim);
    }
    Tensor<float> t(shape);
    r.bytes(t.data.data(), t.data.size() * sizeof(float));
    if (!tensors.emplace(name, std::move(t)).second) {
      raise(ErrorCategory::compat, strfmt("checkpoint tensor '%s' appears twice", name.c_str()));
    }
  }
  if (!r.at_end()) {
    raise(ErrorCategory::compat, strfmt("checkpoint '%s' has trailing bytes", path.c_str()));
  }

  ckpt.params = zero_params<float>(ckpt.config);
  size_t used = 0;
  ckpt.params.for_each([&](const std::string& name, Tensor<float>& t) {
    auto it = tensors.find(name);
    if (it == tensors.end()) {
      raise(ErrorCategory::compat, strfmt("checkpoint is missing tensor '%s'", name.c_str()));
    }
    if (it->second.shape != t.shape) {
      raise(ErrorCategory::compat,
            strfmt("checkpoint tensor '%s' does not match the configured shape", name.c_str()));
    }
    t = std::move(it->second);
    ++used;
  });
  if (used != tensors.size()) {
    raise(ErrorCategory::compat, "checkpoint contains tensors unknown to this configuration");
  }
  return ckpt;
}

}  // namespace das::model
