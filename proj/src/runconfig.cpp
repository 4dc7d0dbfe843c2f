#include "das/runconfig.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

#include "das/error.hpp"
#include "das/util.hpp"

namespace das::cli {

namespace {

int64_t parse_int(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(value.c_str(), &end, 10);
  if (errno != 0 || end == value.c_str() || *end != '\0') {
    raise(ErrorCategory::config,
          strfmt("config key '%s' expects an integer, got '%s'", key.c_str(), value.c_str()));
  }
  return static_cast<int64_t>(v);
}

uint64_t parse_uint(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (errno != 0 || end == value.c_str() || *end != '\0' || value.find('-') != std::string::npos) {
    raise(ErrorCategory::config,
          strfmt("config key '%s' expects a non-negative integer, got '%s'", key.c_str(),
                 value.c_str()));
  }
  return static_cast<uint64_t>(v);
}

double parse_double(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(value.c_str(), &end);
  if (errno != 0 || end == value.c_str() || *end != '\0') {
    raise(ErrorCategory::config,
          strfmt("config key '%s' expects a number, got '%s'", key.c_str(), value.c_str()));
  }
  return v;
}

// Shortest decimal text that parses back to the exact same double.
std::string format_double(double v) {
  for (int prec = 1; prec <= 16; ++prec) {
    std::string s = strfmt("%.*g", prec, v);
    if (std::strtod(s.c_str(), nullptr) == v) return s;
  }
  return strfmt("%.17g", v);
}

struct KeySpec {
  const char* name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<KeySpec>& key_table() {
  auto int_key = [](const char* name, int64_t RunConfig::* field) {
    return KeySpec{name,
                   [name, field](RunConfig& rc, const std::string& v) {
                     rc.*field = parse_int(name, v);
                   },
                   [field](const RunConfig& rc) { return std::to_string(rc.*field); }};
  };
  auto double_key = [](const char* name, double RunConfig::* field) {
    return KeySpec{name,
                   [name, field](RunConfig& rc, const std::string& v) {
                     rc.*field = parse_double(name, v);
                   },
                   [field](const RunConfig& rc) { return format_double(rc.*field); }};
  };
  auto string_key = [](const char* name, std::string RunConfig::* field) {
    return KeySpec{name, [field](RunConfig& rc, const std::string& v) { rc.*field = v; },
                   [field](const RunConfig& rc) { return rc.*field; }};
  };

  static const std::vector<KeySpec> table = {
      KeySpec{"preset", [](RunConfig& rc, const std::string& v) { apply_preset(rc, v); },
              [](const RunConfig& rc) { return rc.preset; }},
      int_key("num_blocks", &RunConfig::num_blocks),
      int_key("d_model", &RunConfig::d_model),
      int_key("num_heads", &RunConfig::num_heads),
      int_key("d_ff", &RunConfig::d_ff),
      int_key("seq_size", &RunConfig::seq_size),
      double_key("dropout_rate", &RunConfig::dropout_rate),
      int_key("sp_max", &RunConfig::sp_max),
      int_key("warmup_steps", &RunConfig::warmup_steps),
      int_key("batch_size", &RunConfig::batch_size),
      int_key("epochs", &RunConfig::epochs),
      double_key("clip_norm", &RunConfig::clip_norm),
      double_key("oversample_ratio", &RunConfig::oversample_ratio),
      string_key("loss", &RunConfig::loss),
      KeySpec{"seed",
              [](RunConfig& rc, const std::string& v) { rc.seed = parse_uint("seed", v); },
              [](const RunConfig& rc) { return std::to_string(rc.seed); }},
      int_key("threshold_secs", &RunConfig::threshold_secs),
      string_key("out_dir", &RunConfig::out_dir),
      int_key("users", &RunConfig::users),
      int_key("questions", &RunConfig::questions),
      int_key("min_sessions", &RunConfig::min_sessions),
      int_key("max_sessions", &RunConfig::max_sessions),
      int_key("max_session_len", &RunConfig::max_session_len),
      double_key("hazard_base", &RunConfig::hazard_base),
      double_key("hazard_w_elapsed", &RunConfig::hazard_w_elapsed),
      double_key("hazard_w_position", &RunConfig::hazard_w_position),
      double_key("hazard_w_correct", &RunConfig::hazard_w_correct),
  };
  return table;
}

const KeySpec* find_key(const std::string& key) {
  for (const auto& spec : key_table())
    if (key == spec.name) return &spec;
  return nullptr;
}

}  // namespace

KeyValues parse_config_text(std::istream& in) {
  KeyValues kv;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    size_t eq = text.find('=');
    if (eq == std::string::npos) {
      raise(ErrorCategory::config,
            strfmt("config line %zu is not 'key = value': '%s'", line_no, text.c_str()));
    }
    std::string key = trim(text.substr(0, eq));
    std::string value = trim(text.substr(eq + 1));
    if (key.empty()) {
      raise(ErrorCategory::config, strfmt("config line %zu has an empty key", line_no));
    }
    kv.emplace_back(std::move(key), std::move(value));
  }
  return kv;
}

KeyValues parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) raise(ErrorCategory::io, strfmt("cannot open config file '%s'", path.c_str()));
  return parse_config_text(in);
}

void apply_key(RunConfig& rc, const std::string& key, const std::string& value) {
  const KeySpec* spec = find_key(key);
  if (spec == nullptr) {
    raise(ErrorCategory::config, strfmt("unknown config key '%s'", key.c_str()));
  }
  spec->set(rc, value);
}

void apply_preset(RunConfig& rc, const std::string& name) {
  if (name.empty()) return;
  if (name == "paper") {
    rc.num_blocks = 4;
    rc.d_model = 512;
    rc.num_heads = 8;
    rc.d_ff = 2048;
    rc.seq_size = 5;
    rc.dropout_rate = 0.5;
    rc.warmup_steps = 6000;
  } else if (name == "desk") {
    rc.num_blocks = 2;
    rc.d_model = 64;
    rc.num_heads = 4;
    rc.d_ff = 256;
    rc.seq_size = 5;
    rc.dropout_rate = 0.1;
    rc.warmup_steps = 400;
  } else {
    raise(ErrorCategory::config,
          strfmt("unknown preset '%s' (expected 'paper' or 'desk')", name.c_str()));
  }
  rc.preset = name;
}

KeyValues env_overrides() {
  KeyValues kv;
  for (const auto& spec : key_table()) {
    std::string env_name = "DAS_";
    for (const char* c = spec.name; *c != '\0'; ++c) {
      env_name += (*c >= 'a' && *c <= 'z') ? static_cast<char>(*c - 'a' + 'A') : *c;
    }
    const char* value = std::getenv(env_name.c_str());
    if (value != nullptr) kv.emplace_back(spec.name, value);
  }
  return kv;
}

RunConfig resolve_config(const KeyValues& file_kv, const KeyValues& env_kv,
                         const KeyValues& flag_kv, const std::string& preset_flag) {
  RunConfig rc;

  // The preset is always applied first so explicit keys can override it;
  // which preset wins follows the usual precedence (flag > env > file).
  std::string preset = preset_flag;
  auto preset_in = [&preset](const KeyValues& kv) {
    if (!preset.empty()) return;
    for (const auto& [key, value] : kv)
      if (key == "preset") preset = value;
  };
  preset_in(flag_kv);
  preset_in(env_kv);
  preset_in(file_kv);
  apply_preset(rc, preset);

  for (const auto& [key, value] : file_kv) {
    if (key == "preset") continue;  // already applied, lowest precedence
    apply_key(rc, key, value);
  }
  for (const auto& [key, value] : env_kv) {
    if (key == "preset") continue;
    apply_key(rc, key, value);
  }
  for (const auto& [key, value] : flag_kv) {
    if (key == "preset") continue;
    apply_key(rc, key, value);
  }
  return rc;
}

std::string render_config(const RunConfig& rc) {
  std::ostringstream out;
  for (const auto& spec : key_table()) {
    out << spec.name << '=' << spec.get(rc) << '\n';
  }
  return out.str();
}

model::ModelConfig model_config(const RunConfig& rc, int32_t question_vocab) {
  model::ModelConfig cfg;
  cfg.num_blocks = static_cast<int>(rc.num_blocks);
  cfg.d_model = static_cast<int>(rc.d_model);
  cfg.num_heads = static_cast<int>(rc.num_heads);
  cfg.d_ff = static_cast<int>(rc.d_ff);
  cfg.seq_size = static_cast<int>(rc.seq_size);
  cfg.dropout_rate = static_cast<float>(rc.dropout_rate);
  cfg.question_vocab = question_vocab;
  cfg.sp_max = static_cast<int>(rc.sp_max);
  cfg.validate();
  return cfg;
}

train::TrainConfig train_config(const RunConfig& rc) {
  train::TrainConfig cfg;
  cfg.warmup_steps = rc.warmup_steps;
  cfg.batch_size = rc.batch_size;
  cfg.epochs = rc.epochs;
  cfg.seed = rc.seed;
  cfg.clip_norm = rc.clip_norm;
  cfg.oversample_ratio = rc.oversample_ratio;
  cfg.loss = rc.loss;
  return cfg;
}

data::SynthConfig synth_config(const RunConfig& rc) {
  data::SynthConfig cfg;
  cfg.users = rc.users;
  cfg.questions = rc.questions;
  cfg.min_sessions = rc.min_sessions;
  cfg.max_sessions = rc.max_sessions;
  cfg.max_session_len = rc.max_session_len;
  cfg.hazard.base_log_odds = rc.hazard_base;
  cfg.hazard.w_elapsed = rc.hazard_w_elapsed;
  cfg.hazard.w_position = rc.hazard_w_position;
  cfg.hazard.w_correct = rc.hazard_w_correct;
  cfg.seed = rc.seed;
  return cfg;
}

}  // namespace das::cli
