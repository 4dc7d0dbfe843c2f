#include "das/featureizer.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "das/error.hpp"
#include "das/util.hpp"

namespace das::data {

namespace {

int64_t parse_count(const std::string& s, const char* what) {
  try {
    size_t pos = 0;
    const int64_t v = std::stoll(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  raise(ErrorCategory::schema, strfmt("bad %s value '%s'", what, s.c_str()));
}

}  // namespace

void Vocab::add(const std::string& question_id) {
  auto [it, inserted] = index_.try_emplace(question_id, static_cast<int32_t>(ids_.size()) + 1);
  if (inserted) ids_.push_back(question_id);
}

int32_t Vocab::lookup(const std::string& question_id) const {
  auto it = index_.find(question_id);
  return it == index_.end() ? kOov : it->second;
}

Vocab build_vocab(const std::vector<SessionizedSequence>& train_sequences) {
  Vocab v;
  for (const auto& seq : train_sequences) {
    for (const auto& sr : seq.records) v.add(sr.rec.question_id);
  }
  return v;
}

void write_vocab(const Vocab& v, std::ostream& out) {
  out << "question_count\t" << v.question_count() << '\n';
  const auto& ids = v.ids();
  for (size_t i = 0; i < ids.size(); ++i) out << ids[i] << '\t' << (i + 1) << '\n';
  if (!out) raise(ErrorCategory::io, "write failure while saving vocab");
}

Vocab read_vocab(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) raise(ErrorCategory::schema, "vocab file is empty");
  auto head = split(trim(line), '\t');
  if (head.size() != 2 || head[0] != "question_count") {
    raise(ErrorCategory::schema, "vocab file must start with 'question_count<TAB>N'");
  }
  const int64_t expected = parse_count(head[1], "question_count");
  Vocab v;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 2) {
      raise(ErrorCategory::schema, strfmt("vocab line %zu: expected 'id<TAB>index'", line_no));
    }
    v.add(fields[0]);
    if (v.lookup(fields[0]) != parse_count(fields[1], "vocab index")) {
      raise(ErrorCategory::schema,
            strfmt("vocab line %zu: index %s breaks the 1..Q ordering", line_no,
                   fields[1].c_str()));
    }
  }
  if (v.question_count() != expected) {
    raise(ErrorCategory::schema, strfmt("vocab declares %lld questions but lists %d",
                                        static_cast<long long>(expected), v.question_count()));
  }
  return v;
}

void write_vocab_file(const Vocab& v, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(ErrorCategory::io, strfmt("cannot write vocab file '%s'", path.c_str()));
  write_vocab(v, out);
}

Vocab read_vocab_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCategory::io, strfmt("cannot open vocab file '%s'", path.c_str()));
  return read_vocab(in);
}

int64_t LimitsConfig::limit_for_part(int part) const {
  if (part < 1 || part > static_cast<int>(limit_ms.size())) {
    raise(ErrorCategory::config, strfmt("no time limit configured for part %d", part));
  }
  const int64_t limit = limit_ms[static_cast<size_t>(part - 1)];
  if (limit <= 0) raise(ErrorCategory::config, strfmt("time limit for part %d must be positive", part));
  return limit;
}

void write_limits(const LimitsConfig& limits, std::ostream& out) {
  for (size_t i = 0; i < limits.limit_ms.size(); ++i) {
    out << "part" << (i + 1) << "_limit_ms\t" << limits.limit_ms[i] << '\n';
  }
  if (!out) raise(ErrorCategory::io, "write failure while saving limits");
}

LimitsConfig read_limits(std::istream& in) {
  LimitsConfig limits;
  limits.limit_ms.assign(limits.limit_ms.size(), 0);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line, '\t');
    int part = 0;
    if (fields.size() != 2 || sscanf(fields[0].c_str(), "part%d_limit_ms", &part) != 1 ||
        part < 1 || part > static_cast<int>(limits.limit_ms.size())) {
      raise(ErrorCategory::schema,
            strfmt("limits line %zu: expected 'part<N>_limit_ms<TAB>ms'", line_no));
    }
    limits.limit_ms[static_cast<size_t>(part - 1)] = parse_count(fields[1], "limit");
  }
  return limits;
}

void write_limits_file(const LimitsConfig& limits, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(ErrorCategory::io, strfmt("cannot write limits file '%s'", path.c_str()));
  write_limits(limits, out);
}

LimitsConfig read_limits_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCategory::io, strfmt("cannot open limits file '%s'", path.c_str()));
  return read_limits(in);
}

std::vector<FeatureFrame> extract_features(const SessionizedSequence& seq, const Vocab& vocab,
                                           const LimitsConfig& limits, int32_t sp_max) {
  if (sp_max < 1) raise(ErrorCategory::config, "sp_max must be at least 1");
  std::vector<FeatureFrame> frames;
  frames.reserve(seq.records.size());
  for (const auto& sr : seq.records) {
    const auto& r = sr.rec;
    FeatureFrame f;
    f.id_index = vocab.lookup(r.question_id);
    f.category = r.part;

    const int64_t secs_of_day = ((r.timestamp_ms % 86'400'000) + 86'400'000) % 86'400'000 / 1000;
    f.hour = static_cast<int32_t>(secs_of_day / 3600);
    int64_t days = r.timestamp_ms / 86'400'000;
    if (r.timestamp_ms % 86'400'000 < 0) --days;
    f.dow = static_cast<int32_t>(((days + 4) % 7 + 7) % 7);  // epoch day 0 was a Thursday

    f.sp = static_cast<int32_t>(std::min<int64_t>(sr.sp, sp_max));
    f.r = r.correctness;
    const int64_t secs = r.elapsed_ms / 1000;
    f.et_bucket = secs <= 300 ? static_cast<int32_t>(secs) : kEtBuckets - 1;
    f.iot = r.elapsed_ms <= limits.limit_for_part(r.part) ? 1 : 0;
    f.d = sr.dropout;
    frames.push_back(f);
  }
  return frames;
}

std::vector<TrainingWindow> make_windows(const std::vector<FeatureFrame>& frames,
                                         int32_t seq_size) {
  if (seq_size < 2) raise(ErrorCategory::config, "sequence size must be at least 2");
  std::vector<TrainingWindow> windows;
  windows.reserve(frames.size());
  for (size_t target = 0; target < frames.size(); ++target) {
    TrainingWindow w;
    w.frames.resize(static_cast<size_t>(seq_size));
    const size_t real = std::min<size_t>(target + 1, static_cast<size_t>(seq_size));
    w.first_real = seq_size - static_cast<int32_t>(real);
    for (size_t k = 0; k < real; ++k) {
      w.frames[static_cast<size_t>(w.first_real) + k] = frames[target + 1 - real + k];
    }
    w.target_label = frames[target].d;
    windows.push_back(std::move(w));
  }
  return windows;
}

}  // namespace das::data
