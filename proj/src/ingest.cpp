#include "das/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "das/error.hpp"
#include "das/util.hpp"

namespace das::data {

namespace {

bool parse_int64(const std::string& s, int64_t& out) {
  if (s.empty()) return false;
  size_t pos = 0;
  try {
    out = std::stoll(s, &pos);
  } catch (const std::exception&) {
    return false;
  }
  return pos == s.size();
}

// Days since 1970-01-01 for a civil date; valid across the whole int range.
int64_t days_from_civil(int64_t y, int64_t m, int64_t d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const int64_t yoe = y - era * 400;                                   // [0, 399]
  const int64_t doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;  // [0, 365]
  const int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;           // [0, 146096]
  return era * 146097 + doe - 719468;
}

void civil_from_days(int64_t z, int64_t& y, int64_t& m, int64_t& d) {
  z += 719468;
  const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const int64_t doe = z - era * 146097;
  const int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const int64_t mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y = yoe + era * 400 + (m <= 2);
}

struct ColumnMap {
  int user_id = -1;
  int timestamp = -1;
  int question_id = -1;
  int user_answer = -1;
  int correctness = -1;
  int elapsed_time = -1;
  int part = -1;
};

}  // namespace

bool parse_timestamp(const std::string& text, int64_t& out_ms) {
  std::string s = trim(text);
  if (s.empty()) return false;

  // "YYYY-MM-DD HH:MM:SS" — fixed layout, UTC.
  if (s.size() == 19 && s[4] == '-' && s[7] == '-' && s[10] == ' ' && s[13] == ':' &&
      s[16] == ':') {
    auto digits = [&](size_t off, size_t len, int64_t& v) {
      v = 0;
      for (size_t i = off; i < off + len; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
        v = v * 10 + (s[i] - '0');
      }
      return true;
    };
    int64_t y, mo, d, h, mi, sec;
    if (!digits(0, 4, y) || !digits(5, 2, mo) || !digits(8, 2, d) || !digits(11, 2, h) ||
        !digits(14, 2, mi) || !digits(17, 2, sec))
      return false;
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || sec > 60) return false;
    out_ms = ((days_from_civil(y, mo, d) * 24 + h) * 60 + mi) * 60000 + sec * 1000;
    return true;
  }

  return parse_int64(s, out_ms);
}

std::string format_timestamp_ms(int64_t ms) {
  // Canonical form keeps raw milliseconds: lossless and unambiguous.
  return std::to_string(ms);
}

namespace {

ParsedLog parse_log_impl(std::istream& in) {
  ParsedLog result;

  std::string header;
  if (!std::getline(in, header)) {
    raise(ErrorCategory::schema, "log is empty: expected a header row");
  }
  if (!header.empty() && header.back() == '\r') header.pop_back();

  const char delim = header.find('\t') != std::string::npos ? '\t' : ',';
  std::vector<std::string> names = split(header, delim);
  ColumnMap cols;
  for (size_t i = 0; i < names.size(); ++i) {
    const std::string name = to_lower(trim(names[i]));
    const int idx = static_cast<int>(i);
    if (name == "user_id") cols.user_id = idx;
    else if (name == "timestamp") cols.timestamp = idx;
    else if (name == "question_id") cols.question_id = idx;
    else if (name == "user_answer") cols.user_answer = idx;
    else if (name == "correctness") cols.correctness = idx;
    else if (name == "elapsed_time") cols.elapsed_time = idx;
    else if (name == "part") cols.part = idx;
    // anything else (session_id, dropout, ...) is ignored
  }
  const std::vector<std::pair<int, const char*>> required = {
      {cols.timestamp, "timestamp"},     {cols.question_id, "question_id"},
      {cols.user_answer, "user_answer"}, {cols.correctness, "correctness"},
      {cols.elapsed_time, "elapsed_time"}, {cols.part, "part"}};
  for (const auto& [idx, name] : required) {
    if (idx < 0) raise(ErrorCategory::schema, strfmt("missing required column '%s'", name));
  }

  std::map<std::string, std::vector<InteractionRecord>> by_user;
  std::string line;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;

    std::vector<std::string> fields = split(line, delim);
    auto reject = [&](const std::string& why) {
      result.rejections.push_back({line_no, why});
    };
    auto field = [&](int idx) -> std::string {
      return trim(fields[static_cast<size_t>(idx)]);
    };

    const int max_needed = std::max({cols.user_id, cols.timestamp, cols.question_id,
                                     cols.user_answer, cols.correctness, cols.elapsed_time,
                                     cols.part});
    if (static_cast<int>(fields.size()) <= max_needed) {
      reject(strfmt("expected at least %d fields, got %zu", max_needed + 1, fields.size()));
      continue;
    }

    InteractionRecord rec;
    rec.user_id = cols.user_id >= 0 ? field(cols.user_id) : std::string("user");
    if (rec.user_id.empty()) {
      reject("empty user_id");
      continue;
    }
    if (!parse_timestamp(field(cols.timestamp), rec.timestamp_ms)) {
      reject(strfmt("bad timestamp '%s'", field(cols.timestamp).c_str()));
      continue;
    }
    rec.question_id = field(cols.question_id);
    if (rec.question_id.empty()) {
      reject("empty question_id");
      continue;
    }
    const std::string ans = to_lower(field(cols.user_answer));
    if (ans.size() != 1 || ans[0] < 'a' || ans[0] > 'd') {
      reject(strfmt("user_answer must be one of a-d, got '%s'", field(cols.user_answer).c_str()));
      continue;
    }
    rec.user_answer = ans[0];
    int64_t corr;
    if (!parse_int64(field(cols.correctness), corr) || (corr != 0 && corr != 1)) {
      reject(strfmt("correctness must be 0 or 1, got '%s'", field(cols.correctness).c_str()));
      continue;
    }
    rec.correctness = static_cast<int>(corr);
    int64_t elapsed;
    if (!parse_int64(field(cols.elapsed_time), elapsed) || elapsed < 0) {
      reject(strfmt("bad elapsed_time '%s'", field(cols.elapsed_time).c_str()));
      continue;
    }
    rec.elapsed_ms = elapsed;
    int64_t part;
    if (!parse_int64(field(cols.part), part) || part < 1 || part > 7) {
      reject(strfmt("part must be in 1..7, got '%s'", field(cols.part).c_str()));
      continue;
    }
    rec.part = static_cast<int>(part);

    by_user[rec.user_id].push_back(rec);
    ++result.accepted;
  }
  if (in.bad()) raise(ErrorCategory::io, "read failure while parsing log");

  result.users.reserve(by_user.size());
  for (auto& [uid, recs] : by_user) {
    // Stable: equal timestamps keep file order.
    std::stable_sort(recs.begin(), recs.end(),
                     [](const InteractionRecord& a, const InteractionRecord& b) {
                       return a.timestamp_ms < b.timestamp_ms;
                     });
    result.users.push_back({uid, std::move(recs)});
  }
  return result;
}

}  // namespace

ParsedLog parse_log(std::istream& in) { return parse_log_impl(in); }

ParsedLog parse_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCategory::io, strfmt("cannot open log file '%s'", path.c_str()));
  return parse_log_impl(in);
}

void serialize_records(const std::vector<UserLog>& users, std::ostream& out) {
  out << "user_id\ttimestamp\tquestion_id\tuser_answer\tcorrectness\telapsed_time\tpart\n";
  for (const auto& u : users) {
    for (const auto& r : u.records) {
      out << u.user_id << '\t' << format_timestamp_ms(r.timestamp_ms) << '\t' << r.question_id
          << '\t' << r.user_answer << '\t' << r.correctness << '\t' << r.elapsed_ms << '\t'
          << r.part << '\n';
    }
  }
  if (!out) raise(ErrorCategory::io, "write failure while serializing records");
}

UserPartition split_users(const std::vector<std::string>& users, std::array<int, 3> ratio,
                          uint64_t seed) {
  for (int r : ratio) {
    if (r < 0) raise(ErrorCategory::config, "split ratio parts must be non-negative");
  }
  const int total_ratio = ratio[0] + ratio[1] + ratio[2];
  if (total_ratio <= 0) raise(ErrorCategory::config, "split ratio must have a positive total");

  // Order users by seeded hash (ties broken by name) so assignment is
  // deterministic and independent of input order.
  std::vector<std::pair<uint64_t, std::string>> keyed;
  keyed.reserve(users.size());
  for (const auto& u : users) keyed.emplace_back(hash64(seed, u), u);
  std::sort(keyed.begin(), keyed.end());

  const size_t n = keyed.size();
  // Largest-remainder quotas: exact proportions up to rounding, off by at
  // most one user per bucket.
  std::array<size_t, 3> count{};
  std::array<double, 3> frac{};
  size_t assigned = 0;
  for (int b = 0; b < 3; ++b) {
    const double exact = static_cast<double>(n) * ratio[b] / total_ratio;
    count[b] = static_cast<size_t>(exact);
    frac[b] = exact - static_cast<double>(count[b]);
    assigned += count[b];
  }
  std::array<int, 3> order = {0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (frac[a] != frac[b]) return frac[a] > frac[b];
    return a < b;
  });
  for (int i = 0; assigned < n; ++i) {
    const int b = order[static_cast<size_t>(i) % 3];
    if (ratio[b] > 0) {
      ++count[b];
      ++assigned;
    }
  }

  UserPartition p;
  size_t pos = 0;
  auto take = [&](std::vector<std::string>& dst, size_t k) {
    for (size_t i = 0; i < k; ++i) dst.push_back(keyed[pos++].second);
    std::sort(dst.begin(), dst.end());
  };
  take(p.train, count[0]);
  take(p.validation, count[1]);
  take(p.test, count[2]);
  return p;
}

void write_partition(const UserPartition& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(ErrorCategory::io, strfmt("cannot write partition file '%s'", path.c_str()));
  auto emit = [&](const std::vector<std::string>& v, const char* name) {
    for (const auto& u : v) out << u << '\t' << name << '\n';
  };
  emit(p.train, "train");
  emit(p.validation, "validation");
  emit(p.test, "test");
  if (!out) raise(ErrorCategory::io, strfmt("write failure for '%s'", path.c_str()));
}

UserPartition read_partition(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCategory::io, strfmt("cannot open partition file '%s'", path.c_str()));
  UserPartition p;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 2) {
      raise(ErrorCategory::schema,
            strfmt("partition line %zu: expected 'user<TAB>split'", line_no));
    }
    const std::string& split = fields[1];
    if (split == "train") p.train.push_back(fields[0]);
    else if (split == "validation") p.validation.push_back(fields[0]);
    else if (split == "test") p.test.push_back(fields[0]);
    else
      raise(ErrorCategory::schema,
            strfmt("partition line %zu: unknown split '%s'", line_no, split.c_str()));
  }
  return p;
}

}  // namespace das::data
