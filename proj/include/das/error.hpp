#pragma once

#include <stdexcept>
#include <string>

namespace das {

// Error categories map one-to-one onto CLI exit codes and onto the
// machine-parsable "error: <category>: <message>" line printed on failure.
enum class ErrorCategory {
  config,    // bad config key/value, invalid hyperparameters
  schema,    // input file missing required columns
  data,      // invalid data content (empty class, unsorted stream, ...)
  io,        // unreadable/unwritable file
  contract,  // precondition violation (shape mismatch, non-scalar loss)
  metric,    // undefined metric (single-class AUC)
  compat,    // checkpoint/vocab/config mismatch
};

const char* category_name(ErrorCategory cat);
int category_exit_code(ErrorCategory cat);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory cat, const std::string& msg)
      : std::runtime_error(msg), cat_(cat) {}

  ErrorCategory category() const { return cat_; }

 private:
  ErrorCategory cat_;
};

[[noreturn]] inline void raise(ErrorCategory cat, const std::string& msg) {
  throw Error(cat, msg);
}

inline const char* category_name(ErrorCategory cat) {
  switch (cat) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::schema: return "schema";
    case ErrorCategory::data: return "data";
    case ErrorCategory::io: return "io";
    case ErrorCategory::contract: return "contract";
    case ErrorCategory::metric: return "metric";
    case ErrorCategory::compat: return "compat";
  }
  return "unknown";
}

inline int category_exit_code(ErrorCategory cat) {
  switch (cat) {
    case ErrorCategory::config: return 3;
    case ErrorCategory::schema: return 4;
    case ErrorCategory::data: return 5;
    case ErrorCategory::io: return 6;
    case ErrorCategory::contract: return 7;
    case ErrorCategory::metric: return 8;
    case ErrorCategory::compat: return 9;
  }
  return 1;
}

}  // namespace das
