#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace vatika {

// Base class for all toolkit errors. CLI maps these onto exit codes:
// ValidationError -> 1, BackendError -> 2, PartialPipelineError -> 3.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// Malformed input file entry. Carries the 1-based line number, the offending
// field when known, and the file once one is in play.
class SchemaError : public ValidationError {
 public:
  SchemaError(const std::string& msg, long line, std::string field = {}, std::string file = {})
      : ValidationError(format(msg, line, field, file)),
        raw_(msg),
        line_(line),
        field_(std::move(field)),
        file_(std::move(file)) {}

  long line() const { return line_; }
  const std::string& field() const { return field_; }
  const std::string& file() const { return file_; }

  SchemaError with_file(const std::string& file) const {
    return SchemaError(raw_, line_, field_, file);
  }

 private:
  static std::string format(const std::string& msg, long line, const std::string& field,
                            const std::string& file) {
    std::string s = file.empty() ? "" : file + ": ";
    s += "line " + std::to_string(line);
    if (!field.empty()) s += ", field '" + field + "'";
    return s + ": " + msg;
  }
  std::string raw_;
  long line_;
  std::string field_;
  std::string file_;
};

// Zero-context split, empty corpus and similar inputs for which the
// requested statistic is undefined.
class DegenerateInputError : public ValidationError {
 public:
  explicit DegenerateInputError(const std::string& msg) : ValidationError(msg) {}
};

// Failure reported by a generation or training backend (timeout, transport
// error, nonzero subprocess exit).
class BackendError : public Error {
 public:
  explicit BackendError(const std::string& msg) : Error(msg) {}
};

// A pipeline stage failed after earlier stages already produced artifacts.
class PartialPipelineError : public Error {
 public:
  explicit PartialPipelineError(const std::string& msg) : Error(msg) {}
};

}  // namespace vatika
