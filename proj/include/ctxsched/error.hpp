#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctxsched {

/// Invalid argument or violated type invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input record. Carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed file whose content does not match the expected schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Coverage cannot be achieved under the size/count/threshold constraints.
/// `labels()` lists the offending label ids.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, std::vector<unsigned> labels)
      : std::runtime_error(what), labels_(std::move(labels)) {}

  const std::vector<unsigned>& labels() const noexcept { return labels_; }

 private:
  std::vector<unsigned> labels_;
};

}  // namespace ctxsched
