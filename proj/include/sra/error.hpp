#pragma once

#include <stdexcept>
#include <string>

namespace sra {

enum class ErrorKind {
  InvalidInput,
  Parse,
  UndefinedMetric,
  InvalidState,
  TrainingDivergence,
  UnsupportedMode,
  BudgetViolation,
  ConstraintInfeasible,
  InvalidAction,
  EpisodeFinished,
  InvalidConfig,
  Usage,
};

const char* to_string(ErrorKind kind);

/// Every failure raised by the toolkit carries a kind so callers (and the CLI)
/// can branch on the category without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace sra
