#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sf {

/// Base for every diagnostic raised by the toolchain.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Errors that carry a source position. `path:line:col: message` is the
/// rendering the CLI prints.
class SourceError : public Error {
 public:
  SourceError(std::string path, int line, int col, const std::string& message)
      : Error(message), path_(std::move(path)), line_(line), col_(col), message_(message) {}

  const std::string& path() const { return path_; }
  int line() const { return line_; }
  int col() const { return col_; }
  const std::string& message() const { return message_; }
  std::string diagnostic() const {
    return path_ + ":" + std::to_string(line_) + ":" + std::to_string(col_) + ": " + message_;
  }

 private:
  std::string path_;
  int line_;
  int col_;
  std::string message_;
};

class SyntaxError : public SourceError {
 public:
  using SourceError::SourceError;
};

class UnsupportedFeature : public SourceError {
 public:
  UnsupportedFeature(std::string path, int line, std::string feature)
      : SourceError(std::move(path), line, 1, "unsupported feature: " + feature),
        feature_(std::move(feature)) {}
  const std::string& feature() const { return feature_; }

 private:
  std::string feature_;
};

/// Type or rank problems found after linking (e.g. array arity mismatch).
class SemanticError : public SourceError {
 public:
  using SourceError::SourceError;
};

class UnresolvedCallee : public Error {
 public:
  UnresolvedCallee(std::string name, std::string caller)
      : Error("unresolved callee '" + name + "' in '" + caller + "'"),
        name_(std::move(name)),
        caller_(std::move(caller)) {}
  const std::string& name() const { return name_; }
  const std::string& caller() const { return caller_; }

 private:
  std::string name_;
  std::string caller_;
};

class DuplicateUnit : public Error {
 public:
  explicit DuplicateUnit(std::string name)
      : Error("duplicate program unit '" + name + "'"), name_(std::move(name)) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class NoProgramUnit : public Error {
 public:
  NoProgramUnit() : Error("no PROGRAM unit among the inputs") {}
};

class ConflictingDeclaration : public Error {
 public:
  ConflictingDeclaration(std::string unit, std::string name, const std::string& why)
      : Error("conflicting declaration of '" + name + "' in '" + unit + "': " + why),
        unit_(std::move(unit)),
        name_(std::move(name)) {}
  const std::string& unit() const { return unit_; }
  const std::string& name() const { return name_; }

 private:
  std::string unit_;
  std::string name_;
};

class IrTypeMismatch : public Error {
 public:
  using Error::Error;
};

class BudgetExceeded : public Error {
 public:
  BudgetExceeded(long long bufferLen, long long budget)
      : Error("smart-cache buffer of " + std::to_string(bufferLen) +
              " elements exceeds the on-chip budget of " + std::to_string(budget)),
        bufferLen_(bufferLen),
        budget_(budget) {}
  long long bufferLen() const { return bufferLen_; }
  long long budget() const { return budget_; }

 private:
  long long bufferLen_;
  long long budget_;
};

class NonLinearizableStencil : public Error {
 public:
  using Error::Error;
};

/// A lowering precondition that the IR does not meet (shape mix, seq node
/// where a stream is required, ...).
class LoweringError : public Error {
 public:
  using Error::Error;
};

class DeadlockDetected : public Error {
 public:
  explicit DeadlockDetected(std::vector<std::string> blocked)
      : Error(render(blocked)), blocked_(std::move(blocked)) {}
  const std::vector<std::string>& blocked() const { return blocked_; }

 private:
  static std::string render(const std::vector<std::string>& blocked) {
    std::string s = "deadlock detected; blocked processes:";
    for (const auto& b : blocked) s += " " + b;
    return s;
  }
  std::vector<std::string> blocked_;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class NonTermination : public Error {
 public:
  explicit NonTermination(long long steps)
      : Error("scheduler step budget of " + std::to_string(steps) + " exhausted") {}
};

class WriteAfterClose : public Error {
 public:
  explicit WriteAfterClose(const std::string& channel)
      : Error("write on closed channel '" + channel + "'") {}
};

class CflViolation : public Error {
 public:
  using Error::Error;
};

class NonFiniteField : public Error {
 public:
  using Error::Error;
};

/// Runtime failure inside the Fortran-subset evaluator.
class EvalError : public Error {
 public:
  using Error::Error;
};

}  // namespace sf
