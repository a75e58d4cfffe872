#pragma once

#include <stdexcept>
#include <string>

namespace covergraph {

/// Process exit codes shared by every command of the CLI.
enum class ExitCode : int {
  ok = 0,
  failure = 1,
  validation = 2,
  io = 3,
  numeric = 4,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual ExitCode exit_code() const { return ExitCode::failure; }
};

// Bad user input: out-of-range fields, schema violations, invalid graphs.
class ValidationError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::validation; }
};

// Document parse failure; `path` is a JSON pointer to the offending node.
class ParseError : public ValidationError {
 public:
  ParseError(std::string path, const std::string& message)
      : ValidationError(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::validation; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::validation; }
};

class IoError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::io; }
};

// A loss term went NaN/Inf during training.
class NumericError : public Error {
 public:
  NumericError(std::string term, const std::string& message)
      : Error(message), term_(std::move(term)) {}
  const std::string& term() const { return term_; }
  ExitCode exit_code() const override { return ExitCode::numeric; }

 private:
  std::string term_;
};

}  // namespace covergraph
