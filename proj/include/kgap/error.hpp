#pragma once

#include <stdexcept>
#include <string>

namespace kgap {

// Process exit codes used by the CLI. Every library error maps onto one.
enum class ExitCode : int {
  ok = 0,
  config = 2,
  transport = 3,
  analysis = 4,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual ExitCode exit_code() const noexcept { return ExitCode::analysis; }
};

// Bad or missing configuration, unreadable input files, schema violations.
class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::config; }
};

// Malformed rows, duplicate keys, invariant violations in ingested tables.
class DataError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::config; }
};

// Argument outside the domain of a numeric transform.
class DomainError : public Error {
 public:
  using Error::Error;
};

class TemplateError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::config; }
};

// Conversation stages applied out of order, or a reply that is not in the
// expected wire shape.
class ProtocolError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::transport; }
};

class TransportError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::transport; }
};

class ParseError : public Error {
 public:
  using Error::Error;
};

// Design matrix or fit problems: degenerate response, separation, rank loss.
class AnalysisError : public Error {
 public:
  using Error::Error;
};

class SeparationError : public AnalysisError {
 public:
  using AnalysisError::AnalysisError;
};

class RankError : public AnalysisError {
 public:
  using AnalysisError::AnalysisError;
};

class LevelError : public AnalysisError {
 public:
  using AnalysisError::AnalysisError;
};

// Unreadable or unwritable files.
class IoError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::config; }
};

}  // namespace kgap
