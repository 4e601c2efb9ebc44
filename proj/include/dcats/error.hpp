#pragma once

#include <stdexcept>
#include <string>

namespace dcats {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  ok = 0,
  config = 2,
  data = 3,
  agent = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  [[nodiscard]] virtual ExitCode exit_code() const noexcept { return ExitCode::data; }
};

/// Invalid configuration: bad keys, impossible split, invalid model shape.
class ConfigError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::config; }
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Unknown location id or missing record.
class LookupError : public DataError {
 public:
  using DataError::DataError;
};

/// Training produced a non-finite loss.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Anything that went wrong talking to, or interpreting, the agent.
class AgentError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::agent; }
};

class RetryExhaustedError : public AgentError {
 public:
  using AgentError::AgentError;
};

class AuthenticationError : public AgentError {
 public:
  using AgentError::AgentError;
};

class MalformedResponseError : public AgentError {
 public:
  using AgentError::AgentError;
};

class ProposalParseError : public AgentError {
 public:
  using AgentError::AgentError;
};

}  // namespace dcats
