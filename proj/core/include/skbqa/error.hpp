#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace skbqa {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input record. line() is 1-based; 0 when not line oriented.
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what),
        source_(std::move(source)),
        line_(line) {}

  const std::string& source() const { return source_; }
  std::size_t line() const { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

// Unknown entity id, relation label, template name, ...
class LookupError : public Error {
 public:
  using Error::Error;
};

// Arguments that violate an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Network or remote-service failure. Retryable by callers that want to.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Scripted backend was asked something the script cannot answer.
class ScriptError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace skbqa
