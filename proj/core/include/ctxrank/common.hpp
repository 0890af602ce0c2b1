#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ctxrank {

/// Every SERP in the challenge logs carries exactly this many results.
inline constexpr std::size_t kSerpSize = 10;

using SessionId = std::int64_t;
using UserId = std::int64_t;
using QueryId = std::int64_t;
using TermId = std::int64_t;
using SerpId = std::int64_t;
/// A document (url) id or a domain id, depending on the context it came from.
using ItemId = std::int64_t;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. Carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input that violates a structural or referential invariant.
class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure during optimization (e.g. a non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctxrank
