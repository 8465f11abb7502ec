#pragma once

#include <stdexcept>
#include <string>

namespace gazefit {

// Base class for every error raised by the toolkit. Pipeline stages catch this
// to report a stage-named diagnostic.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A required column is absent or a file header is malformed.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// A value in an input file could not be parsed. Carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Invalid argument or an input outside an operation's domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// The subword stream cannot be mapped onto the segment sequence.
class AlignmentError : public Error {
 public:
  AlignmentError(const std::string& what, std::size_t segment, std::size_t subword)
      : Error(what + " (segment " + std::to_string(segment) + ", subword " +
              std::to_string(subword) + ")"),
        segment_(segment),
        subword_(subword) {}
  std::size_t segment() const noexcept { return segment_; }
  std::size_t subword() const noexcept { return subword_; }

 private:
  std::size_t segment_;
  std::size_t subword_;
};

// The fixed-effect design is not of full column rank.
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

// A model that failed to converge was passed to an operation requiring one.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Emits a warning line on stderr. Kept as a free function so tests can run quietly
// by redirecting std::cerr.
void warn(const std::string& message);

}  // namespace gazefit
