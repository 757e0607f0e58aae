#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ttpp {

/// Operand shapes do not agree for the requested operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller violated a documented precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Attention was asked to attend over zero memory elements.
class EmptyMemoryError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// An observed window is shorter than an operation requires.
class SequenceTooShortError : public ContractError {
 public:
  using ContractError::ContractError;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the byte offset at which parsing failed.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class TruncationError : public ParseError {
 public:
  using ParseError::ParseError;
};

class FormatVersionError : public ParseError {
 public:
  using ParseError::ParseError;
};

/// A row in a feature file has the wrong number of values.
class RowDimensionError : public ParseError {
 public:
  using ParseError::ParseError;
};

}  // namespace ttpp
