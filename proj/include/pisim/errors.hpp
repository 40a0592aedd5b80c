#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pisim {

// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// netarch
class UnknownModel : public Error { using Error::Error; };
class UnknownDataset : public Error { using Error::Error; };
class ShapeMismatch : public Error { using Error::Error; };
class IncompatibleResolution : public Error { using Error::Error; };

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

// costmodel
class InsufficientRows : public Error { using Error::Error; };
class InconsistentRows : public Error { using Error::Error; };
class UncalibratedTriple : public Error { using Error::Error; };

// protocol-core
class PartyMismatch : public Error { using Error::Error; };
class LengthMismatch : public Error { using Error::Error; };
class FieldOverflowRisk : public Error { using Error::Error; };
class MagnitudeOverflow : public Error { using Error::Error; };
class BundleConsumed : public Error { using Error::Error; };
class BundleMismatch : public Error { using Error::Error; };
class UnsupportedTopology : public Error { using Error::Error; };
class ProtocolViolation : public Error { using Error::Error; };

// desim
class ConfigInfeasible : public Error { using Error::Error; };
class NoCompletedRequests : public Error { using Error::Error; };

// configuration / CLI plumbing
class InvalidConfig : public Error { using Error::Error; };

}  // namespace pisim
