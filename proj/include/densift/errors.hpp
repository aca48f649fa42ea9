#pragma once

#include <stdexcept>
#include <string>

namespace densift {

// Error categories map onto CLI exit codes: config -> 1, data -> 2, numeric -> 3.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidBandwidth : ConfigError {
  using ConfigError::ConfigError;
};
struct InvalidConfig : ConfigError {
  using ConfigError::ConfigError;
};
struct InvalidPTilde : ConfigError {
  using ConfigError::ConfigError;
};
struct SearchTooLarge : ConfigError {
  using ConfigError::ConfigError;
};

struct DegenerateColumn : DataError {
  using DataError::DataError;
};
struct InvalidResponse : DataError {
  using DataError::DataError;
};
struct DegenerateTreatment : DataError {
  using DataError::DataError;
};
struct TooFewObservations : DataError {
  using DataError::DataError;
};
struct ManifestMismatch : DataError {
  using DataError::DataError;
};
struct ParseError : DataError {
  ParseError(std::size_t row, std::size_t col, const std::string& what)
      : DataError("parse error at row " + std::to_string(row) + ", column " +
                  std::to_string(col) + ": " + what),
        row(row),
        col(col) {}
  std::size_t row;
  std::size_t col;
};

struct ZeroMassRow : NumericError {
  using NumericError::NumericError;
};
struct ZeroMassQuery : NumericError {
  using NumericError::NumericError;
};
struct PropensityBoundary : NumericError {
  using NumericError::NumericError;
};

}  // namespace densift
