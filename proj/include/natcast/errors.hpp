#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace natcast {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A series has (numerically) zero variance and cannot be normalized or
/// correlated. Silently mapping such series to zero would corrupt
/// downstream correlation ranks, so this is always a hard error.
class DegenerateSeriesError : public Error {
public:
  explicit DegenerateSeriesError(const std::string& what) : Error(what) {}
};

/// Vector lengths or matrix dimensions do not line up.
class DimensionError : public Error {
public:
  explicit DimensionError(const std::string& what) : Error(what) {}
};

/// Two inputs do not cover the same region set. Carries the offending
/// region codes (symmetric difference, or missing regions).
class RegionMismatchError : public Error {
public:
  RegionMismatchError(const std::string& what, std::vector<std::string> regions)
      : Error(what), regions(std::move(regions)) {}
  std::vector<std::string> regions;
};

/// Duplicate key where uniqueness is required (term, record, ...).
class DuplicateError : public Error {
public:
  explicit DuplicateError(const std::string& what) : Error(what) {}
};

/// Least-squares design is rank deficient. Names the columns that are
/// linearly dependent on the preceding ones (the intercept counts as a
/// column and is reported as "(intercept)").
class SingularDesignError : public Error {
public:
  SingularDesignError(const std::string& what, std::vector<std::string> columns)
      : Error(what), dependent_columns(std::move(columns)) {}
  std::vector<std::string> dependent_columns;
};

/// Iterative solver failed to converge within its sweep budget.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, std::size_t sweeps, double last_change)
      : Error(what), sweeps(sweeps), last_change(last_change) {}
  std::size_t sweeps;
  double last_change;
};

/// A year is missing one or more months and cannot be annualized.
class IncompleteYearError : public Error {
public:
  IncompleteYearError(const std::string& what, int year, std::vector<int> missing_months)
      : Error(what), year(year), missing_months(std::move(missing_months)) {}
  int year;
  std::vector<int> missing_months;
};

/// A series cannot be rescaled to max 1.0 (non-positive maximum).
class RescaleError : public Error {
public:
  explicit RescaleError(const std::string& what) : Error(what) {}
};

/// Malformed input file. `line` is 1-based; 0 means "not line-specific".
class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t line = 0) : Error(what), line(line) {}
  std::size_t line;
};

/// Invalid configuration value or unresolvable path.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

/// A pipeline stage failed; wraps the cause with the stage name.
class StageError : public Error {
public:
  StageError(const std::string& stage, const std::string& cause)
      : Error("stage '" + stage + "': " + cause), stage(stage) {}
  std::string stage;
};

} // namespace natcast
