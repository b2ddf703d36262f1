#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cipca {

// Base of every error thrown by the library. Callers that only need a message
// can catch this; the subclasses carry the structured context.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t row, const std::string& what);
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class DegenerateColumnError : public Error {
 public:
  DegenerateColumnError(int date, std::string characteristic);
  int date() const noexcept { return date_; }
  const std::string& characteristic() const noexcept { return characteristic_; }

 private:
  int date_;
  std::string characteristic_;
};

class EmptyMonthError : public Error {
 public:
  explicit EmptyMonthError(int date);
  int date() const noexcept { return date_; }

 private:
  int date_;
};

class UndefinedCorrelationError : public Error {
 public:
  UndefinedCorrelationError(std::size_t i, std::size_t j);
};

class InfeasibleSplitError : public Error {
 public:
  using Error::Error;
};

class RankDeficiencyError : public Error {
 public:
  RankDeficiencyError(int date, const std::string& what);
  int date() const noexcept { return date_; }

 private:
  int date_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace cipca
