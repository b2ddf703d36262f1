#include "cipca/error.hpp"

#include <utility>

namespace cipca {

ParseError::ParseError(std::size_t row, const std::string& what)
    : Error("row " + std::to_string(row) + ": " + what), row_(row) {}

DegenerateColumnError::DegenerateColumnError(int date, std::string characteristic)
    : Error("zero cross-sectional standard deviation for '" + characteristic +
            "' in month " + std::to_string(date)),
      date_(date),
      characteristic_(std::move(characteristic)) {}

EmptyMonthError::EmptyMonthError(int date)
    : Error("no asset carries positive weight in month " + std::to_string(date)),
      date_(date) {}

UndefinedCorrelationError::UndefinedCorrelationError(std::size_t i, std::size_t j)
    : Error("rank correlation between characteristics " + std::to_string(i) + " and " +
            std::to_string(j) + " is undefined: zero weighted variance in every month") {}

RankDeficiencyError::RankDeficiencyError(int date, const std::string& what)
    : Error("rank-deficient system in month " + std::to_string(date) + ": " + what),
      date_(date) {}

}  // namespace cipca
