#pragma once

#include <stdexcept>
#include <string>

namespace spde_hmm {

/// Argument outside the mathematical domain of an operation (negative time, p < 2, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Invalid or inconsistent configuration. `field` names the offending key when known.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& message, std::string field = {})
      : std::runtime_error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Not enough usable samples or points for the requested statistic.
class StatisticsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Objects that cannot be combined (fields on different bases, mismatched sizes).
class StructuralError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace spde_hmm
