#pragma once

#include <stdexcept>
#include <string>

namespace tailmask {

/// Invalid configuration or parameters supplied by the caller.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Input outside the mathematical domain of an operation (e.g. empty positive set).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Two derived structures disagree (e.g. a mask refers to a label that does not exist).
class ConsistencyError : public std::logic_error {
 public:
  explicit ConsistencyError(const std::string& what) : std::logic_error(what) {}
};

/// File or parse failure.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tailmask
