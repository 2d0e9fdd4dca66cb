#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace auxi {

// Violated operation precondition or shape contract.
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration: unbound parameter, unknown config key, invalid field.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numeric failure: non-finite value, singular system, indefinite curvature.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg, int32_t node = -1)
      : std::runtime_error(msg), node_id(node) {}
  int32_t node_id = -1;
};

}  // namespace auxi
