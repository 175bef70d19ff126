#include "ridgepred/errors.hpp"

#include <utility>

namespace ridgepred {

ConvergenceError::ConvergenceError(const std::string& what, double residual, int iterations)
    : Error(what + " (residual " + std::to_string(residual) + " after " +
            std::to_string(iterations) + " iterations)"),
      residual_(residual),
      iterations_(iterations) {}

DegenerateFeatureError::DegenerateFeatureError(std::size_t column)
    : Error("column " + std::to_string(column) + " has near-zero variance"), column_(column) {}

static std::string config_message(const std::string& what, int line, const std::string& key) {
  std::string msg;
  if (line > 0) msg += "line " + std::to_string(line) + ": ";
  if (!key.empty()) msg += "key '" + key + "': ";
  return msg + what;
}

ConfigError::ConfigError(const std::string& what, int line, std::string key)
    : Error(config_message(what, line, key)), line_(line), key_(std::move(key)) {}

}  // namespace ridgepred
