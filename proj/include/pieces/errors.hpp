#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pieces {

// Numerical failure that carries whatever history explains it.
struct NumericError : std::runtime_error {
  std::vector<std::string> trace;
  explicit NumericError(const std::string& what, std::vector<std::string> t = {})
      : std::runtime_error(what), trace(std::move(t)) {}
};

}  // namespace pieces
