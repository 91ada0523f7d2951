#pragma once

#include <stdexcept>
#include <string>

namespace dslota {

// Precondition or contract violation reported by any module.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

}  // namespace dslota
