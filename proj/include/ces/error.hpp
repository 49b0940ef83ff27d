#pragma once

#include <stdexcept>
#include <string>

namespace ces {

// Raised for malformed or inconsistent user-supplied input (files, flags,
// configuration). The CLI maps it to exit code 1; any other exception is a
// runtime failure.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ces
