#pragma once

#include <stdexcept>
#include <string>

namespace medflow {

// Base for every typed failure the library reports. `code()` is a stable
// machine-readable tag; the what() string carries the human detail.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

#define MEDFLOW_DEFINE_ERROR(NAME, CODE)                          \
  class NAME : public ::medflow::Error {                          \
   public:                                                        \
    explicit NAME(const std::string& message)                     \
        : ::medflow::Error(CODE, message) {}                      \
  }

}  // namespace medflow
