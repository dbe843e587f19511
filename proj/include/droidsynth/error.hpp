#pragma once

#include <stdexcept>
#include <string>

namespace droidsynth {

// Each category maps onto one CLI exit code (see tools/droidsynth.cpp).

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ProviderError : public std::runtime_error {
 public:
  ProviderError(const std::string& what, int status = 0, std::string request_id = {})
      : std::runtime_error(what), status_(status), request_id_(std::move(request_id)) {}

  int status() const noexcept { return status_; }
  const std::string& request_id() const noexcept { return request_id_; }

 private:
  int status_;
  std::string request_id_;
};

class LeakageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace droidsynth
