#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace dlo {

/// Minimal value-or-error result for planned failure modes.
template <class T>
struct Expected {
  std::optional<T> val;
  std::string err;

  static Expected ok(T v) {
    Expected e;
    e.val = std::move(v);
    return e;
  }
  static Expected fail(std::string message) {
    Expected e;
    e.err = std::move(message);
    return e;
  }

  explicit operator bool() const { return val.has_value(); }
  T& value() {
    if (!val) throw std::runtime_error("Expected has no value: " + err);
    return *val;
  }
  const T& value() const {
    if (!val) throw std::runtime_error("Expected has no value: " + err);
    return *val;
  }
  const std::string& error() const { return err; }
};

}  // namespace dlo
