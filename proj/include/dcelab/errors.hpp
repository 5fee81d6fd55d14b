#pragma once

#include <stdexcept>
#include <string>

namespace dcelab {

/// Invalid argument or out-of-range physical input.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical procedure did not reach its requested accuracy.
class AccuracyError : public std::runtime_error {
 public:
  AccuracyError(const std::string& what, double achieved)
      : std::runtime_error(what + " (achieved estimate " + std::to_string(achieved) + ")"),
        achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

/// Run or experiment configuration that cannot be executed as given.
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Broken internal invariant (a numerics bug, not a user error).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Trajectory blew up before the requested end time.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, double time, double magnitude)
      : std::runtime_error(what), time_(time), magnitude_(magnitude) {}
  double time() const noexcept { return time_; }
  double magnitude() const noexcept { return magnitude_; }

 private:
  double time_;
  double magnitude_;
};

}  // namespace dcelab
