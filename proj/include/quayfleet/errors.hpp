#pragma once

#include <stdexcept>
#include <string>

namespace quayfleet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define QUAYFLEET_ERROR(Name)                  \
  class Name : public Error {                  \
   public:                                     \
    explicit Name(const std::string& what)     \
        : Error(#Name ": " + what) {}          \
  }

QUAYFLEET_ERROR(InvalidMap);
QUAYFLEET_ERROR(NoEndpoints);
QUAYFLEET_ERROR(Unreachable);
QUAYFLEET_ERROR(Unschedulable);
QUAYFLEET_ERROR(NoVehicle);
QUAYFLEET_ERROR(UnknownVehicle);
QUAYFLEET_ERROR(IllegalTransition);
QUAYFLEET_ERROR(TimestampMismatch);
QUAYFLEET_ERROR(MalformedFrame);
QUAYFLEET_ERROR(ScenarioInvalid);

#undef QUAYFLEET_ERROR

}  // namespace quayfleet
