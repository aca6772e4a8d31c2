#pragma once

#include <stdexcept>
#include <string>

namespace biohand {

// Bad shapes, out-of-domain arguments, unknown ids.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed model / scenario / trajectory files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Adaptation produced a non-finite parameter. The run aborts.
class ControllerFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Integration produced a non-finite state. what() carries the state dump.
class SimulationFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Teleop wire errors: unknown schema version, missing fields, bad lengths.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace biohand
