#pragma once

#include <stdexcept>
#include <string>

namespace optonet {

// Base class for all feasibility/validation failures raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InfeasibleScheduleError : public Error { public: using Error::Error; };
class InfeasibleTopologyError : public Error { public: using Error::Error; };
class InvalidNodeCountError : public Error { public: using Error::Error; };
class InvalidGridError : public Error { public: using Error::Error; };
class UnreachableError : public Error { public: using Error::Error; };
class SliceDisconnectedError : public Error { public: using Error::Error; };
class EntryConflictError : public Error { public: using Error::Error; };
class PathInvalidError : public Error { public: using Error::Error; };
class TooLargeError : public Error { public: using Error::Error; };
class SchemaError : public Error { public: using Error::Error; };

}  // namespace optonet
