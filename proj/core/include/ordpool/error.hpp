#pragma once

#include <stdexcept>
#include <string>

namespace ordpool {

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct PartitionError : std::runtime_error {
  explicit PartitionError(const std::string& msg) : std::runtime_error(msg) {}
};

struct RangeError : std::runtime_error {
  explicit RangeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct KernelError : std::runtime_error {
  explicit KernelError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ordpool
