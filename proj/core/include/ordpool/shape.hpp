#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "ordpool/error.hpp"

namespace ordpool {

/// Row-major extents of a dense tensor. Every extent must be >= 1; a
/// default-constructed Shape is the empty placeholder with numel() == 0.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::int64_t> dims) : dims_(dims) { validate(); }
  explicit Shape(std::vector<std::int64_t> dims) : dims_(std::move(dims)) { validate(); }

  int rank() const { return static_cast<int>(dims_.size()); }
  std::int64_t operator[](int i) const { return dims_[static_cast<std::size_t>(i)]; }
  const std::vector<std::int64_t>& dims() const { return dims_; }

  std::int64_t numel() const {
    if (dims_.empty()) return 0;
    std::int64_t n = 1;
    for (std::int64_t d : dims_) n *= d;
    return n;
  }

  bool operator==(const Shape&) const = default;

  std::string str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (i) s += ", ";
      s += std::to_string(dims_[i]);
    }
    return s + "]";
  }

 private:
  void validate() const {
    if (dims_.empty()) throw ShapeError("shape must have at least one extent");
    for (std::int64_t d : dims_) {
      if (d < 1) throw ShapeError("shape extent must be >= 1, got " + std::to_string(d));
    }
  }

  std::vector<std::int64_t> dims_;
};

}  // namespace ordpool
