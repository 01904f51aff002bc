#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace thinning {

/// A location in [0,1)^d.
using Point = std::vector<double>;
using PointView = std::span<const double>;

inline void check_unit_cube(PointView x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    if (!(v >= 0.0 && v < 1.0)) {
      throw std::domain_error("coordinate " + std::to_string(i) + " = " + std::to_string(v) +
                              " is outside [0,1)");
    }
  }
}

/// Append-only set of points of a fixed dimension, stored contiguously.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw std::invalid_argument("dimension must be positive");
  }
  PointSet(std::size_t dim, std::vector<double> coords) : PointSet(dim) {
    if (coords.size() % dim != 0) throw std::invalid_argument("coordinate count is not a multiple of dimension");
    coords_ = std::move(coords);
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  bool empty() const { return coords_.empty(); }

  PointView operator[](std::size_t i) const { return {coords_.data() + i * dim_, dim_}; }

  void push_back(PointView x) {
    if (x.size() != dim_) throw std::invalid_argument("point dimension mismatch");
    coords_.insert(coords_.end(), x.begin(), x.end());
  }

  void reserve(std::size_t n) { coords_.reserve(n * dim_); }

  /// The first n points as a new set.
  PointSet prefix(std::size_t n) const {
    PointSet out(dim_);
    out.coords_.assign(coords_.begin(), coords_.begin() + static_cast<std::ptrdiff_t>(n * dim_));
    return out;
  }

  const std::vector<double>& coords() const { return coords_; }

  friend bool operator==(const PointSet&, const PointSet&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
};

}  // namespace thinning
