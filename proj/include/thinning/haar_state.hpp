#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "thinning/dyadic_haar.hpp"
#include "thinning/point.hpp"

namespace thinning {

/// Incrementally maintained inner products <nu, H> of the counting measure of
/// the kept points against every Haar function of order 1..h.
///
/// Entries live in one flat array, grouped per shape in (order, shape) order
/// and row-major by position within a shape. Each insert touches exactly one
/// entry per shape. Growth is driven by the caller.
class CoefficientTable {
 public:
  struct ShapeBlock {
    Shape shape;
    std::size_t offset = 0;
    std::uint64_t size = 0;
  };

  static constexpr std::uint64_t kDefaultEntryCap = std::uint64_t{1} << 27;

  explicit CoefficientTable(std::size_t dim, std::uint64_t entry_cap = kDefaultEntryCap)
      : points_(dim), entry_cap_(entry_cap) {
    if (dim > 64) throw std::invalid_argument("CoefficientTable: dimension must not exceed 64");
  }

  std::size_t dim() const { return points_.dim(); }
  unsigned max_order() const { return h_; }
  std::size_t n_kept() const { return points_.size(); }
  std::size_t entry_count() const { return entries_.size(); }
  const std::vector<ShapeBlock>& blocks() const { return blocks_; }
  const PointSet& points() const { return points_; }
  std::span<const std::int64_t> entries() const { return entries_; }

  /// Allocate the shapes of order h+1..h_new and replay every kept point into them.
  void grow(unsigned h_new) {
    if (h_new <= h_) throw std::invalid_argument("grow: new order must exceed the current one");
    if (h_new > kMaxLevel) throw std::invalid_argument("grow: order exceeds level cap");
    const unsigned d = static_cast<unsigned>(dim());
    std::uint64_t projected = entries_.size();
    std::vector<ShapeBlock> fresh;
    for (unsigned k = h_ + 1; k <= h_new; ++k) {
      for (Shape& s : shapes_of_order(k, d)) {
        const std::uint64_t size = s.position_count();
        fresh.push_back({std::move(s), 0, size});
        projected += size;
        if (projected > entry_cap_)
          throw std::length_error("grow: " + std::to_string(projected) + " entries exceed the cap of " +
                                  std::to_string(entry_cap_));
      }
    }
    const std::size_t first_new = blocks_.size();
    for (ShapeBlock& b : fresh) {
      b.offset = entries_.size();
      entries_.resize(entries_.size() + b.size, 0);
      index_.emplace(b.shape, blocks_.size());
      blocks_.push_back(std::move(b));
    }
    h_ = h_new;
    for (std::size_t i = 0; i < points_.size(); ++i)
      for_each_located(points_[i], first_new, [&](std::size_t entry, int sign) { entries_[entry] += sign; });
  }

  void insert(PointView x) {
    check_point(x);
    points_.push_back(x);
    for_each_located(x, 0, [&](std::size_t entry, int sign) { entries_[entry] += sign; });
  }

  /// sum over shapes of sgn<nu, -H> H(x) for the Haar function of each shape that is nonzero at x.
  long long signed_sum(PointView x) const {
    check_point(x);
    long long total = 0;
    for_each_located(x, 0, [&](std::size_t entry, int sign) {
      const std::int64_t c = entries_[entry];
      if (c > 0)
        total -= sign;
      else if (c < 0)
        total += sign;
    });
    return total;
  }

  std::int64_t coefficient(const HaarId& id) const {
    id.validate();
    const auto it = index_.find(id.shape);
    if (id.dim() != dim() || it == index_.end())
      throw std::out_of_range("coefficient: shape not present in the table");
    const ShapeBlock& b = blocks_[it->second];
    std::uint64_t local = 0;
    for (std::size_t i = 0; i < id.dim(); ++i) {
      const unsigned s = id.shape.orders[i];
      if (s > 0) local = (local << (s - 1)) | id.pos[i];
    }
    return entries_[b.offset + local];
  }

  void save(std::ostream& out) const {
    out.write(kMagic, sizeof kMagic);
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint64_t>(dim()));
    write_pod(out, static_cast<std::uint32_t>(h_));
    write_pod(out, static_cast<std::uint64_t>(n_kept()));
    out.write(reinterpret_cast<const char*>(points_.coords().data()),
              static_cast<std::streamsize>(points_.coords().size() * sizeof(double)));
    write_pod(out, static_cast<std::uint64_t>(entries_.size()));
    out.write(reinterpret_cast<const char*>(entries_.data()),
              static_cast<std::streamsize>(entries_.size() * sizeof(std::int64_t)));
    if (!out) throw std::runtime_error("snapshot: write failed");
  }

  static CoefficientTable load(std::istream& in, std::uint64_t entry_cap = kDefaultEntryCap) {
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw std::runtime_error("snapshot: bad magic");
    if (read_pod<std::uint32_t>(in) != kVersion) throw std::runtime_error("snapshot: unsupported version");
    const auto d = read_pod<std::uint64_t>(in);
    const auto h = read_pod<std::uint32_t>(in);
    const auto n = read_pod<std::uint64_t>(in);
    if (d == 0 || d > 64 || h > kMaxLevel) throw std::runtime_error("snapshot: corrupt header");
    std::vector<double> coords(n * d);
    in.read(reinterpret_cast<char*>(coords.data()), static_cast<std::streamsize>(coords.size() * sizeof(double)));
    CoefficientTable table(d, entry_cap);
    table.points_ = PointSet(d, std::move(coords));
    if (h > 0) {
      // Allocate blocks without replaying; entries are read verbatim below.
      PointSet kept = std::move(table.points_);
      table.points_ = PointSet(d);
      table.grow(h);
      table.points_ = std::move(kept);
    }
    const auto count = read_pod<std::uint64_t>(in);
    if (count != table.entries_.size()) throw std::runtime_error("snapshot: entry count mismatch");
    in.read(reinterpret_cast<char*>(table.entries_.data()), static_cast<std::streamsize>(count * sizeof(std::int64_t)));
    if (!in) throw std::runtime_error("snapshot: truncated");
    return table;
  }

 private:
  static constexpr char kMagic[8] = {'T', 'H', 'N', 'H', 'A', 'A', 'R', '\0'};
  static constexpr std::uint32_t kVersion = 1;

  template <class T>
  static void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  template <class T>
  static T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error("snapshot: truncated");
    return v;
  }

  void check_point(PointView x) const {
    if (x.size() != dim()) throw std::invalid_argument("point dimension mismatch");
    check_unit_cube(x);
  }

  /// Calls f(entry index, H(x)) for the one nonzero Haar function of each block from `first` on.
  template <class F>
  void for_each_located(PointView x, std::size_t first, F&& f) const {
    if (first >= blocks_.size()) return;
    const std::size_t d = x.size();
    // Cells at the finest level in use; coarser cells are right shifts.
    std::uint64_t fine[64];
    for (std::size_t i = 0; i < d; ++i) fine[i] = cell_index(x[i], h_);
    for (std::size_t b = first; b < blocks_.size(); ++b) {
      const ShapeBlock& block = blocks_[b];
      std::uint64_t local = 0;
      int sign = 1;
      for (std::size_t i = 0; i < d; ++i) {
        const unsigned s = block.shape.orders[i];
        if (s == 0) continue;
        const std::uint64_t cell = fine[i] >> (h_ - s);
        local = (local << (s - 1)) | (cell >> 1);
        if (cell & 1) sign = -sign;
      }
      f(block.offset + local, sign);
    }
  }

  PointSet points_;
  unsigned h_ = 0;
  std::vector<ShapeBlock> blocks_;
  std::map<Shape, std::size_t> index_;
  std::vector<std::int64_t> entries_;
  std::uint64_t entry_cap_;
};

inline CoefficientTable new_state(std::size_t dim) { return CoefficientTable(dim); }

/// <nu, H> recomputed from scratch.
inline std::int64_t recompute_oracle(const PointSet& points, const HaarId& id) {
  std::int64_t total = 0;
  for (std::size_t i = 0; i < points.size(); ++i) total += haar_eval(id, points[i]);
  return total;
}

}  // namespace thinning
