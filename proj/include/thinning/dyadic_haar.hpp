#pragma once

// Dyadic geometry and the (unnormalized) tensor Haar basis on [0,1)^d.
//
// A Haar function is identified by a shape s (one order per axis) and a
// position per axis. An axis with s_i = 0 contributes the constant 1; an axis
// with s_i > 0 contributes the 1-D Haar function of the dyadic interval of
// level s_i - 1 at index pos_i, i.e. +1 on its left half, -1 on its right
// half and 0 elsewhere. The order of the function is sum(s_i).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "thinning/point.hpp"

namespace thinning {

/// Dyadic endpoints of level <= 52 are exact in binary64; 40 leaves margin.
inline constexpr unsigned kMaxLevel = 40;

inline double dyadic_scale(unsigned level) { return std::ldexp(1.0, static_cast<int>(level)); }

/// Index of the level-`level` dyadic cell containing v in [0,1).
inline std::uint64_t cell_index(double v, unsigned level) {
  return static_cast<std::uint64_t>(std::floor(std::ldexp(v, static_cast<int>(level))));
}

struct DyadicInterval {
  unsigned level = 0;
  std::uint64_t index = 0;

  double lo() const { return std::ldexp(static_cast<double>(index), -static_cast<int>(level)); }
  double hi() const { return std::ldexp(static_cast<double>(index + 1), -static_cast<int>(level)); }
  unsigned order() const { return level; }
  DyadicInterval even_half() const { return {level + 1, 2 * index}; }
  DyadicInterval odd_half() const { return {level + 1, 2 * index + 1}; }
  bool contains(double v) const { return v >= lo() && v < hi(); }
  bool valid() const { return level <= kMaxLevel && index < (std::uint64_t{1} << level); }

  friend bool operator==(const DyadicInterval&, const DyadicInterval&) = default;
};

/// Per-axis Haar orders; s_i = 0 is the constant factor.
struct Shape {
  std::vector<unsigned> orders;

  std::size_t dim() const { return orders.size(); }
  unsigned order() const {
    unsigned total = 0;
    for (unsigned s : orders) total += s;
    return total;
  }
  /// Number of Haar functions of this shape: prod over active axes of 2^(s_i - 1).
  std::uint64_t position_count() const {
    std::uint64_t count = 1;
    for (unsigned s : orders)
      if (s > 0) count <<= (s - 1);
    return count;
  }

  friend auto operator<=>(const Shape&, const Shape&) = default;
};

struct HaarId {
  Shape shape;
  std::vector<std::uint64_t> pos;

  std::size_t dim() const { return shape.dim(); }
  unsigned order() const { return shape.order(); }

  double support_volume() const {
    int exponent = 0;
    for (unsigned s : shape.orders)
      if (s > 0) exponent -= static_cast<int>(s) - 1;
    return std::ldexp(1.0, exponent);
  }
  /// kappa = |H^+| = |H^-|.
  double half_support_volume() const { return support_volume() / 2.0; }

  /// The dyadic interval carrying the axis-i factor (the whole of [0,1) for constant axes).
  DyadicInterval axis_support(std::size_t i) const {
    const unsigned s = shape.orders[i];
    return s == 0 ? DyadicInterval{0, 0} : DyadicInterval{s - 1, pos[i]};
  }

  void validate() const {
    if (pos.size() != shape.dim()) throw std::invalid_argument("HaarId: position/shape dimension mismatch");
    if (shape.order() < 1) throw std::invalid_argument("HaarId: order must be at least 1");
    for (std::size_t i = 0; i < pos.size(); ++i) {
      const unsigned s = shape.orders[i];
      if (s > kMaxLevel + 1) throw std::invalid_argument("HaarId: axis order exceeds level cap");
      const std::uint64_t limit = s == 0 ? 1 : (std::uint64_t{1} << (s - 1));
      if (pos[i] >= limit) throw std::invalid_argument("HaarId: position out of range");
    }
  }

  friend auto operator<=>(const HaarId&, const HaarId&) = default;
};

/// Axis-parallel half-open rectangle prod [lo_i, hi_i) inside [0,1)^d.
struct RectSpec {
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dim() const { return lo.size(); }

  double volume() const {
    double v = 1.0;
    for (std::size_t i = 0; i < lo.size(); ++i) v *= hi[i] - lo[i];
    return v;
  }

  bool contains(PointView x) const {
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (!(x[i] >= lo[i] && x[i] < hi[i])) return false;
    return true;
  }

  bool is_lattice(unsigned level) const {
    const double scale = dyadic_scale(level);
    for (std::size_t i = 0; i < lo.size(); ++i) {
      const double a = lo[i] * scale, b = hi[i] * scale;
      if (a != std::floor(a) || b != std::floor(b)) return false;
    }
    return true;
  }

  void validate() const {
    if (lo.empty() || lo.size() != hi.size()) throw std::invalid_argument("RectSpec: bad dimension");
    for (std::size_t i = 0; i < lo.size(); ++i) {
      if (!(lo[i] >= 0.0 && lo[i] < hi[i] && hi[i] <= 1.0))
        throw std::invalid_argument("RectSpec: axis " + std::to_string(i) + " is not a nonempty subinterval of [0,1]");
    }
  }

  friend bool operator==(const RectSpec&, const RectSpec&) = default;
};

inline RectSpec unit_cube(std::size_t dim) { return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)}; }

/// Shortest decimal form that parses back to the same double.
inline std::string format_exact(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline double parse_double(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
  double v = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size() || text.empty())
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  return v;
}

/// Text form "lo1,hi1;lo2,hi2;...".
inline std::string format_rect(const RectSpec& r) {
  std::string out;
  for (std::size_t i = 0; i < r.dim(); ++i) {
    if (i) out += ';';
    out += format_exact(r.lo[i]);
    out += ',';
    out += format_exact(r.hi[i]);
  }
  return out;
}

inline RectSpec parse_rect(std::string_view text) {
  RectSpec r;
  while (!text.empty()) {
    const auto semi = text.find(';');
    const std::string_view axis = text.substr(0, semi);
    const auto comma = axis.find(',');
    if (comma == std::string_view::npos) throw std::invalid_argument("rectangle axis needs 'lo,hi': '" + std::string(axis) + "'");
    r.lo.push_back(parse_double(axis.substr(0, comma)));
    r.hi.push_back(parse_double(axis.substr(comma + 1)));
    if (semi == std::string_view::npos) break;
    text.remove_prefix(semi + 1);
  }
  r.validate();
  return r;
}

/// W(h) = sum_{i=1}^{h} C(i+d-1, d-1): the number of shapes of order 1..h.
inline std::uint64_t shape_count(unsigned h, unsigned d) {
  if (d == 0) throw std::invalid_argument("shape_count: dimension must be positive");
  std::uint64_t total = 0;
  for (unsigned i = 1; i <= h; ++i) {
    // C(i+d-1, d-1) built incrementally; each partial product is itself a binomial.
    std::uint64_t binom = 1;
    for (unsigned k = 1; k < d; ++k) {
      std::uint64_t next = 0;
      if (__builtin_mul_overflow(binom, std::uint64_t{i + k}, &next))
        throw std::overflow_error("shape_count: W(h) exceeds 64-bit range");
      binom = next / k;
    }
    if (__builtin_add_overflow(total, binom, &total)) throw std::overflow_error("shape_count: W(h) exceeds 64-bit range");
  }
  return total;
}

namespace detail {
inline void compositions(unsigned remaining, std::size_t axis, std::vector<unsigned>& cur, std::vector<Shape>& out) {
  if (axis + 1 == cur.size()) {
    cur[axis] = remaining;
    out.push_back(Shape{cur});
    return;
  }
  for (unsigned v = remaining + 1; v-- > 0;) {
    cur[axis] = v;
    compositions(remaining - v, axis + 1, cur, out);
  }
}
}  // namespace detail

/// Shapes of order `order` exactly, lexicographically descending: (k,0,..), ..., (0,..,k).
inline std::vector<Shape> shapes_of_order(unsigned order, unsigned d) {
  std::vector<Shape> out;
  std::vector<unsigned> cur(d, 0);
  detail::compositions(order, 0, cur, out);
  return out;
}

/// All shapes of order 1..h, by order then lexicographically descending.
inline std::vector<Shape> enumerate_shapes(unsigned h, unsigned d) {
  const std::uint64_t expected = shape_count(h, d);
  std::vector<Shape> out;
  out.reserve(expected);
  for (unsigned k = 1; k <= h; ++k) {
    auto level = shapes_of_order(k, d);
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

inline int haar_eval(const HaarId& id, PointView x) {
  if (x.size() != id.dim()) throw std::invalid_argument("haar_eval: dimension mismatch");
  check_unit_cube(x);
  int value = 1;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const unsigned s = id.shape.orders[i];
    if (s == 0) continue;
    const std::uint64_t cell = cell_index(x[i], s);
    if ((cell >> 1) != id.pos[i]) return 0;
    if (cell & 1) value = -value;
  }
  return value;
}

struct LocatedHaar {
  std::vector<std::uint64_t> pos;
  int sign = 0;
};

/// The unique Haar function of `shape` that is nonzero at x, and its value there.
inline LocatedHaar locate_nonzero(const Shape& shape, PointView x) {
  if (x.size() != shape.dim()) throw std::invalid_argument("locate_nonzero: dimension mismatch");
  check_unit_cube(x);
  LocatedHaar out{std::vector<std::uint64_t>(x.size(), 0), 1};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const unsigned s = shape.orders[i];
    if (s == 0) continue;
    const std::uint64_t cell = cell_index(x[i], s);
    out.pos[i] = cell >> 1;
    if (cell & 1) out.sign = -out.sign;
  }
  return out;
}

/// A term of a Haar expansion; `haar` empty means the constant function 1.
struct HaarTerm {
  std::optional<HaarId> haar;
  double coef = 0.0;
};

/// Level and index of a dyadic interval [lo, hi), or nothing if it is not one.
inline std::optional<DyadicInterval> as_dyadic(double lo, double hi) {
  const double width = hi - lo;
  if (!(width > 0.0)) return std::nullopt;
  int exponent = 0;
  const double mantissa = std::frexp(width, &exponent);
  if (mantissa != 0.5) return std::nullopt;
  const int level = 1 - exponent;
  if (level < 0 || level > static_cast<int>(kMaxLevel)) return std::nullopt;
  const double index = std::ldexp(lo, level);
  if (index != std::floor(index)) return std::nullopt;
  return DyadicInterval{static_cast<unsigned>(level), static_cast<std::uint64_t>(index)};
}

/// Expansion of the indicator of a dyadic rectangle in the constant and the
/// Haar functions of order <= the rectangle's order. Coefficients are
/// <1_R, H> / <H, H>; their absolute values sum to 1.
inline std::vector<HaarTerm> decompose_dyadic(const RectSpec& rect) {
  rect.validate();
  const std::size_t d = rect.dim();
  std::vector<DyadicInterval> axes;
  for (std::size_t i = 0; i < d; ++i) {
    auto iv = as_dyadic(rect.lo[i], rect.hi[i]);
    if (!iv) throw std::invalid_argument("decompose_dyadic: axis " + std::to_string(i) + " is not a dyadic interval");
    axes.push_back(*iv);
  }

  // 1-D: 1_I = 2^-l + sum_{k=1}^{l} +-2^(k-1-l) H_{J_k}, J_k the level-(k-1) ancestor of I.
  struct AxisTerm {
    unsigned order;
    std::uint64_t pos;
    double coef;
  };
  std::vector<std::vector<AxisTerm>> per_axis(d);
  for (std::size_t i = 0; i < d; ++i) {
    const auto [l, a] = axes[i];
    per_axis[i].push_back({0, 0, std::ldexp(1.0, -static_cast<int>(l))});
    for (unsigned k = 1; k <= l; ++k) {
      const std::uint64_t cell = a >> (l - k);
      const double mag = std::ldexp(1.0, static_cast<int>(k) - 1 - static_cast<int>(l));
      per_axis[i].push_back({k, cell >> 1, (cell & 1) ? -mag : mag});
    }
  }

  std::vector<HaarTerm> out;
  std::vector<std::size_t> choice(d, 0);
  while (true) {
    HaarId id{Shape{std::vector<unsigned>(d)}, std::vector<std::uint64_t>(d)};
    double coef = 1.0;
    for (std::size_t i = 0; i < d; ++i) {
      const AxisTerm& t = per_axis[i][choice[i]];
      id.shape.orders[i] = t.order;
      id.pos[i] = t.pos;
      coef *= t.coef;
    }
    if (id.order() == 0)
      out.push_back({std::nullopt, coef});
    else
      out.push_back({std::move(id), coef});

    std::size_t axis = 0;
    while (axis < d && ++choice[axis] == per_axis[axis].size()) choice[axis++] = 0;
    if (axis == d) break;
  }
  return out;
}

namespace detail {
/// Peel odd endpoints off [a, b) on the level-`level` grid, recursing one level up.
inline void peel_interval(std::uint64_t a, std::uint64_t b, unsigned level, std::vector<DyadicInterval>& out) {
  if (a >= b) return;
  if (level == 0) {
    out.push_back({0, 0});
    return;
  }
  if (a & 1) out.push_back({level, a++});
  if (b & 1) out.push_back({level, --b});
  peel_interval(a >> 1, b >> 1, level - 1, out);
}
}  // namespace detail

/// Disjoint dyadic intervals whose union is [a 2^-level, b 2^-level), sorted by left endpoint.
inline std::vector<DyadicInterval> decompose_lattice_interval(std::uint64_t a, std::uint64_t b, unsigned level) {
  std::vector<DyadicInterval> out;
  detail::peel_interval(a, b, level, out);
  std::sort(out.begin(), out.end(), [](const DyadicInterval& x, const DyadicInterval& y) { return x.lo() < y.lo(); });
  return out;
}

/// Split a lattice rectangle of order `level` into at most (2 level)^d disjoint dyadic rectangles.
inline std::vector<RectSpec> decompose_lattice(const RectSpec& rect, unsigned level) {
  rect.validate();
  if (level > kMaxLevel) throw std::invalid_argument("decompose_lattice: level exceeds cap");
  if (!rect.is_lattice(level)) throw std::invalid_argument("decompose_lattice: corners are not on the 2^-level grid");
  const std::size_t d = rect.dim();
  const double scale = dyadic_scale(level);
  std::vector<std::vector<DyadicInterval>> per_axis(d);
  for (std::size_t i = 0; i < d; ++i)
    per_axis[i] = decompose_lattice_interval(static_cast<std::uint64_t>(rect.lo[i] * scale),
                                             static_cast<std::uint64_t>(rect.hi[i] * scale), level);

  std::vector<RectSpec> out;
  std::vector<std::size_t> choice(d, 0);
  while (true) {
    RectSpec piece{std::vector<double>(d), std::vector<double>(d)};
    for (std::size_t i = 0; i < d; ++i) {
      piece.lo[i] = per_axis[i][choice[i]].lo();
      piece.hi[i] = per_axis[i][choice[i]].hi();
    }
    out.push_back(std::move(piece));
    std::size_t axis = 0;
    while (axis < d && ++choice[axis] == per_axis[axis].size()) choice[axis++] = 0;
    if (axis == d) break;
  }
  return out;
}

struct LatticeSandwich {
  std::optional<RectSpec> inner;  // empty when some axis rounds to nothing
  RectSpec outer;
};

/// Largest lattice rectangle of order `level` inside rect and smallest one containing it.
inline LatticeSandwich lattice_sandwich(const RectSpec& rect, unsigned level) {
  rect.validate();
  if (level > kMaxLevel) throw std::invalid_argument("lattice_sandwich: level exceeds cap");
  const std::size_t d = rect.dim();
  const double scale = dyadic_scale(level), step = 1.0 / scale;
  LatticeSandwich out{RectSpec{std::vector<double>(d), std::vector<double>(d)},
                      RectSpec{std::vector<double>(d), std::vector<double>(d)}};
  bool inner_empty = false;
  for (std::size_t i = 0; i < d; ++i) {
    const double in_lo = std::ceil(rect.lo[i] * scale) * step;
    const double in_hi = std::floor(rect.hi[i] * scale) * step;
    out.inner->lo[i] = in_lo;
    out.inner->hi[i] = in_hi;
    if (!(in_lo < in_hi)) inner_empty = true;
    out.outer.lo[i] = std::floor(rect.lo[i] * scale) * step;
    out.outer.hi[i] = std::ceil(rect.hi[i] * scale) * step;
  }
  if (inner_empty) out.inner.reset();
  return out;
}

}  // namespace thinning
