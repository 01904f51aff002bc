#pragma once

// Rectangle discrepancy sup_R |#(Z in R) - n vol(R)| over half-open boxes.
//
// The supremum is approached, not attained, at point coordinates. Boundaries
// are therefore handled as one-sided limits: a boundary at coordinate v is
// either "at v" or "just past v", which changes whether a point equal to v is
// counted but not the volume. Reported argmax rectangles realize "just past
// v" as nextafter(v, 1), so their recomputed deviation matches `value` up to
// a few ulps times n.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "thinning/dyadic_haar.hpp"
#include "thinning/point.hpp"

namespace thinning {

enum class DiscMethod { exact_1d, lattice, brute };

inline std::string_view to_string(DiscMethod m) {
  switch (m) {
    case DiscMethod::exact_1d: return "exact_1d";
    case DiscMethod::lattice: return "lattice";
    case DiscMethod::brute: return "brute";
  }
  return "unknown";
}

struct DiscReport {
  double value = 0.0;
  RectSpec argmax_rect;
  DiscMethod method = DiscMethod::exact_1d;
  std::optional<unsigned> lattice_order;
  double additive_error_bound = 0.0;
};

inline std::size_t count_in(const PointSet& points, const RectSpec& rect) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < points.size(); ++i) count += rect.contains(points[i]) ? 1 : 0;
  return count;
}

/// |#(points in rect) - n vol(rect)|.
inline double rect_bias(const PointSet& points, const RectSpec& rect) {
  if (!points.empty() && rect.dim() != points.dim()) throw std::invalid_argument("rect_bias: dimension mismatch");
  return std::abs(static_cast<double>(count_in(points, rect)) - static_cast<double>(points.size()) * rect.volume());
}

namespace detail {

/// A rectangle boundary as a one-sided limit at `at`.
struct Boundary {
  double at = 0.0;
  bool past = false;  // just past `at`: a point equal to `at` lies below the boundary

  double realize() const { return past ? std::nextafter(at, 2.0) : at; }
  friend auto operator<=>(const Boundary&, const Boundary&) = default;
};

inline bool below(double x, Boundary b) { return b.past ? x <= b.at : x < b.at; }

inline void check_points(const PointSet& points) {
  for (std::size_t i = 0; i < points.size(); ++i) check_unit_cube(points[i]);
}

}  // namespace detail

/// Exact 1-D interval discrepancy, O(n log n).
///
/// With G(t) = #{x < t} - n t, the deviation of [a, b) is G(b) - G(a), so the
/// supremum is max G - min G over t in {0, 1} and both one-sided limits at
/// every point.
inline DiscReport interval_disc_1d(std::vector<double> xs) {
  for (double v : xs)
    if (!(v >= 0.0 && v < 1.0)) throw std::domain_error("interval_disc_1d: point outside [0,1)");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());

  detail::Boundary arg_max{0.0, false}, arg_min{0.0, false};
  double g_max = 0.0, g_min = 0.0;
  auto consider = [&](double g, detail::Boundary b) {
    if (g > g_max) g_max = g, arg_max = b;
    if (g < g_min) g_min = g, arg_min = b;
  };
  consider(0.0, {1.0, false});
  for (std::size_t i = 0; i < xs.size();) {
    std::size_t j = i;
    while (j < xs.size() && xs[j] == xs[i]) ++j;
    const double v = xs[i];
    consider(static_cast<double>(i) - n * v, {v, false});
    consider(static_cast<double>(j) - n * v, {v, true});
    i = j;
  }

  DiscReport report;
  report.method = DiscMethod::exact_1d;
  report.value = g_max - g_min;
  if (report.value == 0.0) {
    report.argmax_rect = unit_cube(1);
  } else {
    const auto [lo, hi] = std::minmax(arg_max, arg_min);
    report.argmax_rect = RectSpec{{lo.realize()}, {hi.realize()}};
  }
  return report;
}

inline DiscReport interval_disc_1d(const PointSet& points) {
  if (!points.empty() && points.dim() != 1) throw std::invalid_argument("interval_disc_1d: points must be 1-D");
  return interval_disc_1d(points.coords());
}

/// Cap on grid cells (2^(level d)) for lattice discrepancy.
inline constexpr std::uint64_t kLatticeCellCap = std::uint64_t{1} << 24;

/// Default lattice order for a point count: min(floor(log2 n), 10), at least 1.
inline unsigned default_lattice_order(std::size_t n) {
  unsigned l = 0;
  while (l < 10 && (std::size_t{2} << l) <= n) ++l;
  return std::max(l, 1u);
}

namespace detail {

/// Lattice rectangle [a_i/m, b_i/m) per axis with its deviation in units of m^-d.
struct LatticeBest {
  std::int64_t scaled = 0;
  std::vector<std::uint64_t> a, b;
};

/// d = 2: for each pair of boundaries on axis 0, scan the per-column deviations
/// for the largest and smallest contiguous sums.
inline LatticeBest lattice_scan_2d(const std::vector<std::int64_t>& counts, std::uint64_t m, std::int64_t n) {
  LatticeBest best{0, {0, 0}, {m, m}};
  std::vector<std::int64_t> column(m);
  const std::int64_t area = static_cast<std::int64_t>(m * m);
  for (std::uint64_t r1 = 0; r1 < m; ++r1) {
    std::fill(column.begin(), column.end(), 0);
    for (std::uint64_t r2 = r1 + 1; r2 <= m; ++r2) {
      const std::int64_t height = static_cast<std::int64_t>(r2 - r1);
      // Deviation of one column of this slab, in units of m^-2.
      for (std::uint64_t c = 0; c < m; ++c) column[c] += counts[(r2 - 1) * m + c];
      std::int64_t run_max = 0, run_min = 0;
      std::uint64_t start_max = 0, start_min = 0;
      for (std::uint64_t c = 0; c < m; ++c) {
        const std::int64_t dev = column[c] * area - n * height;
        if (run_max <= 0) run_max = 0, start_max = c;
        if (run_min >= 0) run_min = 0, start_min = c;
        run_max += dev;
        run_min += dev;
        if (run_max > std::abs(best.scaled)) best = {run_max, {r1, start_max}, {r2, c + 1}};
        if (-run_min > std::abs(best.scaled)) best = {run_min, {r1, start_min}, {r2, c + 1}};
      }
    }
  }
  return best;
}

/// Any d: enumerate every lattice rectangle against d-dimensional prefix sums.
inline LatticeBest lattice_enumerate(const std::vector<std::int64_t>& counts, std::size_t d, std::uint64_t m,
                                     std::int64_t n) {
  const std::uint64_t side = m + 1;
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < d; ++i) total *= side;
  // prefix[j] = points in prod [0, j_i/m).
  std::vector<std::int64_t> prefix(total, 0);
  std::vector<std::uint64_t> idx(d);
  for (std::uint64_t flat = 0; flat < total; ++flat) {
    std::uint64_t rem = flat;
    bool interior = true;
    std::uint64_t cell = 0;
    for (std::size_t i = d; i-- > 0;) {
      idx[i] = rem % side;
      rem /= side;
    }
    for (std::size_t i = 0; i < d; ++i) {
      if (idx[i] == 0) interior = false;
      cell = cell * m + (idx[i] ? idx[i] - 1 : 0);
    }
    if (!interior) continue;
    // Inclusion-exclusion over the 2^d lower neighbours.
    std::int64_t v = counts[cell];
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << d); ++mask) {
      std::uint64_t nb = 0;
      for (std::size_t i = 0; i < d; ++i) nb = nb * side + (idx[i] - ((mask >> i) & 1));
      v += (std::popcount(mask) & 1) ? prefix[nb] : -prefix[nb];
    }
    prefix[flat] = v;
  }

  std::int64_t grid_volume = 1;
  for (std::size_t i = 0; i < d; ++i) grid_volume *= static_cast<std::int64_t>(m);

  LatticeBest best{0, std::vector<std::uint64_t>(d, 0), std::vector<std::uint64_t>(d, m)};
  std::vector<std::uint64_t> a(d, 0), b(d, 1);
  while (true) {
    std::int64_t count = 0, len = 1;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << d); ++mask) {
      std::uint64_t corner = 0;
      for (std::size_t i = 0; i < d; ++i) corner = corner * side + (((mask >> i) & 1) ? a[i] : b[i]);
      count += (std::popcount(mask) & 1) ? -prefix[corner] : prefix[corner];
    }
    for (std::size_t i = 0; i < d; ++i) len *= static_cast<std::int64_t>(b[i] - a[i]);
    const std::int64_t scaled = count * grid_volume - n * len;
    if (std::abs(scaled) > std::abs(best.scaled)) best = {scaled, a, b};

    std::size_t axis = 0;
    for (; axis < d; ++axis) {
      if (++b[axis] <= m) break;
      if (++a[axis] < m) {
        b[axis] = a[axis] + 1;
        break;
      }
      a[axis] = 0;
      b[axis] = 1;
    }
    if (axis == d) break;
  }
  return best;
}

}  // namespace detail

/// Exact supremum of |nu(R) - n|R|| over lattice rectangles of order `level`
/// (corners on the 2^-level grid), plus the additive bound n 2d 2^(1-level)
/// on its gap to the rectangle discrepancy.
inline DiscReport lattice_disc(const PointSet& points, unsigned level) {
  const std::size_t d = points.dim();
  if (d == 0) throw std::invalid_argument("lattice_disc: point set has no dimension");
  if (level == 0 || level > kMaxLevel) throw std::invalid_argument("lattice_disc: level must lie in 1..40");
  if (static_cast<std::uint64_t>(level) * d > 24 ||
      (std::uint64_t{1} << (level * d)) > kLatticeCellCap)
    throw std::length_error("lattice_disc: grid of 2^(" + std::to_string(level * d) + ") cells exceeds the cap");
  if (points.size() > (std::size_t{1} << 30)) throw std::length_error("lattice_disc: too many points");
  detail::check_points(points);

  const std::uint64_t m = std::uint64_t{1} << level;
  const std::int64_t n = static_cast<std::int64_t>(points.size());
  std::uint64_t cells = 1;
  for (std::size_t i = 0; i < d; ++i) cells *= m;
  std::vector<std::int64_t> counts(cells, 0);
  for (std::size_t p = 0; p < points.size(); ++p) {
    std::uint64_t cell = 0;
    for (std::size_t i = 0; i < d; ++i) cell = cell * m + cell_index(points[p][i], level);
    ++counts[cell];
  }

  detail::LatticeBest best;
  if (d == 1) {
    // Max minus min of the scaled G(j) = P(j) m - n j.
    std::int64_t prefix = 0, g_max = 0, g_min = 0;
    std::uint64_t j_max = 0, j_min = 0;
    for (std::uint64_t j = 1; j <= m; ++j) {
      prefix += counts[j - 1];
      const std::int64_t g = prefix * static_cast<std::int64_t>(m) - n * static_cast<std::int64_t>(j);
      if (g > g_max) g_max = g, j_max = j;
      if (g < g_min) g_min = g, j_min = j;
    }
    best = {g_max - g_min, {std::min(j_max, j_min)}, {std::max(j_max, j_min)}};
    if (best.scaled == 0) best = {0, {0}, {m}};
  } else if (d == 2) {
    best = detail::lattice_scan_2d(counts, m, n);
  } else {
    best = detail::lattice_enumerate(counts, d, m, n);
  }

  DiscReport report;
  report.method = DiscMethod::lattice;
  report.lattice_order = level;
  report.value = std::ldexp(static_cast<double>(std::abs(best.scaled)), -static_cast<int>(level * d));
  report.argmax_rect = RectSpec{std::vector<double>(d), std::vector<double>(d)};
  for (std::size_t i = 0; i < d; ++i) {
    report.argmax_rect.lo[i] = std::ldexp(static_cast<double>(best.a[i]), -static_cast<int>(level));
    report.argmax_rect.hi[i] = std::ldexp(static_cast<double>(best.b[i]), -static_cast<int>(level));
  }
  report.additive_error_bound =
      static_cast<double>(n) * 2.0 * static_cast<double>(d) * std::ldexp(1.0, 1 - static_cast<int>(level));
  return report;
}

/// Exact rectangle discrepancy by exhaustive enumeration of boundary limits.
/// Test oracle; cost grows like n^(2d+1).
inline DiscReport brute_disc_oracle(const PointSet& points, std::uint64_t work_cap = std::uint64_t{1} << 32) {
  const std::size_t d = points.dim();
  if (d == 0) throw std::invalid_argument("brute_disc_oracle: point set has no dimension");
  detail::check_points(points);
  const std::size_t n = points.size();

  std::vector<std::vector<detail::Boundary>> bounds(d);
  for (std::size_t i = 0; i < d; ++i) {
    auto& b = bounds[i];
    b.push_back({0.0, false});
    b.push_back({1.0, false});
    for (std::size_t p = 0; p < n; ++p) {
      b.push_back({points[p][i], false});
      b.push_back({points[p][i], true});
    }
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
  }
  // Per axis, all ordered pairs lower < upper.
  std::vector<std::vector<std::pair<detail::Boundary, detail::Boundary>>> pairs(d);
  double work = static_cast<double>(std::max<std::size_t>(n, 1));
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t lo = 0; lo < bounds[i].size(); ++lo)
      for (std::size_t hi = lo + 1; hi < bounds[i].size(); ++hi) pairs[i].emplace_back(bounds[i][lo], bounds[i][hi]);
    work *= static_cast<double>(pairs[i].size());
  }
  if (work > static_cast<double>(work_cap)) throw std::length_error("brute_disc_oracle: instance too large");

  double best = 0.0;
  std::vector<std::size_t> best_choice(d, 0), choice(d, 0);
  bool found = false;
  while (true) {
    std::size_t count = 0;
    for (std::size_t p = 0; p < n; ++p) {
      bool inside = true;
      for (std::size_t i = 0; i < d && inside; ++i) {
        const auto& [lo, hi] = pairs[i][choice[i]];
        const double x = points[p][i];
        inside = !detail::below(x, lo) && detail::below(x, hi);
      }
      count += inside ? 1 : 0;
    }
    double volume = 1.0;
    for (std::size_t i = 0; i < d; ++i) volume *= pairs[i][choice[i]].second.at - pairs[i][choice[i]].first.at;
    const double dev = std::abs(static_cast<double>(count) - static_cast<double>(n) * volume);
    if (!found || dev > best) best = dev, best_choice = choice, found = true;

    std::size_t axis = 0;
    while (axis < d && ++choice[axis] == pairs[axis].size()) choice[axis++] = 0;
    if (axis == d) break;
  }

  DiscReport report;
  report.method = DiscMethod::brute;
  report.value = best;
  report.argmax_rect = RectSpec{std::vector<double>(d), std::vector<double>(d)};
  for (std::size_t i = 0; i < d; ++i) {
    report.argmax_rect.lo[i] = pairs[i][best_choice[i]].first.realize();
    report.argmax_rect.hi[i] = pairs[i][best_choice[i]].second.realize();
  }
  return report;
}

/// Production discrepancy: exact for d = 1, lattice for d >= 2.
inline DiscReport discrepancy(const PointSet& points, std::optional<unsigned> lattice_level = std::nullopt) {
  if (points.dim() == 1) return interval_disc_1d(points);
  return lattice_disc(points, lattice_level.value_or(default_lattice_order(points.size())));
}

inline constexpr std::string_view kDiscCsvHeader = "method,lattice_order,value,error_bound,argmax";

}  // namespace thinning
