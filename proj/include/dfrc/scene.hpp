/**
 * @file dfrc/scene.hpp
 * @brief Search-area geometry, node placement, ULA steering vectors,
 *        path-loss Rayleigh channels and the adversary's cell grid.
 *
 * Angles are in degrees at every public interface and measured from the
 * positive x-axis. The base station sits at a corner of the search area so
 * the whole area spans azimuths in [0, 90] degrees.
 */
#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "dfrc/errors.hpp"
#include "dfrc/numerics.hpp"
#include "dfrc/random.hpp"

namespace dfrc {

inline constexpr double deg_to_rad(double deg) {
  return deg * std::numbers::pi / 180.0;
}
inline constexpr double rad_to_deg(double rad) {
  return rad * 180.0 / std::numbers::pi;
}

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(const Point& a, const Point& b) {
  return std::hypot(b.x - a.x, b.y - a.y);
}

/// Azimuth of `point` seen from `origin`, in degrees.
inline double angle_of(const Point& point, const Point& origin) {
  const double dx = point.x - origin.x;
  const double dy = point.y - origin.y;
  if (dx == 0.0 && dy == 0.0) {
    throw DegeneratePlacement("angle_of: point coincides with the origin");
  }
  return rad_to_deg(std::atan2(dy, dx));
}

/// Axis-aligned rectangle [0, width] x [0, height].
struct SearchArea {
  double width = 1000.0;
  double height = 1000.0;

  bool contains(const Point& p) const {
    return p.x >= 0.0 && p.x <= width && p.y >= 0.0 && p.y <= height;
  }
  friend bool operator==(const SearchArea&, const SearchArea&) = default;
};

struct Scenario {
  SearchArea area;
  Point bs_position{0.0, 0.0};
  std::vector<Point> user_positions;
  int adversary_index = 1;  ///< 1-based index into user_positions
  Point target_position;
  int num_tx = 8;            ///< transmit antennas at the BS
  int num_rx = 2;            ///< receive antennas per user
  double spacing = 0.5;      ///< antenna spacing in wavelengths
  double tx_power = 1.0;     ///< linear
  double rx_noise_power = 1e-13;  ///< watts, per user antenna
  double path_loss_exponent = 3.0;

  int num_users() const { return static_cast<int>(user_positions.size()); }

  double target_angle() const { return angle_of(target_position, bs_position); }

  void validate() const {
    if (num_tx < 1 || num_rx < 1) {
      throw ConfigError("antenna counts must be positive");
    }
    if (user_positions.empty()) throw ConfigError("at least one user required");
    if (num_users() * num_rx > num_tx) {
      throw ConfigError("K * N_R must not exceed M_T");
    }
    if (adversary_index < 1 || adversary_index > num_users()) {
      throw ConfigError("adversary_index out of range");
    }
    if (!(tx_power > 0.0) || !(rx_noise_power > 0.0) || !(spacing > 0.0)) {
      throw ConfigError("power, noise and spacing must be positive");
    }
    for (const auto& u : user_positions) {
      if (!area.contains(u)) throw ConfigError("user outside the search area");
    }
    if (!area.contains(target_position) || !area.contains(bs_position)) {
      throw ConfigError("node outside the search area");
    }
    const double theta = target_angle();
    if (theta < 0.0 || theta > 90.0) {
      throw ConfigError("target azimuth outside [0, 90] degrees");
    }
  }
};

/// a(theta): entry m is exp(j 2 pi m delta sin theta).
inline ComplexVector steering_vector(double theta_deg, int num_tx,
                                     double spacing) {
  if (num_tx < 1) throw ShapeError("steering_vector needs num_tx >= 1");
  ComplexVector a(num_tx);
  const double phase = 2.0 * std::numbers::pi * spacing *
                       std::sin(deg_to_rad(theta_deg));
  for (int m = 0; m < num_tx; ++m) {
    a(m) = std::polar(1.0, phase * m);
  }
  return a;
}

struct ChannelSet {
  std::vector<ComplexMatrix> H;  ///< one N_R x M_T matrix per user

  int num_users() const { return static_cast<int>(H.size()); }
};

/// i.i.d. CN(0, d_k^-alpha) entries per user, d_k in metres.
inline ChannelSet generate_channels(const Scenario& s, std::uint64_t seed) {
  ChannelSet out;
  Rng rng = make_rng(seed);
  for (const auto& user : s.user_positions) {
    const double d = distance(s.bs_position, user);
    if (d == 0.0) throw DegeneratePlacement("user co-located with the BS");
    const double variance = std::pow(d, -s.path_loss_exponent);
    ComplexMatrix h(s.num_rx, s.num_tx);
    for (Index c = 0; c < h.cols(); ++c) {
      for (Index r = 0; r < h.rows(); ++r) {
        h(r, c) = complex_gaussian(rng, variance);
      }
    }
    out.H.push_back(std::move(h));
  }
  return out;
}

struct Cell {
  Point center;
  double angle = 0.0;   ///< midpoint azimuth from the BS, degrees
  double radius = 0.0;  ///< midpoint distance from the BS, metres
};

/// Uniform square-cell partition of the search area, row-major from the
/// origin corner: cell index = ix + iy * cols.
class GridWorld {
 public:
  GridWorld(SearchArea area, double cell_size, Point bs_position)
      : area_(area), cell_size_(cell_size), bs_(bs_position) {
    if (!(cell_size > 0.0)) throw ConfigError("cell_size must be positive");
    cols_ = exact_count(area.width, cell_size);
    rows_ = exact_count(area.height, cell_size);
    cells_.reserve(static_cast<std::size_t>(cols_ * rows_));
    for (int iy = 0; iy < rows_; ++iy) {
      for (int ix = 0; ix < cols_; ++ix) {
        Cell c;
        c.center = {(ix + 0.5) * cell_size, (iy + 0.5) * cell_size};
        c.angle = angle_of(c.center, bs_);
        c.radius = distance(c.center, bs_);
        cells_.push_back(c);
      }
    }
  }

  const SearchArea& area() const { return area_; }
  double cell_size() const { return cell_size_; }
  const Point& bs_position() const { return bs_; }
  int cols() const { return cols_; }
  int rows() const { return rows_; }
  int size() const { return static_cast<int>(cells_.size()); }
  const Cell& cell(int n) const { return cells_.at(static_cast<std::size_t>(n)); }
  const std::vector<Cell>& cells() const { return cells_; }

  /// Points on the far boundary belong to the last row/column.
  int cell_index(const Point& p) const {
    if (!area_.contains(p)) throw ShapeError("point outside the search area");
    const int ix = std::min(cols_ - 1, static_cast<int>(p.x / cell_size_));
    const int iy = std::min(rows_ - 1, static_cast<int>(p.y / cell_size_));
    return ix + iy * cols_;
  }

  Point uniform_point_in_cell(int n, Rng& rng) const {
    const Point c = cell(n).center;
    const double h = 0.5 * cell_size_;
    return {uniform(rng, c.x - h, c.x + h), uniform(rng, c.y - h, c.y + h)};
  }

 private:
  static int exact_count(double extent, double cell) {
    const double ratio = extent / cell;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
      throw ConfigError("search-area extent " + std::to_string(extent) +
                        " is not a multiple of cell size " +
                        std::to_string(cell));
    }
    return static_cast<int>(rounded);
  }

  SearchArea area_;
  double cell_size_;
  Point bs_;
  int cols_ = 0;
  int rows_ = 0;
  std::vector<Cell> cells_;
};

inline GridWorld build_grid(SearchArea area, double cell_size,
                            Point bs_position) {
  return GridWorld(area, cell_size, bs_position);
}

/// Uniform angle samples lo, lo + step, ..., hi (inclusive).
class AngleGrid {
 public:
  AngleGrid(double lo, double hi, double step) : lo_(lo), step_(step) {
    if (!(step > 0.0) || hi < lo) throw ConfigError("invalid angle grid");
    const double span = (hi - lo) / step;
    const auto count = static_cast<Index>(std::floor(span + 1e-9)) + 1;
    samples_.resize(count);
    for (Index l = 0; l < count; ++l) samples_(l) = lo + static_cast<double>(l) * step;
  }

  static AngleGrid quadrant(double step = 0.1) { return AngleGrid(0.0, 90.0, step); }

  Index size() const { return samples_.size(); }
  double operator[](Index l) const { return samples_(l); }
  const RealVector& samples() const { return samples_; }
  double step() const { return step_; }

  /// Nearest sample to theta; exact midpoints go to the smaller angle.
  Index nearest(double theta) const {
    const double pos = (theta - lo_) / step_;
    Index l = static_cast<Index>(std::floor(pos));
    l = std::clamp<Index>(l, 0, size() - 1);
    if (l + 1 < size() &&
        std::abs(samples_(l + 1) - theta) < std::abs(theta - samples_(l)) - 1e-12) {
      ++l;
    }
    return l;
  }

 private:
  double lo_;
  double step_;
  RealVector samples_;
};

/// Uniform point in the area, avoiding the cell that contains the BS.
inline Point random_placement(const GridWorld& grid, Rng& rng) {
  const int bs_cell = grid.cell_index(grid.bs_position());
  for (;;) {
    Point p{uniform(rng, 0.0, grid.area().width),
            uniform(rng, 0.0, grid.area().height)};
    if (grid.cell_index(p) != bs_cell) return p;
  }
}

}  // namespace dfrc
