#pragma once

#include <cstdint>

#include "evtac/geometry.hpp"
#include "evtac/grid.hpp"

namespace evtac {

/// Semi-dense depth (mm) referenced to a camera pose. Invalid pixels hold 0.
struct DepthMap {
  Grid<double> depth;
  Grid<std::uint8_t> valid;
  PoseSE3 reference;
  TimeUs t_start = 0;
  TimeUs t_end = 0;

  DepthMap() = default;
  DepthMap(int width, int height) : depth(width, height, 0.0), valid(width, height, 0) {}

  int width() const noexcept { return depth.width(); }
  int height() const noexcept { return depth.height(); }
  bool is_valid(int x, int y) const { return valid(x, y) != 0; }
  void set(int x, int y, double z) {
    depth(x, y) = z;
    valid(x, y) = 1;
  }
  void clear(int x, int y) {
    depth(x, y) = 0.0;
    valid(x, y) = 0;
  }
  std::size_t valid_count() const;
  double coverage() const { return depth.empty() ? 0.0 : static_cast<double>(valid_count()) / depth.size(); }
};

inline std::size_t DepthMap::valid_count() const {
  std::size_t n = 0;
  for (auto v : valid.values()) n += (v != 0);
  return n;
}

}  // namespace evtac
