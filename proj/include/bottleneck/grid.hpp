#pragma once

#include <algorithm>
#include <cstdlib>
#include <stdexcept>

namespace bottleneck {

/// A height x width grid of cells indexed row-major (index = row * width + col).
struct GridSpec {
  int height = 0;
  int width = 0;

  int cells() const { return height * width; }
  int index(int row, int col) const { return row * width + col; }
  int row(int index) const { return index / width; }
  int col(int index) const { return index % width; }

  int chebyshev(int a, int b) const { return std::max(std::abs(row(a) - row(b)), std::abs(col(a) - col(b))); }

  /// Distance to the nearest boundary row or column; 0 on the perimeter ring.
  int ring(int index) const {
    const int r = row(index);
    const int c = col(index);
    return std::min({r, c, height - 1 - r, width - 1 - c});
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

}  // namespace bottleneck
