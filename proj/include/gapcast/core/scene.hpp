#pragma once

#include <string>

#include "gapcast/core/grid.hpp"

namespace gapcast {

/// One processed observation: excess temperature above the scene background.
struct Scene {
  std::string volcano_id;
  Date date{};
  Grid grid;      // degrees C above background
  Grid fill_age;  // days since each pixel was last truly observed; 0 = fresh
  double background = 0.0;

  bool operator==(const Scene&) const = default;
};

}  // namespace gapcast
