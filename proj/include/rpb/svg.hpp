#pragma once

#include "rpb/plant.hpp"

#include <string>
#include <vector>

namespace rpb {

struct Trajectory {
  Signal eta;  // augmented states over time
  Vec targets;  // one target position per robot
};

/// Static SVG of robot paths (lines), starts (dots), targets (stars) and obstacles (circles).
std::string render_svg(const PlantLayout& layout, const ObstacleField& field,
                       const std::vector<Trajectory>& trajectories, double width_px = 480.0);

void write_svg(const std::string& path, const PlantLayout& layout, const ObstacleField& field,
               const std::vector<Trajectory>& trajectories);

}  // namespace rpb
