#pragma once

// Ego footprint rasterization shared by the planner cost, the collision loss
// and the collision-rate metric.

#include "gridworld.hpp"

#include <array>
#include <initializer_list>
#include <vector>

namespace rw {

struct Footprint {
    double length = 4.0;  // metres along the heading
    double width = 2.0;

    static Footprint ego(const WorldConfig&) { return {}; }
};

struct Raster {
    std::vector<std::array<int, 2>> cells;  // (row, col) inside the window
    int outside = 0;                        // footprint cells beyond the window
};

// Cells whose centres lie in the heading-aligned rectangle centred at
// `center`, half-open along both axes so a rectangle aligned with the grid
// covers exactly length/cell_size by width/cell_size cells.
Raster rasterize_footprint(const WorldConfig& cfg, const Footprint& fp, Vec2 center, double heading);

bool footprint_touches(const Footprint& fp, const SemanticOccGrid& grid, const WorldConfig& cfg, Vec2 center,
                       double heading, std::initializer_list<int> classes);

// Heading of each waypoint from its incoming displacement; the first waypoint
// uses the displacement from `origin`, and degenerate steps reuse the previous
// heading (initially `origin_heading`).
std::vector<double> waypoint_headings(const std::vector<Vec2>& waypoints, Vec2 origin, double origin_heading);

}  // namespace rw
