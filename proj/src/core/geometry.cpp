#include "geometry.hpp"

#include <algorithm>
#include <cmath>

namespace rw {

Raster rasterize_footprint(const WorldConfig& cfg, const Footprint& fp, Vec2 center, double heading)
{
    Raster out;
    const double hl = fp.length / 2.0;
    const double hw = fp.width / 2.0;
    const double reach = std::hypot(hl, hw);
    const double cs = cfg.cell_size;
    constexpr double eps = 1e-9;
    // Candidate cells of the bounding square, including ones outside the window.
    const int j0 = static_cast<int>(std::floor((center.x - reach) / cs + cfg.bev_w / 2.0)) - 1;
    const int j1 = static_cast<int>(std::ceil((center.x + reach) / cs + cfg.bev_w / 2.0)) + 1;
    const int i0 = static_cast<int>(std::floor((center.y - reach) / cs + cfg.bev_h / 2.0)) - 1;
    const int i1 = static_cast<int>(std::ceil((center.y + reach) / cs + cfg.bev_h / 2.0)) + 1;
    for (int i = i0; i <= i1; ++i)
        for (int j = j0; j <= j1; ++j) {
            const Vec2 local = rotate(cell_center(cfg, i, j) - center, -heading);
            if (local.x < -hl - eps || local.x >= hl - eps || local.y < -hw - eps || local.y >= hw - eps) continue;
            if (i < 0 || i >= cfg.bev_h || j < 0 || j >= cfg.bev_w)
                ++out.outside;
            else
                out.cells.push_back({i, j});
        }
    return out;
}

bool footprint_touches(const Footprint& fp, const SemanticOccGrid& grid, const WorldConfig& cfg, Vec2 center,
                       double heading, std::initializer_list<int> classes)
{
    const Raster r = rasterize_footprint(cfg, fp, center, heading);
    for (const auto& c : r.cells)
        for (int z = 0; z < grid.z_bins; ++z)
            if (std::find(classes.begin(), classes.end(), grid.at(c[0], c[1], z)) != classes.end()) return true;
    return false;
}

std::vector<double> waypoint_headings(const std::vector<Vec2>& waypoints, Vec2 origin, double origin_heading)
{
    std::vector<double> out;
    out.reserve(waypoints.size());
    Vec2 prev = origin;
    double h = origin_heading;
    for (const Vec2& p : waypoints) {
        const Vec2 d = p - prev;
        if (norm(d) > 1e-9) h = std::atan2(d.y, d.x);
        out.push_back(h);
        prev = p;
    }
    return out;
}

}  // namespace rw
