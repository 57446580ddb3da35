#pragma once

// Scalar reference computations written without the library's ops, used to
// cross-check losses and metrics.

#include "gridworld.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace rw::testing {

// Mean over rows of logsumexp(row) - row[label].
inline double oracle_ce(const ag::Tensor& logits, std::span<const std::uint8_t> labels)
{
    const int c = logits.cols();
    double total = 0.0;
    for (int r = 0; r < logits.rows(); ++r) {
        double z = 0.0;
        for (int k = 0; k < c; ++k) z += std::exp(logits[static_cast<std::size_t>(r) * c + k]);
        total += std::log(z) - logits[static_cast<std::size_t>(r) * c + labels[static_cast<std::size_t>(r)]];
    }
    return total / logits.rows();
}

inline double oracle_bce(std::span<const double> x, std::span<const double> y)
{
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-x[i]));
        total -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
    }
    return total / static_cast<double>(x.size());
}

// 3x3x1 grid whose voxel k holds bit k of `bits`.
inline SemanticOccGrid binary_grid(int bits)
{
    SemanticOccGrid g(3, 3, 1, 0);
    for (int k = 0; k < 9; ++k) g.labels[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>((bits >> k) & 1);
    return g;
}

// Mean over classes present in the target of 1 - |P & G| / |P | G| for a hard
// binary prediction over nine voxels.
inline double oracle_lovasz_hard(int pred, int gt)
{
    double total = 0.0;
    int present = 0;
    for (int c = 0; c < 2; ++c) {
        int inter = 0, uni = 0, in_gt = 0;
        for (int k = 0; k < 9; ++k) {
            const bool p = ((pred >> k) & 1) == c;
            const bool g = ((gt >> k) & 1) == c;
            inter += p && g;
            uni += p || g;
            in_gt += g;
        }
        if (in_gt == 0) continue;
        ++present;
        total += 1.0 - static_cast<double>(inter) / uni;
    }
    return total / present;
}

// Fraction of a 4 m x 2 m footprint's lattice cells holding an obstacle
// (anything but free or road), averaged over waypoints. Lattice cells beyond
// the window count as free. Enumerates a padded lattice explicitly.
inline double oracle_collision(const std::vector<Vec2>& waypoints, const std::vector<SemanticOccGrid>& grids,
                               const WorldConfig& w, Vec2 origin)
{
    const double hl = 2.0, hw = 1.0;
    double total = 0.0;
    Vec2 prev = origin;
    for (std::size_t k = 0; k < waypoints.size(); ++k) {
        const Vec2 p = waypoints[k];
        const double heading = std::atan2(p.y - prev.y, p.x - prev.x);
        prev = p;
        int inside = 0, hits = 0;
        for (int i = -20; i < w.bev_h + 20; ++i)
            for (int j = -20; j < w.bev_w + 20; ++j) {
                const double cx = (j + 0.5) * w.cell_size - w.bev_w * w.cell_size / 2.0 - p.x;
                const double cy = (i + 0.5) * w.cell_size - w.bev_h * w.cell_size / 2.0 - p.y;
                const double along = std::cos(heading) * cx + std::sin(heading) * cy;
                const double across = -std::sin(heading) * cx + std::cos(heading) * cy;
                if (along < -hl || along >= hl || across < -hw || across >= hw) continue;
                ++inside;
                if (i < 0 || j < 0 || i >= w.bev_h || j >= w.bev_w) continue;
                for (int z = 0; z < w.z_bins; ++z) {
                    const int c = grids[k].at(i, j, z);
                    if (c != kFree && c != kRoad) {
                        ++hits;
                        break;
                    }
                }
            }
        total += inside == 0 ? 0.0 : static_cast<double>(hits) / inside;
    }
    return total / static_cast<double>(waypoints.size());
}

// Mean squared waypoint displacement plus lambda_coll times the collision
// oracle.
inline double oracle_plan_loss(const std::vector<Vec2>& pred, const std::vector<Vec2>& gt,
                               const std::vector<SemanticOccGrid>& grids, const WorldConfig& w, Vec2 origin,
                               double lambda_coll)
{
    double l2 = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k)
        l2 += (pred[k].x - gt[k].x) * (pred[k].x - gt[k].x) + (pred[k].y - gt[k].y) * (pred[k].y - gt[k].y);
    return l2 / static_cast<double>(pred.size()) + lambda_coll * oracle_collision(pred, grids, w, origin);
}

}  // namespace rw::testing
