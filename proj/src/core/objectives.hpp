#pragma once

// Training losses.

#include "geometry.hpp"
#include "nn.hpp"

#include <vector>

namespace rw {

struct LossWeights {
    double lambda_plan = 1.0;
    double lambda_coll = 1.0;
    double lambda_tss = 0.0;  // temporal self-supervision, off by default

    void validate() const;
    bool operator==(const LossWeights&) const = default;
};

// logits: [voxels, num_classes] in the grid's (i, j, z) order.
Var ce_loss(const Var& logits, const SemanticOccGrid& target);
// probs: [voxels, num_classes], rows summing to one.
Var lovasz_loss(const Var& probs, const SemanticOccGrid& target);
// occupied_logit: [voxels], the logit of 1 - P(free).
Var bce_occ_loss(const Var& occupied_logit, const SemanticOccGrid& target);

// CE + Lovasz + BCE for one frame.
Var occ_frame_loss(const Var& logits, const SemanticOccGrid& target);
// Mean over frames of occ_frame_loss.
Var occ_loss(const std::vector<Var>& logits, const std::vector<SemanticOccGrid>& targets);

// Cells that collide with the ego: any z bin holds a class other than free
// and road.
std::vector<char> obstacle_columns(const SemanticOccGrid& grid);

struct CollisionResult {
    double value = 0.0;              // mean occupied fraction, in [0, 1]
    std::vector<double> per_step;
    int outside_waypoints = 0;       // footprints entirely outside the window
    int outside_cells = 0;           // footprint cells beyond the window, counted free
};

// waypoints[k] is compared with targets[k]; headings come from consecutive
// displacements starting at `origin`.
CollisionResult collision_loss(const std::vector<Vec2>& waypoints, const std::vector<SemanticOccGrid>& targets,
                               const WorldConfig& world, const Pose& origin);

struct PlanLossResult {
    Var loss;
    Var l2;  // mean squared displacement error
    CollisionResult collision;
};

// pred: [f, 2] waypoint positions; gt: f positions.
PlanLossResult plan_loss(const Var& pred, const std::vector<Vec2>& gt, const std::vector<SemanticOccGrid>& targets,
                         const WorldConfig& world, const Pose& origin, const LossWeights& w);

// Cross-entropy of the auxiliary BEV map against per-column top-surface
// classes. logits: [bev_h * bev_w, num_classes].
Var align_loss(const Var& logits, const SemanticOccGrid& target);

Var tss_loss(const Var& predicted, const Var& encoded);

struct LossParts {
    Var align;
    Var occ;
    Var plan;
    Var tss;  // optional
};

struct LossTotal {
    Var total;
    double align = 0.0;
    double occ = 0.0;
    double plan = 0.0;
    double tss = 0.0;
};

// align + occ + lambda_plan * plan (+ lambda_tss * tss). Undefined parts
// count as zero.
LossTotal total_loss(const LossParts& parts, const LossWeights& w);

}  // namespace rw
