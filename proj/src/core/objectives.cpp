#include "objectives.hpp"

#include "error.hpp"

#include <cmath>

namespace rw {

void LossWeights::validate() const
{
    for (double v : {lambda_plan, lambda_coll, lambda_tss})
        check(std::isfinite(v) && v >= 0, ErrorCode::config, "loss weights must be finite and >= 0");
}

namespace {

void check_rows(const Var& x, std::size_t rows, const char* what)
{
    check(static_cast<std::size_t>(x.value().rows()) == rows, ErrorCode::shape_mismatch,
          std::string(what) + ": prediction does not match the target grid");
}

}  // namespace

Var ce_loss(const Var& logits, const SemanticOccGrid& target)
{
    check_rows(logits, target.labels.size(), "ce_loss");
    const auto labels = target.labels_as_int();
    return ag::cross_entropy(logits, labels);
}

Var lovasz_loss(const Var& probs, const SemanticOccGrid& target)
{
    check_rows(probs, target.labels.size(), "lovasz_loss");
    const Tensor& p = probs.value();
    const int c = p.cols();
    for (int r = 0; r < p.rows(); ++r) {
        double s = 0.0;
        for (int k = 0; k < c; ++k) {
            const double v = p[static_cast<std::size_t>(r) * c + k];
            check(v >= -1e-9 && v <= 1.0 + 1e-9, ErrorCode::invalid_argument, "lovasz_loss: probability outside [0,1]");
            s += v;
        }
        check(std::abs(s - 1.0) <= 1e-6, ErrorCode::invalid_argument, "lovasz_loss: probabilities do not sum to 1");
    }
    const auto labels = target.labels_as_int();
    return ag::lovasz_softmax(probs, labels);
}

Var bce_occ_loss(const Var& occupied_logit, const SemanticOccGrid& target)
{
    check(occupied_logit.size() == target.labels.size(), ErrorCode::shape_mismatch,
          "bce_occ_loss: prediction does not match the target grid");
    std::vector<double> mask(target.labels.size());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = target.labels[i] != kFree ? 1.0 : 0.0;
    return ag::bce_with_logits(occupied_logit, mask);
}

Var occ_frame_loss(const Var& logits, const SemanticOccGrid& target)
{
    const Var ce = ce_loss(logits, target);
    const Var lv = ag::lovasz_softmax(ag::softmax_rows(logits), target.labels_as_int());
    const Var bce = bce_occ_loss(ag::occupied_logit(logits), target);
    return ag::add(ag::add(ce, lv), bce);
}

Var occ_loss(const std::vector<Var>& logits, const std::vector<SemanticOccGrid>& targets)
{
    check(!logits.empty(), ErrorCode::invalid_argument, "occ_loss: no frames");
    check(logits.size() == targets.size(), ErrorCode::invalid_argument, "occ_loss: frame count mismatch");
    Var total;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        const Var l = occ_frame_loss(logits[k], targets[k]);
        total = total.defined() ? ag::add(total, l) : l;
    }
    return ag::scale(total, 1.0 / static_cast<double>(logits.size()));
}

std::vector<char> obstacle_columns(const SemanticOccGrid& grid)
{
    std::vector<char> out(static_cast<std::size_t>(grid.bev_h) * grid.bev_w, 0);
    for (int i = 0; i < grid.bev_h; ++i)
        for (int j = 0; j < grid.bev_w; ++j)
            for (int z = 0; z < grid.z_bins; ++z) {
                const int c = grid.at(i, j, z);
                if (c != kFree && c != kRoad) {
                    out[static_cast<std::size_t>(i) * grid.bev_w + j] = 1;
                    break;
                }
            }
    return out;
}

CollisionResult collision_loss(const std::vector<Vec2>& waypoints, const std::vector<SemanticOccGrid>& targets,
                               const WorldConfig& world, const Pose& origin)
{
    check(waypoints.size() == targets.size(), ErrorCode::invalid_argument,
          "collision_loss: need one target frame per waypoint");
    check(!waypoints.empty(), ErrorCode::invalid_argument, "collision_loss: no waypoints");
    const Footprint fp = Footprint::ego(world);
    const auto headings = waypoint_headings(waypoints, origin.position, origin.yaw);
    CollisionResult r;
    for (std::size_t k = 0; k < waypoints.size(); ++k) {
        const Raster ras = rasterize_footprint(world, fp, waypoints[k], headings[k]);
        const std::size_t total = ras.cells.size() + static_cast<std::size_t>(ras.outside);
        r.outside_cells += ras.outside;
        if (ras.cells.empty()) ++r.outside_waypoints;
        double frac = 0.0;
        if (total > 0 && !ras.cells.empty()) {
            const auto occ = obstacle_columns(targets[k]);
            int hits = 0;
            for (const auto& c : ras.cells) hits += occ[static_cast<std::size_t>(c[0]) * world.bev_w + c[1]];
            frac = static_cast<double>(hits) / static_cast<double>(total);
        }
        r.per_step.push_back(frac);
        r.value += frac;
    }
    r.value /= static_cast<double>(waypoints.size());
    return r;
}

PlanLossResult plan_loss(const Var& pred, const std::vector<Vec2>& gt, const std::vector<SemanticOccGrid>& targets,
                         const WorldConfig& world, const Pose& origin, const LossWeights& w)
{
    const Tensor& pv = pred.value();
    check(pv.rank() == 2 && pv.cols() == 2, ErrorCode::shape_mismatch, "plan_loss: prediction must be [f, 2]");
    check(static_cast<std::size_t>(pv.rows()) == gt.size(), ErrorCode::invalid_argument,
          "plan_loss: predicted and ground-truth lengths differ");
    Tensor g({pv.rows(), 2});
    std::vector<Vec2> wp;
    for (std::size_t k = 0; k < gt.size(); ++k) {
        g[2 * k] = gt[k].x;
        g[2 * k + 1] = gt[k].y;
        wp.push_back({pv[2 * k], pv[2 * k + 1]});
    }
    PlanLossResult r;
    // mse averages over 2f elements; the squared norm per step is twice that.
    r.l2 = ag::scale(ag::mse(pred, ag::constant(std::move(g))), 2.0);
    r.collision = collision_loss(wp, targets, world, origin);
    r.loss = ag::add(r.l2, ag::constant(Tensor::scalar(w.lambda_coll * r.collision.value)));
    return r;
}

Var align_loss(const Var& logits, const SemanticOccGrid& target)
{
    check(logits.value().rows() == target.bev_h * target.bev_w, ErrorCode::shape_mismatch,
          "align_loss: map does not match the target grid");
    const auto top = target.top_surface();
    return ag::cross_entropy(logits, top);
}

Var tss_loss(const Var& predicted, const Var& encoded)
{
    check(predicted.shape() == encoded.shape(), ErrorCode::shape_mismatch, "tss_loss: shape mismatch");
    return ag::mse(predicted, encoded);
}

LossTotal total_loss(const LossParts& parts, const LossWeights& w)
{
    LossTotal r;
    Var total;
    auto accumulate = [&](const Var& part, double weight, double& slot) {
        if (!part.defined()) return;
        slot = part.item();
        const Var term = weight == 1.0 ? part : ag::scale(part, weight);
        total = total.defined() ? ag::add(total, term) : term;
    };
    accumulate(parts.align, 1.0, r.align);
    accumulate(parts.occ, 1.0, r.occ);
    accumulate(parts.plan, w.lambda_plan, r.plan);
    if (w.lambda_tss > 0) accumulate(parts.tss, w.lambda_tss, r.tss);
    r.total = total.defined() ? total : ag::constant(Tensor::scalar(0.0));
    return r;
}

}  // namespace rw
