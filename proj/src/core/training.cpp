#include "training.hpp"

#include "error.hpp"

namespace rw {

BEVState encode_privileged(const WorldModel& m, const SceneEpisode& ep, int t)
{
    const Observation obs = render_privileged(ep, t, NoiseParams{0.0, 0.0});
    // The ego history is needed for the frame's pose and action embedding.
    return encode_frame(obs, ep.ego, m.encoder, m.world);
}

StreamMemory initial_memory(const WorldModel& m, const std::vector<BEVState>& encoded)
{
    StreamMemory mem(m.model.memory);
    for (const auto& s : encoded) mem.push(s);
    return mem;
}

EpisodeLoss episode_loss(const WorldModel& m, const SceneEpisode& ep, const EpisodeForwardOptions& opt)
{
    check(ep.config == m.world, ErrorCode::shape_mismatch, "episode world config differs from the model's");
    const WorldConfig& w = m.world;
    const int f = w.f_future;
    const Dynamics dyn = m.dynamics();

    const auto encoded = encode_scene(ep.observations, ep.ego, m.encoder, w);
    StreamMemory mem = initial_memory(m, encoded);

    std::vector<BEVState> states{mem.latest()};
    std::vector<Var> align_terms;
    std::vector<Var> tss_terms;
    EpisodeLoss out;
    for (int t = 1; t <= f; ++t) {
        StepResult step = predict_step(mem, ep.ego, dyn);
        if (step.align_logits.defined()) align_terms.push_back(align_loss(step.align_logits, ep.occ_at(t)));
        if (opt.weights.lambda_tss > 0) {
            Var target;
            {
                ag::NoGradGuard guard;
                target = encode_privileged(m, ep, t).features;
            }
            tss_terms.push_back(tss_loss(step.state.features, target));
        }
        states.push_back(step.state);
        bool teacher = false;
        if (opt.teacher_prob >= 1.0) {
            teacher = true;
        } else if (opt.teacher_prob > 0.0) {
            check(opt.sampling != nullptr, ErrorCode::internal, "episode_loss: scheduled sampling needs an rng");
            teacher = opt.sampling->bernoulli(opt.teacher_prob);
        }
        if (t < f) {
            if (teacher) {
                ++out.teacher_steps;
                mem.push(encode_privileged(m, ep, t));
            } else {
                mem.push(step.state);
            }
        }
    }

    std::vector<Var> logits;
    std::vector<SemanticOccGrid> targets;
    for (int t = 0; t <= f; ++t) {
        logits.push_back(decode_occupancy(states[static_cast<std::size_t>(t)], m.occ, w));
        targets.push_back(ep.occ_at(t));
    }

    LossParts parts;
    parts.occ = occ_loss(logits, targets);
    auto mean_of = [](const std::vector<Var>& terms) {
        Var acc = terms.front();
        for (std::size_t k = 1; k < terms.size(); ++k) acc = ag::add(acc, terms[k]);
        return ag::scale(acc, 1.0 / static_cast<double>(terms.size()));
    };
    if (!align_terms.empty()) parts.align = mean_of(align_terms);
    if (!tss_terms.empty()) parts.tss = mean_of(tss_terms);

    // Planning: tight and semi read the states rolled out above.
    const StateRoller roller = [&states](const EgoTrajectory&, int t) { return states[static_cast<std::size_t>(t)]; };
    EgoTrajectory history;
    history.first_frame = ep.ego.first_frame;
    for (int t = ep.ego.first_frame; t <= 0; ++t) history.positions.push_back(ep.ego.at(t));
    const PlanInputs in{states.front(), history, ep.commands};
    const PlanResult plan = plan_episode(in, opt.coupling, m.plan, m.occ, opt.sampler, w, roller);
    std::vector<Vec2> gt;
    for (int t = 1; t <= f; ++t) gt.push_back(ep.ego.at(t));
    const PlanLossResult pl =
        plan_loss(plan.positions, gt, std::vector<SemanticOccGrid>(targets.begin() + 1, targets.end()), w,
                  pose_at(ep.ego, 0), opt.weights);
    parts.plan = pl.loss;
    out.plan_l2 = pl.l2.item();
    out.collision = pl.collision.value;
    out.outside_waypoints = pl.collision.outside_waypoints;

    out.total = total_loss(parts, opt.weights);
    return out;
}

}  // namespace rw
