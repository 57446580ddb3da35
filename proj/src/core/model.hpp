#pragma once

// The complete parameterized world model: encoder, predictor, alignment,
// occupancy head and planning head over one parameter registry.

#include "heads.hpp"

namespace rw {

class WorldModel {
public:
    WorldModel(const WorldConfig& world, const ModelConfig& model, std::uint64_t init_seed);
    WorldModel(const WorldModel&) = delete;
    WorldModel& operator=(const WorldModel&) = delete;

    WorldConfig world;
    ModelConfig model;
    ParamSet params;
    EncoderParams encoder;
    PredictorParams predictor;
    AlignParams align;
    OccHeadParams occ;
    PlanHeadParams plan;

    Dynamics dynamics() const { return {encoder, predictor, align, model, world}; }
    // Copies parameter values (not gradients) from a model of identical shape.
    void copy_values_from(const WorldModel& other);
};

}  // namespace rw
