#pragma once

#include "nn.hpp"

#include <vector>

namespace rw {

struct AdamWConfig {
    double lr = 3e-3;
    double min_lr = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    double grad_clip = 1.0;  // global norm; 0 disables
    int warmup_steps = 0;

    void validate() const;
    bool operator==(const AdamWConfig&) const = default;
};

// Cosine-annealed step size from lr to min_lr over total_steps, after a
// linear warm-up.
double cosine_lr(const AdamWConfig& cfg, int step, int total_steps);

class AdamW {
public:
    AdamW(const ParamSet& params, AdamWConfig cfg);

    // Applies one update from the accumulated gradients with the given step
    // size. Returns the pre-clipping global gradient norm.
    double step(ParamSet& params, double lr);
    int steps_taken() const { return t_; }

    // Flat moment buffers in parameter order, for checkpoints.
    std::vector<std::vector<double>>& first_moment() { return m_; }
    std::vector<std::vector<double>>& second_moment() { return v_; }
    const std::vector<std::vector<double>>& first_moment() const { return m_; }
    const std::vector<std::vector<double>>& second_moment() const { return v_; }
    void set_steps_taken(int t) { t_ = t; }

private:
    AdamWConfig cfg_;
    int t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace rw
