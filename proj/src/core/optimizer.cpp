#include "optimizer.hpp"

#include "error.hpp"

#include <cmath>
#include <numbers>

namespace rw {

void AdamWConfig::validate() const
{
    check(std::isfinite(lr) && lr >= 0, ErrorCode::config, "optim.lr must be >= 0");
    check(std::isfinite(min_lr) && min_lr >= 0 && min_lr <= lr, ErrorCode::config,
          "optim.min_lr must lie in [0, optim.lr]");
    check(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, ErrorCode::config, "optim betas must lie in [0, 1)");
    check(eps > 0, ErrorCode::config, "optim.eps must be > 0");
    check(weight_decay >= 0, ErrorCode::config, "optim.weight_decay must be >= 0");
    check(grad_clip >= 0, ErrorCode::config, "optim.grad_clip must be >= 0");
    check(warmup_steps >= 0, ErrorCode::config, "optim.warmup_steps must be >= 0");
}

double cosine_lr(const AdamWConfig& cfg, int step, int total_steps)
{
    if (cfg.warmup_steps > 0 && step < cfg.warmup_steps)
        return cfg.lr * static_cast<double>(step + 1) / static_cast<double>(cfg.warmup_steps);
    const int span = std::max(1, total_steps - cfg.warmup_steps);
    const double progress = std::min(1.0, static_cast<double>(step - cfg.warmup_steps) / span);
    return cfg.min_lr + 0.5 * (cfg.lr - cfg.min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(const ParamSet& params, AdamWConfig cfg) : cfg_(cfg)
{
    for (const auto& e : params.entries()) {
        m_.emplace_back(e.var.size(), 0.0);
        v_.emplace_back(e.var.size(), 0.0);
    }
}

double AdamW::step(ParamSet& params, double lr)
{
    auto& entries = params.entries();
    check(entries.size() == m_.size(), ErrorCode::internal, "AdamW: parameter layout changed");
    double sq = 0.0;
    for (auto& e : entries) {
        const Tensor& g = e.var.grad();
        for (double v : g.values()) sq += v * v;
    }
    const double norm = std::sqrt(sq);
    check(std::isfinite(norm), ErrorCode::non_finite, "AdamW: non-finite gradient");
    const double clip = (cfg_.grad_clip > 0 && norm > cfg_.grad_clip) ? cfg_.grad_clip / norm : 1.0;

    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        Tensor& w = entries[i].var.mutable_value();
        const Tensor& g = entries[i].var.grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double gk = g[k] * clip;
            m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * gk;
            v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * gk * gk;
            const double update = (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg_.eps);
            w[k] -= lr * (update + cfg_.weight_decay * w[k]);
        }
    }
    return norm;
}

}  // namespace rw
