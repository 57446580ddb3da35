#include "metrics.hpp"

#include "binary_io.hpp"
#include "error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace rw {

double iou(const SemanticOccGrid& pred, const SemanticOccGrid& gt, const ClassSet& classes)
{
    return iou_counts(pred, gt, classes).ratio();
}

IoUCounts iou_counts(const SemanticOccGrid& pred, const SemanticOccGrid& gt, const ClassSet& classes)
{
    check(pred.labels.size() == gt.labels.size(), ErrorCode::shape_mismatch, "iou: grid shapes differ");
    bool in_set[256] = {};
    for (int c : classes)
        if (c >= 0 && c < 256) in_set[c] = true;
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < gt.labels.size(); ++i) {
        const bool p = in_set[pred.labels[i]];
        const bool g = in_set[gt.labels[i]];
        inter += (p && g) ? 1 : 0;
        uni += (p || g) ? 1 : 0;
    }
    return {inter, uni};
}

ClassGroups group_classes(const WorldConfig& cfg)
{
    ClassGroups g;
    for (int c = 1; c < cfg.num_classes; ++c) {
        if (c == kVehicle || c == kPedestrian)
            g.gmo.push_back(c);
        else
            g.gso.push_back(c);
        g.per_class.push_back({c});
    }
    return g;
}

std::vector<double> time_weights(int f)
{
    check(f >= 1, ErrorCode::invalid_argument, "time_weights: f must be >= 1");
    std::vector<double> w(static_cast<std::size_t>(f));
    double total = 0.0;
    for (int t = 1; t <= f; ++t) total += (w[static_cast<std::size_t>(t - 1)] = f - t + 1);
    for (auto& v : w) v /= total;
    return w;
}

ForecastIoU forecast_metrics(const std::vector<SemanticOccGrid>& pred, const std::vector<SemanticOccGrid>& gt,
                             const ClassSet& classes, std::vector<double> weights)
{
    check(pred.size() == gt.size(), ErrorCode::invalid_argument, "forecast_metrics: frame count mismatch");
    check(pred.size() >= 2, ErrorCode::invalid_argument, "forecast_metrics: need the current and >= 1 future frame");
    const int f = static_cast<int>(pred.size()) - 1;
    if (weights.empty()) weights = time_weights(f);
    check(static_cast<int>(weights.size()) == f, ErrorCode::invalid_argument, "forecast_metrics: weight count mismatch");
    ForecastIoU r;
    r.iou_c = iou(pred[0], gt[0], classes);
    for (int t = 1; t <= f; ++t) {
        const double v = iou(pred[static_cast<std::size_t>(t)], gt[static_cast<std::size_t>(t)], classes);
        r.per_step.push_back(v);
        r.iou_f += v;
        r.iou_f_weighted += weights[static_cast<std::size_t>(t - 1)] * v;
    }
    r.iou_f /= f;
    return r;
}

std::vector<Horizon> planning_horizons(const WorldConfig& cfg)
{
    auto label = [](double seconds) {
        std::ostringstream os;
        os << seconds << "s";
        return os.str();
    };
    std::vector<Horizon> out;
    const double span = cfg.f_future * cfg.dt;
    if (span >= 3.0 - 1e-9) {
        for (double s : {1.0, 2.0, 3.0}) out.push_back({static_cast<int>(std::lround(s / cfg.dt)), label(s)});
    } else {
        std::vector<int> frames{1, 2, cfg.f_future};
        frames.erase(std::unique(frames.begin(), frames.end()), frames.end());
        for (int fr : frames)
            if (fr <= cfg.f_future) out.push_back({fr, label(fr * cfg.dt)});
    }
    return out;
}

L2Result l2_planning(const std::vector<Vec2>& pred, const std::vector<Vec2>& gt, const std::vector<Horizon>& horizons)
{
    check(pred.size() == gt.size(), ErrorCode::invalid_argument, "l2_planning: trajectory lengths differ");
    check(!horizons.empty(), ErrorCode::invalid_argument, "l2_planning: no horizons");
    L2Result r;
    for (const Horizon& h : horizons) {
        check(h.frame >= 1 && h.frame <= static_cast<int>(pred.size()), ErrorCode::out_of_range,
              "l2_planning: horizon beyond trajectory");
        const double d = norm(pred[static_cast<std::size_t>(h.frame - 1)] - gt[static_cast<std::size_t>(h.frame - 1)]);
        r.per_horizon.push_back(d);
        r.average += d;
    }
    r.average /= static_cast<double>(horizons.size());
    return r;
}

double collision_rate(const std::vector<CollisionCase>& cases, const WorldConfig& cfg, const Footprint& footprint)
{
    check(!cases.empty(), ErrorCode::invalid_argument, "collision_rate: empty trajectory set");
    std::size_t pairs = 0, hits = 0;
    for (const auto& c : cases) {
        check(c.waypoints.size() == c.occupancy.size(), ErrorCode::invalid_argument,
              "collision_rate: need one occupancy frame per waypoint");
        const auto headings = waypoint_headings(c.waypoints, c.origin.position, c.origin.yaw);
        for (std::size_t k = 0; k < c.waypoints.size(); ++k) {
            ++pairs;
            if (footprint_touches(footprint, c.occupancy[k], cfg, c.waypoints[k], headings[k],
                                  {kVehicle, kPedestrian}))
                ++hits;
        }
    }
    check(pairs > 0, ErrorCode::invalid_argument, "collision_rate: no waypoints");
    return 100.0 * static_cast<double>(hits) / static_cast<double>(pairs);
}

LatencyStats latency_stats(std::vector<double> samples)
{
    check(!samples.empty(), ErrorCode::invalid_argument, "latency_stats: no samples");
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    LatencyStats s;
    s.repeats = static_cast<int>(n);
    s.median_ms = n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
    // Nearest-rank percentile.
    const auto rank = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(n)));
    s.p90_ms = n == 1 ? s.median_ms : samples[std::max<std::size_t>(rank, 1) - 1];
    return s;
}

LatencyStats latency_profile(const std::function<void()>& fn, int repeats, int warmup)
{
    check(repeats >= 1, ErrorCode::invalid_argument, "latency_profile: repeats must be >= 1");
    for (int i = 0; i < warmup; ++i) fn();
    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>(repeats));
    for (int i = 0; i < repeats; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        samples.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    return latency_stats(std::move(samples));
}

double MetricReport::get(const std::string& key) const
{
    auto it = values.find(key);
    check(it != values.end(), ErrorCode::invalid_argument, "metric report has no key '" + key + "'");
    return it->second;
}

std::string MetricReport::to_text() const
{
    std::string out;
    for (const auto& [k, v] : values) out += k + " = " + format_double(v) + "\n";
    return out;
}

std::string MetricReport::to_table() const
{
    std::size_t width = 0;
    for (const auto& kv : values) width = std::max(width, kv.first.size());
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(3);
    for (const auto& [k, v] : values) os << k << std::string(width - k.size() + 2, ' ') << v << '\n';
    return os.str();
}

}  // namespace rw
