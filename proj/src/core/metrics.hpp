#pragma once

// Evaluation metrics: IoU families, planning L2, collision rate, latency.

#include "geometry.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace rw {

using ClassSet = std::vector<int>;

// |pred in set and gt in set| / |pred in set or gt in set| over voxels; 1
// when the union is empty.
double iou(const SemanticOccGrid& pred, const SemanticOccGrid& gt, const ClassSet& classes);

struct IoUCounts {
    std::size_t intersection = 0;
    std::size_t union_ = 0;
    IoUCounts& operator+=(const IoUCounts& o)
    {
        intersection += o.intersection;
        union_ += o.union_;
        return *this;
    }
    double ratio() const { return union_ == 0 ? 1.0 : static_cast<double>(intersection) / static_cast<double>(union_); }
};
IoUCounts iou_counts(const SemanticOccGrid& pred, const SemanticOccGrid& gt, const ClassSet& classes);

struct ClassGroups {
    ClassSet gmo;  // vehicle, pedestrian
    ClassSet gso;  // road, static obstacle, barrier
    std::vector<ClassSet> per_class;  // one singleton per non-free class
};
ClassGroups group_classes(const WorldConfig& cfg);

// w_t proportional to (f - t + 1), t = 1..f, summing to one.
std::vector<double> time_weights(int f);

struct ForecastIoU {
    double iou_c = 0.0;
    double iou_f = 0.0;
    double iou_f_weighted = 0.0;
    std::vector<double> per_step;  // t = 1..f
};

// frames[0] is t = 0, frames[1..f] the future. Empty weights use
// time_weights(f).
ForecastIoU forecast_metrics(const std::vector<SemanticOccGrid>& pred, const std::vector<SemanticOccGrid>& gt,
                             const ClassSet& classes, std::vector<double> weights = {});

struct Horizon {
    int frame = 0;
    std::string label;  // e.g. "1s"
};
// 1s/2s/3s when the future window covers 3 s, otherwise dt/2dt/f*dt.
std::vector<Horizon> planning_horizons(const WorldConfig& cfg);

struct L2Result {
    std::vector<double> per_horizon;
    double average = 0.0;
};
// pred and gt hold frames 1..f.
L2Result l2_planning(const std::vector<Vec2>& pred, const std::vector<Vec2>& gt, const std::vector<Horizon>& horizons);

struct CollisionCase {
    std::vector<Vec2> waypoints;             // frames 1..f
    std::vector<SemanticOccGrid> occupancy;  // matching ground-truth frames
    Pose origin;                             // pose at frame 0
};
// Percentage of (trajectory, step) pairs whose footprint covers at least one
// GMO cell.
double collision_rate(const std::vector<CollisionCase>& cases, const WorldConfig& cfg, const Footprint& footprint);

struct LatencyStats {
    double median_ms = 0.0;
    double p90_ms = 0.0;
    int repeats = 0;
};
LatencyStats latency_profile(const std::function<void()>& fn, int repeats, int warmup = 1);
LatencyStats latency_stats(std::vector<double> samples_ms);

// Ordered key/value report. Keys are stable and documented in the README.
struct MetricReport {
    std::map<std::string, double> values;

    void set(const std::string& key, double v) { values[key] = v; }
    double get(const std::string& key) const;
    bool has(const std::string& key) const { return values.count(key) != 0; }
    std::string to_text() const;       // "key = value" lines
    std::string to_table() const;      // aligned human-readable table
    bool operator==(const MetricReport&) const = default;
};

}  // namespace rw
