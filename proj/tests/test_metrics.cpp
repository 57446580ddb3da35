#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include "error.hpp"
#include "metrics.hpp"

#include <doctest.h>

#include <algorithm>

using namespace rw;
using namespace rw::testing;


TEST_CASE("iou matches exhaustive set counting on 3x3 binary grids")
{
    int mismatches = 0;
    for (int a = 0; a < 512; ++a)
        for (int b = 0; b < 512; ++b) {
            const int inter = __builtin_popcount(static_cast<unsigned>(a & b));
            const int uni = __builtin_popcount(static_cast<unsigned>(a | b));
            const double expected = uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
            mismatches += iou(binary_grid(a), binary_grid(b), {1}) != expected;
        }
    CHECK(mismatches == 0);
}

TEST_CASE("iou over class sets and aggregated counts")
{
    const WorldConfig w = tiny_world();
    const SemanticOccGrid a = random_grid(w, 0, 1), b = random_grid(w, 0, 2);
    CHECK(iou(a, a, {3, 4}) == 1.0);
    const IoUCounts c = iou_counts(a, b, {3, 4});
    std::size_t inter = 0, uni = 0;
    for (std::size_t k = 0; k < a.labels.size(); ++k) {
        const bool pa = a.labels[k] == 3 || a.labels[k] == 4, pb = b.labels[k] == 3 || b.labels[k] == 4;
        inter += pa && pb;
        uni += pa || pb;
    }
    CHECK(c.intersection == inter);
    CHECK(c.union_ == uni);
    IoUCounts sum = c;
    sum += c;
    CHECK(sum.ratio() == c.ratio());
    CHECK_THROWS_AS(iou(a, SemanticOccGrid(2, 2, 2, 0), {1}), Error);
}

TEST_CASE("class groups")
{
    const ClassGroups g = group_classes(WorldConfig{});
    CHECK(g.gmo == ClassSet{kVehicle, kPedestrian});
    CHECK(g.gso == ClassSet{kRoad, kStaticObstacle});
    CHECK(g.per_class.size() == 4);
}

TEST_CASE("time weights decrease linearly and sum to one")
{
    const auto w = time_weights(4);
    REQUIRE(w.size() == 4);
    CHECK(w[0] == doctest::Approx(0.4));
    CHECK(w[3] == doctest::Approx(0.1));
    double s = 0.0;
    for (double v : w) s += v;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("weighted forecast IoU is a convex combination of per-step IoUs")
{
    Rng rng(99);
    const WorldConfig w = tiny_world();
    for (int trial = 0; trial < 1000; ++trial) {
        const int f = static_cast<int>(rng.uniform_int(1, 5));
        std::vector<SemanticOccGrid> pred, gt;
        for (int t = 0; t <= f; ++t) {
            pred.push_back(random_grid(w, t, rng.next()));
            gt.push_back(random_grid(w, t, rng.next()));
        }
        std::vector<double> weights;
        if (trial % 2) {
            double s = 0.0;
            for (int t = 0; t < f; ++t) s += weights.emplace_back(rng.uniform());
            for (double& v : weights) v /= s;
        }
        const ForecastIoU r = forecast_metrics(pred, gt, {3, 4}, weights);
        const auto [lo, hi] = std::minmax_element(r.per_step.begin(), r.per_step.end());
        CHECK(r.iou_f_weighted >= *lo - 1e-12);
        CHECK(r.iou_f_weighted <= *hi + 1e-12);
        CHECK(r.iou_f >= *lo - 1e-12);
        CHECK(r.iou_f <= *hi + 1e-12);
    }
}

TEST_CASE("forecast metrics separate the current frame from the future")
{
    const WorldConfig w = tiny_world();
    const SemanticOccGrid a = random_grid(w, 0, 3), b = random_grid(w, 1, 4);
    const ForecastIoU r = forecast_metrics({a, a, b}, {a, b, a}, {3, 4});
    CHECK(r.iou_c == 1.0);
    CHECK(r.per_step[0] == iou(a, b, {3, 4}));
    CHECK(r.iou_f == doctest::Approx((iou(a, b, {3, 4}) + iou(b, a, {3, 4})) / 2));
    CHECK_THROWS_AS(forecast_metrics({a}, {a}, {1}), Error);
}

TEST_CASE("planning horizons and L2")
{
    WorldConfig w;
    auto h = planning_horizons(w);
    REQUIRE(h.size() == 3);
    CHECK(h[0].label == "0.5s");
    CHECK(h[2].frame == 4);
    CHECK(h[2].label == "2s");
    w.f_future = 6;
    h = planning_horizons(w);
    CHECK(h[0].frame == 2);
    CHECK(h[2].label == "3s");

    const std::vector<Vec2> gt{{1, 0}, {2, 0}, {3, 0}, {4, 0}};
    const std::vector<Vec2> pred{{1, 0}, {2, 3}, {3, 0}, {0, 3}};
    const L2Result r = l2_planning(pred, gt, planning_horizons(WorldConfig{}));
    CHECK(r.per_horizon == std::vector<double>{0.0, 3.0, 5.0});
    CHECK(r.average == doctest::Approx(8.0 / 3.0));
    CHECK_THROWS_AS(l2_planning(pred, {gt[0]}, planning_horizons(WorldConfig{})), Error);
}

TEST_CASE("collision rate is monotone under added obstacles")
{
    WorldConfig w;
    w.bev_h = 12;
    w.bev_w = 12;
    w.z_bins = 1;
    w.f_future = 3;
    Rng rng(5);
    const Footprint fp = Footprint::ego(w);
    for (int trial = 0; trial < 50; ++trial) {
        CollisionCase c;
        c.origin = {{0.0, 0.0}, 0.0};
        for (int k = 1; k <= 3; ++k) c.waypoints.push_back({k * 1.0 + rng.uniform(-0.3, 0.3), rng.uniform(-1.0, 1.0)});
        c.occupancy.assign(3, SemanticOccGrid(12, 12, 1, 0));
        double prev = collision_rate({c}, w, fp);
        CHECK(prev == 0.0);
        for (int add = 0; add < 30; ++add) {
            auto& g = c.occupancy[static_cast<std::size_t>(rng.uniform_int(0, 2))];
            g.set(static_cast<int>(rng.uniform_int(0, 11)), static_cast<int>(rng.uniform_int(0, 11)), 0,
                  rng.uniform() < 0.5 ? kVehicle : kPedestrian);
            const double now = collision_rate({c}, w, fp);
            CHECK(now >= prev);
            prev = now;
        }
    }
}

TEST_CASE("collision rate counts only dynamic agents")
{
    WorldConfig w;
    w.bev_h = 8;
    w.bev_w = 8;
    w.z_bins = 1;
    SemanticOccGrid g(8, 8, 1, 1);
    g.set(3, 3, 0, kStaticObstacle);
    CollisionCase c{{{0.0, 0.0}}, {g}, Pose{}};
    CHECK(collision_rate({c}, w, Footprint{}) == 0.0);
    c.occupancy[0].set(3, 3, 0, kVehicle);
    CHECK(collision_rate({c}, w, Footprint{}) == 100.0);
}

TEST_CASE("latency statistics")
{
    const LatencyStats s = latency_stats({5, 1, 4, 2, 3, 10, 9, 8, 7, 6});
    CHECK(s.repeats == 10);
    CHECK(s.median_ms == 5.5);
    CHECK(s.p90_ms == 9.0);
    CHECK(latency_stats({3.0}).p90_ms == 3.0);
    CHECK_THROWS_AS(latency_stats({}), Error);
    int calls = 0;
    const LatencyStats p = latency_profile([&] { ++calls; }, 4, 2);
    CHECK(calls == 6);
    CHECK(p.repeats == 4);
}

TEST_CASE("metric reports")
{
    MetricReport r;
    r.set("b.x", 2.5);
    r.set("a.y", 1.0);
    CHECK(r.to_text() == "a.y = 1\nb.x = 2.5\n");
    CHECK(r.get("b.x") == 2.5);
    CHECK_THROWS_AS(r.get("missing"), Error);
    CHECK(r.to_table().find("b.x") != std::string::npos);
}
