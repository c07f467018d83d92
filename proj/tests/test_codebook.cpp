// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "beamprobe/codebook.hpp"
#include "test_support.hpp"

using namespace beamprobe;
using namespace beamprobe::testing;

namespace {

// Location-dependent belief: the peak beam moves with x.
GaussianBelief belief_at(const Eigen::Vector2d& s, int n)
{
    GaussianBelief g;
    g.mu.resize(n);
    const double peak = std::fmod(std::abs(s.x()) / 3.0, static_cast<double>(n));
    for (int i = 0; i < n; ++i)
        g.mu(i) = -60.0 - 4.0 * std::abs(i - peak);
    g.sigma = Eigen::MatrixXd::Identity(n, n) * 6.0;
    for (int i = 0; i + 1 < n; ++i)
        g.sigma(i, i + 1) = g.sigma(i + 1, i) = 3.0;
    return g;
}

PredictorHandle location_handle(int n)
{
    PredictorHandle h;
    h.mean = [n](const Eigen::VectorXd& x_q, std::span<const int> q, const Eigen::Vector2d& s) {
        return belief_handle(belief_at(s, n)).mean(x_q, q, s);
    };
    h.variance = [n](std::span<const int> q, const Eigen::Vector2d& s) {
        return belief_handle(belief_at(s, n)).variance(q, s);
    };
    return h;
}

std::pair<int, int> linear_scan(const GridSpec& g, const Eigen::Vector2d& s)
{
    std::pair<int, int> best{0, 0};
    double best_d = std::numeric_limits<double>::infinity();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double d = (g.center(i, j) - s).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = {i, j};
            }
        }
    return best;
}

}  // namespace

TEST_CASE("nearest cell matches a linear scan")
{
    Rng rng(1);
    GridSpec g;
    g.origin = Eigen::Vector2d(-3.0, 7.5);
    g.cell = 2.0;
    g.nx = 13;
    g.ny = 9;
    for (int t = 0; t < 10000; ++t) {
        Eigen::Vector2d s(uniform(rng, -10, 30), uniform(rng, 0, 30));
        if (t % 10 == 0)  // exact cell boundaries and centers
            s = g.origin + g.cell * Eigen::Vector2d(static_cast<double>(rng() % 30) / 2.0, static_cast<double>(rng() % 20) / 2.0);
        const auto got = g.nearest(s);
        const auto want = linear_scan(g, s);
        const double dg = (g.center(got.first, got.second) - s).squaredNorm();
        const double dw = (g.center(want.first, want.second) - s).squaredNorm();
        CHECK(dg == doctest::Approx(dw).epsilon(1e-12));
    }
}

TEST_CASE("lookup clamps outside the grid")
{
    GridSpec g;
    g.cell = 1.0;
    g.nx = 3;
    g.ny = 2;
    CHECK(g.nearest(Eigen::Vector2d(-50, -50)) == std::pair<int, int>{0, 0});
    CHECK(g.nearest(Eigen::Vector2d(50, 50)) == std::pair<int, int>{2, 1});
    CHECK(g.nearest(Eigen::Vector2d(1.0, 0.5)) == std::pair<int, int>{0, 0});  // tie goes low
}

TEST_CASE("designed codebook has l1 distinct beams per cell")
{
    const int n = 8;
    const auto stages = replicate_stages(location_handle(n), 3);
    GridSpec g;
    g.cell = 3.0;
    g.nx = 6;
    g.ny = 2;
    const LocationMean lm = [n](const Eigen::Vector2d& s) { return belief_at(s, n).mu; };
    const auto cb = design_codebook(stages, lm, g, 3);
    CHECK_NOTHROW(cb.validate());
    REQUIRE(cb.beams.size() == 12);
    for (const auto& w : cb.beams) {
        CHECK(w.size() == 3);
        CHECK(std::set<int>(w.begin(), w.end()).size() == 3);
    }
    CHECK(design_codebook(stages, lm, g, 3) == cb);
}

TEST_CASE("location-independent predictors give identical codewords")
{
    Rng rng(2);
    const auto b = random_belief(7, rng);
    const auto stages = replicate_stages(belief_handle(b), 2);
    GridSpec g;
    g.nx = 4;
    g.ny = 3;
    const auto cb = design_codebook(stages, [&](const Eigen::Vector2d&) { return b.mu; }, g, 2);
    for (const auto& w : cb.beams)
        CHECK(w == cb.beams.front());
}

TEST_CASE("codebook lookup returns the codeword of the nearest cell")
{
    ProbingCodebook cb;
    cb.grid.cell = 2.0;
    cb.grid.nx = 5;
    cb.grid.ny = 4;
    cb.l1 = 1;
    for (int k = 0; k < cb.grid.cell_count(); ++k)
        cb.beams.push_back({k});
    Rng rng(3);
    for (int t = 0; t < 10000; ++t) {
        const Eigen::Vector2d s(uniform(rng, -2, 12), uniform(rng, -2, 10));
        const auto want = linear_scan(cb.grid, s);
        const auto& w = codebook_lookup(cb, s);
        const auto [i, j] = cb.grid.nearest(s);
        CHECK((cb.grid.center(i, j) - s).squaredNorm() ==
              doctest::Approx((cb.grid.center(want.first, want.second) - s).squaredNorm()).epsilon(1e-12));
        CHECK(w.front() == cb.grid.flat(i, j));
    }
}

TEST_CASE("two-stage probing: two interactions, l1 + l2 beams")
{
    const int n = 10;
    const auto handle = location_handle(n);
    const auto stages = replicate_stages(handle, 3);
    GridSpec g;
    g.cell = 3.0;
    g.nx = 4;
    const LocationMean lm = [n](const Eigen::Vector2d& s) { return belief_at(s, n).mu; };
    const auto cb = design_codebook(stages, lm, g, 3);
    Rng rng(4);
    for (int t = 0; t < 50; ++t) {
        const Eigen::Vector2d s(uniform(rng, 0, 12), 1.5);
        Eigen::VectorXd truth(n);
        for (int i = 0; i < n; ++i)
            truth(i) = -80.0 + 10.0 * standard_normal(rng);
        int calls = 0;
        std::set<int> probed;
        std::size_t probes = 0;
        FeedbackOracle fb = [&](std::span<const int> q) {
            ++calls;
            probes += q.size();
            probed.insert(q.begin(), q.end());
            return Eigen::VectorXd(truth(std::vector<int>(q.begin(), q.end())));
        };
        const auto d = two_stage_online(cb, handle, s, 3, 5, fb);
        CHECK(calls == 2);
        CHECK(probes == 8);
        CHECK(probed.size() == 8);
        CHECK(d.stage1 == codebook_lookup(cb, s));
        // never returns a beam with lower feedback than another measured beam
        double best_measured = -1e300;
        for (int i : probed)
            best_measured = std::max(best_measured, truth(i));
        CHECK(d.estimate(d.beam) >= best_measured);
        for (int i : probed)
            CHECK(d.estimate(i) == truth(i));
        // deterministic
        int calls2 = 0;
        FeedbackOracle fb2 = [&](std::span<const int> q) {
            ++calls2;
            return Eigen::VectorXd(truth(std::vector<int>(q.begin(), q.end())));
        };
        CHECK(two_stage_online(cb, handle, s, 3, 5, fb2).beam == d.beam);
    }
}

TEST_CASE("two-stage argument checks")
{
    ProbingCodebook cb;
    cb.l1 = 2;
    cb.beams = {{0, 1}};
    const auto h = belief_handle(GaussianBelief{Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3)});
    FeedbackOracle fb = [](std::span<const int> q) { return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q.size())); };
    CHECK_THROWS_AS(two_stage_online(cb, h, Eigen::Vector2d::Zero(), 3, 1, fb), std::invalid_argument);
    CHECK_THROWS_AS(two_stage_online(cb, h, Eigen::Vector2d::Zero(), 2, 2, fb), std::invalid_argument);
    ProbingCodebook bad = cb;
    bad.beams = {{0, 0}};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
