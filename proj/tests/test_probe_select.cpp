// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "beamprobe/probe_select.hpp"
#include "test_support.hpp"

using namespace beamprobe;
using namespace beamprobe::testing;

namespace {

GaussianBelief diagonal(const Eigen::VectorXd& var, double mean = -70.0)
{
    return {Eigen::VectorXd::Constant(var.size(), mean), Eigen::MatrixXd(var.asDiagonal())};
}

}  // namespace

TEST_CASE("largest-variance beam is probed first")
{
    const auto b = diagonal(Eigen::Vector4d(1, 4, 2, 3));
    const auto plan = greedy_select(b, 1, SelectionObjective::plain());
    REQUIRE(plan.order.size() == 1);
    CHECK(plan.order[0] == 1);
    const auto ex = exhaustive_select(b, 1, SelectionObjective::plain());
    CHECK(ex.beams == std::vector<int>{1});
    CHECK(ex.objective == doctest::Approx(std::log(1.0 * 2.0 * 3.0)).epsilon(1e-12));
}

TEST_CASE("probing every beam leaves nothing to resolve")
{
    Rng rng(3);
    const auto b = random_belief(5, rng);
    const auto ex = exhaustive_select(b, 5, SelectionObjective::plain());
    CHECK(ex.objective == 0.0);
    CHECK(ex.beams == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("greedy equals exhaustive for diagonal covariance")
{
    Rng rng(4);
    for (int t = 0; t < 50; ++t) {
        const int n = 4 + static_cast<int>(rng() % 6);
        const int l = 1 + static_cast<int>(rng() % (n - 1));
        Eigen::VectorXd var(n);
        for (int i = 0; i < n; ++i)
            var(i) = uniform(rng, 0.5, 10.0);
        const auto b = diagonal(var);
        auto greedy = greedy_select(b, l, SelectionObjective::plain()).order;
        std::sort(greedy.begin(), greedy.end());
        CHECK(greedy == exhaustive_select(b, l, SelectionObjective::plain()).beams);
    }
}

TEST_CASE("exhaustive never loses to greedy")
{
    Rng rng(5);
    for (int t = 0; t < 100; ++t) {
        const int n = 4 + static_cast<int>(rng() % 5);
        const int l = 1 + static_cast<int>(rng() % (n - 1));
        const auto b = random_belief(n, rng);
        for (const auto& obj : {SelectionObjective::plain(), SelectionObjective::masked()}) {
            const auto plan = greedy_select(b, l, obj);
            const double g = selection_objective(b, plan.order, obj);
            const double e = exhaustive_select(b, l, obj).objective;
            CHECK(e <= g + 1e-9);
        }
    }
}

TEST_CASE("plain greedy matches a brute-force logdet oracle per round")
{
    Rng rng(6);
    for (int t = 0; t < 30; ++t) {
        const int n = 6;
        const auto b = random_belief(n, rng);
        const auto plan = greedy_select(b, 3, SelectionObjective::plain());
        std::vector<int> q;
        for (int k = 0; k < 3; ++k) {
            // oracle: sum of log conditional variances over P minus the candidate
            int best = -1;
            double best_v = 0.0;
            for (int c = 0; c < n; ++c) {
                if (std::find(q.begin(), q.end(), c) != q.end())
                    continue;
                std::vector<int> qc = q;
                qc.push_back(c);
                const auto part = BeamPartition::from_measured(n, qc);
                const auto d = condition_dense(b, part.measured, part.unmeasured, Eigen::VectorXd(b.mu(qc)));
                double v = 0.0;
                for (Eigen::Index i = 0; i < d.sigma.rows(); ++i)
                    v += std::log(d.sigma(i, i));
                if (best < 0 || v < best_v - 1e-12) {
                    best = c;
                    best_v = v;
                }
            }
            CHECK(plan.order[static_cast<std::size_t>(k)] == best);
            q.push_back(plan.order[static_cast<std::size_t>(k)]);
        }
    }
}

TEST_CASE("selection is invariant to covariance scale")
{
    Rng rng(7);
    for (int t = 0; t < 40; ++t) {
        const int n = 6;
        auto b = random_belief(n, rng);
        const auto plan = greedy_select(b, 3, SelectionObjective::masked());
        const auto ex = exhaustive_select(b, 3, SelectionObjective::plain());
        b.sigma *= std::exp(uniform(rng, -2, 2));
        CHECK(greedy_select(b, 3, SelectionObjective::masked()).order == plan.order);
        CHECK(exhaustive_select(b, 3, SelectionObjective::plain()).beams == ex.beams);
    }
}

TEST_CASE("selected beams are distinct and in range")
{
    Rng rng(8);
    for (int t = 0; t < 50; ++t) {
        const int n = 3 + static_cast<int>(rng() % 10);
        const int l = 1 + static_cast<int>(rng() % n);
        const auto b = random_belief(n, rng);
        const auto plan = greedy_select(b, l, SelectionObjective::masked());
        CHECK(plan.order.size() == static_cast<std::size_t>(l));
        CHECK(std::set<int>(plan.order.begin(), plan.order.end()).size() == static_cast<std::size_t>(l));
        for (int i : plan.order)
            CHECK((i >= 0 && i < n));
    }
}

TEST_CASE("argument checks")
{
    Rng rng(9);
    const auto b = random_belief(4, rng);
    CHECK_THROWS_AS(greedy_select(b, 5, SelectionObjective::plain()), std::invalid_argument);
    CHECK_THROWS_AS(exhaustive_select(b, 5, SelectionObjective::plain()), std::invalid_argument);
    CHECK_THROWS_AS(exhaustive_select(random_belief(21, rng), 2, SelectionObjective::plain()), std::invalid_argument);
    const PredictorStages short_list(2, belief_handle(b));
    CHECK_THROWS_AS(greedy_select(short_list, 2, SelectionObjective::plain(), Eigen::Vector2d::Zero()),
                    std::invalid_argument);
    CHECK_THROWS_AS(argmax_first(Eigen::VectorXd()), std::invalid_argument);
    CHECK(argmax_first(Eigen::Vector3d(1, 5, 5)) == 1);
}

TEST_CASE("online probing calls feedback once per round and writes measurements back")
{
    Rng rng(10);
    const auto b = random_belief(6, rng);
    const auto stages = replicate_stages(belief_handle(b), 3);
    for (int l = 1; l <= 3; ++l) {
        int calls = 0;
        int probes = 0;
        const Eigen::VectorXd truth = b.mu + Eigen::VectorXd::Constant(6, 1.0);
        FeedbackOracle fb = [&](std::span<const int> q) {
            ++calls;
            probes += static_cast<int>(q.size());
            return Eigen::VectorXd(truth(std::vector<int>(q.begin(), q.end())));
        };
        const auto d = iter_online(stages, Eigen::Vector2d::Zero(), l, SelectionObjective::masked(), fb);
        CHECK(calls == l);
        CHECK(probes == l);
        for (std::size_t k = 0; k < d.plan.order.size(); ++k)
            CHECK(d.estimate(d.plan.order[k]) == truth(d.plan.order[k]));
        CHECK(d.beam == argmax_first(d.estimate));
    }
}

TEST_CASE("a measured beam far above the prediction is chosen")
{
    const auto b = diagonal(Eigen::Vector3d(1, 9, 2));
    const auto stages = replicate_stages(belief_handle(b), 1);
    FeedbackOracle fb = [](std::span<const int> q) { return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(q.size()), -20.0); };
    const auto d = iter_online(stages, Eigen::Vector2d::Zero(), 1, SelectionObjective::plain(), fb);
    CHECK(d.plan.order == std::vector<int>{1});
    CHECK(d.beam == 1);
}

TEST_CASE("stage list: mask from the previous stage, variance from the current one")
{
    // stage 1 variance makes beam 2 the only informative probe
    PredictorHandle flat = belief_handle(diagonal(Eigen::Vector3d(1, 1, 1)));
    PredictorHandle pick2;
    pick2.mean = flat.mean;
    pick2.variance = [](std::span<const int> q, const Eigen::Vector2d&) {
        Eigen::VectorXd v = Eigen::Vector3d::Constant(5.0);
        if (q.back() == 2)
            v.setConstant(0.1);
        return v;
    };
    const PredictorStages stages{flat, pick2};
    const auto plan = greedy_select(stages, 1, SelectionObjective::plain(), Eigen::Vector2d::Zero());
    CHECK(plan.order == std::vector<int>{2});
}

TEST_CASE("the mask maximum runs over the beams left after the candidate")
{
    // runner-up (beam 1) already measured; its strongly correlated partner is
    // the top remaining beam. Probing it would make the weak beams the new
    // maximum, so the masked cost prefers a weak beam.
    GaussianBelief g;
    g.mu = Eigen::Vector4d(-55, -60, -90, -90);
    g.sigma = Eigen::Vector4d(16, 16, 4, 4).asDiagonal();
    g.sigma(0, 1) = g.sigma(1, 0) = 12.0;
    const auto h = belief_handle(g);
    const std::vector<int> q{1};
    const Eigen::VectorXd mu = h.mean(Eigen::VectorXd::Constant(1, -60.0), q, Eigen::Vector2d::Zero());
    CHECK(greedy_round(mu, q, h, SelectionObjective::masked(), Eigen::Vector2d::Zero()) == 2);
    CHECK(greedy_round(mu, q, h, SelectionObjective::plain(), Eigen::Vector2d::Zero()) == 0);
}

TEST_CASE("toy scene: the strong beam is found")
{
    // three location cells, each with its own dominant beam 10 dB above a
    // correlated neighbour; exact per-cell Gaussians, noiseless feedback
    const int n = 6;
    std::vector<GaussianBelief> cells;
    for (int c = 0; c < 3; ++c) {
        GaussianBelief g;
        g.mu = Eigen::VectorXd::Constant(n, -90.0);
        g.mu(2 * c) = -55.0;
        g.mu(2 * c + 1) = -65.0;
        g.sigma = 4.0 * Eigen::MatrixXd::Identity(n, n);
        g.sigma(2 * c, 2 * c) = g.sigma(2 * c + 1, 2 * c + 1) = 16.0;
        g.sigma(2 * c, 2 * c + 1) = g.sigma(2 * c + 1, 2 * c) = 8.0;
        cells.push_back(g);
    }
    Rng rng(11);
    int hits = 0;
    for (int t = 0; t < 100; ++t) {
        const auto& g = cells[static_cast<std::size_t>(t % 3)];
        const Eigen::MatrixXd l = g.sigma.llt().matrixL();
        Eigen::VectorXd z(n);
        for (int i = 0; i < n; ++i)
            z(i) = standard_normal(rng);
        const Eigen::VectorXd truth = g.mu + l * z;
        FeedbackOracle fb = [&](std::span<const int> q) {
            return Eigen::VectorXd(truth(std::vector<int>(q.begin(), q.end())));
        };
        const auto stages = replicate_stages(belief_handle(g), 2);
        const auto d = iter_online(stages, Eigen::Vector2d::Zero(), 2, SelectionObjective::masked(), fb);
        hits += truth(d.beam) >= truth.maxCoeff() ? 1 : 0;
    }
    CHECK(hits >= 95);
}
