// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "beamprobe/metrics.hpp"
#include "beamprobe/probe_select.hpp"
#include "test_support.hpp"

using namespace beamprobe;
using namespace beamprobe::testing;

namespace {

Dataset from_rows(const std::vector<Eigen::VectorXd>& rows)
{
    Dataset ds;
    ds.geometry = ArrayGeometry{static_cast<int>(rows.front().size()), 1};
    for (const auto& r : rows)
        ds.samples.push_back(Sample{Eigen::Vector2d::Zero(), r});
    return ds;
}

SamplePrediction predict(const Eigen::VectorXd& est)
{
    return {est, argmax_first(est)};
}

}  // namespace

TEST_CASE("hand-built example")
{
    const Eigen::Vector3d truth(-60, -50, -70);
    const Eigen::Vector3d est(-80, -75, -40);  // ranks index 2 first, then 1
    const auto ds = from_rows({truth, truth});
    const std::vector<SamplePrediction> preds{predict(est), predict(truth)};
    const auto r = evaluate(preds, ds, 3, 1);
    CHECK(r.top_k.at(1) == 0.5);
    CHECK(r.top_k.at(3) == 1.0);
    CHECK(r.rsrp_diff_db == doctest::Approx(10.0));  // (20 + 0) / 2
    const auto out = sample_outcomes(preds, ds);
    CHECK(out[0].true_best == 1);
    CHECK(out[0].chosen == 2);
    CHECK(out[0].rsrp_true_best - out[0].rsrp_chosen == 20.0);
    CHECK(!out[0].top1);
    CHECK(out[0].top3);
    CHECK(r.mse_db2 == doctest::Approx((400.0 + 625.0 + 900.0) / 3.0 / 2.0));
}

TEST_CASE("perfect prediction")
{
    Rng rng(1);
    std::vector<Eigen::VectorXd> rows;
    for (int t = 0; t < 20; ++t)
        rows.push_back(Eigen::VectorXd::Random(10) * 30.0 - Eigen::VectorXd::Constant(10, 80.0));
    const auto ds = from_rows(rows);
    std::vector<SamplePrediction> preds;
    for (const auto& r : rows)
        preds.push_back(predict(r));
    const auto rep = evaluate(preds, ds, 0, 0);
    CHECK(rep.mse_db2 == 0.0);
    CHECK(rep.rsrp_diff_db == 0.0);
    for (const auto& [k, v] : rep.top_k)
        CHECK(v == 1.0);
    CHECK(rep.ear_bps_hz == doctest::Approx(rep.oracle_rate_bps_hz));
}

TEST_CASE("top-k is monotone and evaluation ignores sample order")
{
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
        std::vector<Eigen::VectorXd> rows;
        std::vector<SamplePrediction> preds;
        for (int s = 0; s < 30; ++s) {
            Eigen::VectorXd x(12);
            Eigen::VectorXd e(12);
            for (int i = 0; i < 12; ++i) {
                x(i) = std::round(uniform(rng, -100, -60));
                e(i) = x(i) + 8.0 * standard_normal(rng);
            }
            rows.push_back(x);
            preds.push_back(predict(e));
        }
        const auto r = evaluate(preds, from_rows(rows), 4, 4);
        CHECK(r.top_k.at(1) <= r.top_k.at(3));
        CHECK(r.top_k.at(3) <= r.top_k.at(5));
        CHECK(r.rsrp_diff_db >= 0.0);
        const auto perm = random_subset(30, 30, rng);
        std::vector<Eigen::VectorXd> rows2;
        std::vector<SamplePrediction> preds2;
        for (int p : perm) {
            rows2.push_back(rows[static_cast<std::size_t>(p)]);
            preds2.push_back(preds[static_cast<std::size_t>(p)]);
        }
        const auto r2 = evaluate(preds2, from_rows(rows2), 4, 4);
        CHECK(r2.mse_db2 == doctest::Approx(r.mse_db2).epsilon(1e-12));
        CHECK(r2.rsrp_diff_db == doctest::Approx(r.rsrp_diff_db).epsilon(1e-12));
        CHECK(r2.top_k == r.top_k);
        CHECK(r2.ear_bps_hz == doctest::Approx(r.ear_bps_hz).epsilon(1e-12));
    }
}

TEST_CASE("ties at the true maximum count as hits")
{
    const Eigen::Vector3d x(-50, -70, -50);
    CHECK(in_top_k(x, Eigen::Vector3d(-90, -80, -40), 1));
    CHECK(in_top_k(x, Eigen::Vector3d(-40, -80, -90), 1));
    CHECK(!in_top_k(x, Eigen::Vector3d(-60, -40, -60), 1));
    // ranking ties go to the smaller index
    CHECK(!in_top_k(Eigen::Vector3d(-70, -50, -90), Eigen::Vector3d(-60, -60, -90), 1));
    CHECK(in_top_k(Eigen::Vector3d(-50, -70, -90), Eigen::Vector3d(-60, -60, -90), 1));
}

TEST_CASE("length mismatch is an error")
{
    const auto ds = from_rows({Eigen::Vector3d(1, 2, 3)});
    const std::vector<SamplePrediction> none;
    CHECK_THROWS_AS(evaluate(none, ds, 1, 1), std::invalid_argument);
}

TEST_CASE("EAR arithmetic")
{
    const EarParams p;
    CHECK(overhead_factor(8, p) == doctest::Approx(1.0 - 8 * 8.92e-6 / 0.02).epsilon(1e-15));
    CHECK(std::abs(overhead_factor(8, p) - 0.996432) < 5e-8);
    CHECK(ear(0.0, 8, p) == 0.0);
    CHECK(ear(1.0, 0, p) == 1.0);
    CHECK(ear(100.0, 3000, p) == 0.0);
    CHECK(overhead_factor(2243, p) == 0.0);
    CHECK(p.noise_power_dbm() == doctest::Approx(-94.0));
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        const double snr = uniform(rng, 0, 1000);
        const int l = static_cast<int>(rng() % 500);
        CHECK(ear(snr, l + 1, p) <= ear(snr, l, p));
        CHECK(ear(snr + 1.0, l, p) >= ear(snr, l, p));
    }
    CHECK_THROWS_AS(ear(-1.0, 1, p), std::invalid_argument);
}

TEST_CASE("baseline overheads")
{
    CHECK(baseline_overheads(1, BaselineScheme::two_level) == 24);
    CHECK(baseline_overheads(1, BaselineScheme::binary) == 14);
    for (int u : {1, 5, 40})
        CHECK(baseline_overheads(u, BaselineScheme::prediction, 8) == 8 * u);
    CHECK_THROWS_AS(baseline_overheads(0, BaselineScheme::binary), std::invalid_argument);
    // binary search at 100 users leaves 1 - 1400 * 8.92e-6 / 0.02 = 0.3756
    CHECK(overhead_factor(baseline_overheads(100, BaselineScheme::binary), EarParams{}) ==
          doctest::Approx(0.3756).epsilon(1e-9));
}

TEST_CASE("uniform probing beams")
{
    const ArrayGeometry g{16, 8};
    const auto b = uniform_probing_beams(g, 8);
    CHECK(b == std::vector<int>{18, 22, 50, 54, 82, 86, 114, 118});
    for (int l : {1, 2, 3, 4, 5, 7, 12, 16, 128}) {
        const auto u = uniform_probing_beams(g, l);
        CHECK(u.size() == static_cast<std::size_t>(l));
        CHECK(std::set<int>(u.begin(), u.end()).size() == u.size());
        for (int i : u)
            CHECK((i >= 0 && i < 128));
    }
    CHECK_THROWS_AS(uniform_probing_beams(g, 0), std::invalid_argument);
    CHECK_THROWS_AS(uniform_probing_beams(g, 129), std::invalid_argument);
}

TEST_CASE("bootstrap of the mean")
{
    const std::vector<double> flat(50, 2.5);
    const auto c = bootstrap_mean(flat, 500, 1);
    CHECK(c.mean == 2.5);
    CHECK(c.half_width == 0.0);

    Rng rng(4);
    std::vector<double> v(2000);
    for (double& x : v)
        x = 1.0 + 3.0 * standard_normal(rng);
    const auto b = bootstrap_mean(v, 2000, 7);
    const double se = 3.0 / std::sqrt(2000.0);
    CHECK(b.half_width == doctest::Approx(1.96 * se).epsilon(0.15));
    CHECK(std::abs(b.mean - 1.0) < 4 * se);
    const auto again = bootstrap_mean(v, 2000, 7);
    CHECK(again.half_width == b.half_width);
    CHECK_THROWS_AS(bootstrap_mean(std::vector<double>{}, 10, 1), std::invalid_argument);
}
