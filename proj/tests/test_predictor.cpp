// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "beamprobe/predictor.hpp"
#include "beamprobe/training.hpp"
#include "predictor_oracle.hpp"

using namespace beamprobe;
using namespace beamprobe::testing;

namespace {

Eigen::MatrixXd random_matrix(int r, int c, Rng& rng)
{
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i)
            m(i, j) = standard_normal(rng);
    return m;
}

// Perturb every parameter so gains and biases are not at their defaults.
PredictorModel random_model(const PredictorConfig& c, std::uint64_t seed)
{
    auto m = initialize_predictor(c, tiny_norm(), seed);
    Rng rng(seed + 100);
    for (auto& [name, w] : m.params)
        w += 0.2 * random_matrix(static_cast<int>(w.rows()), static_cast<int>(w.cols()), rng);
    return m;
}

}  // namespace

TEST_CASE("measurement block")
{
    const std::vector<int> none;
    CHECK(measurement_block(Eigen::VectorXd(), none, 4, PredictorKind::mean).isZero());
    const std::vector<int> q{2, 0};
    const auto e = measurement_block(Eigen::Vector2d(0.0, 1.5), q, 4, PredictorKind::mean);
    CHECK(e.row(2) == Eigen::RowVector2d(0.0, 1.0));
    CHECK(e.row(0) == Eigen::RowVector2d(1.5, 1.0));
    CHECK(e.row(1).isZero());
    CHECK(e.row(2) != e.row(1));  // measured zero differs from unmeasured
    const auto v = measurement_block(Eigen::Vector2d(0.7, 1.5), q, 4, PredictorKind::variance);
    CHECK(v.col(0).isZero());
    CHECK(v.col(1).sum() == 2.0);
    const std::vector<int> bad{4};
    CHECK_THROWS_AS(measurement_block(Eigen::VectorXd::Zero(1), bad, 4, PredictorKind::mean), std::out_of_range);
}

TEST_CASE("embedding width")
{
    PredictorConfig c;
    c.n = 5;
    const auto m = initialize_predictor(c, Normalization{}, 1);
    const std::vector<int> q{1};
    const auto x = embed_inputs(m, Eigen::VectorXd::Constant(1, -70.0), q, Eigen::Vector2d(3, 4));
    CHECK(x.rows() == 5);
    CHECK(x.cols() == 18);
    CHECK((x.leftCols(16).array() >= 0.0).all());
}

TEST_CASE("attention with zero queries averages the values")
{
    Rng rng(1);
    const Eigen::MatrixXd a = random_matrix(3, 5, rng);
    const Eigen::MatrixXd wv = random_matrix(3, 3, rng);
    const Eigen::MatrixXd out = attention(a, Eigen::MatrixXd::Zero(2, 3), random_matrix(2, 3, rng), wv, 2);
    const Eigen::VectorXd mean = (wv * a).rowwise().mean();
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        CHECK((out.col(j) - mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(attention(a, Eigen::MatrixXd::Zero(2, 4), wv, wv, 2), std::invalid_argument);
}

TEST_CASE("softmax columns sum to one and ignore shifts")
{
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
        const Eigen::MatrixXd l = 5.0 * random_matrix(6, 4, rng);
        const Eigen::MatrixXd p = softmax_columns(l);
        CHECK((p.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
        Eigen::MatrixXd shifted = l;
        shifted.col(1).array() += 123.0;
        CHECK((softmax_columns(shifted) - p).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("attention matches an independent 3x3 evaluation")
{
    Rng rng(3);
    for (int t = 0; t < 10; ++t) {
        const Eigen::MatrixXd a = random_matrix(3, 3, rng);
        const Eigen::MatrixXd wq = random_matrix(3, 3, rng);
        const Eigen::MatrixXd wk = random_matrix(3, 3, rng);
        const Eigen::MatrixXd wv = random_matrix(3, 3, rng);
        const Eigen::MatrixXd got = attention(a, wq, wk, wv, 3);
        for (int col = 0; col < 3; ++col) {
            double w[3];
            double z = 0.0;
            for (int j = 0; j < 3; ++j) {
                double dot = 0.0;
                for (int r = 0; r < 3; ++r) {
                    double kr = 0.0;
                    double qr = 0.0;
                    for (int c = 0; c < 3; ++c) {
                        kr += wk(r, c) * a(c, j);
                        qr += wq(r, c) * a(c, col);
                    }
                    dot += kr * qr;
                }
                w[j] = std::exp(dot / std::sqrt(3.0));
                z += w[j];
            }
            for (int r = 0; r < 3; ++r) {
                double acc = 0.0;
                for (int j = 0; j < 3; ++j) {
                    double vr = 0.0;
                    for (int c = 0; c < 3; ++c)
                        vr += wv(r, c) * a(c, j);
                    acc += vr * w[j] / z;
                }
                CHECK(std::abs(got(r, col) - acc) < 1e-12 * std::max(1.0, std::abs(acc)));
            }
        }
    }
}

TEST_CASE("forward pass matches the scalar-loop oracle")
{
    for (int heads : {1, 2}) {
        for (auto kind : {PredictorKind::mean, PredictorKind::variance}) {
            auto c = tiny_config(kind, heads);
            c.blocks = 2;
            const auto m = random_model(c, 5);
            Rng rng(6);
            const auto batch = tiny_batch(c.n, 5, rng);
            for (const auto& ex : batch) {
                const Eigen::VectorXd x_q = ex.x(ex.q);
                const Eigen::VectorXd got = forward(m, x_q, ex.q, ex.s).raw;
                const Eigen::VectorXd want = naive_forward(m, x_q, ex.q, ex.s);
                CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, want.cwiseAbs().maxCoeff()));
            }
        }
    }
}

TEST_CASE("zero parameters collapse to the output bias")
{
    auto m = initialize_predictor(tiny_config(PredictorKind::mean), tiny_norm(), 1);
    for (auto& [name, w] : m.params)
        w.setZero();
    m.params["head.b"](0, 0) = 0.37;
    const std::vector<int> q{1, 4};
    const auto raw = forward(m, Eigen::Vector2d(-60, -70), q, Eigen::Vector2d(5, 5)).raw;
    CHECK((raw.array() == 0.37).all());
}

TEST_CASE("variance outputs respect the floor")
{
    Rng rng(7);
    for (int t = 0; t < 20; ++t) {
        auto c = tiny_config(PredictorKind::variance);
        c.variance_floor = 0.25;
        auto m = random_model(c, static_cast<std::uint64_t>(t));
        m.params["head.b"](0, 0) = -40.0;  // push softplus toward zero
        const auto ex = tiny_batch(c.n, 1, rng).front();
        const auto lam = predict_variance(m, ex.q, ex.s);
        CHECK((lam.array() >= 0.25).all());
        CHECK(lam.allFinite());
    }
    CHECK(softplus(-800.0) >= 0.0);
    CHECK(softplus(800.0) == 800.0);
}

TEST_CASE("swapping two beams with identical embeddings swaps their outputs")
{
    auto m = random_model(tiny_config(PredictorKind::mean), 9);
    // beams 2 and 5 share their location projection and class bias
    m.params["loc.w"].row(5) = m.params["loc.w"].row(2);
    m.params["loc.b"].row(5) = m.params["loc.b"].row(2);
    m.params["cls"].row(5) = m.params["cls"].row(2);
    const std::vector<int> q{2, 5, 7};
    const Eigen::Vector3d x(-60, -75, -90);
    const Eigen::Vector3d swapped(-75, -60, -90);
    const Eigen::Vector2d s(12, 3);
    const auto a = forward(m, x, q, s).raw;
    const auto b = forward(m, swapped, q, s).raw;
    CHECK(std::abs(a(2) - b(5)) < 1e-12);
    CHECK(std::abs(a(5) - b(2)) < 1e-12);
    for (int i : {0, 1, 3, 4, 6, 7})
        CHECK(std::abs(a(i) - b(i)) < 1e-12);
}

TEST_CASE("forward is deterministic")
{
    const auto m = random_model(tiny_config(PredictorKind::mean), 10);
    const std::vector<int> q{0, 3};
    const Eigen::Vector2d x(-65, -70);
    CHECK(forward(m, x, q, Eigen::Vector2d(1, 2)).raw == forward(m, x, q, Eigen::Vector2d(1, 2)).raw);
    CHECK(initialize_predictor(m.config, m.norm, 3) == initialize_predictor(m.config, m.norm, 3));
}

TEST_CASE("non-finite parameters are rejected")
{
    auto m = random_model(tiny_config(PredictorKind::mean), 11);
    m.params["block0.wq"](0, 0) = std::nan("");
    const std::vector<int> q{0};
    CHECK_THROWS_AS(forward(m, Eigen::VectorXd::Constant(1, -70), q, Eigen::Vector2d::Zero()), std::domain_error);
}

TEST_CASE("analytic gradients match central differences")
{
    for (int heads : {1, 2}) {
        const auto f = random_model(tiny_config(PredictorKind::mean, heads), 20);
        const auto g = random_model(tiny_config(PredictorKind::variance, heads), 21);
        Rng rng(22);
        const auto batch = tiny_batch(8, 4, rng);
        const auto check = gradient_check(f, g, batch);
        INFO("worst coordinate " << check.worst);
        CHECK(check.max_rel_error < 1e-4);
        CHECK(check.coordinates > 500);
    }
}

TEST_CASE("constant head has zero gradient upstream")
{
    auto f = random_model(tiny_config(PredictorKind::mean), 30);
    const auto g = random_model(tiny_config(PredictorKind::variance), 31);
    f.params["head.w"].setZero();
    Rng rng(32);
    const auto batch = tiny_batch(8, 3, rng);
    const auto lg = loss_and_gradient(f, g, batch);
    for (const auto& [name, grad] : lg.grad_mean)
        if (name != "head.w" && name != "head.b")
            CHECK(grad.isZero());
}

TEST_CASE("gradients are linear in the batch")
{
    const auto f = random_model(tiny_config(PredictorKind::mean), 40);
    const auto g = random_model(tiny_config(PredictorKind::variance), 41);
    Rng rng(42);
    const auto batch = tiny_batch(8, 4, rng);
    const std::span<const TrainingExample> all(batch);
    const auto whole = loss_and_gradient(f, g, all);
    const auto a = loss_and_gradient(f, g, all.subspan(0, 2));
    const auto b = loss_and_gradient(f, g, all.subspan(2, 2));
    CHECK(whole.loss == doctest::Approx(0.5 * (a.loss + b.loss)).epsilon(1e-12));
    for (const auto& [name, grad] : whole.grad_mean)
        CHECK((grad - 0.5 * (a.grad_mean.at(name) + b.grad_mean.at(name))).cwiseAbs().maxCoeff() <
              1e-10 * std::max(1.0, grad.cwiseAbs().maxCoeff()));
    for (const auto& [name, grad] : whole.grad_variance)
        CHECK((grad - 0.5 * (a.grad_variance.at(name) + b.grad_variance.at(name))).cwiseAbs().maxCoeff() <
              1e-10 * std::max(1.0, grad.cwiseAbs().maxCoeff()));
}

TEST_CASE("config validation")
{
    auto c = tiny_config(PredictorKind::mean, 3);
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = tiny_config(PredictorKind::mean);
    c.n = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = tiny_config(PredictorKind::mean);
    c.variance_floor = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
