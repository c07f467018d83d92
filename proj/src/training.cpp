// SPDX-License-Identifier: Apache-2.0

#include "beamprobe/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "beamprobe/errors.hpp"
#include "beamprobe/json_io.hpp"
#include "beamprobe/random.hpp"

namespace beamprobe {

namespace {

constexpr const char* kSetFormat = "beamprobe.predictor_set";

std::vector<int> complement(int n, std::span<const int> q)
{
    return BeamPartition::from_measured(n, q).unmeasured;
}

Eigen::VectorXd gather(const Eigen::VectorXd& x, std::span<const int> idx)
{
    Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k)
        out(static_cast<Eigen::Index>(k)) = x(idx[k]);
    return out;
}

void check_pair(const PredictorModel& f, const PredictorModel& g)
{
    if (f.config.kind != PredictorKind::mean || g.config.kind != PredictorKind::variance)
        throw std::invalid_argument("loss_and_gradient: expected a (mean, variance) pair");
    if (f.config.n != g.config.n)
        throw std::invalid_argument("loss_and_gradient: beam counts differ");
}

struct OptimizerState
{
    ParameterMap first;
    ParameterMap second;
    int step = 0;
};

void apply_update(ParameterMap& params, const ParameterMap& grad, OptimizerState& state, const TrainConfig& c)
{
    if (state.first.empty()) {
        state.first = zeros_like(params);
        if (c.optimizer == Optimizer::adam)
            state.second = zeros_like(params);
    }
    ++state.step;
    for (auto& [name, w] : params) {
        const auto& gr = grad.at(name);
        switch (c.optimizer) {
        case Optimizer::sgd:
            w -= c.lr * gr;
            break;
        case Optimizer::momentum: {
            auto& v = state.first.at(name);
            v = c.momentum * v + gr;
            w -= c.lr * v;
            break;
        }
        case Optimizer::adam: {
            auto& m = state.first.at(name);
            auto& v = state.second.at(name);
            m = c.adam_beta1 * m + (1.0 - c.adam_beta1) * gr;
            v = c.adam_beta2 * v + (1.0 - c.adam_beta2) * gr.cwiseAbs2();
            const double b1 = 1.0 - std::pow(c.adam_beta1, state.step);
            const double b2 = 1.0 - std::pow(c.adam_beta2, state.step);
            w.array() -= c.lr * (m.array() / b1) / ((v.array() / b2).sqrt() + c.adam_eps);
            break;
        }
        }
    }
}

}  // namespace

double nll_loss(const Eigen::VectorXd& mu, const Eigen::VectorXd& lambda, const Eigen::VectorXd& x,
                std::span<const int> p)
{
    if (p.empty())
        throw std::invalid_argument("nll_loss: empty P");
    if (mu.size() != x.size() || lambda.size() != x.size())
        throw std::invalid_argument("nll_loss: length mismatch");
    double acc = 0.0;
    for (int i : p) {
        if (!(lambda(i) > 0.0))
            throw std::domain_error("nll_loss: non-positive variance at beam " + std::to_string(i));
        const double r = x(i) - mu(i);
        acc += std::log(2.0 * EIGEN_PI * lambda(i)) + r * r / lambda(i);
    }
    return 0.5 * acc;
}

LossAndGradient loss_and_gradient(const PredictorModel& f, const PredictorModel& g,
                                  std::span<const TrainingExample> batch)
{
    check_pair(f, g);
    if (batch.empty())
        throw std::invalid_argument("loss_and_gradient: empty batch");
    LossAndGradient out;
    out.grad_mean = zeros_like(f.params);
    out.grad_variance = zeros_like(g.params);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const int n = f.config.n;
    const double s2 = g.norm.x_scale * g.norm.x_scale;

    for (const auto& ex : batch) {
        const auto rf = forward(f, gather(ex.x, ex.q), ex.q, ex.s);
        const auto rg = forward(g, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ex.q.size())), ex.q, ex.s);
        const Eigen::VectorXd mu = mean_from_raw(f, rf.raw);
        const Eigen::VectorXd lambda = variance_from_raw(g, rg.raw);
        const auto p = complement(n, ex.q);
        out.loss += inv_b * nll_loss(mu, lambda, ex.x, p);

        Eigen::VectorXd d_raw_f = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd d_raw_g = Eigen::VectorXd::Zero(n);
        for (int i : p) {
            const double r = ex.x(i) - mu(i);
            const double lam = lambda(i);
            d_raw_f(i) = -r / lam * f.norm.x_scale * inv_b;
            d_raw_g(i) = 0.5 * (1.0 / lam - r * r / (lam * lam)) * s2 * sigmoid(rg.raw(i)) * inv_b;
        }
        backward(f, *rf.cache, d_raw_f, out.grad_mean);
        backward(g, *rg.cache, d_raw_g, out.grad_variance);
    }
    return out;
}

double batch_loss(const PredictorModel& f, const PredictorModel& g, std::span<const TrainingExample> batch)
{
    check_pair(f, g);
    if (batch.empty())
        throw std::invalid_argument("batch_loss: empty batch");
    double acc = 0.0;
    for (const auto& ex : batch) {
        const Eigen::VectorXd mu = predict_mean(f, gather(ex.x, ex.q), ex.q, ex.s);
        const Eigen::VectorXd lambda = predict_variance(g, ex.q, ex.s);
        acc += nll_loss(mu, lambda, ex.x, complement(f.config.n, ex.q));
    }
    return acc / static_cast<double>(batch.size());
}

void TrainConfig::validate() const
{
    if (epochs < 0 || batch < 1 || !(lr > 0.0) || !(variance_floor > 0.0))
        throw std::invalid_argument("TrainConfig: epochs, batch, lr and variance_floor must be positive");
    if (momentum < 0.0 || momentum >= 1.0 || adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 ||
        adam_beta2 >= 1.0 || !(adam_eps > 0.0))
        throw std::invalid_argument("TrainConfig: optimizer constants out of range");
}

Normalization fit_normalization(const Dataset& dataset)
{
    if (dataset.samples.empty())
        throw std::invalid_argument("fit_normalization: empty dataset");
    Normalization norm;
    double sum = 0.0;
    double sum2 = 0.0;
    double count = 0.0;
    Eigen::Vector2d s_sum = Eigen::Vector2d::Zero();
    Eigen::Vector2d s_sum2 = Eigen::Vector2d::Zero();
    for (const auto& smp : dataset.samples) {
        sum += smp.rsrp_dbm.sum();
        sum2 += smp.rsrp_dbm.squaredNorm();
        count += static_cast<double>(smp.rsrp_dbm.size());
        s_sum += smp.location;
        s_sum2 += smp.location.cwiseAbs2();
    }
    const double m = static_cast<double>(dataset.size());
    norm.x_shift = sum / count;
    norm.x_scale = std::sqrt(std::max(sum2 / count - norm.x_shift * norm.x_shift, 1e-12));
    norm.s_shift = s_sum / m;
    norm.s_scale = (s_sum2 / m - norm.s_shift.cwiseAbs2()).cwiseMax(1e-12).cwiseSqrt();
    return norm;
}

TrainResult train(const Dataset& dataset, const PartitionSchedule& schedule, PredictorModel f, PredictorModel g,
                  const TrainConfig& config)
{
    config.validate();
    check_pair(f, g);
    if (dataset.samples.empty())
        throw std::invalid_argument("train: empty dataset");
    f.config.variance_floor = config.variance_floor;
    g.config.variance_floor = config.variance_floor;

    const std::size_t m = dataset.size();
    auto examples_for = [&](int epoch) {
        std::vector<TrainingExample> ex(m);
        for (std::size_t i = 0; i < m; ++i)
            ex[i] = {dataset.samples[i].rsrp_dbm, dataset.samples[i].location, schedule(i, epoch)};
        return ex;
    };

    TrainResult result;
    result.initial_loss = batch_loss(f, g, examples_for(0));
    OptimizerState state_f;
    OptimizerState state_g;
    std::vector<std::size_t> order(m);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto examples = examples_for(epoch);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng = derive_stream(config.seed, static_cast<std::uint64_t>(epoch), 0x5b0ff1e);
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < m; start += static_cast<std::size_t>(config.batch)) {
            const std::size_t stop = std::min(m, start + static_cast<std::size_t>(config.batch));
            std::vector<TrainingExample> batch;
            batch.reserve(stop - start);
            for (std::size_t k = start; k < stop; ++k)
                batch.push_back(examples[order[k]]);
            const auto lg = loss_and_gradient(f, g, batch);
            if (!std::isfinite(lg.loss))
                throw std::runtime_error("train: loss became non-finite at epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(batches) + " (round " +
                                         std::to_string(f.config.round_index) + ", lr " + std::to_string(config.lr) +
                                         ")");
            apply_update(f.params, lg.grad_mean, state_f, config);
            apply_update(g.params, lg.grad_variance, state_g, config);
            epoch_loss += lg.loss;
            ++batches;
        }
        result.epoch_loss.push_back(epoch_loss / std::max(batches, 1));
    }
    result.mean = std::move(f);
    result.variance = std::move(g);
    return result;
}

namespace {

std::pair<PredictorModel, PredictorModel> fresh_pair(const PredictorConfig& architecture, int n, int round,
                                                     const Normalization& norm, const TrainConfig& tc)
{
    PredictorConfig cf = architecture;
    cf.n = n;
    cf.round_index = round;
    cf.variance_floor = tc.variance_floor;
    cf.kind = PredictorKind::mean;
    PredictorConfig cg = cf;
    cg.kind = PredictorKind::variance;
    return {initialize_predictor(cf, norm, tc.seed), initialize_predictor(cg, norm, tc.seed)};
}

int random_unmeasured(Rng& rng, int n, std::span<const int> q)
{
    const auto rest = complement(n, q);
    std::uniform_int_distribution<std::size_t> pick(0, rest.size() - 1);
    return rest[pick(rng)];
}

}  // namespace

PredictorSet train_iterative(const Dataset& dataset, const IterativeTrainConfig& config,
                             const std::function<void(int, const TrainResult&)>& on_round)
{
    const int n = dataset.n();
    if (config.rounds < 1 || config.rounds >= n)
        throw std::invalid_argument("train_iterative: rounds must lie in [1, n)");
    const Normalization norm = fit_normalization(dataset);
    const std::uint64_t seed = config.train.seed;
    const std::size_t m = dataset.size();
    std::vector<std::vector<int>> prefix(m);

    PredictorSet set;
    for (int round = 0; round <= config.rounds; ++round) {
        PartitionSchedule schedule;
        if (round == 0) {
            schedule = [](std::size_t, int) { return std::vector<int>{}; };
        } else if (config.schedule == ScheduleKind::greedy) {
            schedule = [&, round](std::size_t i, int epoch) {
                Rng rng = derive_stream(seed, i, 0x9e0000ULL + static_cast<std::uint64_t>(epoch) * 4096 +
                                                     static_cast<std::uint64_t>(round));
                std::vector<int> q = prefix[i];
                q.push_back(random_unmeasured(rng, n, q));
                return q;
            };
        } else {
            schedule = [&, round](std::size_t i, int epoch) {
                Rng rng = derive_stream(seed, i, 0x7a0000ULL + static_cast<std::uint64_t>(epoch) * 4096 +
                                                     static_cast<std::uint64_t>(round));
                std::vector<int> all(static_cast<std::size_t>(n));
                std::iota(all.begin(), all.end(), 0);
                for (int k = 0; k < round; ++k) {
                    std::uniform_int_distribution<int> pick(k, n - 1);
                    std::swap(all[static_cast<std::size_t>(k)], all[static_cast<std::size_t>(pick(rng))]);
                }
                return std::vector<int>(all.begin(), all.begin() + round);
            };
        }
        auto [f, g] = fresh_pair(config.architecture, n, round, norm, config.train);
        TrainConfig tc = config.train;
        tc.seed = mix64(config.train.seed + static_cast<std::uint64_t>(round));
        TrainResult result = train(dataset, schedule, std::move(f), std::move(g), tc);
        if (on_round)
            on_round(round, result);
        set.mean.push_back(std::move(result.mean));
        set.variance.push_back(std::move(result.variance));

        if (round >= 1 && round < config.rounds && config.schedule == ScheduleKind::greedy) {
            const PredictorHandle stage = neural_handle(std::make_shared<const PredictorModel>(set.mean[static_cast<std::size_t>(round)]),
                                                        std::make_shared<const PredictorModel>(set.variance[static_cast<std::size_t>(round)]));
            const auto& mask_model = set.mean[static_cast<std::size_t>(round - 1)];
            for (std::size_t i = 0; i < m; ++i) {
                const auto& smp = dataset.samples[i];
                Eigen::VectorXd mu = predict_mean(mask_model, gather(smp.rsrp_dbm, prefix[i]), prefix[i], smp.location);
                for (int q : prefix[i])
                    mu(q) = smp.rsrp_dbm(q);
                prefix[i].push_back(greedy_round(mu, prefix[i], stage, config.objective, smp.location));
            }
        }
    }
    return set;
}

TrainResult train_fixed_set(const Dataset& dataset, std::span<const int> beams, const PredictorConfig& architecture,
                            const TrainConfig& config)
{
    const std::vector<int> q(beams.begin(), beams.end());
    BeamPartition::from_measured(dataset.n(), q);
    auto [f, g] = fresh_pair(architecture, dataset.n(), static_cast<int>(q.size()), fit_normalization(dataset), config);
    return train(dataset, [q](std::size_t, int) { return q; }, std::move(f), std::move(g), config);
}

PredictorHandle neural_handle(std::shared_ptr<const PredictorModel> f, std::shared_ptr<const PredictorModel> g)
{
    if (!f || !g)
        throw std::invalid_argument("neural_handle: missing model");
    check_pair(*f, *g);
    PredictorHandle h;
    h.mean = [f](const Eigen::VectorXd& x_q, std::span<const int> q, const Eigen::Vector2d& s) {
        Eigen::VectorXd mu = predict_mean(*f, x_q, q, s);
        for (std::size_t k = 0; k < q.size(); ++k)
            mu(q[k]) = x_q(static_cast<Eigen::Index>(k));
        return mu;
    };
    h.variance = [g](std::span<const int> q, const Eigen::Vector2d& s) { return predict_variance(*g, q, s); };
    return h;
}

PredictorStages make_neural_stages(const PredictorSet& set)
{
    if (set.mean.size() != set.variance.size() || set.mean.empty())
        throw std::invalid_argument("make_neural_stages: incomplete predictor set");
    PredictorStages stages;
    for (std::size_t k = 0; k < set.mean.size(); ++k)
        stages.push_back(neural_handle(std::make_shared<const PredictorModel>(set.mean[k]),
                                       std::make_shared<const PredictorModel>(set.variance[k])));
    return stages;
}

void write_predictor_set(const PredictorSet& set, const std::filesystem::path& manifest_path)
{
    if (set.mean.size() != set.variance.size() || set.mean.empty())
        throw std::invalid_argument("write_predictor_set: incomplete predictor set");
    const auto dir = manifest_path.parent_path();
    json stages = json::array();
    for (std::size_t k = 0; k < set.mean.size(); ++k) {
        const std::string fm = "mean_" + std::to_string(k) + ".json";
        const std::string fv = "variance_" + std::to_string(k) + ".json";
        write_predictor(set.mean[k], dir / fm);
        write_predictor(set.variance[k], dir / fv);
        stages.push_back({{"round", k}, {"mean", fm}, {"variance", fv}});
    }
    write_json_file(manifest_path, json{{"format", kSetFormat}, {"version", 1}, {"stages", stages}});
}

PredictorSet read_predictor_set(const std::filesystem::path& manifest_path)
{
    const json j = read_json_file(manifest_path);
    if (j.value("format", std::string()) != kSetFormat)
        throw DataError(manifest_path.string() + " is not a predictor set");
    const auto dir = manifest_path.parent_path();
    PredictorSet set;
    try {
        for (const auto& st : j.at("stages")) {
            set.mean.push_back(read_predictor(dir / st.at("mean").get<std::string>()));
            set.variance.push_back(read_predictor(dir / st.at("variance").get<std::string>()));
        }
    } catch (const json::exception& e) {
        throw DataError("incomplete predictor set " + manifest_path.string() + ": " + e.what());
    }
    if (set.mean.empty())
        throw DataError("predictor set " + manifest_path.string() + " lists no stages");
    return set;
}

}  // namespace beamprobe
