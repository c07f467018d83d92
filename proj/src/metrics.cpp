// SPDX-License-Identifier: Apache-2.0

#include "beamprobe/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "beamprobe/random.hpp"

namespace beamprobe {

void EarParams::validate() const
{
    if (!(t_symbol_s > 0.0) || !(t_slot_s > 0.0) || !(bandwidth_hz > 0.0))
        throw std::invalid_argument("EarParams: durations and bandwidth must be positive");
}

double overhead_factor(int l_probes, const EarParams& params)
{
    if (l_probes < 0)
        throw std::invalid_argument("overhead_factor: negative probe count");
    return std::max(0.0, 1.0 - static_cast<double>(l_probes) * params.t_symbol_s / params.t_slot_s);
}

double ear(double snr_linear, int l_probes, const EarParams& params)
{
    if (snr_linear < 0.0)
        throw std::invalid_argument("ear: negative SNR");
    return std::max(0.0, overhead_factor(l_probes, params) * std::log2(1.0 + snr_linear));
}

int baseline_overheads(int users, BaselineScheme scheme, int l)
{
    if (users < 1)
        throw std::invalid_argument("baseline_overheads: at least one user");
    switch (scheme) {
    case BaselineScheme::two_level:
        return 24 * users;
    case BaselineScheme::binary:
        return 14 * users;
    case BaselineScheme::prediction:
        return l * users;
    }
    return 0;
}

bool in_top_k(const Eigen::VectorXd& x, const Eigen::VectorXd& estimate, int k)
{
    std::vector<int> order(static_cast<std::size_t>(estimate.size()));
    std::iota(order.begin(), order.end(), 0);
    const auto kk = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk), order.end(),
                      [&](int a, int b) { return estimate(a) > estimate(b) || (estimate(a) == estimate(b) && a < b); });
    const double top = x.maxCoeff();
    for (std::size_t r = 0; r < kk; ++r)
        if (x(order[r]) == top)
            return true;
    return false;
}

std::vector<SampleOutcome> sample_outcomes(std::span<const SamplePrediction> predictions, const Dataset& dataset)
{
    if (predictions.size() != dataset.size())
        throw std::invalid_argument("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                                    std::to_string(dataset.size()) + " samples");
    std::vector<SampleOutcome> out;
    out.reserve(predictions.size());
    for (std::size_t s = 0; s < predictions.size(); ++s) {
        const auto& x = dataset.samples[s].rsrp_dbm;
        const auto& p = predictions[s];
        if (p.estimate.size() != x.size())
            throw std::invalid_argument("evaluate: prediction length differs from the beam count");
        if (p.chosen < 0 || p.chosen >= x.size())
            throw std::out_of_range("evaluate: chosen beam outside the codebook");
        SampleOutcome o;
        o.sample_id = s;
        x.maxCoeff(&o.true_best);
        o.chosen = p.chosen;
        o.rsrp_true_best = x(o.true_best);
        o.rsrp_chosen = x(p.chosen);
        o.top1 = in_top_k(x, p.estimate, 1);
        o.top3 = in_top_k(x, p.estimate, 3);
        o.top5 = in_top_k(x, p.estimate, 5);
        out.push_back(o);
    }
    return out;
}

MetricsReport evaluate(std::span<const SamplePrediction> predictions, const Dataset& dataset, int probes_used,
                       int interactions, const EarParams& ear_params)
{
    const auto outcomes = sample_outcomes(predictions, dataset);
    MetricsReport r;
    r.probes_used = probes_used;
    r.interactions = interactions;
    r.samples = outcomes.size();
    if (outcomes.empty())
        return r;
    const double noise_dbm = ear_params.noise_power_dbm();
    double mse = 0.0;
    double diff = 0.0;
    double rate = 0.0;
    double oracle = 0.0;
    double hits[3] = {0.0, 0.0, 0.0};
    for (std::size_t s = 0; s < outcomes.size(); ++s) {
        const auto& x = dataset.samples[s].rsrp_dbm;
        mse += (x - predictions[s].estimate).squaredNorm() / static_cast<double>(x.size());
        diff += std::abs(outcomes[s].rsrp_true_best - outcomes[s].rsrp_chosen);
        rate += ear(from_dbm(outcomes[s].rsrp_chosen - noise_dbm), probes_used, ear_params);
        oracle += std::log2(1.0 + from_dbm(outcomes[s].rsrp_true_best - noise_dbm));
        hits[0] += outcomes[s].top1;
        hits[1] += outcomes[s].top3;
        hits[2] += outcomes[s].top5;
    }
    const double m = static_cast<double>(outcomes.size());
    r.mse_db2 = mse / m;
    r.rsrp_diff_db = diff / m;
    r.ear_bps_hz = rate / m;
    r.oracle_rate_bps_hz = oracle / m;
    r.top_k = {{1, hits[0] / m}, {3, hits[1] / m}, {5, hits[2] / m}};
    return r;
}

std::vector<int> uniform_probing_beams(const ArrayGeometry& geom, int l)
{
    geom.validate();
    const int n = geom.n();
    if (l < 1 || l > n)
        throw std::invalid_argument("uniform_probing_beams: l must lie in [1, n]");
    int best_a = -1;
    double best_score = std::numeric_limits<double>::infinity();
    for (int a = l; a >= 1; --a) {
        if (l % a != 0)
            continue;
        const int b = l / a;
        if (a > geom.n_phi || b > geom.n_theta)
            continue;
        const double score = std::abs(std::log((static_cast<double>(geom.n_phi) / a) /
                                               (static_cast<double>(geom.n_theta) / b)));
        if (score < best_score - 1e-12) {
            best_score = score;
            best_a = a;
        }
    }
    std::vector<int> beams;
    if (best_a < 0) {
        // no a x b factorization fits the grid: spread over the flat index
        for (int k = 0; k < l; ++k)
            beams.push_back(static_cast<int>((static_cast<long>(2 * k + 1) * n) / (2L * l)));
        return beams;
    }
    const int b = l / best_a;
    for (int i = 0; i < best_a; ++i) {
        const int phi = static_cast<int>((static_cast<long>(2 * i + 1) * geom.n_phi) / (2L * best_a));
        for (int j = 0; j < b; ++j) {
            const int theta = static_cast<int>((static_cast<long>(2 * j + 1) * geom.n_theta) / (2L * b));
            beams.push_back(phi * geom.n_theta + theta);
        }
    }
    return beams;
}

BootstrapInterval bootstrap_mean(std::span<const double> values, int resamples, std::uint64_t seed)
{
    if (values.empty() || resamples < 2)
        throw std::invalid_argument("bootstrap_mean: need values and at least two resamples");
    BootstrapInterval out;
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    Rng rng = derive_stream(seed, 0, 0xb007);
    std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
    std::vector<double> means(static_cast<std::size_t>(resamples));
    for (auto& m : means) {
        double acc = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k)
            acc += values[pick(rng)];
        m = acc / static_cast<double>(values.size());
    }
    std::sort(means.begin(), means.end());
    auto quantile = [&](double p) {
        const double pos = p * static_cast<double>(means.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, means.size() - 1);
        return means[lo] + (pos - static_cast<double>(lo)) * (means[hi] - means[lo]);
    };
    out.half_width = 0.5 * (quantile(0.975) - quantile(0.025));
    return out;
}

}  // namespace beamprobe
