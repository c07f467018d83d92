// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMPROBE_METRICS_HPP
#define BEAMPROBE_METRICS_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "beamprobe/beamspace.hpp"
#include "beamprobe/dataset.hpp"

namespace beamprobe {

struct EarParams
{
    double t_symbol_s = 8.92e-6;
    double t_slot_s = 0.02;
    double noise_psd_dbm_hz = -174.0;
    double bandwidth_hz = 100e6;

    double noise_power_dbm() const { return noise_psd_dbm_hz + 10.0 * std::log10(bandwidth_hz); }
    void validate() const;
};

// 1 - l T_s / T_c, clamped at 0.
double overhead_factor(int l_probes, const EarParams& params);
// (1 - l T_s / T_c) log2(1 + snr), clamped at 0.
double ear(double snr_linear, int l_probes, const EarParams& params);

enum class BaselineScheme { two_level, binary, prediction };

// Probe symbols per slot for `users` users; `l` is used by the prediction scheme.
int baseline_overheads(int users, BaselineScheme scheme, int l = 8);

struct SamplePrediction
{
    Eigen::VectorXd estimate;  // predicted beamspace RSRP, dBm
    int chosen = 0;
};

struct SampleOutcome
{
    std::size_t sample_id = 0;
    int true_best = 0;
    int chosen = 0;
    double rsrp_true_best = 0.0;
    double rsrp_chosen = 0.0;
    bool top1 = false;
    bool top3 = false;
    bool top5 = false;
};

struct MetricsReport
{
    double mse_db2 = 0.0;
    std::map<int, double> top_k;  // K in {1, 3, 5}
    double rsrp_diff_db = 0.0;
    double ear_bps_hz = 0.0;
    double oracle_rate_bps_hz = 0.0;  // log2(1 + snr) of the true best beam, no overhead
    int probes_used = 0;
    int interactions = 0;
    std::size_t samples = 0;
};

// True when some beam attaining the maximum of x is among the k largest
// entries of estimate (ties in the ranking go to the smaller index).
bool in_top_k(const Eigen::VectorXd& x, const Eigen::VectorXd& estimate, int k);

std::vector<SampleOutcome> sample_outcomes(std::span<const SamplePrediction> predictions, const Dataset& dataset);

MetricsReport evaluate(std::span<const SamplePrediction> predictions, const Dataset& dataset, int probes_used,
                       int interactions, const EarParams& ear_params = {});

// L beams spread over the n_phi x n_theta beam grid: an a x b sub-grid with
// a b = L whose cells are closest to square, one beam at each cell center.
std::vector<int> uniform_probing_beams(const ArrayGeometry& geom, int l);

struct BootstrapInterval
{
    double mean = 0.0;
    double half_width = 0.0;  // half of the central 95% percentile interval
};

// Percentile bootstrap of the mean of `values` (e.g. paired differences).
BootstrapInterval bootstrap_mean(std::span<const double> values, int resamples, std::uint64_t seed);

}  // namespace beamprobe

#endif  // BEAMPROBE_METRICS_HPP
