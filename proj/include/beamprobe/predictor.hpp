// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMPROBE_PREDICTOR_HPP
#define BEAMPROBE_PREDICTOR_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace beamprobe {

enum class PredictorKind { mean, variance };

struct PredictorConfig
{
    int n = 128;
    int embed_channels = 16;
    int blocks = 2;
    int heads = 1;
    int key_dim = 16;
    int expansion = 2;
    PredictorKind kind = PredictorKind::mean;
    int round_index = 0;
    double variance_floor = 1e-3;  // dBm^2, added to every predicted variance

    int width() const { return embed_channels + 2; }
    void validate() const;
    bool operator==(const PredictorConfig&) const = default;
};

// Standardization of inputs; outputs are mapped back to dBm (and dBm^2).
struct Normalization
{
    double x_shift = 0.0;
    double x_scale = 1.0;
    Eigen::Vector2d s_shift = Eigen::Vector2d::Zero();
    Eigen::Vector2d s_scale = Eigen::Vector2d::Ones();

    bool operator==(const Normalization&) const = default;
};

using ParameterMap = std::map<std::string, Eigen::MatrixXd>;

struct PredictorModel
{
    PredictorConfig config;
    Normalization norm;
    ParameterMap params;

    const Eigen::MatrixXd& at(const std::string& name) const;
    void check_finite() const;
    bool operator==(const PredictorModel&) const = default;
};

// Shapes of every parameter tensor for a config.
std::vector<std::pair<std::string, std::pair<int, int>>> parameter_shapes(const PredictorConfig& config);

PredictorModel initialize_predictor(const PredictorConfig& config, const Normalization& norm, std::uint64_t seed);
ParameterMap zeros_like(const ParameterMap& params);

// n x 2 block: row i = [x_i, 1] for i in Q, else [0, 0]; the first column is
// zero for the variance kind. x_q is already standardized.
Eigen::MatrixXd measurement_block(const Eigen::VectorXd& x_q, std::span<const int> q, int n, PredictorKind kind);

// n x (embed_channels + 2) input of the attention blocks: rectified width-1
// convolution of the measurement block, projected location, class bias.
Eigen::MatrixXd embed_inputs(const PredictorModel& model, const Eigen::VectorXd& x_q, std::span<const int> q,
                             const Eigen::Vector2d& s);

// Columns of the input are tokens: V softmax(K^T Q / sqrt(n_d)), each column
// of the softmax summing to one.
Eigen::MatrixXd attention(const Eigen::MatrixXd& a, const Eigen::MatrixXd& w_q, const Eigen::MatrixXd& w_k,
                          const Eigen::MatrixXd& w_v, int n_d);

// Column-wise softmax.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits);

struct ForwardCache;

struct ForwardResult
{
    Eigen::VectorXd raw;  // output head per beam, standardized units
    std::shared_ptr<ForwardCache> cache;
};

// x_q in dBm, s in BS-relative metres.
ForwardResult forward(const PredictorModel& model, const Eigen::VectorXd& x_q, std::span<const int> q,
                      const Eigen::Vector2d& s);

// Accumulates d(loss)/d(params) into grad given d(loss)/d(raw).
void backward(const PredictorModel& model, const ForwardCache& cache, const Eigen::VectorXd& d_raw,
              ParameterMap& grad);

// mu = raw * x_scale + x_shift
Eigen::VectorXd mean_from_raw(const PredictorModel& model, const Eigen::VectorXd& raw);
// lambda = x_scale^2 softplus(raw) + floor
Eigen::VectorXd variance_from_raw(const PredictorModel& model, const Eigen::VectorXd& raw);

Eigen::VectorXd predict_mean(const PredictorModel& model, const Eigen::VectorXd& x_q, std::span<const int> q,
                             const Eigen::Vector2d& s);
Eigen::VectorXd predict_variance(const PredictorModel& model, std::span<const int> q, const Eigen::Vector2d& s);

double softplus(double y);

// JSON manifest + row-major float64 blob with the same stem (.bin).
void write_predictor(const PredictorModel& model, const std::filesystem::path& manifest_path);
PredictorModel read_predictor(const std::filesystem::path& manifest_path);

}  // namespace beamprobe

#endif  // BEAMPROBE_PREDICTOR_HPP
