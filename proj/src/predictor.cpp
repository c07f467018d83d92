// SPDX-License-Identifier: Apache-2.0

#include "beamprobe/predictor.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "beamprobe/errors.hpp"
#include "beamprobe/json_io.hpp"
#include "beamprobe/random.hpp"

namespace beamprobe {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr const char* kPredictorFormat = "beamprobe.predictor";

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string block_name(int b, const char* leaf)
{
    return "block" + std::to_string(b) + "." + leaf;
}

struct LayerNormCache
{
    MatrixXd xhat;
    Eigen::RowVectorXd rstd;
};

// Normalizes every column (token) over its features.
MatrixXd layer_norm(const MatrixXd& x, const VectorXd& gain, const VectorXd& bias, LayerNormCache& cache)
{
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const MatrixXd centered = x.rowwise() - mean;
    const Eigen::RowVectorXd var = centered.array().square().colwise().mean();
    cache.rstd = (var.array() + kLayerNormEps).rsqrt();
    cache.xhat = centered.array().rowwise() * cache.rstd.array();
    return (cache.xhat.array().colwise() * gain.array()).colwise() + bias.array();
}

MatrixXd layer_norm_backward(const MatrixXd& dy, const VectorXd& gain, const LayerNormCache& cache, MatrixXd& d_gain,
                             MatrixXd& d_bias)
{
    d_gain += (dy.array() * cache.xhat.array()).rowwise().sum().matrix();
    d_bias += dy.rowwise().sum();
    const MatrixXd dxhat = dy.array().colwise() * gain.array();
    const Eigen::RowVectorXd m1 = dxhat.colwise().mean();
    const Eigen::RowVectorXd m2 = (dxhat.array() * cache.xhat.array()).colwise().mean();
    MatrixXd dx = dxhat.rowwise() - m1;
    dx.array() -= cache.xhat.array().rowwise() * m2.array();
    return dx.array().rowwise() * cache.rstd.array();
}

MatrixXd relu(const MatrixXd& x)
{
    return x.cwiseMax(0.0);
}

MatrixXd relu_mask(const MatrixXd& pre)
{
    return (pre.array() > 0.0).cast<double>();
}

}  // namespace

struct ForwardCache
{
    struct Block
    {
        LayerNormCache ln1;
        MatrixXd y1;
        MatrixXd q;
        MatrixXd k;
        std::vector<MatrixXd> v;
        std::vector<MatrixXd> p;
        LayerNormCache ln2;
        MatrixXd y2;
        MatrixXd h_pre;
    };

    MatrixXd e;      // 2 x n measurement block
    MatrixXd h_pre;  // C x n
    Eigen::Vector2d s_norm;
    std::vector<Block> blocks;
    MatrixXd x_final;  // D x n
};

void PredictorConfig::validate() const
{
    if (n < 1 || embed_channels < 1 || blocks < 0 || heads < 1 || key_dim < 1 || expansion < 1)
        throw std::invalid_argument("PredictorConfig: dimensions must be positive");
    if (key_dim % heads != 0)
        throw std::invalid_argument("PredictorConfig: heads must divide key_dim");
    if (!(variance_floor > 0.0))
        throw std::invalid_argument("PredictorConfig: variance_floor must be positive");
    if (round_index < 0)
        throw std::invalid_argument("PredictorConfig: negative round index");
}

const MatrixXd& PredictorModel::at(const std::string& name) const
{
    const auto it = params.find(name);
    if (it == params.end())
        throw std::out_of_range("PredictorModel: missing parameter " + name);
    return it->second;
}

void PredictorModel::check_finite() const
{
    for (const auto& [name, m] : params)
        if (!m.allFinite())
            throw std::domain_error("PredictorModel: non-finite values in parameter " + name);
}

std::vector<std::pair<std::string, std::pair<int, int>>> parameter_shapes(const PredictorConfig& c)
{
    const int d = c.width();
    const int ch = c.embed_channels;
    std::vector<std::pair<std::string, std::pair<int, int>>> shapes{
        {"embed.w", {ch, 2}}, {"embed.b", {ch, 1}}, {"loc.w", {c.n, 2}}, {"loc.b", {c.n, 1}}, {"cls", {c.n, 1}}};
    for (int b = 0; b < c.blocks; ++b) {
        shapes.push_back({block_name(b, "ln1.g"), {d, 1}});
        shapes.push_back({block_name(b, "ln1.b"), {d, 1}});
        shapes.push_back({block_name(b, "wq"), {c.key_dim, d}});
        shapes.push_back({block_name(b, "wk"), {c.key_dim, d}});
        shapes.push_back({block_name(b, "wv"), {c.heads * d, d}});
        shapes.push_back({block_name(b, "ln2.g"), {d, 1}});
        shapes.push_back({block_name(b, "ln2.b"), {d, 1}});
        shapes.push_back({block_name(b, "efb.w1"), {c.expansion * d, d}});
        shapes.push_back({block_name(b, "efb.b1"), {c.expansion * d, 1}});
        shapes.push_back({block_name(b, "efb.w2"), {d, c.expansion * d}});
        shapes.push_back({block_name(b, "efb.b2"), {d, 1}});
    }
    shapes.push_back({"head.w", {d, 1}});
    shapes.push_back({"head.b", {1, 1}});
    return shapes;
}

PredictorModel initialize_predictor(const PredictorConfig& config, const Normalization& norm, std::uint64_t seed)
{
    config.validate();
    PredictorModel m;
    m.config = config;
    m.norm = norm;
    Rng rng = derive_stream(seed, static_cast<std::uint64_t>(config.round_index),
                            config.kind == PredictorKind::mean ? 0xf0 : 0x90);
    auto gaussian = [&](int rows, int cols, double std) {
        MatrixXd w(rows, cols);
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i)
                w(i, j) = std * standard_normal(rng);
        return w;
    };
    for (const auto& [name, shape] : parameter_shapes(config)) {
        const auto [rows, cols] = shape;
        MatrixXd w;
        const bool is_gain = name.ends_with(".g");
        const bool is_bias = name.ends_with(".b") || name.ends_with(".b1") || name.ends_with(".b2");
        if (is_gain)
            w = MatrixXd::Ones(rows, cols);
        else if (name == "embed.b")
            w = MatrixXd::Constant(rows, cols, 0.1);
        else if (is_bias)
            w = MatrixXd::Zero(rows, cols);
        else if (name == "cls")
            w = gaussian(rows, cols, 0.1);
        else if (name == "head.w")
            w = gaussian(rows, cols, 0.1 / std::sqrt(static_cast<double>(rows)));
        else
            w = gaussian(rows, cols, 1.0 / std::sqrt(static_cast<double>(cols)));
        m.params.emplace(name, std::move(w));
    }
    if (config.kind == PredictorKind::variance)
        m.params["head.b"](0, 0) = std::log(std::expm1(1.0));  // softplus^-1(1)
    return m;
}

ParameterMap zeros_like(const ParameterMap& params)
{
    ParameterMap out;
    for (const auto& [name, m] : params)
        out.emplace(name, MatrixXd::Zero(m.rows(), m.cols()));
    return out;
}

MatrixXd measurement_block(const VectorXd& x_q, std::span<const int> q, int n, PredictorKind kind)
{
    if (static_cast<Eigen::Index>(q.size()) != x_q.size() && kind == PredictorKind::mean)
        throw std::invalid_argument("measurement_block: x_q length does not match |Q|");
    MatrixXd e = MatrixXd::Zero(n, 2);
    for (std::size_t k = 0; k < q.size(); ++k) {
        const int i = q[k];
        if (i < 0 || i >= n)
            throw std::out_of_range("measurement_block: beam index " + std::to_string(i) + " outside [0, " +
                                    std::to_string(n) + ")");
        if (kind == PredictorKind::mean)
            e(i, 0) = x_q(static_cast<Eigen::Index>(k));
        e(i, 1) = 1.0;
    }
    return e;
}

MatrixXd softmax_columns(const MatrixXd& logits)
{
    MatrixXd p = logits.rowwise() - logits.colwise().maxCoeff();
    p = p.array().exp();
    return p.array().rowwise() / p.colwise().sum().array();
}

MatrixXd attention(const MatrixXd& a, const MatrixXd& w_q, const MatrixXd& w_k, const MatrixXd& w_v, int n_d)
{
    if (w_q.cols() != a.rows() || w_k.cols() != a.rows() || w_v.cols() != a.rows() || w_q.rows() != w_k.rows())
        throw std::invalid_argument("attention: weight shapes do not match the input");
    if (n_d < 1)
        throw std::invalid_argument("attention: n_d must be positive");
    const MatrixXd q = w_q * a;
    const MatrixXd k = w_k * a;
    const MatrixXd v = w_v * a;
    return v * softmax_columns(k.transpose() * q / std::sqrt(static_cast<double>(n_d)));
}

namespace {

VectorXd standardize(const Normalization& norm, const VectorXd& x_q)
{
    return (x_q.array() - norm.x_shift) / norm.x_scale;
}

Eigen::Vector2d standardize(const Normalization& norm, const Eigen::Vector2d& s)
{
    return (s - norm.s_shift).cwiseQuotient(norm.s_scale);
}

MatrixXd embed_tokens(const PredictorModel& model, const MatrixXd& e, const Eigen::Vector2d& s_norm, MatrixXd& h_pre)
{
    const auto& c = model.config;
    h_pre = model.at("embed.w") * e;
    h_pre.colwise() += model.at("embed.b").col(0);
    MatrixXd x(c.width(), c.n);
    x.topRows(c.embed_channels) = relu(h_pre);
    x.row(c.embed_channels) = (model.at("loc.w") * s_norm + model.at("loc.b").col(0)).transpose();
    x.row(c.embed_channels + 1) = model.at("cls").col(0).transpose();
    return x;
}

}  // namespace

MatrixXd embed_inputs(const PredictorModel& model, const VectorXd& x_q, std::span<const int> q,
                      const Eigen::Vector2d& s)
{
    const auto& c = model.config;
    const VectorXd xn = c.kind == PredictorKind::mean ? standardize(model.norm, x_q) : VectorXd::Zero(x_q.size());
    MatrixXd h_pre;
    const MatrixXd e = measurement_block(xn, q, c.n, c.kind).transpose();
    return embed_tokens(model, e, standardize(model.norm, s), h_pre).transpose();
}

ForwardResult forward(const PredictorModel& model, const VectorXd& x_q, std::span<const int> q,
                      const Eigen::Vector2d& s)
{
    const auto& c = model.config;
    model.check_finite();
    auto cache = std::make_shared<ForwardCache>();
    const VectorXd xn = c.kind == PredictorKind::mean ? standardize(model.norm, x_q) : VectorXd::Zero(q.size());
    cache->e = measurement_block(xn, q, c.n, c.kind).transpose();
    cache->s_norm = standardize(model.norm, s);
    MatrixXd x = embed_tokens(model, cache->e, cache->s_norm, cache->h_pre);

    const int d = c.width();
    const int dh = c.key_dim / c.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    cache->blocks.resize(static_cast<std::size_t>(c.blocks));
    for (int b = 0; b < c.blocks; ++b) {
        auto& bc = cache->blocks[static_cast<std::size_t>(b)];
        bc.y1 = layer_norm(x, model.at(block_name(b, "ln1.g")), model.at(block_name(b, "ln1.b")), bc.ln1);
        bc.q = model.at(block_name(b, "wq")) * bc.y1;
        bc.k = model.at(block_name(b, "wk")) * bc.y1;
        const MatrixXd& wv = model.at(block_name(b, "wv"));
        bc.v.resize(static_cast<std::size_t>(c.heads));
        bc.p.resize(static_cast<std::size_t>(c.heads));
        for (int h = 0; h < c.heads; ++h) {
            auto& v = bc.v[static_cast<std::size_t>(h)];
            auto& p = bc.p[static_cast<std::size_t>(h)];
            v = wv.middleRows(h * d, d) * bc.y1;
            p = softmax_columns(bc.k.middleRows(h * dh, dh).transpose() * bc.q.middleRows(h * dh, dh) * scale);
            x.noalias() += v * p;
        }
        bc.y2 = layer_norm(x, model.at(block_name(b, "ln2.g")), model.at(block_name(b, "ln2.b")), bc.ln2);
        bc.h_pre = model.at(block_name(b, "efb.w1")) * bc.y2;
        bc.h_pre.colwise() += model.at(block_name(b, "efb.b1")).col(0);
        x.noalias() += model.at(block_name(b, "efb.w2")) * relu(bc.h_pre);
        x.colwise() += model.at(block_name(b, "efb.b2")).col(0);
    }
    cache->x_final = x;
    ForwardResult r;
    r.raw = (model.at("head.w").transpose() * x).transpose();
    r.raw.array() += model.at("head.b")(0, 0);
    r.cache = std::move(cache);
    return r;
}

void backward(const PredictorModel& model, const ForwardCache& cache, const VectorXd& d_raw, ParameterMap& grad)
{
    const auto& c = model.config;
    const int d = c.width();
    const int dh = c.key_dim / c.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    grad.at("head.w") += cache.x_final * d_raw;
    grad.at("head.b")(0, 0) += d_raw.sum();
    MatrixXd dx = model.at("head.w") * d_raw.transpose();

    for (int b = c.blocks - 1; b >= 0; --b) {
        const auto& bc = cache.blocks[static_cast<std::size_t>(b)];
        // feed-forward expansion
        const MatrixXd r = relu(bc.h_pre);
        grad.at(block_name(b, "efb.w2")) += dx * r.transpose();
        grad.at(block_name(b, "efb.b2")) += dx.rowwise().sum();
        const MatrixXd dh_pre = (model.at(block_name(b, "efb.w2")).transpose() * dx).cwiseProduct(relu_mask(bc.h_pre));
        grad.at(block_name(b, "efb.w1")) += dh_pre * bc.y2.transpose();
        grad.at(block_name(b, "efb.b1")) += dh_pre.rowwise().sum();
        const MatrixXd dy2 = model.at(block_name(b, "efb.w1")).transpose() * dh_pre;
        dx += layer_norm_backward(dy2, model.at(block_name(b, "ln2.g")), bc.ln2, grad.at(block_name(b, "ln2.g")),
                                  grad.at(block_name(b, "ln2.b")));

        // attention
        const MatrixXd& wv = model.at(block_name(b, "wv"));
        MatrixXd dq(c.key_dim, c.n);
        MatrixXd dk(c.key_dim, c.n);
        MatrixXd dy1 = MatrixXd::Zero(d, c.n);
        auto& gwv = grad.at(block_name(b, "wv"));
        for (int h = 0; h < c.heads; ++h) {
            const auto& v = bc.v[static_cast<std::size_t>(h)];
            const auto& p = bc.p[static_cast<std::size_t>(h)];
            const MatrixXd dv = dx * p.transpose();
            const MatrixXd dp = v.transpose() * dx;
            const Eigen::RowVectorXd inner = (p.array() * dp.array()).colwise().sum();
            const MatrixXd ds = p.array() * (dp.rowwise() - inner).array();
            dq.middleRows(h * dh, dh) = bc.k.middleRows(h * dh, dh) * ds * scale;
            dk.middleRows(h * dh, dh) = bc.q.middleRows(h * dh, dh) * ds.transpose() * scale;
            gwv.middleRows(h * d, d) += dv * bc.y1.transpose();
            dy1.noalias() += wv.middleRows(h * d, d).transpose() * dv;
        }
        grad.at(block_name(b, "wq")) += dq * bc.y1.transpose();
        grad.at(block_name(b, "wk")) += dk * bc.y1.transpose();
        dy1.noalias() += model.at(block_name(b, "wq")).transpose() * dq;
        dy1.noalias() += model.at(block_name(b, "wk")).transpose() * dk;
        dx += layer_norm_backward(dy1, model.at(block_name(b, "ln1.g")), bc.ln1, grad.at(block_name(b, "ln1.g")),
                                  grad.at(block_name(b, "ln1.b")));
    }

    // embedding
    const VectorXd d_loc = dx.row(c.embed_channels).transpose();
    grad.at("loc.w") += d_loc * cache.s_norm.transpose();
    grad.at("loc.b") += d_loc;
    grad.at("cls") += dx.row(c.embed_channels + 1).transpose();
    const MatrixXd d_hpre = dx.topRows(c.embed_channels).cwiseProduct(relu_mask(cache.h_pre));
    grad.at("embed.w") += d_hpre * cache.e.transpose();
    grad.at("embed.b") += d_hpre.rowwise().sum();
}

double softplus(double y)
{
    return y > 30.0 ? y : std::log1p(std::exp(y));
}

VectorXd mean_from_raw(const PredictorModel& model, const VectorXd& raw)
{
    return (raw.array() * model.norm.x_scale + model.norm.x_shift).matrix();
}

VectorXd variance_from_raw(const PredictorModel& model, const VectorXd& raw)
{
    const double s2 = model.norm.x_scale * model.norm.x_scale;
    return raw.unaryExpr([&](double y) { return s2 * softplus(y) + model.config.variance_floor; });
}

VectorXd predict_mean(const PredictorModel& model, const VectorXd& x_q, std::span<const int> q,
                      const Eigen::Vector2d& s)
{
    if (model.config.kind != PredictorKind::mean)
        throw std::invalid_argument("predict_mean: model is a variance network");
    return mean_from_raw(model, forward(model, x_q, q, s).raw);
}

VectorXd predict_variance(const PredictorModel& model, std::span<const int> q, const Eigen::Vector2d& s)
{
    if (model.config.kind != PredictorKind::variance)
        throw std::invalid_argument("predict_variance: model is a mean network");
    return variance_from_raw(model, forward(model, VectorXd::Zero(static_cast<Eigen::Index>(q.size())), q, s).raw);
}

void write_predictor(const PredictorModel& model, const std::filesystem::path& manifest_path)
{
    auto blob_path = manifest_path;
    blob_path.replace_extension(".bin");
    const auto& c = model.config;
    json tensors = json::array();
    std::size_t offset = 0;
    for (const auto& [name, shape] : parameter_shapes(c)) {
        const auto& m = model.at(name);
        if (m.rows() != shape.first || m.cols() != shape.second)
            throw std::invalid_argument("write_predictor: parameter " + name + " has the wrong shape");
        tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", offset}});
        offset += sizeof(double) * static_cast<std::size_t>(m.size());
    }
    json manifest{
        {"format", kPredictorFormat},
        {"version", 1},
        {"config",
         {{"n", c.n},
          {"embed_channels", c.embed_channels},
          {"blocks", c.blocks},
          {"heads", c.heads},
          {"key_dim", c.key_dim},
          {"expansion", c.expansion},
          {"kind", c.kind == PredictorKind::mean ? "mean" : "variance"},
          {"round_index", c.round_index},
          {"variance_floor", c.variance_floor}}},
        {"normalization",
         {{"x_shift", model.norm.x_shift},
          {"x_scale", model.norm.x_scale},
          {"s_shift", vec2_to_json(model.norm.s_shift)},
          {"s_scale", vec2_to_json(model.norm.s_scale)}}},
        {"parameters", tensors},
        {"blob", blob_path.filename().string()}};
    write_json_file(manifest_path, manifest);

    std::ofstream out(blob_path, std::ios::binary);
    if (!out)
        throw DataError("cannot write " + blob_path.string());
    for (const auto& [name, shape] : parameter_shapes(c)) {
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = model.at(name);
        out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
    }
}

PredictorModel read_predictor(const std::filesystem::path& manifest_path)
{
    const json manifest = read_json_file(manifest_path);
    if (manifest.value("format", std::string()) != kPredictorFormat)
        throw DataError(manifest_path.string() + " is not a predictor manifest");
    try {
        PredictorModel m;
        const auto& jc = manifest.at("config");
        auto& c = m.config;
        c.n = jc.at("n").get<int>();
        c.embed_channels = jc.at("embed_channels").get<int>();
        c.blocks = jc.at("blocks").get<int>();
        c.heads = jc.at("heads").get<int>();
        c.key_dim = jc.at("key_dim").get<int>();
        c.expansion = jc.at("expansion").get<int>();
        const auto kind = jc.at("kind").get<std::string>();
        if (kind != "mean" && kind != "variance")
            throw DataError("unknown predictor kind '" + kind + "' in " + manifest_path.string());
        c.kind = kind == "mean" ? PredictorKind::mean : PredictorKind::variance;
        c.round_index = jc.at("round_index").get<int>();
        c.variance_floor = jc.at("variance_floor").get<double>();
        c.validate();
        const auto& jn = manifest.at("normalization");
        m.norm.x_shift = jn.at("x_shift").get<double>();
        m.norm.x_scale = jn.at("x_scale").get<double>();
        m.norm.s_shift = vec2_from_json(jn.at("s_shift"));
        m.norm.s_scale = vec2_from_json(jn.at("s_scale"));

        const auto blob_path = manifest_path.parent_path() / manifest.at("blob").get<std::string>();
        std::ifstream in(blob_path, std::ios::binary);
        if (!in)
            throw DataError("cannot open " + blob_path.string());
        std::map<std::string, std::pair<int, int>> expected;
        for (const auto& [name, shape] : parameter_shapes(c))
            expected.emplace(name, shape);
        for (const auto& t : manifest.at("parameters")) {
            const auto name = t.at("name").get<std::string>();
            const int rows = t.at("rows").get<int>();
            const int cols = t.at("cols").get<int>();
            const auto it = expected.find(name);
            if (it == expected.end() || it->second != std::make_pair(rows, cols))
                throw DataError("unexpected parameter " + name + " in " + manifest_path.string());
            Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
            in.seekg(t.at("offset").get<std::streamoff>());
            in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
            if (!in)
                throw DataError("truncated parameter blob " + blob_path.string());
            m.params.emplace(name, MatrixXd(rm));
        }
        if (m.params.size() != expected.size())
            throw DataError("parameter list incomplete in " + manifest_path.string());
        m.check_finite();
        return m;
    } catch (const json::exception& e) {
        throw DataError("incomplete predictor manifest " + manifest_path.string() + ": " + e.what());
    } catch (const std::domain_error& e) {
        throw DataError(manifest_path.string() + ": " + e.what());
    }
}

}  // namespace beamprobe
