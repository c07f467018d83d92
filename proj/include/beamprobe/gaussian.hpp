// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMPROBE_GAUSSIAN_HPP
#define BEAMPROBE_GAUSSIAN_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace beamprobe {

// Multivariate Gaussian over beamspace RSRP (dBm).
template <typename Scalar>
struct GaussianBeliefT
{
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    Vector mu;
    Matrix sigma;

    Eigen::Index dim() const { return mu.size(); }

    void validate() const
    {
        if (sigma.rows() != mu.size() || sigma.cols() != mu.size())
            throw std::invalid_argument("GaussianBelief: mean/covariance dimension mismatch");
        const Scalar scale = std::max(Scalar(1), sigma.cwiseAbs().maxCoeff());
        if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-9) * scale)
            throw std::invalid_argument("GaussianBelief: covariance is not symmetric");
    }
};

using GaussianBelief = GaussianBeliefT<double>;

// Measured beams Q and the complementary unmeasured beams P (0-based indices).
// Q keeps the order in which beams were measured; P is ascending.
struct BeamPartition
{
    int n = 0;
    std::vector<int> measured;
    std::vector<int> unmeasured;

    static BeamPartition from_measured(int n, std::span<const int> q)
    {
        BeamPartition part;
        part.n = n;
        part.measured.assign(q.begin(), q.end());
        std::vector<char> taken(static_cast<std::size_t>(n), 0);
        for (int i : q) {
            if (i < 0 || i >= n)
                throw std::out_of_range("BeamPartition: beam index " + std::to_string(i) + " outside [0, " +
                                        std::to_string(n) + ")");
            if (taken[static_cast<std::size_t>(i)])
                throw std::invalid_argument("BeamPartition: duplicate beam index " + std::to_string(i));
            taken[static_cast<std::size_t>(i)] = 1;
        }
        for (int i = 0; i < n; ++i)
            if (!taken[static_cast<std::size_t>(i)])
                part.unmeasured.push_back(i);
        return part;
    }
};

struct MaskParams
{
    double alpha = 10.0;  // threshold, dB
    double beta = 0.5;    // fairness, 1/dB
};

namespace detail {

template <typename Matrix>
Eigen::LLT<typename Matrix::PlainObject> cholesky_or_throw(const Matrix& sigma, const char* what)
{
    Eigen::LLT<typename Matrix::PlainObject> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw std::domain_error(std::string(what) + ": covariance is not positive definite");
    const auto d = llt.matrixLLT().diagonal();
    for (Eigen::Index i = 0; i < d.size(); ++i)
        if (!(d(i) > 0) || !std::isfinite(static_cast<double>(d(i))))
            throw std::domain_error(std::string(what) + ": covariance is not positive definite");
    return llt;
}

// Factor sigma; when that fails retry with diagonal loading that starts at
// 1e-6 * trace / m and grows tenfold per attempt.
template <typename Matrix>
Eigen::LLT<typename Matrix::PlainObject> cholesky_with_jitter(const Matrix& sigma, const char* what)
{
    using Plain = typename Matrix::PlainObject;
    using Scalar = typename Matrix::Scalar;
    Eigen::LLT<Plain> llt(sigma);
    auto ok = [&] {
        if (llt.info() != Eigen::Success)
            return false;
        const auto d = llt.matrixLLT().diagonal();
        return (d.array() > Scalar(0)).all() && d.allFinite();
    };
    if (ok())
        return llt;
    const Eigen::Index m = sigma.rows();
    Scalar jitter = Scalar(1e-6) * std::max(sigma.trace() / Scalar(m), Scalar(1e-12));
    for (int attempt = 0; attempt < 8; ++attempt, jitter *= Scalar(10)) {
        Plain loaded = sigma;
        loaded.diagonal().array() += jitter;
        llt.compute(loaded);
        if (ok())
            return llt;
    }
    throw std::domain_error(std::string(what) + ": covariance is not positive semi-definite");
}

}  // namespace detail

// log det of an SPD matrix via Cholesky; 0 for the empty matrix.
template <typename Derived>
typename Derived::Scalar logdet(const Eigen::MatrixBase<Derived>& sigma)
{
    using Scalar = typename Derived::Scalar;
    if (sigma.rows() == 0)
        return Scalar(0);
    const auto llt = detail::cholesky_or_throw(sigma.eval(), "logdet");
    return Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
}

// ln N(x; mu, sigma), column-vector convention.
template <typename Derived, typename Scalar>
Scalar log_pdf(const Eigen::MatrixBase<Derived>& x, const GaussianBeliefT<Scalar>& belief)
{
    if (x.size() != belief.dim())
        throw std::invalid_argument("log_pdf: dimension mismatch");
    const Eigen::Index m = belief.dim();
    const auto llt = detail::cholesky_with_jitter(belief.sigma, "log_pdf");
    const typename GaussianBeliefT<Scalar>::Vector z = llt.matrixL().solve(x - belief.mu);
    const Scalar ld = Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
    return Scalar(-0.5) * (Scalar(m) * std::log(Scalar(2) * Scalar(EIGEN_PI)) + ld + z.squaredNorm());
}

// Differential entropy 1/2 ln det(2 pi e sigma) in nats. The selection
// objectives only depend on logdet(sigma); the constant (m/2) ln(2 pi e) is
// the same for every candidate of a fixed dimension.
template <typename Derived>
typename Derived::Scalar entropy(const Eigen::MatrixBase<Derived>& sigma)
{
    using Scalar = typename Derived::Scalar;
    const Eigen::Index m = sigma.rows();
    if (m == 0)
        return Scalar(0);
    const Scalar c = std::log(Scalar(2) * Scalar(EIGEN_PI) * std::exp(Scalar(1)));
    return Scalar(0.5) * (Scalar(m) * c + logdet(sigma));
}

// Belief over P given x_Q. The result is ordered like part.unmeasured.
template <typename Scalar, typename Derived>
GaussianBeliefT<Scalar> condition(const GaussianBeliefT<Scalar>& belief, const BeamPartition& part,
                                  const Eigen::MatrixBase<Derived>& x_q)
{
    if (part.n != belief.dim())
        throw std::invalid_argument("condition: partition size does not match belief dimension");
    if (static_cast<Eigen::Index>(part.measured.size()) != x_q.size())
        throw std::invalid_argument("condition: x_q length does not match |Q|");
    if (part.unmeasured.empty())
        throw std::invalid_argument("condition: empty P");
    if (part.measured.empty())
        return belief;

    using Matrix = typename GaussianBeliefT<Scalar>::Matrix;
    using Vector = typename GaussianBeliefT<Scalar>::Vector;
    const auto& q = part.measured;
    const auto& p = part.unmeasured;

    const Matrix s_qq = belief.sigma(q, q);
    const Matrix s_qp = belief.sigma(q, p);
    const auto llt = detail::cholesky_with_jitter(s_qq, "condition");

    const Vector resid = x_q - belief.mu(q);
    const Matrix w = llt.matrixL().solve(s_qp);  // L^-1 S_QP
    const Vector z = llt.matrixL().solve(resid);

    GaussianBeliefT<Scalar> out;
    out.mu = belief.mu(p) + w.transpose() * z;
    out.sigma = belief.sigma(p, p) - w.transpose() * w;
    out.sigma = Scalar(0.5) * (out.sigma + out.sigma.transpose()).eval();
    return out;
}

// Mean of x_P given x_Q without forming Sigma_{P|Q}; ordered like part.unmeasured.
template <typename Scalar, typename Derived>
typename GaussianBeliefT<Scalar>::Vector conditional_mean(const GaussianBeliefT<Scalar>& belief,
                                                          const BeamPartition& part,
                                                          const Eigen::MatrixBase<Derived>& x_q)
{
    using Matrix = typename GaussianBeliefT<Scalar>::Matrix;
    using Vector = typename GaussianBeliefT<Scalar>::Vector;
    if (static_cast<Eigen::Index>(part.measured.size()) != x_q.size())
        throw std::invalid_argument("conditional_mean: x_q length does not match |Q|");
    const auto& p = part.unmeasured;
    Vector out = belief.mu(p);
    if (part.measured.empty() || p.empty())
        return out;
    const auto& q = part.measured;
    const Matrix s_qq = belief.sigma(q, q);
    const auto llt = detail::cholesky_with_jitter(s_qq, "conditional_mean");
    const Vector coeff = llt.solve(Vector(x_q - belief.mu(q)));
    out.noalias() += belief.sigma(p, q) * coeff;
    return out;
}

// Diagonal of Sigma_{P|Q} only, ordered like part.unmeasured. O(|P| |Q|^2).
template <typename Scalar>
typename GaussianBeliefT<Scalar>::Vector conditional_variances(const GaussianBeliefT<Scalar>& belief,
                                                               const BeamPartition& part)
{
    using Matrix = typename GaussianBeliefT<Scalar>::Matrix;
    const auto& p = part.unmeasured;
    typename GaussianBeliefT<Scalar>::Vector var = belief.sigma.diagonal()(p);
    if (part.measured.empty() || p.empty())
        return var;
    const auto& q = part.measured;
    const Matrix s_qq = belief.sigma(q, q);
    const auto llt = detail::cholesky_with_jitter(s_qq, "conditional_variances");
    const Matrix w = llt.matrixL().solve(Matrix(belief.sigma(q, p)));
    var -= w.colwise().squaredNorm().transpose();
    return var;
}

inline double sigmoid(double a)
{
    if (a >= 0.0)
        return 1.0 / (1.0 + std::exp(-a));
    const double e = std::exp(a);
    return e / (1.0 + e);
}

// Weight per beam: sigmoid(beta (mu_i - max mu + alpha)).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> mask_weights(const Eigen::MatrixBase<Derived>& mu,
                                                                        const MaskParams& params)
{
    using Scalar = typename Derived::Scalar;
    if (mu.size() < 1)
        throw std::invalid_argument("mask_weights: empty input");
    const Scalar top = mu.maxCoeff();
    return mu.unaryExpr([&](Scalar v) {
        return Scalar(sigmoid(params.beta * (static_cast<double>(v - top) + params.alpha)));
    });
}

inline constexpr double kMaskWeightFloor = 1e-12;

// log det(D^1/2 S D^1/2) = sum ln max(d_i, floor) + logdet S.
template <typename DerivedS, typename DerivedD>
typename DerivedS::Scalar weighted_logdet(const Eigen::MatrixBase<DerivedS>& sigma,
                                          const Eigen::MatrixBase<DerivedD>& delta)
{
    using Scalar = typename DerivedS::Scalar;
    if (delta.size() != sigma.rows())
        throw std::invalid_argument("weighted_logdet: weight count does not match dimension");
    Scalar acc = logdet(sigma);
    for (Eigen::Index i = 0; i < delta.size(); ++i) {
        if (delta(i) < Scalar(0))
            throw std::invalid_argument("weighted_logdet: negative weight");
        acc += std::log(std::max(delta(i), Scalar(kMaskWeightFloor)));
    }
    return acc;
}

}  // namespace beamprobe

#endif  // BEAMPROBE_GAUSSIAN_HPP
