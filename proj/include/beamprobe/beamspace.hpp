// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMPROBE_BEAMSPACE_HPP
#define BEAMPROBE_BEAMSPACE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>

#include "beamprobe/random.hpp"

namespace beamprobe {

// Uniform planar array at the base station. Beam and antenna index of the
// (horizontal k, vertical m) element is k * n_theta + m.
struct ArrayGeometry
{
    int n_phi = 16;   // horizontal antenna count
    int n_theta = 8;  // vertical antenna count

    int n() const { return n_phi * n_theta; }

    void validate() const
    {
        if (n_phi < 1 || n_theta < 1)
            throw std::invalid_argument("ArrayGeometry: antenna counts must be positive");
    }

    bool operator==(const ArrayGeometry&) const = default;
};

template <typename Scalar>
using ComplexVectorT = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;
template <typename Scalar>
using ComplexMatrixT = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

using ComplexVector = ComplexVectorT<double>;
using ComplexMatrix = ComplexMatrixT<double>;

// Array response a_xy(phi, theta) (x) a_z(theta), unit norm.
// phi: azimuth from array broadside, theta: zenith angle.
template <typename Scalar = double>
ComplexVectorT<Scalar> steering_vector(Scalar phi, Scalar theta, const ArrayGeometry& geom)
{
    geom.validate();
    using C = std::complex<Scalar>;
    const Scalar pi = Scalar(EIGEN_PI);
    const Scalar u = std::sin(phi) * std::sin(theta);
    const Scalar v = std::cos(theta);
    const Scalar norm = Scalar(1) / std::sqrt(Scalar(geom.n()));

    ComplexVectorT<Scalar> psi(geom.n());
    for (int k = 0; k < geom.n_phi; ++k) {
        const C a_xy = std::polar(Scalar(1), pi * Scalar(k) * u);
        for (int m = 0; m < geom.n_theta; ++m)
            psi(k * geom.n_theta + m) = norm * a_xy * std::polar(Scalar(1), pi * Scalar(m) * v);
    }
    return psi;
}

// Unit-norm N-point DFT basis, row k = exp(-j 2 pi k m / N) / sqrt(N).
template <typename Scalar = double>
ComplexMatrixT<Scalar> dft_matrix(int n)
{
    const Scalar pi = Scalar(EIGEN_PI);
    ComplexMatrixT<Scalar> f(n, n);
    const Scalar norm = Scalar(1) / std::sqrt(Scalar(n));
    for (int k = 0; k < n; ++k)
        for (int m = 0; m < n; ++m)
            f(k, m) = norm * std::polar(Scalar(1), -Scalar(2) * pi * Scalar((k * m) % n) / Scalar(n));
    return f;
}

// Beam codebook A: rows are Kronecker products of the horizontal and vertical
// DFT rows, ordered like the antenna index. A is unitary.
template <typename Scalar = double>
ComplexMatrixT<Scalar> dft_codebook(const ArrayGeometry& geom)
{
    geom.validate();
    const auto fh = dft_matrix<Scalar>(geom.n_phi);
    const auto fv = dft_matrix<Scalar>(geom.n_theta);
    ComplexMatrixT<Scalar> a(geom.n(), geom.n());
    for (int kh = 0; kh < geom.n_phi; ++kh)
        for (int kv = 0; kv < geom.n_theta; ++kv)
            for (int mh = 0; mh < geom.n_phi; ++mh)
                for (int mv = 0; mv < geom.n_theta; ++mv)
                    a(kh * geom.n_theta + kv, mh * geom.n_theta + mv) = fh(kh, mh) * fv(kv, mv);
    return a;
}

struct MeasurementNoise
{
    double sigma_x2 = 1e-9;                   // RSRP noise variance, mW
    double sigma_s2 = 1.0;                    // positioning noise variance per axis, m^2
    std::optional<double> rsrp_quant_db = 1.0;  // feedback quantization step

    void validate() const
    {
        if (!(sigma_x2 >= 0.0) || !(sigma_s2 >= 0.0))
            throw std::invalid_argument("MeasurementNoise: variances must be nonnegative");
        if (rsrp_quant_db && !(*rsrp_quant_db > 0.0))
            throw std::invalid_argument("MeasurementNoise: quantization step must be positive");
    }

    bool operator==(const MeasurementNoise&) const = default;
};

inline constexpr double kRsrpFloorDbm = -140.0;
inline constexpr double kRsrpCeilDbm = -40.0;

// |A h + n_x|^2 per beam, in mW. n_x is circularly-symmetric complex
// Gaussian with per-entry variance noise.sigma_x2.
Eigen::VectorXd measure_rsrp(const ComplexVector& h, const ComplexMatrix& a,
                             const MeasurementNoise& noise, Rng& rng);

double to_dbm(double milliwatt);
double from_dbm(double dbm);
Eigen::VectorXd to_dbm(const Eigen::VectorXd& milliwatt);

// Clamp to [kRsrpFloorDbm, kRsrpCeilDbm], then round to a multiple of step_db.
double quantize_dbm(double dbm, double step_db);

// mW vector -> dBm feedback, quantized when the noise model says so.
Eigen::VectorXd rsrp_feedback_dbm(const Eigen::VectorXd& milliwatt, const MeasurementNoise& noise);

// s_r - s_t + n_s
Eigen::Vector2d observe_location(const Eigen::Vector2d& bs, const Eigen::Vector2d& mu,
                                 const MeasurementNoise& noise, Rng& rng);

}  // namespace beamprobe

#endif  // BEAMPROBE_BEAMSPACE_HPP
