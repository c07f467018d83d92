// SPDX-License-Identifier: Apache-2.0

#include "beamprobe/beamspace.hpp"

#include <algorithm>
#include <limits>

namespace beamprobe {

Eigen::VectorXd measure_rsrp(const ComplexVector& h, const ComplexMatrix& a,
                             const MeasurementNoise& noise, Rng& rng)
{
    if (a.cols() != h.size())
        throw std::invalid_argument("measure_rsrp: codebook has " + std::to_string(a.cols()) +
                                    " columns but channel has " + std::to_string(h.size()) + " entries");
    ComplexVector y = a * h;
    if (noise.sigma_x2 > 0.0)
        for (Eigen::Index i = 0; i < y.size(); ++i)
            y(i) += complex_normal(rng, noise.sigma_x2);
    return y.cwiseAbs2();
}

double to_dbm(double milliwatt)
{
    if (milliwatt <= 0.0)
        return -std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(milliwatt);
}

double from_dbm(double dbm)
{
    return std::pow(10.0, dbm / 10.0);
}

Eigen::VectorXd to_dbm(const Eigen::VectorXd& milliwatt)
{
    return milliwatt.unaryExpr([](double v) { return to_dbm(v); });
}

double quantize_dbm(double dbm, double step_db)
{
    const double clamped = std::clamp(dbm, kRsrpFloorDbm, kRsrpCeilDbm);
    return std::round(clamped / step_db) * step_db;
}

Eigen::VectorXd rsrp_feedback_dbm(const Eigen::VectorXd& milliwatt, const MeasurementNoise& noise)
{
    Eigen::VectorXd dbm = to_dbm(milliwatt);
    if (noise.rsrp_quant_db) {
        const double step = *noise.rsrp_quant_db;
        for (Eigen::Index i = 0; i < dbm.size(); ++i)
            dbm(i) = quantize_dbm(dbm(i), step);
    } else {
        // zero power has no dBm value; pin it to the feedback floor
        for (Eigen::Index i = 0; i < dbm.size(); ++i)
            if (!std::isfinite(dbm(i)))
                dbm(i) = kRsrpFloorDbm;
    }
    return dbm;
}

Eigen::Vector2d observe_location(const Eigen::Vector2d& bs, const Eigen::Vector2d& mu,
                                 const MeasurementNoise& noise, Rng& rng)
{
    Eigen::Vector2d s = mu - bs;
    if (noise.sigma_s2 > 0.0) {
        const double sd = std::sqrt(noise.sigma_s2);
        s.x() += sd * standard_normal(rng);
        s.y() += sd * standard_normal(rng);
    }
    return s;
}

}  // namespace beamprobe
