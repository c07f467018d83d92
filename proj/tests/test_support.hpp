// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMPROBE_TEST_SUPPORT_HPP
#define BEAMPROBE_TEST_SUPPORT_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <vector>

#include "beamprobe/gaussian.hpp"
#include "beamprobe/random.hpp"

namespace beamprobe::testing {

// Random SPD matrix B B^T / m + eps I with a spread of eigenvalues.
inline Eigen::MatrixXd random_spd(int n, Rng& rng, double eps = 0.05)
{
    Eigen::MatrixXd b(n, n + 2);
    for (Eigen::Index j = 0; j < b.cols(); ++j)
        for (Eigen::Index i = 0; i < b.rows(); ++i)
            b(i, j) = standard_normal(rng);
    Eigen::MatrixXd s = b * b.transpose() / static_cast<double>(n);
    s.diagonal().array() += eps;
    return s;
}

inline GaussianBelief random_belief(int n, Rng& rng, double mean_scale = 5.0)
{
    GaussianBelief b;
    b.mu.resize(n);
    for (int i = 0; i < n; ++i)
        b.mu(i) = mean_scale * standard_normal(rng);
    b.sigma = random_spd(n, rng);
    return b;
}

// k distinct indices from [0, n), in random order.
inline std::vector<int> random_subset(int n, int k, Rng& rng)
{
    std::vector<int> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(static_cast<std::size_t>(k));
    return all;
}

// Dense inverse-based conditional moments, independent of the Cholesky path.
inline GaussianBelief condition_dense(const GaussianBelief& b, const std::vector<int>& q, const std::vector<int>& p,
                                      const Eigen::VectorXd& x_q)
{
    const Eigen::MatrixXd s_pq = b.sigma(p, q);
    const Eigen::MatrixXd inv = b.sigma(q, q).inverse();
    GaussianBelief out;
    out.mu = b.mu(p) + s_pq * inv * (x_q - b.mu(q));
    out.sigma = b.sigma(p, p) - s_pq * inv * s_pq.transpose();
    return out;
}

}  // namespace beamprobe::testing

#endif  // BEAMPROBE_TEST_SUPPORT_HPP
