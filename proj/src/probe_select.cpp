// SPDX-License-Identifier: Apache-2.0

#include "beamprobe/probe_select.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace beamprobe {

namespace {

// Predicted variances below this are treated as this value inside the log.
constexpr double kVarianceFloor = 1e-12;

using MaskSource = std::function<Eigen::VectorXd(int round, const std::vector<int>& q, const Eigen::VectorXd& x_q)>;

Eigen::VectorXd as_vector(const std::vector<double>& v)
{
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void require_stages(std::span<const PredictorHandle> stages, int l, const char* who)
{
    if (l < 0)
        throw std::invalid_argument(std::string(who) + ": negative probe count");
    if (static_cast<int>(stages.size()) < l + 1)
        throw std::invalid_argument(std::string(who) + ": need " + std::to_string(l + 1) + " predictor stages, got " +
                                    std::to_string(stages.size()));
    for (int k = 0; k <= l; ++k)
        if (!stages[static_cast<std::size_t>(k)])
            throw std::invalid_argument(std::string(who) + ": predictor stage " + std::to_string(k) + " is empty");
}

ProbingPlan greedy_core(std::span<const PredictorHandle> stages, int l, const SelectionObjective& objective,
                        const Eigen::Vector2d& location, const FeedbackOracle* feedback, const MaskSource& mask_source)
{
    require_stages(stages, l, "greedy_select");
    ProbingPlan plan;
    for (int round = 1; round <= l; ++round) {
        const Eigen::VectorXd mu = mask_source(round, plan.order, as_vector(plan.measured));
        if (l > mu.size())
            throw std::invalid_argument("greedy_select: more probes than beams");
        double cost = 0.0;
        const int best =
            greedy_round(mu, plan.order, stages[static_cast<std::size_t>(round)], objective, location, &cost);
        const std::array<int, 1> probe{best};
        double value = mu(best);
        if (feedback) {
            const Eigen::VectorXd fb = (*feedback)(probe);
            if (fb.size() != 1)
                throw std::runtime_error("greedy_select: feedback returned the wrong number of values");
            value = fb(0);
        }
        plan.order.push_back(best);
        plan.measured.push_back(value);
        plan.round_cost.push_back(cost);
    }
    return plan;
}

}  // namespace

int greedy_round(const Eigen::VectorXd& mask_mean, std::span<const int> q, const PredictorHandle& variance_stage,
                 const SelectionObjective& objective, const Eigen::Vector2d& location, double* cost_out)
{
    const int n = static_cast<int>(mask_mean.size());
    const auto part = BeamPartition::from_measured(n, q);
    if (part.unmeasured.empty())
        throw std::invalid_argument("greedy_round: no unmeasured beam left");
    const bool masked = objective.mode == SelectionObjective::Mode::masked;

    // two largest predicted means over P, for the max over P \ {q}
    int top1 = -1;
    int top2 = -1;
    for (int i : part.unmeasured) {
        if (top1 < 0 || mask_mean(i) > mask_mean(top1)) {
            top2 = top1;
            top1 = i;
        } else if (top2 < 0 || mask_mean(i) > mask_mean(top2)) {
            top2 = i;
        }
    }

    std::vector<int> trial(q.begin(), q.end());
    trial.push_back(-1);
    int best = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int c : part.unmeasured) {
        trial.back() = c;
        const Eigen::VectorXd lambda = variance_stage.variance(trial, location);
        if (lambda.size() != n)
            throw std::invalid_argument("greedy_select: variance predictor returned " + std::to_string(lambda.size()) +
                                        " entries, expected " + std::to_string(n));
        const double top = (c == top1) ? (top2 >= 0 ? mask_mean(top2) : 0.0) : mask_mean(top1);
        double cost = 0.0;
        for (int i : part.unmeasured) {
            if (i == c)
                continue;
            cost += std::log(std::max(lambda(i), kVarianceFloor));
            if (masked) {
                const double w = sigmoid(objective.mask.beta * (mask_mean(i) - top + objective.mask.alpha));
                cost += std::log(std::max(w, kMaskWeightFloor));
            }
        }
        if (cost < best_cost || (best < 0 && cost == best_cost)) {
            best = c;
            best_cost = cost;
        }
    }
    if (best < 0)
        throw std::runtime_error("greedy_select: every candidate scored non-finite");
    if (cost_out)
        *cost_out = best_cost;
    return best;
}

int argmax_first(const Eigen::VectorXd& v)
{
    if (v.size() == 0)
        throw std::invalid_argument("argmax_first: empty vector");
    int best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (v(i) > v(best))
            best = static_cast<int>(i);
    return best;
}

double selection_objective(const GaussianBelief& belief, std::span<const int> q, const SelectionObjective& objective)
{
    const auto part = BeamPartition::from_measured(static_cast<int>(belief.dim()), q);
    if (part.unmeasured.empty())
        return 0.0;
    // x_Q at its prior mean leaves mu_{P|Q} = mu_P
    const Eigen::VectorXd x_q = belief.mu(part.measured);
    const GaussianBelief cond = condition(belief, part, x_q);
    if (objective.mode == SelectionObjective::Mode::plain)
        return weighted_logdet(cond.sigma, Eigen::VectorXd::Ones(cond.dim()));
    return weighted_logdet(cond.sigma, mask_weights(cond.mu, objective.mask));
}

ExhaustiveResult exhaustive_select(const GaussianBelief& belief, int l, const SelectionObjective& objective)
{
    belief.validate();
    const int n = static_cast<int>(belief.dim());
    if (n > 20)
        throw std::invalid_argument("exhaustive_select: n = " + std::to_string(n) + " exceeds the enumeration guard (20)");
    if (l < 0 || l > n)
        throw std::invalid_argument("exhaustive_select: l must lie in [0, n]");

    std::vector<int> comb(static_cast<std::size_t>(l));
    std::iota(comb.begin(), comb.end(), 0);
    ExhaustiveResult best{comb, std::numeric_limits<double>::infinity()};
    while (true) {
        const double value = selection_objective(belief, comb, objective);
        if (value < best.objective)
            best = {comb, value};
        // next combination in lexicographic order
        int k = l - 1;
        while (k >= 0 && comb[static_cast<std::size_t>(k)] == n - l + k)
            --k;
        if (k < 0)
            break;
        ++comb[static_cast<std::size_t>(k)];
        for (int m = k + 1; m < l; ++m)
            comb[static_cast<std::size_t>(m)] = comb[static_cast<std::size_t>(m - 1)] + 1;
    }
    return best;
}

ProbingPlan greedy_select(std::span<const PredictorHandle> stages, int l, const SelectionObjective& objective,
                          const Eigen::Vector2d& location, const FeedbackOracle* feedback)
{
    require_stages(stages, l, "greedy_select");
    auto source = [&](int round, const std::vector<int>& q, const Eigen::VectorXd& x_q) {
        return stages[static_cast<std::size_t>(round - 1)].mean(x_q, q, location);
    };
    return greedy_core(stages, l, objective, location, feedback, source);
}

ProbingPlan greedy_select(const GaussianBelief& belief, int l, const SelectionObjective& objective,
                          const FeedbackOracle* feedback)
{
    const auto stages = replicate_stages(belief_handle(belief), l);
    return greedy_select(stages, l, objective, Eigen::Vector2d::Zero(), feedback);
}

ProbingPlan greedy_select_fixed_mask(std::span<const PredictorHandle> stages, int l,
                                     const SelectionObjective& objective, const Eigen::Vector2d& location,
                                     const Eigen::VectorXd& mask_mean)
{
    auto source = [&](int, const std::vector<int>&, const Eigen::VectorXd&) { return mask_mean; };
    return greedy_core(stages, l, objective, location, nullptr, source);
}

BeamDecision iter_online(std::span<const PredictorHandle> stages, const Eigen::Vector2d& location, int l,
                         const SelectionObjective& objective, const FeedbackOracle& feedback)
{
    if (l < 1)
        throw std::invalid_argument("iter_online: at least one probe is required");
    BeamDecision d;
    d.plan = greedy_select(stages, l, objective, location, &feedback);
    const Eigen::VectorXd x_q = as_vector(d.plan.measured);
    d.estimate = stages[static_cast<std::size_t>(l)].mean(x_q, d.plan.order, location);
    for (std::size_t k = 0; k < d.plan.order.size(); ++k)
        d.estimate(d.plan.order[k]) = d.plan.measured[k];
    d.beam = argmax_first(d.estimate);
    return d;
}

namespace {

Eigen::VectorXd belief_mean(const GaussianBelief& b, const Eigen::VectorXd& x_q, std::span<const int> q)
{
    if (q.empty())
        return b.mu;
    const auto part = BeamPartition::from_measured(static_cast<int>(b.dim()), q);
    Eigen::VectorXd out(b.dim());
    out(part.unmeasured) = conditional_mean(b, part, x_q);
    out(part.measured) = x_q;
    return out;
}

Eigen::VectorXd belief_variance(const GaussianBelief& b, std::span<const int> q)
{
    const auto part = BeamPartition::from_measured(static_cast<int>(b.dim()), q);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(b.dim());
    out(part.unmeasured) = conditional_variances(b, part);
    return out;
}

}  // namespace

PredictorHandle belief_handle(GaussianBelief belief)
{
    belief.validate();
    auto shared = std::make_shared<const GaussianBelief>(std::move(belief));
    PredictorHandle h;
    h.mean = [shared](const Eigen::VectorXd& x_q, std::span<const int> q, const Eigen::Vector2d&) {
        return belief_mean(*shared, x_q, q);
    };
    h.variance = [shared](std::span<const int> q, const Eigen::Vector2d&) { return belief_variance(*shared, q); };
    return h;
}

PredictorHandle empirical_handle(std::shared_ptr<const EmpiricalGaussianModel> model)
{
    PredictorHandle h;
    h.mean = [model](const Eigen::VectorXd& x_q, std::span<const int> q, const Eigen::Vector2d& s) {
        return belief_mean(model->at(s), x_q, q);
    };
    h.variance = [model](std::span<const int> q, const Eigen::Vector2d& s) {
        return belief_variance(model->at(s), q);
    };
    return h;
}

PredictorStages replicate_stages(const PredictorHandle& handle, int rounds)
{
    return PredictorStages(static_cast<std::size_t>(std::max(rounds, 0) + 1), handle);
}

}  // namespace beamprobe
