#pragma once

#include <Eigen/Dense>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbl/dataset.hpp"
#include "kbl/kernels.hpp"

namespace kbl {

/**
 * Design matrices of a linear policy-evaluation problem:
 *   X  = features of start states,
 *   X' = features of next states, zeroed on terminal transitions so the
 *        bootstrap is masked exactly as in the sampled losses,
 *   Z  = X - gamma X'.
 */
struct LinearSystemBundle {
    Eigen::MatrixXd x;       // n x d
    Eigen::MatrixXd x_next;  // n x d, masked on terminals
    Eigen::VectorXd r;       // n
    double gamma = 0.0;

    Eigen::MatrixXd z() const { return x - gamma * x_next; }
};

inline LinearSystemBundle make_bundle(const std::vector<Transition>& transitions,
                                      const FeatureMap& features, double gamma) {
    if (transitions.empty()) throw std::invalid_argument("make_bundle: empty transition list");
    const int n = int(transitions.size());
    const int d = features.dim();
    LinearSystemBundle b;
    b.x.resize(n, d);
    b.x_next.resize(n, d);
    b.r.resize(n);
    b.gamma = gamma;
    for (int i = 0; i < n; ++i) {
        b.x.row(i) = features(transitions[i].state).transpose();
        if (transitions[i].terminal)
            b.x_next.row(i).setZero();
        else
            b.x_next.row(i) = features(transitions[i].next_state).transpose();
        b.r[i] = transitions[i].reward;
    }
    return b;
}

struct LinearSolveResult {
    Eigen::VectorXd theta;
    double condition = 0.0;  // spectral condition number of the solved matrix
};

namespace detail {
/// Pivoted solve with an SVD condition estimate and residual verification.
inline LinearSolveResult checked_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                       const std::string& who) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    double smax = svd.singularValues()(0);
    double smin = svd.singularValues()(svd.singularValues().size() - 1);
    double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    if (!(smin > smax * 1e-13))
        throw std::runtime_error(who + ": singular system (condition estimate " +
                                 std::to_string(cond) + ")");
    LinearSolveResult out;
    out.condition = cond;
    out.theta = a.fullPivLu().solve(b);
    double residual = (a * out.theta - b).norm();
    if (residual > 1e-10 * (b.norm() + 1.0) * cond)
        throw std::runtime_error(who + ": solve residual " + std::to_string(residual) +
                                 " failed verification");
    return out;
}
}  // namespace detail

/// TD fixed point theta = (X^T Z)^{-1} X^T r. A nonzero ridge adds
/// epsilon I to the solved matrix (off by default).
inline LinearSolveResult td_closed_form(const LinearSystemBundle& bundle, double ridge = 0.0) {
    const Eigen::MatrixXd z = bundle.z();
    Eigen::MatrixXd a = bundle.x.transpose() * z;
    if (ridge != 0.0) a += ridge * Eigen::MatrixXd::Identity(a.rows(), a.cols());
    return detail::checked_solve(a, bundle.x.transpose() * bundle.r, "td_closed_form");
}

/**
 * Kernel-loss minimizer with the linear kernel phi(s)^T phi(sbar):
 *   theta = (Z^T X X^T Z)^{-1} Z^T X X^T r.
 * The objective is the norm of the expected update, (1/n^2)||X^T delta||^2,
 * so its gradient vanishes exactly at this point; when X^T Z is invertible
 * it coincides with the TD fixed point.
 */
inline LinearSolveResult kloss_closed_form(const LinearSystemBundle& bundle, double ridge = 0.0) {
    const Eigen::MatrixXd m = bundle.z().transpose() * bundle.x;  // d x d
    Eigen::MatrixXd a = m * m.transpose();
    if (ridge != 0.0) a += ridge * Eigen::MatrixXd::Identity(a.rows(), a.cols());
    return detail::checked_solve(a, m * (bundle.x.transpose() * bundle.r), "kloss_closed_form");
}

struct CertaintyEquivalenceResult {
    std::vector<int> states;      // observed non-terminal state ids, ascending
    Eigen::VectorXd values;       // empirical-model value per state above
    double value_of(int state) const {
        for (std::size_t i = 0; i < states.size(); ++i)
            if (states[i] == state) return values[Eigen::Index(i)];
        throw std::invalid_argument("certainty_equivalence: state not observed: " +
                                    std::to_string(state));
    }
};

/**
 * Model-based solve on the empirical MDP built from counts: for each
 * observed start state, Phat rows are next-state frequencies and rhat the
 * mean reward; the result solves V = rhat + gamma Phat V with terminal
 * next states contributing value 0. States are discrete, encoded as 1-d
 * [index] vectors. Non-terminal next states that never appear as start
 * states have no outgoing data and are rejected.
 */
inline CertaintyEquivalenceResult certainty_equivalence(const std::vector<Transition>& transitions,
                                                        double gamma) {
    if (transitions.empty()) throw std::invalid_argument("certainty_equivalence: empty dataset");
    std::map<int, std::size_t> index;
    for (const auto& t : transitions) {
        int s = FeatureMap::discrete_index(t.state);
        if (!index.count(s)) index[s] = 0;
    }
    std::size_t k = 0;
    for (auto& [s, i] : index) i = k++;
    const int m = int(index.size());

    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd reward_sum = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd outgoing = Eigen::VectorXd::Zero(m);
    for (const auto& t : transitions) {
        int s = FeatureMap::discrete_index(t.state);
        std::size_t i = index.at(s);
        outgoing[Eigen::Index(i)] += 1.0;
        reward_sum[Eigen::Index(i)] += t.reward;
        if (!t.terminal) {
            int sp = FeatureMap::discrete_index(t.next_state);
            auto it = index.find(sp);
            if (it == index.end())
                throw std::runtime_error(
                    "certainty_equivalence: observed state " + std::to_string(sp) +
                    " has no outgoing transitions");
            counts(Eigen::Index(i), Eigen::Index(it->second)) += 1.0;
        }
    }

    // (I - gamma Phat) V = rhat with Phat, rhat count-normalized per row;
    // scaling all counts by a constant leaves both unchanged.
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(m, m);
    Eigen::VectorXd b(m);
    for (int i = 0; i < m; ++i) {
        a.row(i) -= (gamma / outgoing[i]) * counts.row(i);
        b[i] = reward_sum[i] / outgoing[i];
    }
    CertaintyEquivalenceResult out;
    out.values = a.partialPivLu().solve(b);
    out.states.reserve(index.size());
    for (const auto& [s, i] : index) out.states.push_back(s);
    return out;
}

}  // namespace kbl
