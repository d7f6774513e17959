#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "kbl/dataset.hpp"
#include "kbl/tabular.hpp"

namespace kbl {

/**
 * A tabular MDP paired with a linear feature map, for the
 * divergence-counterexample chains. When the true value function is
 * realizable the known weight vector is stored and verified at
 * construction against the tabular solver.
 */
struct LinearChainSpec {
    Eigen::MatrixXd features;  // n_states x d
    TabularMdp mdp;
    TabularPolicy policy;
    StateDistribution mu;
    Eigen::VectorXd w_star;  // empty when V^pi is not realizable
    std::string name;

    FeatureMap feature_map() const { return FeatureMap::from_table(features); }

    void verify_realizable(double tol = 1e-8) const {
        if (w_star.size() == 0) return;
        Eigen::VectorXd v = solve_value_function(mdp, policy, 1e-12);
        Eigen::VectorXd predicted = features * w_star;
        if ((predicted - v).lpNorm<Eigen::Infinity>() > tol)
            throw std::logic_error(name + ": realizability check failed");
    }
};

/**
 * Stochastic 4+1-state chain with 3-d features whose true value function
 * is exactly linear with weights w* = (0.8, 1.0, 0).
 *
 * Geometry: s0 -> {s1: 0.9, s3: 0.1}, s1 -> {s2: 0.95, T: 0.05},
 * s2 -> {s2: 0.9, T: 0.1}, s3 -> T, with T absorbing and gamma = 1.
 * Rewards are solved from r = (I - P) V_target so that
 * V^pi = (0.8, 1.0, 2.0, 0, 0) regardless of the arrow probabilities.
 *
 * The chain is built so both classical baselines fail on it:
 * the expected-TD matrix Phi^T D (I - P) Phi has a negative eigenvalue
 * (TD(0) diverges) and the projected Bellman iteration has spectral
 * radius 1.1 (fitted value iteration diverges), while the kernel-loss
 * objective stays a convex quadratic with minimum at w*.
 */
inline LinearChainSpec make_tvr_chain() {
    LinearChainSpec spec;
    spec.name = "tvr-chain";
    spec.features.resize(5, 3);
    spec.features << 1, 0, 0,
                     0, 1, 0,
                     0, 2, 0,
                     0, 0, 2,
                     0, 0, 0;
    spec.w_star.resize(3);
    spec.w_star << 0.8, 1.0, 0.0;

    TabularMdp& mdp = spec.mdp;
    mdp.n_states = 5;
    mdp.n_actions = 1;
    mdp.discount = 1.0;
    mdp.terminal = {false, false, false, false, true};
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(5, 5);
    p(0, 1) = 0.9;
    p(0, 3) = 0.1;
    p(1, 2) = 0.95;
    p(1, 4) = 0.05;
    p(2, 2) = 0.9;
    p(2, 4) = 0.1;
    p(3, 4) = 1.0;
    p(4, 4) = 1.0;
    mdp.transition = {p};

    // r = (I - P) V_target keeps V^pi = Phi w* exact.
    Eigen::VectorXd v_target = spec.features * spec.w_star;
    Eigen::VectorXd r = v_target - p * v_target;
    mdp.reward = Eigen::MatrixXd(5, 1);
    for (int s = 0; s < 5; ++s) mdp.reward(s, 0) = mdp.terminal[s] ? 0.0 : r[s];
    mdp.validate();

    spec.policy.probs = Eigen::MatrixXd::Ones(5, 1);
    spec.mu.mu = Eigen::VectorXd::Zero(5);
    for (int s = 0; s < 4; ++s) spec.mu.mu[s] = 0.25;
    spec.mu.validate(mdp);
    spec.verify_realizable();
    return spec;
}

/**
 * Classic 7-state star counterexample for off-policy TD(0), under the
 * target policy that always jumps to the hub state 7 (index 6) with zero
 * reward and gamma = 0.99. Features are 8-dimensional: spoke state i has
 * phi = 2 e_i + e_8, the hub has phi = e_7 + 2 e_8. The sampling
 * distribution is uniform over all seven states (off-policy), V^pi = 0
 * everywhere, and w* = 0.
 */
inline LinearChainSpec make_baird_star() {
    LinearChainSpec spec;
    spec.name = "baird-star";
    const int n = 7;
    spec.features = Eigen::MatrixXd::Zero(n, 8);
    for (int s = 0; s < 6; ++s) {
        spec.features(s, s) = 2.0;
        spec.features(s, 7) = 1.0;
    }
    spec.features(6, 6) = 1.0;
    spec.features(6, 7) = 2.0;
    spec.w_star = Eigen::VectorXd::Zero(8);

    TabularMdp& mdp = spec.mdp;
    mdp.n_states = n;
    mdp.n_actions = 1;
    mdp.discount = 0.99;
    mdp.terminal.assign(n, false);
    mdp.reward = Eigen::MatrixXd::Zero(n, 1);
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    for (int s = 0; s < n; ++s) p(s, 6) = 1.0;
    mdp.transition = {p};
    mdp.validate();

    spec.policy.probs = Eigen::MatrixXd::Ones(n, 1);
    spec.mu.mu = Eigen::VectorXd::Constant(n, 1.0 / n);
    spec.mu.validate(mdp);
    spec.verify_realizable();
    return spec;
}

/// The customary far-from-solution start for the star counterexample:
/// all ones except 10 on the hub's first weight.
inline Eigen::VectorXd baird_init_weights() {
    Eigen::VectorXd w = Eigen::VectorXd::Ones(8);
    w[6] = 10.0;
    return w;
}

/**
 * Samples transitions from a chain spec: s ~ mu, a ~ pi, s' ~ P, with
 * states encoded as 1-d [index] vectors for table feature lookup. The
 * terminal flag marks arrivals at absorbing states.
 */
inline TransitionDataset collect_chain_dataset(const LinearChainSpec& spec, int n,
                                               std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("collect_chain_dataset: n must be positive");
    Rng rng(seed);
    TransitionDataset ds;
    ds.mode = SamplingMode::UniformState;
    ds.seed = seed;
    ds.env_name = spec.name;
    ds.policy_id = "chain-policy";
    for (int i = 0; i < n; ++i) {
        int s = sample_index(spec.mu.mu, rng);
        int a = sample_index(spec.policy.probs.row(s).transpose(), rng);
        int sp = sample_index(spec.mdp.transition[a].row(s).transpose(), rng);
        Transition t;
        t.state = Eigen::VectorXd::Constant(1, double(s));
        t.action = Eigen::VectorXd::Constant(1, double(a));
        t.reward = spec.mdp.reward(s, a);
        t.next_state = Eigen::VectorXd::Constant(1, double(sp));
        t.terminal = spec.mdp.terminal[sp];
        ds.transitions.push_back(std::move(t));
    }
    return ds;
}

}  // namespace kbl
