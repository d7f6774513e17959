#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbl/config.hpp"
#include "kbl/kernels.hpp"
#include "kbl/rng.hpp"

namespace kbl {

/**
 * Exact finite MDP. Transitions are stored per action as a row-stochastic
 * n_states x n_states matrix; rewards as n_states x n_actions.
 *
 * Terminal states must self-loop with zero reward, so their value is 0
 * under any policy. The discount must lie in (0, 1); gamma = 1 is
 * permitted only when every policy of interest is absorbing (the toy
 * chain), and the iterative solver reports failure otherwise.
 */
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<Eigen::MatrixXd> transition;  // [a](s, s')
    Eigen::MatrixXd reward;                   // (s, a)
    double discount = 0.0;
    std::vector<bool> terminal;

    void validate(double tol = 1e-12) const {
        if (n_states <= 0 || n_actions <= 0)
            throw std::invalid_argument("TabularMdp: dimensions must be positive");
        if (int(transition.size()) != n_actions)
            throw std::invalid_argument("TabularMdp: transition tensor has wrong action count");
        if (reward.rows() != n_states || reward.cols() != n_actions)
            throw std::invalid_argument("TabularMdp: reward matrix has wrong shape");
        if (int(terminal.size()) != n_states)
            throw std::invalid_argument("TabularMdp: terminal mask has wrong length");
        if (!(discount > 0.0 && discount <= 1.0))
            throw std::invalid_argument("TabularMdp: discount must lie in (0, 1]");
        if (discount == 1.0 &&
            std::find(terminal.begin(), terminal.end(), true) == terminal.end())
            throw std::invalid_argument("TabularMdp: gamma = 1 requires an absorbing terminal state");
        for (int a = 0; a < n_actions; ++a) {
            if (transition[a].rows() != n_states || transition[a].cols() != n_states)
                throw std::invalid_argument("TabularMdp: transition matrix has wrong shape");
            for (int s = 0; s < n_states; ++s) {
                double sum = 0.0;
                for (int sp = 0; sp < n_states; ++sp) {
                    double p = transition[a](s, sp);
                    if (p < 0.0) throw std::invalid_argument("TabularMdp: negative transition probability");
                    sum += p;
                }
                if (std::abs(sum - 1.0) > tol)
                    throw std::invalid_argument("TabularMdp: transition row does not sum to 1");
            }
        }
        for (int s = 0; s < n_states; ++s) {
            if (!terminal[s]) continue;
            for (int a = 0; a < n_actions; ++a) {
                if (std::abs(transition[a](s, s) - 1.0) > tol || std::abs(reward(s, a)) > tol)
                    throw std::invalid_argument("TabularMdp: terminal state must self-loop with zero reward");
            }
        }
    }
};

struct TabularPolicy {
    Eigen::MatrixXd probs;  // (s, a)

    void validate(const TabularMdp& mdp, double tol = 1e-12) const {
        if (probs.rows() != mdp.n_states || probs.cols() != mdp.n_actions)
            throw std::invalid_argument("TabularPolicy: shape mismatch");
        for (int s = 0; s < mdp.n_states; ++s) {
            double sum = 0.0;
            for (int a = 0; a < mdp.n_actions; ++a) {
                if (probs(s, a) < 0.0) throw std::invalid_argument("TabularPolicy: negative probability");
                sum += probs(s, a);
            }
            if (std::abs(sum - 1.0) > tol) throw std::invalid_argument("TabularPolicy: row does not sum to 1");
        }
    }
};

struct StateDistribution {
    Eigen::VectorXd mu;

    void validate(const TabularMdp& mdp, double tol = 1e-12) const {
        if (mu.size() != mdp.n_states) throw std::invalid_argument("StateDistribution: length mismatch");
        double sum = 0.0;
        for (int s = 0; s < mdp.n_states; ++s) {
            if (mu[s] < 0.0) throw std::invalid_argument("StateDistribution: negative mass");
            if (!mdp.terminal[s] && mu[s] <= 0.0)
                throw std::invalid_argument("StateDistribution: must be strictly positive on non-terminal states");
            sum += mu[s];
        }
        if (std::abs(sum - 1.0) > tol) throw std::invalid_argument("StateDistribution: does not sum to 1");
    }
};

/// Policy-induced transition matrix P_pi(s, s') = sum_a pi(a|s) P(s'|s,a).
inline Eigen::MatrixXd policy_transition(const TabularMdp& mdp, const TabularPolicy& policy) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_states);
    for (int a = 0; a < mdp.n_actions; ++a)
        p += policy.probs.col(a).asDiagonal() * mdp.transition[a];
    return p;
}

/// Policy-induced expected reward r_pi(s) = sum_a pi(a|s) R(s, a).
inline Eigen::VectorXd policy_reward(const TabularMdp& mdp, const TabularPolicy& policy) {
    return (policy.probs.array() * mdp.reward.array()).rowwise().sum();
}

/**
 * Iterative policy evaluation to a Bellman-residual tolerance.
 *
 * Returns V with max_s |B_pi V(s) - V(s)| <= tol. Starting from zero
 * keeps terminal states pinned at 0. Throws after the iteration cap,
 * which for gamma = 1 signals a chain that does not absorb.
 */
inline Eigen::VectorXd solve_value_function(const TabularMdp& mdp, const TabularPolicy& policy,
                                            double tol = 1e-10, long max_iter = 1000000) {
    policy.validate(mdp);
    const Eigen::MatrixXd p = policy_transition(mdp, policy);
    const Eigen::VectorXd r = policy_reward(mdp, policy);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.n_states);
    for (long it = 0; it < max_iter; ++it) {
        Eigen::VectorXd bv = r + mdp.discount * (p * v);
        double res = (bv - v).lpNorm<Eigen::Infinity>();
        if (res <= tol) return v;
        v = std::move(bv);
    }
    throw std::runtime_error(
        "solve_value_function: no convergence within iteration cap "
        "(gamma = 1 chain without absorption?)");
}

/// Dense solve of (I - gamma P_pi) V = r_pi. With gamma = 1 the system is
/// solved on the non-terminal block, terminals pinned to 0.
inline Eigen::VectorXd solve_value_function_direct(const TabularMdp& mdp, const TabularPolicy& policy) {
    const Eigen::MatrixXd p = policy_transition(mdp, policy);
    const Eigen::VectorXd r = policy_reward(mdp, policy);
    const int n = mdp.n_states;
    if (mdp.discount < 1.0) {
        Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - mdp.discount * p;
        return a.partialPivLu().solve(r);
    }
    std::vector<int> nt;
    for (int s = 0; s < n; ++s)
        if (!mdp.terminal[s]) nt.push_back(s);
    const int m = int(nt.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(m, m);
    Eigen::VectorXd b(m);
    for (int i = 0; i < m; ++i) {
        b[i] = r[nt[i]];
        for (int j = 0; j < m; ++j) a(i, j) -= p(nt[i], nt[j]);
    }
    Eigen::VectorXd x = a.fullPivLu().solve(b);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < m; ++i) v[nt[i]] = x[i];
    return v;
}

/// Bellman residual R_pi V = B_pi V - V, elementwise over states.
inline Eigen::VectorXd exact_bellman_residual(const TabularMdp& mdp, const TabularPolicy& policy,
                                              const Eigen::VectorXd& v) {
    if (v.size() != mdp.n_states) throw std::invalid_argument("exact_bellman_residual: V length mismatch");
    return policy_reward(mdp, policy) + mdp.discount * (policy_transition(mdp, policy) * v) - v;
}

/// Evaluates k on embedded states in both argument orders and rejects
/// asymmetry beyond 1e-12.
inline Eigen::MatrixXd state_gram(const Kernel& kernel, const Eigen::MatrixXd& embedding) {
    const Eigen::Index n = embedding.rows();
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            g(i, j) = kernel.eval(embedding.row(i).transpose(), embedding.row(j).transpose());
        }
    }
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("state_gram: kernel is asymmetric on the state set");
    return g;
}

/**
 * Exact kernel Bellman loss on the finite state set:
 *   sum_{s, sbar} mu(s) mu(sbar) k(s, sbar) R_pi V(s) R_pi V(sbar).
 * `embedding` supplies the point in R^d that represents each state for
 * kernel evaluation.
 */
inline double exact_kernel_loss(const TabularMdp& mdp, const TabularPolicy& policy,
                                const StateDistribution& mu, const Kernel& kernel,
                                const Eigen::MatrixXd& embedding, const Eigen::VectorXd& v) {
    const Eigen::MatrixXd g = state_gram(kernel, embedding);
    const Eigen::VectorXd res = exact_bellman_residual(mdp, policy, v);
    const Eigen::VectorXd w = mu.mu.cwiseProduct(res);
    return w.dot(g * w);
}

/**
 * Dual kernel k*(s', sbar') built from the backward conditional
 *   d*(s|s') = sum_a pi(a|s) P(s'|s,a) mu(s) / mu(s'),
 * kept unnormalized exactly as defined. Each kernel term is averaged
 * only over the backward variables it actually contains:
 *   k* = K - gamma (K D* + D*^T K) + gamma^2 D*^T K D*,
 * with D*(s, s') = d*(s|s'). Under this reading the identity
 *   L_k(V) = sum mu(s') mu(sbar') k*(s', sbar') (V - V^pi)(s') (V - V^pi)(sbar')
 * holds for every mu, stationary or not.
 */
inline Eigen::MatrixXd dual_kernel(const TabularMdp& mdp, const TabularPolicy& policy,
                                   const StateDistribution& mu, const Kernel& kernel,
                                   const Eigen::MatrixXd& embedding) {
    const int n = mdp.n_states;
    const Eigen::MatrixXd p = policy_transition(mdp, policy);
    Eigen::MatrixXd dstar(n, n);
    for (int sp = 0; sp < n; ++sp) {
        for (int s = 0; s < n; ++s) {
            double joint = mu.mu[s] * p(s, sp);
            if (joint > 0.0 && mu.mu[sp] <= 0.0)
                throw std::runtime_error("dual_kernel: reachable state with mu(s') = 0 in normalization");
            dstar(s, sp) = mu.mu[sp] > 0.0 ? joint / mu.mu[sp] : 0.0;
        }
    }
    const Eigen::MatrixXd g = state_gram(kernel, embedding);
    const double gamma = mdp.discount;
    return g - gamma * (g * dstar + dstar.transpose() * g) +
           gamma * gamma * (dstar.transpose() * g * dstar);
}

/// Weighted quadratic form sum mu mu' k*(s,s') f(s) f(s') used to evaluate
/// the dual-kernel identity.
inline double dual_norm_sq(const Eigen::MatrixXd& kstar, const StateDistribution& mu,
                           const Eigen::VectorXd& f) {
    const Eigen::VectorXd w = mu.mu.cwiseProduct(f);
    return w.dot(kstar * w);
}

struct MercerCheck {
    double lhs = 0.0;        // exact kernel loss
    double rhs = 0.0;        // eigen-expansion sum lambda_i <R, e_i>_mu^2
    double lambda_max = 0.0;
    double l2_loss = 0.0;    // sum mu(s) R_pi V(s)^2
    double bound = 0.0;      // lambda_max * l2_loss
};

/**
 * Finite-state Mercer decomposition of the mu-weighted Gram operator.
 * Eigenpairs come from the symmetric matrix D^{1/2} K D^{1/2} with
 * D = diag(mu); its eigenvectors u_i give mu-orthonormal eigenfunctions
 * e_i = u_i / sqrt(mu), and the projections <R, e_i>_mu reduce to
 * u_i . (sqrt(mu) * R), so states with mu = 0 never divide.
 */
inline MercerCheck mercer_check(const TabularMdp& mdp, const TabularPolicy& policy,
                                const StateDistribution& mu, const Kernel& kernel,
                                const Eigen::MatrixXd& embedding, const Eigen::VectorXd& v) {
    const Eigen::MatrixXd g = state_gram(kernel, embedding);
    const Eigen::VectorXd res = exact_bellman_residual(mdp, policy, v);
    const Eigen::VectorXd sq = mu.mu.cwiseSqrt();
    const Eigen::MatrixXd m = sq.asDiagonal() * g * sq.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("mercer_check: eigendecomposition failed on degenerate Gram matrix");
    const Eigen::VectorXd target = sq.cwiseProduct(res);
    MercerCheck out;
    for (int i = 0; i < mdp.n_states; ++i) {
        double proj = eig.eigenvectors().col(i).dot(target);
        out.rhs += eig.eigenvalues()[i] * proj * proj;
    }
    out.lambda_max = eig.eigenvalues().maxCoeff();
    out.lhs = mu.mu.cwiseProduct(res).dot(g * mu.mu.cwiseProduct(res));
    out.l2_loss = mu.mu.dot(res.cwiseProduct(res));
    out.bound = out.lambda_max * out.l2_loss;
    return out;
}

struct RkhsWitnessCheck {
    double loss = 0.0;
    double witness_norm_sq = 0.0;
};

/// RKHS witness f*(.) = E_mu[R_pi V(s) k(s, .)]; its squared RKHS norm
/// sum_j a_j f*(x_j) with a = mu .* R equals the kernel loss.
inline RkhsWitnessCheck rkhs_witness_check(const TabularMdp& mdp, const TabularPolicy& policy,
                                           const StateDistribution& mu, const Kernel& kernel,
                                           const Eigen::MatrixXd& embedding, const Eigen::VectorXd& v) {
    RkhsWitnessCheck out;
    out.loss = exact_kernel_loss(mdp, policy, mu, kernel, embedding, v);
    const Eigen::MatrixXd g = state_gram(kernel, embedding);
    const Eigen::VectorXd res = exact_bellman_residual(mdp, policy, v);
    const Eigen::VectorXd a = mu.mu.cwiseProduct(res);
    const Eigen::VectorXd witness_values = g * a;  // f*(x_j)
    out.witness_norm_sq = a.dot(witness_values);
    return out;
}

/// Draws an index from a probability vector by inverse CDF.
inline int sample_index(const Eigen::VectorXd& probs, Rng& rng) {
    double u = rng.uniform();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return int(i);
    }
    return int(probs.size() - 1);
}

struct RgBiasCheck {
    double empirical_rg_mean = 0.0;   // Monte-Carlo mean of squared TD errors
    double l2_plus_variance = 0.0;    // exact L_2(V) + E_mu[Var(Bhat_pi V(s))]
    double std_error = 0.0;
};

/**
 * Demonstrates the residual-gradient bias: the expected squared TD error
 * equals the squared Bellman error plus the mu-weighted variance of the
 * bootstrap target. Sampling is (s ~ mu, a ~ pi, s' ~ P).
 */
inline RgBiasCheck rg_bias_check(const TabularMdp& mdp, const TabularPolicy& policy,
                                 const StateDistribution& mu, const Eigen::VectorXd& v,
                                 long n_samples, std::uint64_t seed) {
    const double gamma = mdp.discount;
    RgBiasCheck out;

    // Exact decomposition.
    const Eigen::VectorXd res = exact_bellman_residual(mdp, policy, v);
    double l2 = mu.mu.dot(res.cwiseProduct(res));
    double var_term = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
        double mean = 0.0, second = 0.0;
        for (int a = 0; a < mdp.n_actions; ++a) {
            for (int sp = 0; sp < mdp.n_states; ++sp) {
                double pr = policy.probs(s, a) * mdp.transition[a](s, sp);
                double target = mdp.reward(s, a) + gamma * v[sp];
                mean += pr * target;
                second += pr * target * target;
            }
        }
        var_term += mu.mu[s] * (second - mean * mean);
    }
    out.l2_plus_variance = l2 + var_term;

    // Monte Carlo.
    Rng rng(seed);
    double sum = 0.0, sum_sq = 0.0;
    for (long i = 0; i < n_samples; ++i) {
        int s = sample_index(mu.mu, rng);
        int a = sample_index(policy.probs.row(s).transpose(), rng);
        int sp = sample_index(mdp.transition[a].row(s).transpose(), rng);
        double td = mdp.reward(s, a) + gamma * v[sp] - v[s];
        sum += td * td;
        sum_sq += td * td * td * td;
    }
    out.empirical_rg_mean = sum / double(n_samples);
    double var = sum_sq / double(n_samples) - out.empirical_rg_mean * out.empirical_rg_mean;
    out.std_error = std::sqrt(std::max(var, 0.0) / double(n_samples));
    return out;
}

// ---------------------------------------------------------------------------
// Random instances for identity suites and tests
// ---------------------------------------------------------------------------

/// Random MDP with strictly positive transition rows; optionally the last
/// state is made terminal (absorbing, zero reward).
inline TabularMdp random_mdp(int n_states, int n_actions, double gamma, Rng& rng,
                             bool with_terminal = false) {
    TabularMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.discount = gamma;
    mdp.terminal.assign(n_states, false);
    mdp.reward = Eigen::MatrixXd(n_states, n_actions);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) mdp.reward(s, a) = rng.uniform(-1.0, 1.0);
    mdp.transition.assign(n_actions, Eigen::MatrixXd(n_states, n_states));
    for (int a = 0; a < n_actions; ++a) {
        for (int s = 0; s < n_states; ++s) {
            double sum = 0.0;
            for (int sp = 0; sp < n_states; ++sp) {
                double w = 0.05 + rng.uniform();
                mdp.transition[a](s, sp) = w;
                sum += w;
            }
            mdp.transition[a].row(s) /= sum;
        }
    }
    if (with_terminal) {
        int t = n_states - 1;
        mdp.terminal[t] = true;
        for (int a = 0; a < n_actions; ++a) {
            mdp.transition[a].row(t).setZero();
            mdp.transition[a](t, t) = 1.0;
            mdp.reward(t, a) = 0.0;
        }
    }
    mdp.validate();
    return mdp;
}

inline TabularPolicy random_policy(const TabularMdp& mdp, Rng& rng) {
    TabularPolicy pol;
    pol.probs = Eigen::MatrixXd(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s) {
        double sum = 0.0;
        for (int a = 0; a < mdp.n_actions; ++a) {
            double w = 0.1 + rng.uniform();
            pol.probs(s, a) = w;
            sum += w;
        }
        pol.probs.row(s) /= sum;
    }
    pol.validate(mdp);
    return pol;
}

inline StateDistribution random_distribution(const TabularMdp& mdp, Rng& rng) {
    StateDistribution mu;
    mu.mu = Eigen::VectorXd(mdp.n_states);
    double sum = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
        double w = 0.1 + rng.uniform();
        mu.mu[s] = w;
        sum += w;
    }
    mu.mu /= sum;
    mu.validate(mdp);
    return mu;
}

/// Embeds state i at the 1-d point i / (n - 1).
inline Eigen::MatrixXd line_embedding(int n_states) {
    Eigen::MatrixXd e(n_states, 1);
    for (int s = 0; s < n_states; ++s) e(s, 0) = n_states > 1 ? double(s) / double(n_states - 1) : 0.0;
    return e;
}

inline Eigen::MatrixXd random_embedding(int n_states, int dim, Rng& rng) {
    Eigen::MatrixXd e(n_states, dim);
    for (int s = 0; s < n_states; ++s)
        for (int d = 0; d < dim; ++d) e(s, d) = rng.uniform();
    return e;
}

// ---------------------------------------------------------------------------
// Serialization: flat key-value text with [mdp], [policy], [mu] sections
// ---------------------------------------------------------------------------

struct MdpBundle {
    TabularMdp mdp;
    TabularPolicy policy;
    StateDistribution mu;
};

namespace detail {
inline std::string fmt_row(const Eigen::VectorXd& v) {
    std::string out;
    char buf[32];
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
        if (i) out += ' ';
        out += buf;
    }
    return out;
}
}  // namespace detail

inline std::string mdp_to_text(const MdpBundle& b) {
    std::string out = "[mdp]\n";
    out += "n_states = " + std::to_string(b.mdp.n_states) + "\n";
    out += "n_actions = " + std::to_string(b.mdp.n_actions) + "\n";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", b.mdp.discount);
    out += std::string("gamma = ") + buf + "\n";
    std::string term;
    for (int s = 0; s < b.mdp.n_states; ++s) term += (s ? " " : "") + std::string(b.mdp.terminal[s] ? "1" : "0");
    out += "terminal = " + term + "\n";
    for (int s = 0; s < b.mdp.n_states; ++s)
        out += "r." + std::to_string(s) + " = " + detail::fmt_row(b.mdp.reward.row(s).transpose()) + "\n";
    for (int s = 0; s < b.mdp.n_states; ++s)
        for (int a = 0; a < b.mdp.n_actions; ++a)
            out += "p." + std::to_string(s) + "." + std::to_string(a) + " = " +
                   detail::fmt_row(b.mdp.transition[a].row(s).transpose()) + "\n";
    out += "[policy]\n";
    for (int s = 0; s < b.mdp.n_states; ++s)
        out += "pi." + std::to_string(s) + " = " + detail::fmt_row(b.policy.probs.row(s).transpose()) + "\n";
    out += "[mu]\nmu = " + detail::fmt_row(b.mu.mu) + "\n";
    return out;
}

/// Parses the [mdp]/[policy]/[mu] text format. Probability rows must sum
/// to 1 within 1e-9 or the parse is rejected.
inline MdpBundle mdp_from_text(const std::string& text) {
    const Config cfg = Config::parse(text);
    MdpBundle b;
    b.mdp.n_states = int(cfg.get_int("mdp.n_states"));
    b.mdp.n_actions = int(cfg.get_int("mdp.n_actions"));
    b.mdp.discount = cfg.get_double("mdp.gamma");
    const int n = b.mdp.n_states, m = b.mdp.n_actions;
    if (n <= 0 || m <= 0) throw ConfigError("mdp file: dimensions must be positive");
    auto term = cfg.get_doubles("mdp.terminal");
    if (int(term.size()) != n) throw ConfigError("mdp file: terminal mask has wrong length");
    b.mdp.terminal.assign(n, false);
    for (int s = 0; s < n; ++s) b.mdp.terminal[s] = term[s] != 0.0;
    b.mdp.reward = Eigen::MatrixXd(n, m);
    for (int s = 0; s < n; ++s) {
        auto row = cfg.get_doubles("mdp.r." + std::to_string(s));
        if (int(row.size()) != m) throw ConfigError("mdp file: reward row has wrong length");
        for (int a = 0; a < m; ++a) b.mdp.reward(s, a) = row[a];
    }
    b.mdp.transition.assign(m, Eigen::MatrixXd(n, n));
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < m; ++a) {
            auto row = cfg.get_doubles("mdp.p." + std::to_string(s) + "." + std::to_string(a));
            if (int(row.size()) != n) throw ConfigError("mdp file: transition row has wrong length");
            double sum = 0.0;
            for (int sp = 0; sp < n; ++sp) {
                b.mdp.transition[a](s, sp) = row[sp];
                sum += row[sp];
            }
            if (std::abs(sum - 1.0) > 1e-9)
                throw ConfigError("mdp file: transition row p." + std::to_string(s) + "." +
                                  std::to_string(a) + " does not sum to 1");
        }
    }
    b.policy.probs = Eigen::MatrixXd(n, m);
    for (int s = 0; s < n; ++s) {
        auto row = cfg.get_doubles("policy.pi." + std::to_string(s));
        if (int(row.size()) != m) throw ConfigError("mdp file: policy row has wrong length");
        double sum = 0.0;
        for (int a = 0; a < m; ++a) {
            b.policy.probs(s, a) = row[a];
            sum += row[a];
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ConfigError("mdp file: policy row pi." + std::to_string(s) + " does not sum to 1");
    }
    auto mu = cfg.get_doubles("mu.mu");
    if (int(mu.size()) != n) throw ConfigError("mdp file: mu has wrong length");
    b.mu.mu = Eigen::Map<Eigen::VectorXd>(mu.data(), n);
    if (std::abs(b.mu.mu.sum() - 1.0) > 1e-9) throw ConfigError("mdp file: mu does not sum to 1");
    b.mdp.validate(1e-9);
    return b;
}

inline void save_mdp_file(const std::string& path, const MdpBundle& b) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write mdp file: " + path);
    f << mdp_to_text(b);
}

inline MdpBundle load_mdp_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open mdp file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return mdp_from_text(ss.str());
}

}  // namespace kbl
