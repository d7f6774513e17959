#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace kbl {

/// State of the Adam optimizer: biased first/second moments and the step
/// counter used for bias correction.
struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState init(long n_params) {
        AdamState s;
        s.m = Eigen::VectorXd::Zero(n_params);
        s.v = Eigen::VectorXd::Zero(n_params);
        return s;
    }
};

/**
 * One canonical Adam update with bias correction, applied in place:
 *   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;  t <- t+1
 *   theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps).
 * A non-finite gradient aborts with a diagnostic rather than silently
 * poisoning the parameters.
 */
inline void adam_step(AdamState& state, Eigen::VectorXd& theta, const Eigen::VectorXd& grad,
                      double lr) {
    if (theta.size() != grad.size() || state.m.size() != theta.size())
        throw std::invalid_argument("adam_step: parameter/gradient/moment length mismatch");
    if (!grad.allFinite())
        throw std::runtime_error("adam_step: non-finite gradient at step " +
                                 std::to_string(state.step + 1));
    state.step += 1;
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(state.beta1, double(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, double(state.step));
    Eigen::VectorXd m_hat = state.m / c1;
    Eigen::VectorXd v_hat = state.v / c2;
    theta -= lr * (m_hat.array() / (v_hat.array().sqrt() + state.eps)).matrix();
}

/// Plain gradient step theta <- theta - lr * grad, with the same
/// non-finite-gradient guard as adam_step.
inline void sgd_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr) {
    if (theta.size() != grad.size())
        throw std::invalid_argument("sgd_step: parameter/gradient length mismatch");
    if (!grad.allFinite()) throw std::runtime_error("sgd_step: non-finite gradient");
    theta -= lr * grad;
}

}  // namespace kbl
