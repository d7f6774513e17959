#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbl/dataset.hpp"
#include "kbl/kernels.hpp"
#include "kbl/value_function.hpp"

namespace kbl {

/// Scalar objective value with its flat parameter gradient.
struct LossEstimate {
    double loss = 0.0;
    Eigen::VectorXd grad;
    std::string estimator;
    int batch_size = 0;
};

/**
 * Temporal-difference residuals of a batch under the current parameters:
 *   delta_i = r_i + gamma * V(s'_i) * (1 - terminal_i) - V(s_i),
 * with the full parameter gradient of each delta (the gamma term is
 * masked out on terminal transitions, so no value bootstraps past an
 * episode end).
 */
struct TdResidualBatch {
    Eigen::VectorXd residuals;       // n
    Eigen::MatrixXd residual_grads;  // n x |theta|
    Eigen::VectorXd values;          // V(s_i), reused by FVI
    Eigen::MatrixXd value_grads;     // grad V(s_i)
};

inline TdResidualBatch compute_td_residuals(const ValueFunction& vf,
                                            const std::vector<Transition>& batch, double gamma) {
    if (batch.empty()) throw std::invalid_argument("compute_td_residuals: empty batch");
    const int n = int(batch.size());
    const long p = vf.n_params();
    TdResidualBatch out;
    out.residuals.resize(n);
    out.residual_grads.resize(n, p);
    out.values.resize(n);
    out.value_grads.resize(n, p);
    for (int i = 0; i < n; ++i) {
        GradientRecord at_s = vf.value_and_grad(batch[i].state);
        GradientRecord at_sp = vf.value_and_grad(batch[i].next_state);
        double mask = batch[i].terminal ? 0.0 : 1.0;
        out.residuals[i] = batch[i].reward + gamma * at_sp.value * mask - at_s.value;
        out.residual_grads.row(i) = (gamma * mask * at_sp.grad - at_s.grad).transpose();
        out.values[i] = at_s.value;
        out.value_grads.row(i) = at_s.grad.transpose();
    }
    return out;
}

/// Gram matrix of the kernel over the batch's start states.
inline Eigen::MatrixXd batch_gram(const Kernel& kernel, const std::vector<Transition>& batch) {
    const int n = int(batch.size());
    Eigen::MatrixXd pts(n, batch.front().state.size());
    for (int i = 0; i < n; ++i) pts.row(i) = batch[i].state.transpose();
    return gram_matrix(kernel, pts);
}

/// Shared quadratic-form core: loss = scale * sum_{(i,j) in S} G_ij d_i d_j
/// and grad = 2 * scale * sum_S G_ij d_i grad_d_j, where S is all pairs
/// (include_diagonal) or off-diagonal pairs only.
inline LossEstimate pairwise_quadratic(const Eigen::MatrixXd& gram, const Eigen::VectorXd& deltas,
                                       const Eigen::MatrixXd& delta_grads, double scale,
                                       bool include_diagonal) {
    LossEstimate est;
    Eigen::VectorXd weights = gram * deltas;  // w_j = sum_i G_ij d_i
    double quad = deltas.dot(weights);
    if (!include_diagonal) {
        for (Eigen::Index i = 0; i < deltas.size(); ++i) {
            double diag = gram(i, i) * deltas[i];
            weights[i] -= diag;
            quad -= diag * deltas[i];
        }
    }
    est.loss = scale * quad;
    est.grad = 2.0 * scale * (delta_grads.transpose() * weights);
    est.batch_size = int(deltas.size());
    return est;
}

namespace loss_detail {

/// Start-state feature matrix for the linear-feature kernel.
inline Eigen::MatrixXd feature_rows(const Kernel& kernel, const std::vector<Transition>& batch) {
    const int n = int(batch.size());
    Eigen::MatrixXd phi(n, kernel.features.dim());
    for (int i = 0; i < n; ++i) phi.row(i) = kernel.features(batch[i].state).transpose();
    return phi;
}

/**
 * Pairwise quadratic form for the linear-feature kernel without
 * materializing the Gram matrix: k(s,s') = phi(s)^T phi(s') collapses
 * the double sum to ||Phi^T delta||^2, turning O(n^2) work into O(n d).
 * Algebraically identical to pairwise_quadratic on Phi Phi^T.
 */
inline LossEstimate linear_kernel_quadratic(const Kernel& kernel,
                                            const std::vector<Transition>& batch,
                                            const Eigen::VectorXd& deltas,
                                            const Eigen::MatrixXd& delta_grads, double scale,
                                            bool include_diagonal) {
    Eigen::MatrixXd phi = feature_rows(kernel, batch);
    Eigen::VectorXd proj = phi.transpose() * deltas;
    Eigen::VectorXd weights = phi * proj;  // w_j = sum_i phi_i.phi_j d_i
    double quad = deltas.dot(weights);
    if (!include_diagonal) {
        for (Eigen::Index i = 0; i < deltas.size(); ++i) {
            double diag = phi.row(i).squaredNorm() * deltas[i];
            weights[i] -= diag;
            quad -= diag * deltas[i];
        }
    }
    LossEstimate est;
    est.loss = scale * quad;
    est.grad = 2.0 * scale * (delta_grads.transpose() * weights);
    est.batch_size = int(deltas.size());
    return est;
}

}  // namespace loss_detail

/**
 * V-statistic kernel Bellman loss over a batch:
 *   (1/n^2) sum_{i,j} k(s_i, s_j) delta_i delta_j,
 * a positive-semidefinite quadratic form in the residuals, with gradient
 *   (2/n^2) sum_{i,j} k(s_i, s_j) delta_i grad delta_j.
 */
inline LossEstimate kernel_loss_vstat(const ValueFunction& vf, const std::vector<Transition>& batch,
                                      const Kernel& kernel, double gamma) {
    if (batch.empty()) throw std::invalid_argument("kernel_loss_vstat: empty batch");
    TdResidualBatch td = compute_td_residuals(vf, batch, gamma);
    const double n = double(batch.size());
    LossEstimate est =
        kernel.kind == Kernel::Kind::LinearFeature
            ? loss_detail::linear_kernel_quadratic(kernel, batch, td.residuals,
                                                   td.residual_grads, 1.0 / (n * n), true)
            : pairwise_quadratic(batch_gram(kernel, batch), td.residuals,
                                 td.residual_grads, 1.0 / (n * n), true);
    est.estimator = "v-stat";
    return est;
}

/// U-statistic variant: drops the diagonal, normalizes by n(n-1). An
/// unbiased estimate of the population loss, which may come out negative.
inline LossEstimate kernel_loss_ustat(const ValueFunction& vf, const std::vector<Transition>& batch,
                                      const Kernel& kernel, double gamma) {
    if (batch.size() < 2) throw std::invalid_argument("kernel_loss_ustat: need at least 2 transitions");
    TdResidualBatch td = compute_td_residuals(vf, batch, gamma);
    const double n = double(batch.size());
    LossEstimate est =
        kernel.kind == Kernel::Kind::LinearFeature
            ? loss_detail::linear_kernel_quadratic(kernel, batch, td.residuals,
                                                   td.residual_grads,
                                                   1.0 / (n * (n - 1.0)), false)
            : pairwise_quadratic(batch_gram(kernel, batch), td.residuals,
                                 td.residual_grads, 1.0 / (n * (n - 1.0)), false);
    est.estimator = "u-stat";
    return est;
}

/// Residual-gradient objective: mean squared TD error with the gradient
/// flowing through the next-state value as well.
inline LossEstimate rg_loss(const ValueFunction& vf, const std::vector<Transition>& batch,
                            double gamma) {
    if (batch.empty()) throw std::invalid_argument("rg_loss: empty batch");
    TdResidualBatch td = compute_td_residuals(vf, batch, gamma);
    const double n = double(batch.size());
    LossEstimate est;
    est.loss = td.residuals.squaredNorm() / n;
    est.grad = (2.0 / n) * (td.residual_grads.transpose() * td.residuals);
    est.estimator = "rg";
    est.batch_size = int(n);
    return est;
}

/**
 * One fitted-value-iteration regression step: targets
 *   y_i = r_i + gamma * V_target(s'_i) * (1 - terminal_i)
 * are computed from a frozen parameter copy, and the gradient flows only
 * through V_theta(s_i).
 */
inline LossEstimate fvi_step_loss(const ValueFunction& vf, const Eigen::VectorXd& target_params,
                                  const std::vector<Transition>& batch, double gamma) {
    if (batch.empty()) throw std::invalid_argument("fvi_step_loss: empty batch");
    if (target_params.size() != vf.theta.size())
        throw std::invalid_argument("fvi_step_loss: target parameter length mismatch");
    ValueFunction frozen = vf;
    frozen.theta = target_params;
    const int n = int(batch.size());
    TdResidualBatch td = compute_td_residuals(vf, batch, gamma);
    LossEstimate est;
    est.grad = Eigen::VectorXd::Zero(vf.n_params());
    est.loss = 0.0;
    for (int i = 0; i < n; ++i) {
        double mask = batch[i].terminal ? 0.0 : 1.0;
        double y = batch[i].reward + gamma * mask * frozen.value(batch[i].next_state);
        double err = td.values[i] - y;
        est.loss += err * err;
        est.grad += 2.0 * err * td.value_grads.row(i).transpose();
    }
    est.loss /= n;
    est.grad /= double(n);
    est.estimator = "fvi";
    est.batch_size = n;
    return est;
}

/// Single-transition TD(0) semi-gradient step; returns the new flat
/// parameter vector theta + lr * delta * grad V(s).
inline Eigen::VectorXd td0_update(const ValueFunction& vf, const Transition& t, double gamma,
                                  double lr) {
    GradientRecord at_s = vf.value_and_grad(t.state);
    double mask = t.terminal ? 0.0 : 1.0;
    double delta = t.reward + gamma * mask * vf.value(t.next_state) - at_s.value;
    return vf.theta + lr * delta * at_s.grad;
}

struct EvalMetrics {
    double mse = 0.0;                // mean (V(s) - V*(s))^2 over eval states
    double empirical_bellman = 0.0;  // mean squared TD error over the batch (biased proxy)
};

inline EvalMetrics compute_metrics(const ValueFunction& vf, const std::vector<Eigen::VectorXd>& eval_states,
                                   const Eigen::VectorXd& oracle_values,
                                   const std::vector<Transition>& batch, double gamma) {
    if (int(eval_states.size()) != oracle_values.size())
        throw std::invalid_argument("compute_metrics: eval state/value length mismatch");
    EvalMetrics m;
    for (std::size_t i = 0; i < eval_states.size(); ++i) {
        double d = vf.value(eval_states[i]) - oracle_values[Eigen::Index(i)];
        m.mse += d * d;
    }
    if (!eval_states.empty()) m.mse /= double(eval_states.size());
    if (!batch.empty()) {
        TdResidualBatch td = compute_td_residuals(vf, batch, gamma);
        m.empirical_bellman = td.residuals.squaredNorm() / double(batch.size());
    }
    return m;
}

}  // namespace kbl
