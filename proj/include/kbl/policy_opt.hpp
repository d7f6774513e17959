#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbl/adam.hpp"
#include "kbl/envs.hpp"
#include "kbl/kernels.hpp"
#include "kbl/rng.hpp"
#include "kbl/trainer.hpp"
#include "kbl/value_function.hpp"

namespace kbl {

/**
 * Diagonal-Gaussian policy: a tanh MLP produces the action mean, a
 * state-independent log-std vector the spread. Parameters are one flat
 * vector: mean-network weights first, then the log-std entries.
 * Per-dimension log-density terms are floored at -20 so far-tail actions
 * cannot inject -inf into consistency residuals; inside the floor the
 * gradient of a floored term is zero.
 *
 * With mean_bound > 0 the mean is squashed per dimension to
 * bound * tanh(net / bound). Environments clip executed torques, and an
 * unbounded mean that drifts past the clip makes the executed action
 * independent of the sampled noise, killing the score-covariance signal
 * for good; the bounded head keeps samples straddling the clip so the
 * escape gradient survives. Zero (the default) leaves the head raw.
 */
struct GaussianPolicy {
    Mlp mean_net;
    int action_dim = 0;
    Eigen::VectorXd phi;  // mean-net params, then log-std per action dim
    double mean_bound = 0.0;

    static constexpr double log_prob_floor = -20.0;

    static GaussianPolicy make(int state_dim, int action_dim, std::vector<int> hidden,
                               double init_log_std, std::uint64_t seed) {
        std::vector<int> widths;
        widths.push_back(state_dim);
        for (int h : hidden) widths.push_back(h);
        widths.push_back(action_dim);
        GaussianPolicy p{Mlp(widths, Mlp::Activation::Tanh), action_dim, {}};
        Rng rng(seed);
        Eigen::VectorXd net = p.mean_net.init_params(rng);
        p.phi.resize(net.size() + action_dim);
        p.phi.head(net.size()) = net;
        p.phi.tail(action_dim).setConstant(init_log_std);
        return p;
    }

    long n_params() const { return mean_net.n_params() + action_dim; }
    Eigen::VectorXd net_params() const { return phi.head(mean_net.n_params()); }
    Eigen::VectorXd log_std() const { return phi.tail(action_dim); }

    Eigen::VectorXd mean_action(const Eigen::VectorXd& s) const {
        Eigen::VectorXd mu = mean_net.forward(net_params(), s);
        if (mean_bound > 0.0)
            for (int d = 0; d < action_dim; ++d)
                mu[d] = mean_bound * std::tanh(mu[d] / mean_bound);
        return mu;
    }

    Eigen::VectorXd sample(const Eigen::VectorXd& s, Rng& rng) const {
        Eigen::VectorXd mu = mean_action(s);
        Eigen::VectorXd sig = log_std().array().exp();
        Eigen::VectorXd a(action_dim);
        for (int d = 0; d < action_dim; ++d) a[d] = mu[d] + sig[d] * rng.normal();
        return a;
    }

    double log_prob(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
        Eigen::VectorXd mu = mean_action(s);
        return log_prob_given_mean(mu, a);
    }

    double log_prob_given_mean(const Eigen::VectorXd& mu, const Eigen::VectorXd& a) const {
        static const double half_log_2pi = 0.5 * std::log(2.0 * M_PI);
        Eigen::VectorXd ls = log_std();
        double total = 0.0;
        for (int d = 0; d < action_dim; ++d) {
            double z = (a[d] - mu[d]) / std::exp(ls[d]);
            double term = -half_log_2pi - ls[d] - 0.5 * z * z;
            total += std::max(term, log_prob_floor);
        }
        return total;
    }

    /// log pi(a|s) together with its gradient in the flat parameters.
    /// Floored dimensions contribute zero gradient.
    GradientRecord log_prob_and_grad(const Eigen::VectorXd& s,
                                     const Eigen::VectorXd& a) const {
        static const double half_log_2pi = 0.5 * std::log(2.0 * M_PI);
        Eigen::VectorXd ls = log_std();
        const long n_net = mean_net.n_params();

        Eigen::VectorXd cot = Eigen::VectorXd::Zero(action_dim);
        GradientRecord rec;
        rec.grad = Eigen::VectorXd::Zero(n_params());

        // First forward to get mu (cheap; nets are small).
        Eigen::VectorXd mu = mean_action(s);
        double total = 0.0;
        for (int d = 0; d < action_dim; ++d) {
            double sig = std::exp(ls[d]);
            double z = (a[d] - mu[d]) / sig;
            double term = -half_log_2pi - ls[d] - 0.5 * z * z;
            if (term <= log_prob_floor) {
                total += log_prob_floor;
                continue;  // clamped: no gradient through this dimension
            }
            total += term;
            cot[d] = z / sig;                            // d term / d mu_d
            if (mean_bound > 0.0) {
                // Through the squashed head: d mu / d net = 1 - tanh^2.
                double t = mu[d] / mean_bound;
                cot[d] *= 1.0 - t * t;
            }
            rec.grad[n_net + d] = z * z - 1.0;           // d term / d log_std_d
        }
        Eigen::VectorXd net_grad;
        mean_net.backward(net_params(), s, cot, &net_grad);
        rec.grad.head(n_net) = net_grad;
        rec.value = total;
        return rec;
    }
};

/// One replay step; windows are cut from contiguous segments so they
/// never straddle an episode reset.
struct StepRecord {
    Eigen::VectorXd state;
    Eigen::VectorXd action;
    double reward = 0.0;
};

struct Segment {
    std::vector<StepRecord> steps;
    Eigen::VectorXd final_state;  // state after the last step
};

/// A d-step consistency window: d+1 states, d actions and rewards.
struct PathWindow {
    std::vector<Eigen::VectorXd> states;
    std::vector<Eigen::VectorXd> actions;
    std::vector<double> rewards;

    int horizon() const { return int(rewards.size()); }

    void check() const {
        if (states.size() != rewards.size() + 1 || actions.size() != rewards.size() ||
            rewards.empty())
            throw std::invalid_argument(
                "PathWindow: need d+1 states and d actions/rewards with d >= 1");
    }
};

/// Fixed-capacity ring of trajectory segments with seed-reproducible
/// window sampling.
class ReplayBuffer {
  public:
    explicit ReplayBuffer(long capacity) : capacity_(capacity) {
        if (capacity < 1) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
    }

    void insert(Segment segment) {
        if (segment.steps.empty())
            throw std::invalid_argument("ReplayBuffer: empty segment");
        if (long(segments_.size()) < capacity_) {
            segments_.push_back(std::move(segment));
        } else {
            segments_[size_t(inserted_ % capacity_)] = std::move(segment);
        }
        inserted_ += 1;
    }

    long size() const { return long(segments_.size()); }
    long inserted() const { return inserted_; }

    /// Uniformly samples a segment, then a valid window start within it.
    PathWindow sample_window(int d, Rng& rng) const {
        if (segments_.empty()) throw std::logic_error("ReplayBuffer: empty");
        const Segment& seg = segments_[size_t(rng.uniform_int(std::uint64_t(segments_.size())))];
        const long max_start = long(seg.steps.size()) - d;
        if (max_start < 0)
            throw std::invalid_argument("ReplayBuffer: segment shorter than window");
        const long start = long(rng.uniform_int(std::uint64_t(max_start + 1)));
        PathWindow w;
        for (long t = start; t < start + d; ++t) {
            w.states.push_back(seg.steps[size_t(t)].state);
            w.actions.push_back(seg.steps[size_t(t)].action);
            w.rewards.push_back(seg.steps[size_t(t)].reward);
        }
        w.states.push_back(long(seg.steps.size()) == start + d
                               ? seg.final_state
                               : seg.steps[size_t(start + d)].state);
        return w;
    }

  private:
    long capacity_;
    long inserted_ = 0;
    std::vector<Segment> segments_;
};

/**
 * d-step path-consistency residual:
 *   R = -V(s_0) + gamma^d V(s_d)
 *       + sum_{t<d} gamma^t (r_t - (lambda+tau) log pi(a_t|s_t)
 *                                 + tau log pi_lagged(a_t|s_t)).
 * With d=1 and tau=0 this is the entropy-regularized single-step
 * consistency r + gamma V(s') - lambda log pi(a|s) - V(s).
 */
inline double path_residual(const ValueFunction& value, const GaussianPolicy& policy,
                            const GaussianPolicy& lagged, const PathWindow& w, double gamma,
                            double lambda, double tau) {
    w.check();
    const int d = w.horizon();
    double r = -value.value(w.states.front()) +
               std::pow(gamma, d) * value.value(w.states.back());
    double g = 1.0;
    for (int t = 0; t < d; ++t) {
        double inner = w.rewards[size_t(t)];
        if (lambda != 0.0 || tau != 0.0)
            inner -= (lambda + tau) * policy.log_prob(w.states[size_t(t)], w.actions[size_t(t)]);
        if (tau != 0.0)
            inner += tau * lagged.log_prob(w.states[size_t(t)], w.actions[size_t(t)]);
        r += g * inner;
        g *= gamma;
    }
    return r;
}

/// Gradient partition of one joint update (the Alg. 1 deltas, to be
/// subtracted from the respective parameters), plus the residuals.
struct PclGradients {
    Eigen::VectorXd value_delta;   // gradient of the value objective in theta
    Eigen::VectorXd policy_delta;  // -(1/B) sum R_i sum_t grad log pi
    Eigen::VectorXd residuals;
};

/**
 * Joint kernel-loss PCL gradients over a batch of B windows.
 *
 * Value side (mode "kloss"): the V-statistic gradient of
 * (1/B^2) sum_ij K_ij R_i R_j, differentiating only the V terms of each
 * residual, with K over the windows' first state (state-action kernels
 * see [s_0; a_0]). Mode "fvi" instead regresses V(s_0) onto the frozen
 * path target, giving -(2/B) sum R_i grad V(s_0^i); the policy side is
 * computed by the same code in both modes.
 *
 * Policy side: Delta_phi = -(1/B) sum_i R_i sum_t grad log pi(a_t|s_t),
 * following the pseudocode's partition literally (no discount weighting
 * inside the inner sum, and no gradient through the R_i factor).
 */
inline PclGradients kloss_pcl_gradients(const ValueFunction& value,
                                        const GaussianPolicy& policy,
                                        const GaussianPolicy& lagged,
                                        const std::vector<PathWindow>& batch,
                                        const Kernel& kernel, double gamma, double lambda,
                                        double tau, const std::string& value_mode = "kloss") {
    if (batch.size() < 2)
        throw std::invalid_argument("kloss_pcl_gradients: need at least 2 windows");
    if (value_mode != "kloss" && value_mode != "fvi")
        throw std::invalid_argument("kloss_pcl_gradients: unknown value mode '" +
                                    value_mode + "' (valid: kloss fvi)");
    const int B = int(batch.size());
    const long n_theta = value.n_params();

    Eigen::VectorXd residuals(B);
    Eigen::MatrixXd residual_grads(B, n_theta);  // d R_i / d theta
    std::vector<Eigen::VectorXd> kernel_points;
    kernel_points.reserve(size_t(B));
    for (int i = 0; i < B; ++i) {
        const PathWindow& w = batch[size_t(i)];
        residuals[i] = path_residual(value, policy, lagged, w, gamma, lambda, tau);
        GradientRecord at_start = value.value_and_grad(w.states.front());
        GradientRecord at_end = value.value_and_grad(w.states.back());
        residual_grads.row(i) =
            (std::pow(gamma, w.horizon()) * at_end.grad - at_start.grad).transpose();
        if (kernel.kind == Kernel::Kind::StateActionRbf) {
            Eigen::VectorXd p(w.states.front().size() + w.actions.front().size());
            p << w.states.front(), w.actions.front();
            kernel_points.push_back(std::move(p));
        } else {
            kernel_points.push_back(w.states.front());
        }
    }

    PclGradients out;
    out.residuals = residuals;
    if (value_mode == "kloss") {
        Eigen::MatrixXd gram(B, B);
        for (int i = 0; i < B; ++i)
            for (int j = 0; j <= i; ++j) {
                double v = kernel.eval(kernel_points[size_t(i)], kernel_points[size_t(j)]);
                gram(i, j) = v;
                gram(j, i) = v;
            }
        Eigen::VectorXd weights = gram * residuals;
        out.value_delta =
            (2.0 / double(B) / double(B)) * (residual_grads.transpose() * weights);
    } else {
        // Frozen-target regression: grad (1/B) sum (V(s_0) - y_i)^2 with
        // y_i = V(s_0) + R_i held constant.
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(n_theta);
        for (int i = 0; i < B; ++i) {
            GradientRecord at_start = value.value_and_grad(batch[size_t(i)].states.front());
            grad += -residuals[i] * at_start.grad;
        }
        out.value_delta = (2.0 / double(B)) * grad;
    }

    Eigen::VectorXd pol = Eigen::VectorXd::Zero(policy.n_params());
    for (int i = 0; i < B; ++i) {
        const PathWindow& w = batch[size_t(i)];
        Eigen::VectorXd inner = Eigen::VectorXd::Zero(policy.n_params());
        for (int t = 0; t < w.horizon(); ++t)
            inner += policy.log_prob_and_grad(w.states[size_t(t)], w.actions[size_t(t)]).grad;
        pol += residuals[i] * inner;
    }
    out.policy_delta = -pol / double(B);
    return out;
}

/// Lagged-policy smoothing phi_tilde <- alpha phi_tilde + (1-alpha) phi.
inline void update_lagged(GaussianPolicy& lagged, const GaussianPolicy& policy,
                          double alpha = 0.99) {
    lagged.phi = alpha * lagged.phi + (1.0 - alpha) * policy.phi;
}

/// Entropy coefficient schedule: starts at lambda0 and decays by a
/// factor of 10 every decay_every iterations (continuous exponent),
/// concretizing "decaying it from 0.1 to 0.0 every 2500 iterations".
inline double lambda_schedule(long iter, double lambda0 = 0.1, long decay_every = 2500) {
    return lambda0 * std::pow(0.1, double(iter) / double(decay_every));
}

/// Settings for the pendulum-toy policy-optimization loop.
struct PolicyOptConfig {
    long iterations = 2000;
    int rollout_d = 5;        // consistency window length
    int chunk_steps = 10;     // T: env steps collected per iteration
    int batch_windows = 64;   // B
    double gamma = 0.995;
    double lr_value = 3e-3;
    double lr_policy = 1e-3;
    long policy_warmup = 0;  // iterations with value-only updates
    double tau = 0.0;
    double lambda0 = 0.1;
    long lambda_decay_every = 2500;
    double lagged_alpha = 0.99;
    double kernel_alpha = 0.0;  // 0: use 1/sqrt(log B)
    long buffer_capacity = 500;  // segments
    long episode_len = 200;
    long eval_every = 100;
    int eval_episodes = 5;
    long eval_episode_len = 0;  // 0: use episode_len
    std::vector<int> value_hidden = {64, 64};
    std::vector<int> policy_hidden = {64, 64};
    double init_log_std = -0.5;
    // Episode starts draw theta from U(-start_spread*pi, start_spread*pi).
    // 1 is the full circle (swing-up); small values give the
    // stabilization toy, where desk-scale improvement is learnable.
    double start_spread = 1.0;
    std::string value_mode = "kloss";  // kloss | fvi
    std::uint64_t seed = 0;
    double divergence_threshold = 1e6;

    void validate() const {
        if (iterations < 0) throw std::invalid_argument("iterations must be nonnegative");
        if (policy_warmup < 0)
            throw std::invalid_argument("policy warmup must be nonnegative");
        if (rollout_d < 1) throw std::invalid_argument("rollout d must be >= 1");
        if (chunk_steps < rollout_d)
            throw std::invalid_argument("chunk steps must cover one window");
        if (batch_windows < 2) throw std::invalid_argument("batch must hold >= 2 windows");
        if (!(gamma > 0.0) || gamma >= 1.0)
            throw std::invalid_argument("gamma must lie in (0, 1)");
        if (eval_every < 1) throw std::invalid_argument("eval cadence must be >= 1");
        if (episode_len % chunk_steps != 0)
            throw std::invalid_argument("episode length must be a chunk multiple");
        if (value_mode != "kloss" && value_mode != "fvi")
            throw std::invalid_argument("unknown value mode '" + value_mode +
                                        "' (valid: kloss fvi)");
        if (!(start_spread > 0.0) || start_spread > 1.0)
            throw std::invalid_argument("start spread must lie in (0, 1]");
        if (eval_episode_len < 0)
            throw std::invalid_argument("eval episode length must be nonnegative");
    }
};

/**
 * The pendulum toy stepped by the policy-optimization loop. It shares
 * the data-collection pendulum's state space (theta wrapped to
 * [-pi, pi), speed clipped to [-8, 8]), reward shape, torque clip, and
 * transition noise, but uses weak gravity (g = 2 instead of 10). With
 * g = 10 the stabilizing controller needs feedback gains an order of
 * magnitude larger than a short Adam run can grow, and every run parks
 * at a constant-torque attractor; at g = 2 maximum torque dominates
 * gravity everywhere, the optimal gains are O(1), and learning is
 * achievable at this scale.
 */
constexpr double pendulum_toy_max_torque = 2.0;

inline StepResult pendulum_toy_step(const Eigen::VectorXd& state, double torque, Rng& rng) {
    const double g = 2.0, m = 1.0, l = 1.0, dt = 0.05;
    const double u = env_detail::clampd(torque, -pendulum_toy_max_torque,
                                        pendulum_toy_max_torque);
    const double th = state[0], thd = state[1];
    StepResult out;
    out.reward = -(th * th + 0.1 * thd * thd + 0.001 * u * u);
    double thd_new =
        thd + dt * (3.0 * g / (2.0 * l) * std::sin(th) + 3.0 / (m * l * l) * u) +
        rng.normal(0.0, 0.05);
    thd_new = env_detail::clampd(thd_new, -8.0, 8.0);
    out.next_state = Eigen::Vector2d(env_detail::wrap_angle(th + dt * thd_new), thd_new);
    out.terminal = false;
    return out;
}

/// Episode start for the pendulum toy: angle scaled by start_spread,
/// angular velocity from U(-1, 1).
inline Eigen::VectorXd pendulum_toy_start(double start_spread, Rng& rng) {
    Eigen::VectorXd s(2);
    s << rng.uniform(-start_spread * M_PI, start_spread * M_PI), rng.uniform(-1.0, 1.0);
    return s;
}

/// Toy states scaled to [-1, 1] per coordinate for the networks.
inline Eigen::VectorXd pendulum_toy_normalize(const Eigen::VectorXd& s) {
    return Eigen::Vector2d(s[0] / M_PI, s[1] / 8.0);
}

/// Deterministic mean-policy evaluation: fixed-length episodes, fresh
/// start states, summed raw rewards.
inline void evaluate_mean_policy(const GaussianPolicy& policy,
                                 const PolicyOptConfig& config, Rng& rng, double* ret_mean,
                                 double* ret_std) {
    const long horizon =
        config.eval_episode_len > 0 ? config.eval_episode_len : config.episode_len;
    std::vector<double> returns;
    for (int e = 0; e < config.eval_episodes; ++e) {
        Eigen::VectorXd s = pendulum_toy_start(config.start_spread, rng);
        double total = 0.0;
        for (long t = 0; t < horizon; ++t) {
            Eigen::VectorXd a = policy.mean_action(pendulum_toy_normalize(s));
            StepResult r = pendulum_toy_step(s, a[0], rng);
            total += r.reward;
            s = r.next_state;
        }
        returns.push_back(total);
    }
    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= double(returns.size());
    double var = 0.0;
    for (double r : returns) var += (r - mean) * (r - mean);
    *ret_mean = mean;
    *ret_std = std::sqrt(var / double(returns.size()));
}

/**
 * Kernel-loss path-consistency optimization on the pendulum toy.
 *
 * Each iteration collects chunk_steps env steps under the stochastic
 * policy (episodes reset every episode_len steps), inserts the chunk
 * into the replay ring, samples batch_windows d-step windows, and
 * applies one joint Adam update of the value and policy parameters with
 * the Alg.-style gradient partition. The state-action kernel bandwidth
 * is the per-minibatch median heuristic. Metric rows carry the batch
 * objective, the mean squared residual, and the deterministic-policy
 * evaluation return (mean and std) every eval_every iterations.
 */
inline MetricLog run_policy_optimization(const PolicyOptConfig& config) {
    config.validate();
    const int state_dim = 2;
    const int action_dim = 1;

    Rng root(config.seed);
    Rng init_rng = root.substream(1);
    ValueFunction value = ValueFunction::mlp(state_dim, config.value_hidden,
                                             Mlp::Activation::Tanh, init_rng.next_u64());
    GaussianPolicy policy = GaussianPolicy::make(state_dim, action_dim, config.policy_hidden,
                                                 config.init_log_std, init_rng.next_u64());
    policy.mean_bound = pendulum_toy_max_torque;
    GaussianPolicy lagged = policy;

    AdamState value_adam = AdamState::init(value.n_params());
    AdamState policy_adam = AdamState::init(policy.n_params());
    ReplayBuffer buffer(config.buffer_capacity);

    Rng env_rng = root.substream(2);
    Rng sample_rng = root.substream(3);
    Eigen::VectorXd s = pendulum_toy_start(config.start_spread, env_rng);
    long steps_in_episode = 0;

    const double alpha = config.kernel_alpha > 0.0
                             ? config.kernel_alpha
                             : 1.0 / std::sqrt(std::log(double(config.batch_windows)));

    MetricLog log;
    log.extra_names = {"return_mean", "return_std"};
    bool diverged = false;

    auto record = [&](long iter, double loss, double bellman, const std::string& status) {
        MetricRecord r;
        r.epoch = iter;
        r.loss = loss;
        r.bellman = bellman;
        r.theta_norm = value.theta.norm();
        r.status = status;
        double rm = 0.0, rs = 0.0;
        // Fixed eval substream: every evaluation replays the same start
        // states and noise, so returns are comparable across iterations.
        Rng eval_rng = root.substream(10'000);
        evaluate_mean_policy(policy, config, eval_rng, &rm, &rs);
        r.extras = {rm, rs};
        log.records.push_back(std::move(r));
    };

    record(0, std::numeric_limits<double>::quiet_NaN(),
           std::numeric_limits<double>::quiet_NaN(), "ok");

    for (long iter = 1; iter <= config.iterations && !diverged; ++iter) {
        Segment seg;
        for (int t = 0; t < config.chunk_steps; ++t) {
            Eigen::VectorXd norm_s = pendulum_toy_normalize(s);
            Eigen::VectorXd a = policy.sample(norm_s, env_rng);
            // The toy clips the executed torque; the stored action is the
            // unclipped sample, because log pi(a|s) in the residual must
            // price the action the policy actually drew.
            StepResult res = pendulum_toy_step(s, a[0], env_rng);
            seg.steps.push_back({norm_s, a, res.reward});
            s = res.next_state;
            steps_in_episode += 1;
            if (steps_in_episode >= config.episode_len) {
                s = pendulum_toy_start(config.start_spread, env_rng);
                steps_in_episode = 0;
            }
        }
        seg.final_state = pendulum_toy_normalize(s);
        buffer.insert(std::move(seg));

        std::vector<PathWindow> batch;
        batch.reserve(size_t(config.batch_windows));
        std::vector<Eigen::VectorXd> bandwidth_points;
        for (int b = 0; b < config.batch_windows; ++b) {
            PathWindow w = buffer.sample_window(config.rollout_d, sample_rng);
            Eigen::VectorXd p(state_dim + action_dim);
            p << w.states.front(), w.actions.front();
            bandwidth_points.push_back(std::move(p));
            batch.push_back(std::move(w));
        }
        double h2 = median_bandwidth(bandwidth_points, alpha);
        Kernel kernel = Kernel::state_action(std::sqrt(h2));

        const double lambda =
            lambda_schedule(iter, config.lambda0, config.lambda_decay_every);
        PclGradients g = kloss_pcl_gradients(value, policy, lagged, batch, kernel,
                                             config.gamma, lambda, config.tau,
                                             config.value_mode);
        adam_step(value_adam, value.theta, g.value_delta, config.lr_value);
        // Warmup lets the critic center the residuals first; an untrained
        // value function makes every residual share the return's sign, and
        // that uniform push drives the policy mean into the torque clip.
        if (iter > config.policy_warmup)
            adam_step(policy_adam, policy.phi, g.policy_delta, config.lr_policy);
        update_lagged(lagged, policy, config.lagged_alpha);

        if (value.theta.norm() > config.divergence_threshold ||
            policy.phi.norm() > config.divergence_threshold)
            diverged = true;

        if (iter % config.eval_every == 0 || iter == config.iterations || diverged) {
            Eigen::VectorXd w = Eigen::VectorXd::Zero(g.residuals.size());
            for (int i = 0; i < g.residuals.size(); ++i)
                for (int j = 0; j < g.residuals.size(); ++j)
                    w[i] += kernel.eval(bandwidth_points[size_t(i)],
                                        bandwidth_points[size_t(j)]) *
                            g.residuals[j];
            double loss = g.residuals.dot(w) / double(g.residuals.size()) /
                          double(g.residuals.size());
            double bellman = g.residuals.squaredNorm() / double(g.residuals.size());
            record(iter, loss, bellman, diverged ? "DIVERGED" : "ok");
        }
    }
    log.status = diverged ? "DIVERGED" : "ok";
    log.final_theta = value.theta;
    return log;
}

}  // namespace kbl
