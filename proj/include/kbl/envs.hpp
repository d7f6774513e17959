#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbl/dataset.hpp"
#include "kbl/rng.hpp"
#include "kbl/tabular.hpp"

namespace kbl {

/// Result of one simulator step.
struct StepResult {
    Eigen::VectorXd next_state;
    double reward = 0.0;
    bool terminal = false;
};

namespace env_detail {

inline double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

/// Wraps an angle into [-pi, pi).
inline double wrap_angle(double a) {
    const double two_pi = 2.0 * M_PI;
    a = std::fmod(a + M_PI, two_pi);
    if (a < 0) a += two_pi;
    return a - M_PI;
}

/// Distance from point p to the segment [a, b] in the plane.
inline double segment_distance(double px, double py, double ax, double ay, double bx,
                               double by) {
    const double vx = bx - ax, vy = by - ay;
    const double wx = px - ax, wy = py - ay;
    const double vv = vx * vx + vy * vy;
    double t = vv > 0 ? (wx * vx + wy * vy) / vv : 0.0;
    t = clampd(t, 0.0, 1.0);
    const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

}  // namespace env_detail

/**
 * Continuous-state benchmark environments with two-dimensional state.
 * Each step draws its process noise from the caller's Rng in a fixed
 * order, so a given seed reproduces trajectories bitwise.
 *
 * mountain-car   state (x, v), 3 actions {reverse, coast, forward}.
 *                v' = v + 0.001 (a-1) - 0.0025 cos(3x) + N(0, 0.0005^2),
 *                x' = x + v', velocity zeroed at the left wall. Reward -1
 *                per step, terminal at x >= 0.5.
 * cartpole       autonomous pole subsystem (theta, theta_dot) of the
 *                cart-pole with a fixed +-10 N push; standard constants
 *                g = 9.8, m_c = 1, m_p = 0.1, half-length 0.5, dt = 0.02,
 *                Euler integration, N(0, 0.01^2) noise on theta_dot.
 *                Reward +1 per step, terminal at |theta| > 12 degrees.
 * puddle-world   (x, y) in [0,1]^2, 4 axis moves of 0.05 with
 *                N(0, 0.01^2) noise per coordinate. Reward
 *                -1 - 400 * depth(s') where depth is penetration into
 *                either capsule-shaped puddle; terminal at x + y >= 1.9.
 * pendulum       (theta, theta_dot) with continuous torque in [-2, 2];
 *                g = 10, m = l = 1, dt = 0.05, N(0, 0.05^2) noise on
 *                theta_dot, angle wrapped to [-pi, pi), speed clipped to
 *                [-8, 8]. Reward -(theta^2 + 0.1 theta_dot^2 + 0.001 u^2)
 *                at the pre-step state; no terminal states.
 */
struct Environment {
    enum class Kind { MountainCar, CartPole, PuddleWorld, Pendulum };
    Kind kind = Kind::MountainCar;

    static Environment mountain_car() { return Environment{Kind::MountainCar}; }
    static Environment cartpole() { return Environment{Kind::CartPole}; }
    static Environment puddle_world() { return Environment{Kind::PuddleWorld}; }
    static Environment pendulum() { return Environment{Kind::Pendulum}; }

    static Environment by_name(const std::string& name) {
        if (name == "mountain-car") return mountain_car();
        if (name == "cartpole") return cartpole();
        if (name == "puddle-world") return puddle_world();
        if (name == "pendulum") return pendulum();
        throw std::invalid_argument(
            "unknown environment '" + name +
            "' (expected mountain-car, cartpole, puddle-world, or pendulum)");
    }

    std::string name() const {
        switch (kind) {
            case Kind::MountainCar: return "mountain-car";
            case Kind::CartPole: return "cartpole";
            case Kind::PuddleWorld: return "puddle-world";
            case Kind::Pendulum: return "pendulum";
        }
        return "?";
    }

    int state_dim() const { return 2; }

    /// Pendulum takes a continuous torque; the others an action index.
    bool continuous_actions() const { return kind == Kind::Pendulum; }

    int n_actions() const {
        switch (kind) {
            case Kind::MountainCar: return 3;
            case Kind::CartPole: return 2;
            case Kind::PuddleWorld: return 4;
            case Kind::Pendulum: return 0;
        }
        return 0;
    }

    double max_torque() const { return 2.0; }

    Eigen::VectorXd state_lo() const {
        Eigen::VectorXd lo(2);
        switch (kind) {
            case Kind::MountainCar: lo << -1.2, -0.07; break;
            case Kind::CartPole: lo << -12.0 * M_PI / 180.0, -2.0; break;
            case Kind::PuddleWorld: lo << 0.0, 0.0; break;
            case Kind::Pendulum: lo << -M_PI, -8.0; break;
        }
        return lo;
    }

    Eigen::VectorXd state_hi() const {
        Eigen::VectorXd hi(2);
        switch (kind) {
            case Kind::MountainCar: hi << 0.6, 0.07; break;
            case Kind::CartPole: hi << 12.0 * M_PI / 180.0, 2.0; break;
            case Kind::PuddleWorld: hi << 1.0, 1.0; break;
            case Kind::Pendulum: hi << M_PI, 8.0; break;
        }
        return hi;
    }

    /// True if the state already satisfies the termination predicate.
    bool is_terminal_state(const Eigen::VectorXd& s) const {
        switch (kind) {
            case Kind::MountainCar: return s[0] >= 0.5;
            case Kind::CartPole: return std::abs(s[0]) > 12.0 * M_PI / 180.0;
            case Kind::PuddleWorld: return s[0] + s[1] >= 1.9;
            case Kind::Pendulum: return false;
        }
        return false;
    }

    /// Penetration depth into the deepest puddle at (x, y), zero outside.
    static double puddle_depth(double x, double y) {
        const double radius = 0.1;
        double d1 = env_detail::segment_distance(x, y, 0.10, 0.75, 0.45, 0.75);
        double d2 = env_detail::segment_distance(x, y, 0.45, 0.40, 0.45, 0.80);
        double depth = std::max(radius - std::min(d1, d2), 0.0);
        return depth;
    }

    /// Draws an episode start state (used by on-policy rollouts).
    Eigen::VectorXd initial_state(Rng& rng) const {
        Eigen::VectorXd s(2);
        switch (kind) {
            case Kind::MountainCar:
                s << rng.uniform(-0.6, -0.4), 0.0;
                break;
            case Kind::CartPole:
                s << rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05);
                break;
            case Kind::PuddleWorld:
                do {
                    s << rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0);
                } while (is_terminal_state(s));
                break;
            case Kind::Pendulum:
                s << rng.uniform(-M_PI, M_PI), rng.uniform(-1.0, 1.0);
                break;
        }
        return s;
    }

    /**
     * Simulates one step from `state` under `action`. The state must be
     * finite and (up to rounding slack) inside the declared bounds; the
     * returned state is clipped back into them. Exactly one Gaussian
     * noise draw is consumed per step (two for the puddle world).
     */
    StepResult step(const Eigen::VectorXd& state, const Eigen::VectorXd& action,
                    Rng& rng) const {
        if (state.size() != 2 || !state.allFinite())
            throw std::invalid_argument(name() + ": state must be a finite 2-vector");
        if (action.size() < 1 || !action.allFinite())
            throw std::invalid_argument(name() + ": action must be finite");
        StepResult out;
        switch (kind) {
            case Kind::MountainCar: {
                const int a = int(action[0]);
                if (a < 0 || a > 2)
                    throw std::invalid_argument("mountain-car: action index out of range");
                double x = state[0], v = state[1];
                v += 0.001 * (a - 1) - 0.0025 * std::cos(3.0 * x) +
                     rng.normal(0.0, 0.0005);
                v = env_detail::clampd(v, -0.07, 0.07);
                x += v;
                if (x < -1.2) {
                    x = -1.2;
                    v = 0.0;
                }
                x = env_detail::clampd(x, -1.2, 0.6);
                out.next_state = Eigen::Vector2d(x, v);
                out.reward = -1.0;
                out.terminal = x >= 0.5;
                break;
            }
            case Kind::CartPole: {
                const int a = int(action[0]);
                if (a < 0 || a > 1)
                    throw std::invalid_argument("cartpole: action index out of range");
                const double g = 9.8, masscart = 1.0, masspole = 0.1;
                const double total_mass = masscart + masspole;
                const double length = 0.5;  // half pole length
                const double force = a == 1 ? 10.0 : -10.0;
                const double dt = 0.02;
                const double th = state[0], thd = state[1];
                const double costh = std::cos(th), sinth = std::sin(th);
                const double temp =
                    (force + masspole * length * thd * thd * sinth) / total_mass;
                const double thacc =
                    (g * sinth - costh * temp) /
                    (length * (4.0 / 3.0 - masspole * costh * costh / total_mass));
                double th_new = th + dt * thd;
                double thd_new = thd + dt * thacc + rng.normal(0.0, 0.01);
                thd_new = env_detail::clampd(thd_new, -2.0, 2.0);
                out.terminal = std::abs(th_new) > 12.0 * M_PI / 180.0;
                th_new = env_detail::clampd(th_new, -12.0 * M_PI / 180.0,
                                            12.0 * M_PI / 180.0);
                out.next_state = Eigen::Vector2d(th_new, thd_new);
                out.reward = 1.0;
                break;
            }
            case Kind::PuddleWorld: {
                const int a = int(action[0]);
                if (a < 0 || a > 3)
                    throw std::invalid_argument("puddle-world: action index out of range");
                // 0 right, 1 up, 2 left, 3 down
                const double mv = 0.05;
                double dx = a == 0 ? mv : a == 2 ? -mv : 0.0;
                double dy = a == 1 ? mv : a == 3 ? -mv : 0.0;
                double x = state[0] + dx + rng.normal(0.0, 0.01);
                double y = state[1] + dy + rng.normal(0.0, 0.01);
                x = env_detail::clampd(x, 0.0, 1.0);
                y = env_detail::clampd(y, 0.0, 1.0);
                out.next_state = Eigen::Vector2d(x, y);
                out.terminal = x + y >= 1.9;
                out.reward = -1.0 - 400.0 * puddle_depth(x, y);
                break;
            }
            case Kind::Pendulum: {
                const double u = env_detail::clampd(action[0], -2.0, 2.0);
                const double g = 10.0, m = 1.0, l = 1.0, dt = 0.05;
                const double th = state[0], thd = state[1];
                out.reward = -(th * th + 0.1 * thd * thd + 0.001 * u * u);
                double thd_new = thd +
                                 dt * (3.0 * g / (2.0 * l) * std::sin(th) +
                                       3.0 / (m * l * l) * u) +
                                 rng.normal(0.0, 0.05);
                thd_new = env_detail::clampd(thd_new, -8.0, 8.0);
                double th_new = env_detail::wrap_angle(th + dt * thd_new);
                out.next_state = Eigen::Vector2d(th_new, thd_new);
                out.terminal = false;
                break;
            }
        }
        return out;
    }
};

/// Affine map of a state into the unit box given the environment bounds.
inline Eigen::VectorXd normalize_state(const Environment& env, const Eigen::VectorXd& s) {
    Eigen::VectorXd lo = env.state_lo(), hi = env.state_hi();
    Eigen::VectorXd z(s.size());
    for (int i = 0; i < s.size(); ++i) z[i] = (s[i] - lo[i]) / (hi[i] - lo[i]);
    return z;
}

/// Normalizes every start/next state of a dataset into the unit box.
inline TransitionDataset normalize_dataset(const Environment& env,
                                           const TransitionDataset& ds) {
    TransitionDataset out = ds;
    for (Transition& t : out.transitions) {
        t.state = normalize_state(env, t.state);
        t.next_state = normalize_state(env, t.next_state);
    }
    return out;
}

/**
 * Fixed evaluation policies used for data collection, one per
 * environment:
 *
 * mountain-car   energy pumping: full throttle along the current velocity.
 * cartpole       proportional-derivative push toward upright.
 * puddle-world   with probability 0.1 a uniform random move, otherwise
 *                greedy along the axis with more distance to the goal
 *                corner (1, 1). Consumes two Rng draws per query.
 * pendulum       energy pumping: maximum torque along the current
 *                angular velocity.
 */
struct ScriptedPolicy {
    std::string id;
    Environment env;

    static ScriptedPolicy for_env(const Environment& env) {
        ScriptedPolicy p;
        p.env = env;
        switch (env.kind) {
            case Environment::Kind::MountainCar: p.id = "energy-pump"; break;
            case Environment::Kind::CartPole: p.id = "pd-balance"; break;
            case Environment::Kind::PuddleWorld: p.id = "noisy-greedy"; break;
            case Environment::Kind::Pendulum: p.id = "energy-pump"; break;
        }
        return p;
    }

    Eigen::VectorXd act(const Eigen::VectorXd& s, Rng& rng) const {
        Eigen::VectorXd a(1);
        switch (env.kind) {
            case Environment::Kind::MountainCar:
                a[0] = s[1] >= 0.0 ? 2.0 : 0.0;
                break;
            case Environment::Kind::CartPole:
                a[0] = (10.0 * s[0] + 2.0 * s[1]) > 0.0 ? 1.0 : 0.0;
                break;
            case Environment::Kind::PuddleWorld: {
                const double explore = rng.uniform();
                const auto random_action = rng.uniform_int(4);
                if (explore < 0.1) {
                    a[0] = double(random_action);
                } else {
                    a[0] = (1.0 - s[0]) >= (1.0 - s[1]) ? 0.0 : 1.0;
                }
                break;
            }
            case Environment::Kind::Pendulum:
                a[0] = s[1] >= 0.0 ? 2.0 : -2.0;
                break;
        }
        return a;
    }
};

/**
 * Collects a transition dataset from an environment under its scripted
 * policy. UniformState draws each start state independently and uniformly
 * from the state box (rejecting already-terminal states); OnPolicyRollout
 * follows episodes from the start distribution, resetting on termination
 * or after 200 steps. Identical seeds give bitwise-identical datasets.
 */
inline TransitionDataset collect_dataset(const Environment& env,
                                         const ScriptedPolicy& policy, int n,
                                         SamplingMode mode, std::uint64_t seed,
                                         int max_episode_len = 200) {
    if (n < 1) throw std::invalid_argument("collect_dataset: n must be positive");
    Rng rng(seed);
    TransitionDataset ds;
    ds.mode = mode;
    ds.seed = seed;
    ds.env_name = env.name();
    ds.policy_id = policy.id;
    ds.transitions.reserve(size_t(n));

    Eigen::VectorXd lo = env.state_lo(), hi = env.state_hi();
    Eigen::VectorXd s;
    int steps_in_episode = 0;
    bool need_reset = true;
    for (int i = 0; i < n; ++i) {
        if (mode == SamplingMode::UniformState) {
            do {
                s.resize(2);
                for (int d = 0; d < 2; ++d) s[d] = rng.uniform(lo[d], hi[d]);
            } while (env.is_terminal_state(s));
        } else if (need_reset) {
            s = env.initial_state(rng);
            steps_in_episode = 0;
            need_reset = false;
        }
        Eigen::VectorXd a = policy.act(s, rng);
        StepResult r = env.step(s, a, rng);
        Transition t;
        t.state = s;
        t.action = a;
        t.reward = r.reward;
        t.next_state = r.next_state;
        t.terminal = r.terminal;
        ds.transitions.push_back(std::move(t));
        if (mode == SamplingMode::OnPolicyRollout) {
            ++steps_in_episode;
            if (r.terminal || steps_in_episode >= max_episode_len)
                need_reset = true;
            else
                s = r.next_state;
        }
    }
    return ds;
}

/// Collection under the environment's default scripted policy.
inline TransitionDataset collect_dataset(const Environment& env, int n, SamplingMode mode,
                                         std::uint64_t seed, int max_episode_len = 200) {
    return collect_dataset(env, ScriptedPolicy::for_env(env), n, mode, seed,
                           max_episode_len);
}

/**
 * Reference values on a regular grid, computed by Monte-Carlo cell-center
 * discretization: from each cell center the scripted policy's action is
 * sampled `samples_per_cell` times, transitions are binned by destination
 * cell (terminals to an absorbing extra state), and the resulting tabular
 * MDP is solved exactly. Cells with no incoming probability mass from any
 * other cell are flagged unreachable rather than treated as errors.
 */
struct GridValueTable {
    Environment env;
    int res_x = 0, res_y = 0;
    Eigen::VectorXd lo, hi;
    Eigen::VectorXd values;                // res_x * res_y, row-major in x
    std::vector<bool> reachable;           // same layout
    double discount = 0.0;

    int cell_index(const Eigen::VectorXd& s) const {
        int ix = int(std::floor((s[0] - lo[0]) / (hi[0] - lo[0]) * res_x));
        int iy = int(std::floor((s[1] - lo[1]) / (hi[1] - lo[1]) * res_y));
        ix = std::min(std::max(ix, 0), res_x - 1);
        iy = std::min(std::max(iy, 0), res_y - 1);
        return ix * res_y + iy;
    }

    Eigen::VectorXd cell_center(int idx) const {
        const int ix = idx / res_y, iy = idx % res_y;
        Eigen::VectorXd c(2);
        c[0] = lo[0] + (ix + 0.5) * (hi[0] - lo[0]) / res_x;
        c[1] = lo[1] + (iy + 0.5) * (hi[1] - lo[1]) / res_y;
        return c;
    }

    /// Nearest-cell value lookup for an arbitrary state.
    double value_at(const Eigen::VectorXd& s) const { return values[cell_index(s)]; }
};

inline GridValueTable discretized_true_values(const Environment& env,
                                              const ScriptedPolicy& policy, int res_x,
                                              int res_y, double gamma,
                                              int samples_per_cell = 100,
                                              std::uint64_t seed = 0) {
    if (res_x < 1 || res_y < 1)
        throw std::invalid_argument("discretized_true_values: resolution must be positive");
    if (samples_per_cell < 1)
        throw std::invalid_argument("discretized_true_values: need at least one sample");
    GridValueTable table;
    table.env = env;
    table.res_x = res_x;
    table.res_y = res_y;
    table.lo = env.state_lo();
    table.hi = env.state_hi();
    table.discount = gamma;

    const int n_cells = res_x * res_y;
    const int absorbing = n_cells;  // extra terminal state

    TabularMdp mdp;
    mdp.n_states = n_cells + 1;
    mdp.n_actions = 1;
    mdp.discount = gamma;
    mdp.terminal.assign(size_t(n_cells + 1), false);
    mdp.terminal[size_t(absorbing)] = true;
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n_cells + 1, n_cells + 1);
    p(absorbing, absorbing) = 1.0;
    mdp.reward = Eigen::MatrixXd::Zero(n_cells + 1, 1);

    Rng rng(seed);
    for (int c = 0; c < n_cells; ++c) {
        Rng cell_rng = rng.substream(std::uint64_t(c));
        Eigen::VectorXd center = table.cell_center(c);
        if (env.is_terminal_state(center)) {
            // Goal-region cell: value 0, all mass to the absorbing state.
            p(c, absorbing) = 1.0;
            continue;
        }
        double reward_sum = 0.0;
        for (int k = 0; k < samples_per_cell; ++k) {
            Eigen::VectorXd a = policy.act(center, cell_rng);
            StepResult r = env.step(center, a, cell_rng);
            reward_sum += r.reward;
            const int dest = r.terminal ? absorbing : table.cell_index(r.next_state);
            p(c, dest) += 1.0 / samples_per_cell;
        }
        mdp.reward(c, 0) = reward_sum / samples_per_cell;
    }
    mdp.transition = {p};
    mdp.validate(1e-9);

    TabularPolicy pi;
    pi.probs = Eigen::MatrixXd::Ones(n_cells + 1, 1);
    Eigen::VectorXd v = solve_value_function(mdp, pi, 1e-10);
    table.values = v.head(n_cells);

    table.reachable.assign(size_t(n_cells), false);
    for (int c = 0; c < n_cells; ++c)
        for (int d = 0; d < n_cells; ++d)
            if (d != c && p(c, d) > 0) table.reachable[size_t(d)] = true;
    return table;
}

/// Grid oracle under the environment's default scripted policy.
inline GridValueTable discretized_true_values(const Environment& env, int res_x, int res_y,
                                              double gamma, int samples_per_cell = 100,
                                              std::uint64_t seed = 0) {
    return discretized_true_values(env, ScriptedPolicy::for_env(env), res_x, res_y, gamma,
                                   samples_per_cell, seed);
}

}  // namespace kbl
