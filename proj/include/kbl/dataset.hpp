#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbl/config.hpp"

namespace kbl {

/// One environment step. Discrete actions are stored as a 1-d vector
/// holding the action index so the file format stays uniform.
struct Transition {
    Eigen::VectorXd state;
    Eigen::VectorXd action;
    double reward = 0.0;
    Eigen::VectorXd next_state;
    bool terminal = false;
};

enum class SamplingMode { UniformState, OnPolicyRollout };

inline std::string to_string(SamplingMode m) {
    return m == SamplingMode::UniformState ? "uniform-state" : "on-policy-rollout";
}

inline SamplingMode sampling_mode_from_string(const std::string& s) {
    if (s == "uniform-state") return SamplingMode::UniformState;
    if (s == "on-policy-rollout") return SamplingMode::OnPolicyRollout;
    throw std::invalid_argument("unknown sampling mode: " + s);
}

/**
 * Ordered list of transitions from one environment, plus the collection
 * metadata that goes into the sidecar file.
 */
struct TransitionDataset {
    std::vector<Transition> transitions;
    SamplingMode mode = SamplingMode::UniformState;
    std::uint64_t seed = 0;
    std::string env_name;
    std::string policy_id;

    int state_dim() const { return transitions.empty() ? 0 : int(transitions.front().state.size()); }
    int action_dim() const { return transitions.empty() ? 0 : int(transitions.front().action.size()); }
    std::size_t size() const { return transitions.size(); }

    void validate() const {
        if (transitions.empty()) throw std::invalid_argument("TransitionDataset: empty");
        const int sd = state_dim(), ad = action_dim();
        if (sd <= 0 || ad <= 0) throw std::invalid_argument("TransitionDataset: zero-dimensional entries");
        for (const auto& t : transitions) {
            if (t.state.size() != sd || t.next_state.size() != sd || t.action.size() != ad)
                throw std::invalid_argument("TransitionDataset: inconsistent dimensions");
            if (!std::isfinite(t.reward)) throw std::invalid_argument("TransitionDataset: non-finite reward");
        }
    }
};

namespace detail {
inline std::string fmt17(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}
}  // namespace detail

/// Writes `<path>` as CSV with header s_0.. a_0.. r sp_0.. terminal seed,
/// and `<path>.meta` as a flat key-value sidecar.
inline void save_dataset(const std::string& path, const TransitionDataset& ds) {
    ds.validate();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write dataset: " + path);
    const int sd = ds.state_dim(), ad = ds.action_dim();
    for (int i = 0; i < sd; ++i) f << "s_" << i << ",";
    for (int i = 0; i < ad; ++i) f << "a_" << i << ",";
    f << "r,";
    for (int i = 0; i < sd; ++i) f << "sp_" << i << ",";
    f << "terminal,seed\n";
    for (const auto& t : ds.transitions) {
        for (int i = 0; i < sd; ++i) f << detail::fmt17(t.state[i]) << ",";
        for (int i = 0; i < ad; ++i) f << detail::fmt17(t.action[i]) << ",";
        f << detail::fmt17(t.reward) << ",";
        for (int i = 0; i < sd; ++i) f << detail::fmt17(t.next_state[i]) << ",";
        f << (t.terminal ? 1 : 0) << "," << ds.seed << "\n";
    }
    std::ofstream m(path + ".meta", std::ios::binary);
    if (!m) throw std::runtime_error("cannot write dataset sidecar: " + path + ".meta");
    m << "env = " << ds.env_name << "\n";
    m << "policy = " << ds.policy_id << "\n";
    m << "mode = " << to_string(ds.mode) << "\n";
    m << "seed = " << ds.seed << "\n";
    m << "n = " << ds.transitions.size() << "\n";
    m << "state_dim = " << sd << "\n";
    m << "action_dim = " << ad << "\n";
}

inline TransitionDataset load_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open dataset: " + path);
    std::string header;
    if (!std::getline(f, header)) throw std::runtime_error("dataset: missing header");
    std::vector<std::string> cols;
    {
        std::istringstream in(header);
        std::string c;
        while (std::getline(in, c, ',')) cols.push_back(c);
    }
    int sd = 0, ad = 0;
    while (sd < int(cols.size()) && cols[sd] == "s_" + std::to_string(sd)) ++sd;
    while (sd + ad < int(cols.size()) && cols[sd + ad] == "a_" + std::to_string(ad)) ++ad;
    const std::size_t expect = std::size_t(sd) + ad + 1 + sd + 2;
    if (sd == 0 || ad == 0 || cols.size() != expect || cols[sd + ad] != "r" ||
        cols[expect - 2] != "terminal" || cols[expect - 1] != "seed")
        throw std::runtime_error("dataset: malformed header: " + header);
    for (int i = 0; i < sd; ++i)
        if (cols[std::size_t(sd) + ad + 1 + i] != "sp_" + std::to_string(i))
            throw std::runtime_error("dataset: malformed header: " + header);

    TransitionDataset ds;
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream in(line);
        std::vector<std::string> vals;
        std::string v;
        while (std::getline(in, v, ',')) vals.push_back(v);
        if (vals.size() != expect)
            throw std::runtime_error("dataset line " + std::to_string(lineno) + ": wrong field count");
        auto num = [&](std::size_t i) {
            try {
                std::size_t pos = 0;
                double x = std::stod(vals[i], &pos);
                if (pos != vals[i].size()) throw std::invalid_argument(vals[i]);
                return x;
            } catch (const std::exception&) {
                throw std::runtime_error("dataset line " + std::to_string(lineno) +
                                         ": bad number: " + vals[i]);
            }
        };
        Transition t;
        t.state.resize(sd);
        t.action.resize(ad);
        t.next_state.resize(sd);
        std::size_t k = 0;
        for (int i = 0; i < sd; ++i) t.state[i] = num(k++);
        for (int i = 0; i < ad; ++i) t.action[i] = num(k++);
        t.reward = num(k++);
        for (int i = 0; i < sd; ++i) t.next_state[i] = num(k++);
        double term = num(k++);
        if (term != 0.0 && term != 1.0)
            throw std::runtime_error("dataset line " + std::to_string(lineno) + ": terminal must be 0 or 1");
        t.terminal = term != 0.0;
        ds.seed = std::uint64_t(num(k));
        ds.transitions.push_back(std::move(t));
    }
    ds.validate();
    return ds;
}

/// Reads the sidecar written by save_dataset back into the dataset's
/// metadata fields (the CSV itself only carries the seed).
inline void load_dataset_sidecar(const std::string& path, TransitionDataset& ds) {
    Config meta = Config::load(path + ".meta");
    ds.env_name = meta.get_str("env", "");
    ds.policy_id = meta.get_str("policy", "");
    ds.mode = sampling_mode_from_string(meta.get_str("mode", "uniform-state"));
    ds.seed = std::uint64_t(meta.get_int("seed", long(ds.seed)));
}

}  // namespace kbl
