// kbl: command-line driver for kernel Bellman loss experiments.
//
// Subcommands: collect, train, verify, compare, solve-linear. Every run
// is driven by a flat key-value config file and writes a manifest plus a
// config snapshot into its output directory before any computation, so
// the directory is self-describing and reruns are byte-identical.
//
// Exit codes: 0 success (a DIVERGED training run is a result, not a
// failure), 2 configuration error, 3 numerical/runtime error.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "kbl/chains.hpp"
#include "kbl/charts.hpp"
#include "kbl/config.hpp"
#include "kbl/envs.hpp"
#include "kbl/linear_solve.hpp"
#include "kbl/manifest.hpp"
#include "kbl/policy_opt.hpp"
#include "kbl/tabular.hpp"
#include "kbl/trainer.hpp"

namespace fs = std::filesystem;
using namespace kbl;

namespace {

// ---------------------------------------------------------------------------
// Shared plumbing

/// Effective run seed: KBL_SEED environment variable wins over run.seed.
std::uint64_t effective_seed(const Config& cfg) {
    if (const char* env = std::getenv("KBL_SEED")) {
        try {
            std::size_t pos = 0;
            unsigned long long v = std::stoull(env, &pos);
            if (pos != std::string(env).size()) throw std::invalid_argument(env);
            return v;
        } catch (const std::exception&) {
            throw ConfigError(std::string("KBL_SEED must be a nonnegative integer, got: ") +
                              env);
        }
    }
    return std::uint64_t(cfg.get_int("run.seed", 0));
}

std::string require_outdir(const Config& cfg) {
    std::string outdir = cfg.get_str("run.outdir", "");
    if (outdir.empty()) throw ConfigError("missing config key: run.outdir");
    return outdir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write: " + path.string());
    f << text;
}

std::vector<int> get_ints(const Config& cfg, const std::string& key,
                          std::vector<int> fallback) {
    if (!cfg.has(key)) return fallback;
    std::vector<int> out;
    for (double v : cfg.get_doubles(key)) out.push_back(int(v));
    return out;
}

bool is_chain(const std::string& env_name) {
    return env_name == "tvr-chain" || env_name == "baird-star";
}

LinearChainSpec chain_by_name(const std::string& name) {
    if (name == "tvr-chain") return make_tvr_chain();
    if (name == "baird-star") return make_baird_star();
    throw ConfigError("unknown chain environment: " + name +
                      " (valid: tvr-chain baird-star)");
}

// ---------------------------------------------------------------------------
// collect

const std::vector<std::string> collect_keys = {
    "run.outdir", "run.seed", "collect.env", "collect.n", "collect.mode",
    "collect.max_episode_len"};

int cmd_collect(const std::string& config_path) {
    Config cfg = Config::load(config_path);
    cfg.validate_keys(collect_keys);
    const std::uint64_t seed = effective_seed(cfg);
    const std::string outdir = require_outdir(cfg);
    RunManifest manifest = make_manifest("collect", cfg, seed, outdir);
    write_manifest(manifest);

    const std::string env_name = cfg.get_str("collect.env");
    const long n = cfg.get_int("collect.n");
    if (n <= 0) throw ConfigError("collect.n must be positive");

    TransitionDataset ds;
    if (is_chain(env_name)) {
        ds = collect_chain_dataset(chain_by_name(env_name), int(n), seed);
    } else {
        Environment env = Environment::by_name(env_name);
        SamplingMode mode =
            sampling_mode_from_string(cfg.get_str("collect.mode", "uniform-state"));
        long max_len = cfg.get_int("collect.max_episode_len", 200);
        ds = collect_dataset(env, int(n), mode, seed, int(max_len));
    }
    const fs::path out = fs::path(outdir) / "dataset.csv";
    save_dataset(out.string(), ds);
    std::cout << "collect: wrote " << ds.size() << " transitions to " << out.string()
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train (mode=train)

const std::vector<std::string> train_keys = {
    "run.outdir",       "run.seed",           "run.mode",
    "data.dataset",     "data.normalize",     "model.kind",
    "model.hidden",     "model.activation",   "model.init",
    "train.loss",       "train.optimizer",    "train.lr",
    "train.epochs",     "train.batch",        "train.gamma",
    "train.target_sync_epochs",               "train.metric_every",
    "kernel.kind",      "kernel.bandwidth",   "kernel.median_alpha",
    "eval.oracle",      "eval.grid",          "eval.grid_samples",
    "eval.grid_seed"};

struct TrainSetup {
    TransitionDataset dataset;
    ValueFunction value;
    TrainConfig train;
    EvalSpec eval;
};

Kernel build_kernel(const Config& cfg, const TransitionDataset& ds,
                    const std::optional<LinearChainSpec>& chain) {
    const std::string kind = cfg.get_str("kernel.kind", "gaussian");
    if (kind == "linear-feature") {
        if (!chain)
            throw ConfigError("kernel.kind = linear-feature requires a chain dataset");
        return Kernel::linear(chain->feature_map());
    }
    if (kind != "gaussian" && kind != "state-action")
        throw ConfigError("unknown kernel.kind: " + kind +
                          " (valid: gaussian state-action linear-feature)");
    double bandwidth;
    if (cfg.has("kernel.median_alpha")) {
        std::vector<Eigen::VectorXd> pts;
        for (const Transition& t : ds.transitions) pts.push_back(t.state);
        bandwidth = std::sqrt(median_bandwidth(pts, cfg.get_double("kernel.median_alpha")));
    } else {
        bandwidth = cfg.get_double("kernel.bandwidth", 0.5);
    }
    return kind == "gaussian" ? Kernel::gaussian(bandwidth) : Kernel::state_action(bandwidth);
}

TrainSetup build_train_setup(const Config& cfg, std::uint64_t seed) {
    TrainSetup s;
    const std::string dataset_path = cfg.get_str("data.dataset");
    s.dataset = load_dataset(dataset_path);
    load_dataset_sidecar(dataset_path, s.dataset);

    std::optional<LinearChainSpec> chain;
    if (is_chain(s.dataset.env_name)) chain = chain_by_name(s.dataset.env_name);

    const bool normalize = cfg.get_bool("data.normalize", false);
    if (normalize) {
        if (chain) throw ConfigError("data.normalize applies to environment datasets only");
        s.dataset = normalize_dataset(Environment::by_name(s.dataset.env_name), s.dataset);
    }

    const std::string model_kind = cfg.get_str("model.kind", chain ? "linear" : "mlp");
    if (model_kind == "linear") {
        if (!chain) throw ConfigError("model.kind = linear requires a chain dataset");
        s.value = ValueFunction::linear(chain->feature_map());
        if (cfg.has("model.init")) {
            std::vector<double> init = cfg.get_doubles("model.init");
            if (long(init.size()) != s.value.n_params())
                throw ConfigError("model.init needs " + std::to_string(s.value.n_params()) +
                                  " values");
            for (std::size_t i = 0; i < init.size(); ++i) s.value.theta[long(i)] = init[i];
        }
    } else if (model_kind == "mlp") {
        std::vector<int> hidden = get_ints(cfg, "model.hidden", {80});
        const std::string act = cfg.get_str("model.activation", "relu");
        if (act != "relu" && act != "tanh")
            throw ConfigError("unknown model.activation: " + act + " (valid: relu tanh)");
        Rng init(Rng(seed).substream(7).next_u64());
        s.value = ValueFunction::mlp(s.dataset.state_dim(), hidden,
                                     act == "relu" ? Mlp::Activation::Relu
                                                   : Mlp::Activation::Tanh,
                                     init.next_u64());
    } else {
        throw ConfigError("unknown model.kind: " + model_kind + " (valid: linear mlp)");
    }

    s.train.loss = cfg.get_str("train.loss", "kloss-v");
    s.train.optimizer = cfg.get_str("train.optimizer", "adam");
    s.train.lr = cfg.get_double("train.lr", 1e-3);
    s.train.epochs = cfg.get_int("train.epochs", 1);
    s.train.batch = cfg.get_int("train.batch", 150);
    s.train.gamma = cfg.get_double("train.gamma", 0.99);
    s.train.seed = seed;
    s.train.target_sync_epochs = cfg.get_int("train.target_sync_epochs", 1);
    s.train.metric_every = cfg.get_int("train.metric_every", 1);
    s.train.kernel = build_kernel(cfg, s.dataset, chain);
    s.train.validate(long(s.dataset.size()));

    const std::string oracle = cfg.get_str("eval.oracle", chain ? "chain" : "none");
    if (oracle == "chain") {
        if (!chain) throw ConfigError("eval.oracle = chain requires a chain dataset");
        Eigen::VectorXd truth(long(s.dataset.size()));
        const Eigen::VectorXd v_true = chain->features * chain->w_star;
        for (std::size_t i = 0; i < s.dataset.size(); ++i)
            truth[long(i)] =
                v_true[FeatureMap::discrete_index(s.dataset.transitions[i].state)];
        s.eval.train_oracle = truth;
    } else if (oracle != "none") {
        throw ConfigError("unknown eval.oracle: " + oracle + " (valid: chain none)");
    }

    if (cfg.has("eval.grid")) {
        if (chain) throw ConfigError("eval.grid applies to environment datasets only");
        std::vector<int> res = get_ints(cfg, "eval.grid", {});
        if (res.size() != 2) throw ConfigError("eval.grid needs two integers: res_x res_y");
        Environment env = Environment::by_name(s.dataset.env_name);
        GridValueTable table = discretized_true_values(
            env, res[0], res[1], s.train.gamma,
            int(cfg.get_int("eval.grid_samples", 100)),
            std::uint64_t(cfg.get_int("eval.grid_seed", 0)));
        std::vector<double> oracle_vals;
        for (int c = 0; c < res[0] * res[1]; ++c) {
            if (!table.reachable[std::size_t(c)]) continue;
            Eigen::VectorXd center = table.cell_center(c);
            s.eval.grid_states.push_back(normalize ? normalize_state(env, center) : center);
            oracle_vals.push_back(table.values[c]);
        }
        s.eval.grid_oracle =
            Eigen::Map<Eigen::VectorXd>(oracle_vals.data(), long(oracle_vals.size()));
    }
    return s;
}

MetricLog execute_train(const Config& cfg, std::uint64_t seed, const std::string& outdir) {
    TrainSetup s = build_train_setup(cfg, seed);
    MetricLog log = run_evaluation_experiment(s.value, s.dataset, s.train, s.eval);
    save_metric_csv((fs::path(outdir) / "metrics.csv").string(), log);
    save_timing_file((fs::path(outdir) / "timing.txt").string(), log);
    std::string theta_text;
    for (long i = 0; i < log.final_theta.size(); ++i)
        theta_text += trainer_detail::format_metric(log.final_theta[i]) + "\n";
    write_text(fs::path(outdir) / "theta.txt", theta_text);
    return log;
}

// ---------------------------------------------------------------------------
// train (mode=policy-opt)

const std::vector<std::string> policy_opt_keys = {
    "run.outdir", "run.seed", "run.mode", "policy-opt.env",
    "policy-opt.iterations", "policy-opt.d", "policy-opt.batch", "policy-opt.chunk",
    "policy-opt.gamma", "policy-opt.lr_value", "policy-opt.lr_policy", "policy-opt.tau",
    "policy-opt.value_mode", "policy-opt.eval_every", "policy-opt.eval_episodes",
    "policy-opt.episode_len", "policy-opt.buffer_capacity", "policy-opt.value_hidden",
    "policy-opt.policy_hidden", "policy-opt.init_log_std", "policy-opt.kernel_alpha",
    "policy-opt.lambda0", "policy-opt.lambda_decay_every", "policy-opt.policy_warmup",
    "policy-opt.start_spread", "policy-opt.eval_episode_len"};

MetricLog execute_policy_opt(const Config& cfg, std::uint64_t seed,
                             const std::string& outdir) {
    const std::string env = cfg.get_str("policy-opt.env", "pendulum-toy");
    if (env != "pendulum-toy")
        throw ConfigError("policy-opt.env: only 'pendulum-toy' is supported, got: " + env);
    PolicyOptConfig pc;
    pc.iterations = cfg.get_int("policy-opt.iterations", 2000);
    pc.rollout_d = int(cfg.get_int("policy-opt.d", 5));
    pc.batch_windows = int(cfg.get_int("policy-opt.batch", 64));
    pc.chunk_steps = int(cfg.get_int("policy-opt.chunk", 10));
    pc.gamma = cfg.get_double("policy-opt.gamma", 0.995);
    pc.lr_value = cfg.get_double("policy-opt.lr_value", 3e-3);
    pc.lr_policy = cfg.get_double("policy-opt.lr_policy", 1e-3);
    pc.tau = cfg.get_double("policy-opt.tau", 0.0);
    pc.value_mode = cfg.get_str("policy-opt.value_mode", "kloss");
    pc.eval_every = cfg.get_int("policy-opt.eval_every", 100);
    pc.eval_episodes = int(cfg.get_int("policy-opt.eval_episodes", 5));
    pc.episode_len = cfg.get_int("policy-opt.episode_len", 200);
    pc.buffer_capacity = cfg.get_int("policy-opt.buffer_capacity", 500);
    pc.value_hidden = get_ints(cfg, "policy-opt.value_hidden", {64, 64});
    pc.policy_hidden = get_ints(cfg, "policy-opt.policy_hidden", {64, 64});
    pc.init_log_std = cfg.get_double("policy-opt.init_log_std", -0.5);
    pc.kernel_alpha = cfg.get_double("policy-opt.kernel_alpha", 0.0);
    pc.lambda0 = cfg.get_double("policy-opt.lambda0", 0.1);
    pc.lambda_decay_every = cfg.get_int("policy-opt.lambda_decay_every", 2500);
    pc.policy_warmup = cfg.get_int("policy-opt.policy_warmup", 0);
    pc.start_spread = cfg.get_double("policy-opt.start_spread", 1.0);
    pc.eval_episode_len = cfg.get_int("policy-opt.eval_episode_len", 0);
    pc.seed = seed;
    pc.validate();

    MetricLog log = run_policy_optimization(pc);
    save_metric_csv((fs::path(outdir) / "metrics.csv").string(), log);
    save_timing_file((fs::path(outdir) / "timing.txt").string(), log);
    return log;
}

// ---------------------------------------------------------------------------
// verify: exact-oracle identity suite on random tabular MDPs

const std::vector<std::string> verify_keys = {"run.outdir", "run.seed", "run.mode",
                                              "verify.n_mdps", "verify.states",
                                              "verify.actions"};

struct VerifyLine {
    std::string name;
    bool pass = false;
    double worst = 0.0;
    std::string note;
};

int execute_verify(const Config& cfg, std::uint64_t seed, const std::string& outdir) {
    const int n_mdps = int(cfg.get_int("verify.n_mdps", 5));
    const int n_states = int(cfg.get_int("verify.states", 6));
    const int n_actions = int(cfg.get_int("verify.actions", 3));
    if (n_mdps < 1 || n_states < 2 || n_actions < 1)
        throw ConfigError("verify: n_mdps >= 1, states >= 2, actions >= 1 required");

    Rng root(seed);
    std::vector<VerifyLine> lines = {
        {"loss-zero-at-true-value", true, 0.0, "L_k(V^pi) <= 1e-10"},
        {"loss-positive-off-fixed-point", true, 0.0, "L_k(V) > 0 for V != V^pi"},
        {"dual-kernel-identity", true, 0.0, "primal = dual within 1e-8"},
        {"mercer-expansion", true, 0.0, "eigen-sum and bound within 1e-8"},
        {"rkhs-witness-norm", true, 0.0, "loss = witness norm within 1e-10"},
        {"closed-form-equivalence", true, 0.0, "TD vs kernel solution within 1e-8"},
        {"certainty-equivalence-one-hot", true, 0.0, "CE = one-hot kernel fit within 1e-8"},
    };
    auto fold = [&](VerifyLine& line, double err, double tol) {
        line.worst = std::max(line.worst, err);
        if (!(err <= tol)) line.pass = false;
    };

    for (int i = 0; i < n_mdps; ++i) {
        Rng rng = root.substream(std::uint64_t(i));
        TabularMdp mdp = random_mdp(n_states, n_actions, 0.9, rng);
        TabularPolicy pol = random_policy(mdp, rng);
        StateDistribution mu = random_distribution(mdp, rng);
        Eigen::MatrixXd embed = random_embedding(n_states, 2, rng);
        Kernel kernel = Kernel::gaussian(0.5 + rng.uniform());
        Eigen::VectorXd v_true = solve_value_function_direct(mdp, pol);

        fold(lines[0], exact_kernel_loss(mdp, pol, mu, kernel, embed, v_true), 1e-10);

        Eigen::VectorXd v(n_states);
        for (int s = 0; s < n_states; ++s) v[s] = v_true[s] + rng.normal(0.0, 0.5);
        double off = exact_kernel_loss(mdp, pol, mu, kernel, embed, v);
        if (!(off > 0.0)) lines[1].pass = false;
        lines[1].worst = std::max(lines[1].worst, -off);

        Eigen::MatrixXd kstar = dual_kernel(mdp, pol, mu, kernel, embed);
        fold(lines[2], std::abs(off - dual_norm_sq(kstar, mu, v - v_true)), 1e-8);

        MercerCheck mc = mercer_check(mdp, pol, mu, kernel, embed, v);
        fold(lines[3], std::abs(mc.lhs - mc.rhs), 1e-8);
        fold(lines[3], mc.lhs - mc.bound, 1e-10);

        RkhsWitnessCheck wc = rkhs_witness_check(mdp, pol, mu, kernel, embed, v);
        fold(lines[4], std::abs(wc.loss - wc.witness_norm_sq), 1e-10);

        // Linear closed forms agree whenever X^T Z is invertible.
        const int n_rows = 40, dim = 3;
        LinearSystemBundle bundle;
        bundle.gamma = 0.9;
        bundle.x.resize(n_rows, dim);
        bundle.x_next.resize(n_rows, dim);
        bundle.r.resize(n_rows);
        for (int row = 0; row < n_rows; ++row) {
            for (int d = 0; d < dim; ++d) {
                bundle.x(row, d) = rng.normal();
                bundle.x_next(row, d) = rng.normal();
            }
            bundle.r[row] = rng.normal();
        }
        LinearSolveResult td = td_closed_form(bundle);
        LinearSolveResult kl = kloss_closed_form(bundle);
        fold(lines[5], (td.theta - kl.theta).norm() / std::max(1.0, td.theta.norm()),
             1e-8);

        // Certainty equivalence equals a one-hot-feature kernel fit.
        TabularMdp dm = random_mdp(4, 2, 0.9, rng, true);
        TabularPolicy dp = random_policy(dm, rng);
        std::vector<Transition> data;
        for (int t = 0; t < 400; ++t) {
            int s = int(rng.uniform_int(3));  // non-terminal starts
            int a = sample_index(dp.probs.row(s).transpose(), rng);
            int sp = sample_index(dm.transition[std::size_t(a)].row(s).transpose(), rng);
            Transition tr;
            tr.state = Eigen::VectorXd::Constant(1, double(s));
            tr.action = Eigen::VectorXd::Constant(1, double(a));
            tr.reward = dm.reward(s, a);
            tr.next_state = Eigen::VectorXd::Constant(1, double(sp));
            tr.terminal = dm.terminal[std::size_t(sp)];
            data.push_back(std::move(tr));
        }
        CertaintyEquivalenceResult ce = certainty_equivalence(data, dm.discount);
        // Indicator features restricted to observed start states; a full
        // one-hot basis would put an all-zero column on the terminal.
        Eigen::MatrixXd table = Eigen::MatrixXd::Zero(4, long(ce.states.size()));
        for (std::size_t j = 0; j < ce.states.size(); ++j)
            table(ce.states[j], long(j)) = 1.0;
        LinearSystemBundle onehot =
            make_bundle(data, FeatureMap::from_table(table), dm.discount);
        LinearSolveResult fit = kloss_closed_form(onehot);
        for (std::size_t j = 0; j < ce.states.size(); ++j)
            fold(lines[6], std::abs(ce.values[long(j)] - fit.theta[long(j)]), 1e-8);
    }

    std::string report;
    bool all_pass = true;
    for (const VerifyLine& line : lines) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-34s %s  worst_err=%.3g  (%s)\n",
                      line.name.c_str(), line.pass ? "PASS" : "FAIL", line.worst,
                      line.note.c_str());
        report += buf;
        all_pass = all_pass && line.pass;
    }
    report += std::string(all_pass ? "OK" : "FAILED") + ": " + std::to_string(n_mdps) +
              " random MDPs checked\n";
    std::cout << report;
    if (!outdir.empty()) write_text(fs::path(outdir) / "verify.txt", report);
    return all_pass ? 0 : 3;
}

// ---------------------------------------------------------------------------
// train dispatcher

int cmd_train(const std::string& config_path) {
    Config cfg = Config::load(config_path);
    const std::string mode = cfg.get_str("run.mode", "train");
    const std::uint64_t seed = effective_seed(cfg);

    if (mode == "verify") {
        cfg.validate_keys(verify_keys);
        std::string outdir = cfg.get_str("run.outdir", "");
        if (!outdir.empty())
            write_manifest(make_manifest("train", cfg, seed, outdir));
        return execute_verify(cfg, seed, outdir);
    }

    const std::string outdir = require_outdir(cfg);
    if (mode == "train") {
        cfg.validate_keys(train_keys);
        write_manifest(
            make_manifest("train", cfg, seed, outdir, {cfg.get_str("data.dataset")}));
        MetricLog log = execute_train(cfg, seed, outdir);
        const MetricRecord& last = log.final_record();
        std::cout << "train: status=" << log.status << " epochs=" << last.epoch
                  << " loss=" << trainer_detail::format_metric(last.loss)
                  << " theta_norm=" << trainer_detail::format_metric(last.theta_norm)
                  << "\n";
        return 0;
    }
    if (mode == "policy-opt") {
        cfg.validate_keys(policy_opt_keys);
        write_manifest(make_manifest("train", cfg, seed, outdir));
        MetricLog log = execute_policy_opt(cfg, seed, outdir);
        const MetricRecord& last = log.final_record();
        std::cout << "policy-opt: status=" << log.status << " iterations=" << last.epoch
                  << " return_mean="
                  << trainer_detail::format_metric(
                         last.extras.empty() ? std::numeric_limits<double>::quiet_NaN()
                                             : last.extras[0])
                  << "\n";
        return 0;
    }
    throw ConfigError("unknown run.mode: " + mode + " (valid: train policy-opt verify)");
}

int cmd_verify(const std::string& config_path) {
    Config cfg = Config::load(config_path);
    cfg.validate_keys(verify_keys);
    const std::uint64_t seed = effective_seed(cfg);
    std::string outdir = cfg.get_str("run.outdir", "");
    if (!outdir.empty()) write_manifest(make_manifest("verify", cfg, seed, outdir));
    return execute_verify(cfg, seed, outdir);
}

// ---------------------------------------------------------------------------
// compare

std::string run_name_from_path(const std::string& path) {
    fs::path p(path);
    std::string stem = p.stem().string();
    return stem.empty() ? path : stem;
}

int cmd_compare(const std::vector<std::string>& config_paths,
                const std::vector<std::string>& names_arg, const std::string& out) {
    if (config_paths.empty()) throw ConfigError("compare: no run configs given");
    if (!names_arg.empty() && names_arg.size() != config_paths.size())
        throw ConfigError("compare: --name count must match the number of configs");

    Config meta;
    meta.set("compare.out", out);
    std::string joined;
    for (const std::string& p : config_paths) joined += (joined.empty() ? "" : " ") + p;
    meta.set("compare.runs", joined);
    write_manifest(make_manifest("compare", meta, 0, out, config_paths));

    std::vector<std::string> names;
    std::vector<MetricLog> logs;
    for (std::size_t i = 0; i < config_paths.size(); ++i) {
        const std::string name =
            names_arg.empty() ? run_name_from_path(config_paths[i]) : names_arg[i];
        Config cfg = Config::load(config_paths[i]);
        cfg.validate_keys(train_keys);
        if (cfg.get_str("run.mode", "train") != "train")
            throw ConfigError("compare: run config '" + config_paths[i] +
                              "' must have run.mode = train");
        const std::uint64_t seed = effective_seed(cfg);
        const std::string run_outdir = (fs::path(out) / name).string();
        cfg.set("run.outdir", run_outdir);
        write_manifest(
            make_manifest("train", cfg, seed, run_outdir, {cfg.get_str("data.dataset")}));
        MetricLog log = execute_train(cfg, seed, run_outdir);
        std::cout << "compare: " << name << " status=" << log.status << "\n";
        names.push_back(name);
        logs.push_back(std::move(log));
    }

    AlignedRuns aligned = align_metric_logs(names, logs);
    if (!aligned.warning.empty()) std::cerr << aligned.warning << "\n";
    write_text(fs::path(out) / "combined.csv", combined_csv(aligned, logs));

    auto curve_chart = [&](const std::string& title, auto metric_of) {
        LineChartSpec spec;
        spec.title = title;
        spec.x_label = "epoch";
        spec.y_label = title;
        spec.log_y = true;
        for (std::size_t i = 0; i < aligned.rows.size(); ++i) {
            ChartSeries series;
            series.label = names[i];
            for (std::size_t j = 0; j < aligned.rows[i].size(); ++j) {
                series.xs.push_back(double(aligned.epochs[j]));
                series.ys.push_back(metric_of(aligned.rows[i][j]));
            }
            spec.series.push_back(std::move(series));
        }
        return render_line_chart(spec);
    };
    write_text(fs::path(out) / "mse.svg",
               curve_chart("mse", [](const MetricRecord& r) { return r.mse; }));
    write_text(fs::path(out) / "bellman.svg",
               curve_chart("bellman error", [](const MetricRecord& r) { return r.bellman; }));

    ScatterChartSpec scatter;
    scatter.title = "loss vs mse";
    scatter.x_label = "loss";
    scatter.y_label = "mse";
    scatter.log_x = true;
    scatter.log_y = true;
    for (const MetricLog& log : logs)
        for (const MetricRecord& r : log.records) {
            scatter.xs.push_back(r.loss);
            scatter.ys.push_back(r.mse);
        }
    write_text(fs::path(out) / "loss_vs_mse.svg", render_scatter_chart(scatter));
    std::cout << "compare: wrote combined.csv, mse.svg, bellman.svg, loss_vs_mse.svg to "
              << out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// solve-linear

const std::vector<std::string> solve_keys = {"run.outdir", "run.seed", "solve.dataset",
                                             "solve.gamma", "solve.ridge", "solve.ce"};

int cmd_solve_linear(const std::string& config_path) {
    Config cfg = Config::load(config_path);
    cfg.validate_keys(solve_keys);
    const std::uint64_t seed = effective_seed(cfg);
    const std::string outdir = require_outdir(cfg);
    const std::string dataset_path = cfg.get_str("solve.dataset");
    write_manifest(make_manifest("solve-linear", cfg, seed, outdir, {dataset_path}));

    TransitionDataset ds = load_dataset(dataset_path);
    load_dataset_sidecar(dataset_path, ds);
    if (!is_chain(ds.env_name))
        throw ConfigError("solve-linear requires a chain dataset (tvr-chain, baird-star), "
                          "got env: " +
                          ds.env_name);
    LinearChainSpec chain = chain_by_name(ds.env_name);
    const double gamma = cfg.get_double("solve.gamma", chain.mdp.discount);
    const double ridge = cfg.get_double("solve.ridge", 0.0);

    LinearSystemBundle bundle = make_bundle(ds.transitions, chain.feature_map(), gamma);
    LinearSolveResult td = td_closed_form(bundle, ridge);
    LinearSolveResult kl = kloss_closed_form(bundle, ridge);

    std::ostringstream out;
    auto emit = [&](const char* name, const LinearSolveResult& r) {
        out << name << " =";
        for (long i = 0; i < r.theta.size(); ++i)
            out << " " << trainer_detail::format_metric(r.theta[i]);
        out << "\ncondition(" << name << ") = "
            << trainer_detail::format_metric(r.condition) << "\ndistance_to_realizable("
            << name << ") = "
            << trainer_detail::format_metric((r.theta - chain.w_star).norm()) << "\n";
    };
    emit("theta_td", td);
    emit("theta_kloss", kl);

    if (cfg.get_bool("solve.ce", true)) {
        CertaintyEquivalenceResult ce = certainty_equivalence(ds.transitions, gamma);
        out << "ce_states =";
        for (int sid : ce.states) out << " " << sid;
        out << "\nce_values =";
        for (long i = 0; i < ce.values.size(); ++i)
            out << " " << trainer_detail::format_metric(ce.values[i]);
        out << "\n";
    }
    write_text(fs::path(outdir) / "solutions.txt", out.str());
    std::cout << out.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kernel Bellman loss experiment driver"};
    app.require_subcommand(1);

    std::string collect_cfg, train_cfg, verify_cfg, solve_cfg;
    std::vector<std::string> compare_cfgs;
    std::string compare_out, compare_names_csv;

    CLI::App* collect = app.add_subcommand("collect", "sample a transition dataset");
    collect->add_option("config", collect_cfg, "config file")->required();
    CLI::App* train = app.add_subcommand("train", "run a training experiment");
    train->add_option("config", train_cfg, "config file")->required();
    CLI::App* verify = app.add_subcommand("verify", "exact-oracle identity suite");
    verify->add_option("config", verify_cfg, "config file")->required();
    CLI::App* compare =
        app.add_subcommand("compare", "train several configs and chart them together");
    compare->add_option("--out", compare_out, "output directory")->required();
    compare->add_option("--names", compare_names_csv,
                        "comma-separated method name per config (optional)");
    compare->add_option("configs", compare_cfgs, "train config files")->required();
    CLI::App* solve = app.add_subcommand("solve-linear", "closed-form linear solutions");
    solve->add_option("config", solve_cfg, "config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (collect->parsed()) return cmd_collect(collect_cfg);
        if (train->parsed()) return cmd_train(train_cfg);
        if (verify->parsed()) return cmd_verify(verify_cfg);
        if (compare->parsed()) {
            std::vector<std::string> names;
            std::istringstream in(compare_names_csv);
            for (std::string tok; std::getline(in, tok, ',');) names.push_back(tok);
            return cmd_compare(compare_cfgs, names, compare_out);
        }
        if (solve->parsed()) return cmd_solve_linear(solve_cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
