#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbl/adam.hpp"
#include "kbl/dataset.hpp"
#include "kbl/kernels.hpp"
#include "kbl/losses.hpp"
#include "kbl/rng.hpp"
#include "kbl/value_function.hpp"

namespace kbl {

inline const std::vector<std::string>& valid_loss_ids() {
    static const std::vector<std::string> ids = {"kloss-v", "kloss-u", "rg", "fvi", "td0"};
    return ids;
}

/// Settings for one policy-evaluation training run.
struct TrainConfig {
    std::string loss = "kloss-v";
    std::string optimizer = "adam";  // adam | sgd (td0 applies its own update rule)
    double lr = 1e-3;
    long epochs = 1;
    long batch = 150;
    std::uint64_t seed = 0;
    double gamma = 0.99;
    Kernel kernel = Kernel::gaussian(0.5);
    long target_sync_epochs = 1;  // fvi target refresh cadence, in epochs
    long metric_every = 1;        // record metrics every k epochs
    double divergence_threshold = 1e6;

    void validate(long n_data) const {
        bool known = false;
        for (const std::string& id : valid_loss_ids()) known = known || id == loss;
        if (!known) {
            std::string msg = "unknown loss '" + loss + "' (valid:";
            for (const std::string& id : valid_loss_ids()) msg += " " + id;
            throw std::invalid_argument(msg + ")");
        }
        if (optimizer != "adam" && optimizer != "sgd")
            throw std::invalid_argument("unknown optimizer '" + optimizer +
                                        "' (valid: adam sgd)");
        if (!(lr > 0)) throw std::invalid_argument("learning rate must be positive");
        if (epochs < 0) throw std::invalid_argument("epochs must be nonnegative");
        if (batch < 1) throw std::invalid_argument("batch size must be positive");
        if (batch > n_data)
            throw std::invalid_argument("batch size exceeds dataset size");
        if (metric_every < 1) throw std::invalid_argument("metric cadence must be >= 1");
        if (target_sync_epochs < 1)
            throw std::invalid_argument("target sync cadence must be >= 1");
        if (!(gamma > 0.0) || gamma > 1.0)
            throw std::invalid_argument("gamma must lie in (0, 1]");
    }
};

/**
 * Reference values used for the two MSE columns: oracle values aligned
 * with the dataset's start states (training MSE) and an optional
 * separate evaluation grid (grid MSE). Either part may be left empty,
 * in which case the corresponding column records nan.
 */
struct EvalSpec {
    Eigen::VectorXd train_oracle;  // size = dataset size, or 0 when absent
    std::vector<Eigen::VectorXd> grid_states;
    Eigen::VectorXd grid_oracle;
};

/// One row of the metric log; extras carries schema-extension columns
/// (policy optimization appends return_mean, return_std).
struct MetricRecord {
    long epoch = 0;
    double loss = 0.0;
    double mse = std::numeric_limits<double>::quiet_NaN();
    double bellman = 0.0;
    double theta_norm = 0.0;
    std::string status = "ok";
    double mse_grid = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> extras;
};

/// Full result of a training run. Wallclock is kept out of the records
/// so the serialized log is byte-identical across reruns.
struct MetricLog {
    std::vector<MetricRecord> records;
    std::string status = "ok";  // status of the final record
    Eigen::VectorXd final_theta;
    double wallclock_seconds = 0.0;
    std::vector<std::string> extra_names;

    const MetricRecord& final_record() const {
        if (records.empty()) throw std::logic_error("MetricLog: no records");
        return records.back();
    }
};

namespace trainer_detail {

inline std::string format_metric(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace trainer_detail

/// Serializes a metric log as CSV with the documented column order:
/// epoch,loss,mse,bellman,theta_norm,status,mse_grid[,extras...].
inline std::string metric_csv(const MetricLog& log) {
    std::string out = "epoch,loss,mse,bellman,theta_norm,status,mse_grid";
    for (const std::string& name : log.extra_names) out += "," + name;
    out += "\n";
    for (const MetricRecord& r : log.records) {
        out += std::to_string(r.epoch);
        out += "," + trainer_detail::format_metric(r.loss);
        out += "," + trainer_detail::format_metric(r.mse);
        out += "," + trainer_detail::format_metric(r.bellman);
        out += "," + trainer_detail::format_metric(r.theta_norm);
        out += "," + r.status;
        out += "," + trainer_detail::format_metric(r.mse_grid);
        for (double e : r.extras) out += "," + trainer_detail::format_metric(e);
        out += "\n";
    }
    return out;
}

inline void save_metric_csv(const std::string& path, const MetricLog& log) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write metric log: " + path);
    f << metric_csv(log);
}

/// Wallclock lives in its own sidecar so the metrics file stays
/// byte-deterministic.
inline void save_timing_file(const std::string& path, const MetricLog& log) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write timing file: " + path);
    char buf[64];
    std::snprintf(buf, sizeof buf, "wallclock_seconds = %.6f\n", log.wallclock_seconds);
    f << buf;
}

namespace trainer_detail {

struct LossContext {
    const TrainConfig* config = nullptr;
    const std::vector<Transition>* transitions = nullptr;
    Eigen::VectorXd target_params;  // fvi frozen copy
    // Cached full-dataset Gram for the kernel losses, built on first use.
    Eigen::MatrixXd full_gram;
    bool full_gram_ready = false;
};

inline LossEstimate batch_loss(const ValueFunction& vf, const std::vector<Transition>& batch,
                               LossContext& ctx) {
    const TrainConfig& c = *ctx.config;
    if (c.loss == "kloss-v") return kernel_loss_vstat(vf, batch, c.kernel, c.gamma);
    if (c.loss == "kloss-u") return kernel_loss_ustat(vf, batch, c.kernel, c.gamma);
    if (c.loss == "rg") return rg_loss(vf, batch, c.gamma);
    if (c.loss == "fvi") return fvi_step_loss(vf, ctx.target_params, batch, c.gamma);
    throw std::logic_error("batch_loss: unexpected loss id " + c.loss);
}

/// Full-dataset value of the configured objective, for the loss column.
inline double full_loss(const ValueFunction& vf, LossContext& ctx) {
    const TrainConfig& c = *ctx.config;
    const std::vector<Transition>& data = *ctx.transitions;
    TdResidualBatch td = compute_td_residuals(vf, data, c.gamma);
    const long n = long(data.size());
    if (c.loss == "rg" || c.loss == "td0") return td.residuals.squaredNorm() / double(n);
    if (c.loss == "fvi") {
        ValueFunction frozen = vf;
        frozen.theta = ctx.target_params;
        double acc = 0.0;
        for (long i = 0; i < n; ++i) {
            const Transition& t = data[size_t(i)];
            double y = t.reward +
                       (t.terminal ? 0.0 : c.gamma * frozen.value(t.next_state));
            double diff = vf.value(t.state) - y;
            acc += diff * diff;
        }
        return acc / double(n);
    }
    const bool vstat = c.loss == "kloss-v";
    const double scale = vstat ? 1.0 / double(n) / double(n)
                               : 1.0 / double(n) / double(n - 1);
    if (c.kernel.kind == Kernel::Kind::LinearFeature)
        return loss_detail::linear_kernel_quadratic(c.kernel, data, td.residuals,
                                                    td.residual_grads, scale, vstat)
            .loss;
    if (!ctx.full_gram_ready) {
        ctx.full_gram = batch_gram(c.kernel, data);
        ctx.full_gram_ready = true;
    }
    Eigen::VectorXd weighted = ctx.full_gram * td.residuals;
    if (vstat) return scale * td.residuals.dot(weighted);
    // u-stat: strip the diagonal contribution.
    double diag = 0.0;
    for (long i = 0; i < n; ++i)
        diag += ctx.full_gram(i, i) * td.residuals[i] * td.residuals[i];
    return scale * (td.residuals.dot(weighted) - diag);
}

inline MetricRecord make_record(long epoch, const ValueFunction& vf, LossContext& ctx,
                                const EvalSpec& eval, const std::string& status) {
    const TrainConfig& c = *ctx.config;
    const std::vector<Transition>& data = *ctx.transitions;
    MetricRecord r;
    r.epoch = epoch;
    r.status = status;
    r.theta_norm = vf.theta.norm();
    TdResidualBatch td = compute_td_residuals(vf, data, c.gamma);
    r.bellman = td.residuals.squaredNorm() / double(data.size());
    r.loss = full_loss(vf, ctx);
    if (eval.train_oracle.size() == long(data.size())) {
        double acc = 0.0;
        for (size_t i = 0; i < data.size(); ++i) {
            double diff = td.values[long(i)] - eval.train_oracle[long(i)];
            acc += diff * diff;
        }
        r.mse = acc / double(data.size());
    }
    if (!eval.grid_states.empty() &&
        eval.grid_oracle.size() == long(eval.grid_states.size())) {
        double acc = 0.0;
        for (size_t i = 0; i < eval.grid_states.size(); ++i) {
            double diff = vf.value(eval.grid_states[i]) - eval.grid_oracle[long(i)];
            acc += diff * diff;
        }
        r.mse_grid = acc / double(eval.grid_states.size());
    }
    return r;
}

}  // namespace trainer_detail

/**
 * Deterministic policy-evaluation training loop.
 *
 * Epochs iterate ceil(n/batch) minibatches over a per-epoch seeded
 * permutation of the dataset. Batch losses are optimized with Adam (or
 * plain gradient steps); td0 instead applies its per-transition update
 * rule directly. FVI target parameters refresh at epoch boundaries on
 * the configured cadence. Metric rows are appended at epoch ends
 * (every metric_every epochs and always at the final epoch); epochs=0
 * produces the single initial record. A parameter norm beyond the
 * divergence threshold halts the run gracefully with status DIVERGED —
 * divergence is a reportable outcome, not an error.
 */
inline MetricLog run_evaluation_experiment(const ValueFunction& initial,
                                           const TransitionDataset& dataset,
                                           const TrainConfig& config,
                                           const EvalSpec& eval = {}) {
    dataset.validate();
    config.validate(long(dataset.size()));

    ValueFunction vf = initial;
    trainer_detail::LossContext ctx;
    ctx.config = &config;
    ctx.transitions = &dataset.transitions;
    ctx.target_params = vf.theta;

    AdamState adam = AdamState::init(vf.theta.size());
    Rng run_rng(config.seed);
    MetricLog log;

    if (config.epochs == 0) {
        log.records.push_back(trainer_detail::make_record(0, vf, ctx, eval, "ok"));
        log.status = "ok";
        log.final_theta = vf.theta;
        return log;
    }

    const long n = long(dataset.size());
    std::vector<long> order(static_cast<size_t>(n), 0);
    std::iota(order.begin(), order.end(), 0);
    bool diverged = false;

    for (long epoch = 1; epoch <= config.epochs && !diverged; ++epoch) {
        Rng perm_rng = run_rng.substream(std::uint64_t(epoch));
        shuffle(order, perm_rng);
        const long n_batches = (n + config.batch - 1) / config.batch;
        for (long b = 0; b < n_batches && !diverged; ++b) {
            const long lo = b * config.batch;
            const long hi = std::min(lo + config.batch, n);
            if (config.loss == "td0") {
                for (long i = lo; i < hi; ++i) {
                    vf.theta = td0_update(vf, dataset.transitions[size_t(order[size_t(i)])],
                                          config.gamma, config.lr);
                    if (vf.theta.norm() > config.divergence_threshold) {
                        diverged = true;
                        break;
                    }
                }
            } else {
                std::vector<Transition> batch;
                batch.reserve(size_t(hi - lo));
                for (long i = lo; i < hi; ++i)
                    batch.push_back(dataset.transitions[size_t(order[size_t(i)])]);
                LossEstimate est = trainer_detail::batch_loss(vf, batch, ctx);
                if (config.optimizer == "adam")
                    adam_step(adam, vf.theta, est.grad, config.lr);
                else
                    sgd_step(vf.theta, est.grad, config.lr);
                if (vf.theta.norm() > config.divergence_threshold) diverged = true;
            }
        }
        if (config.loss == "fvi" && epoch % config.target_sync_epochs == 0)
            ctx.target_params = vf.theta;
        const bool record = diverged || epoch % config.metric_every == 0 ||
                            epoch == config.epochs;
        if (record)
            log.records.push_back(trainer_detail::make_record(
                epoch, vf, ctx, eval, diverged ? "DIVERGED" : "ok"));
    }
    log.status = diverged ? "DIVERGED" : "ok";
    log.final_theta = vf.theta;
    return log;
}

/// Selection metrics understood by grid_search.
enum class SelectionMetric { FinalMse, FinalMseGrid, FinalLoss };

struct GridSearchResult {
    int best_index = -1;
    TrainConfig best_config;
    double best_metric = std::numeric_limits<double>::infinity();
    // logs[config][seed]
    std::vector<std::vector<MetricLog>> logs;
};

/**
 * Runs every config over n_seeds derived seeds (config.seed + j) and
 * returns the config minimizing the seed-averaged selection metric.
 * Diverged runs count as +infinity. Exact ties prefer the lower
 * learning rate, then the earlier config.
 */
inline GridSearchResult grid_search(const ValueFunction& initial,
                                    const TransitionDataset& dataset,
                                    const std::vector<TrainConfig>& configs, int n_seeds,
                                    SelectionMetric metric, const EvalSpec& eval = {}) {
    if (configs.empty()) throw std::invalid_argument("grid_search: no configs");
    if (n_seeds < 1) throw std::invalid_argument("grid_search: need at least one seed");
    GridSearchResult result;
    for (size_t ci = 0; ci < configs.size(); ++ci) {
        std::vector<MetricLog> seed_logs;
        double total = 0.0;
        for (int j = 0; j < n_seeds; ++j) {
            TrainConfig c = configs[ci];
            c.seed = c.seed + std::uint64_t(j);
            MetricLog log = run_evaluation_experiment(initial, dataset, c, eval);
            const MetricRecord& fin = log.final_record();
            double value = std::numeric_limits<double>::infinity();
            if (log.status == "ok") {
                switch (metric) {
                    case SelectionMetric::FinalMse: value = fin.mse; break;
                    case SelectionMetric::FinalMseGrid: value = fin.mse_grid; break;
                    case SelectionMetric::FinalLoss: value = fin.loss; break;
                }
            }
            if (!std::isfinite(value)) value = std::numeric_limits<double>::infinity();
            total += value;
            seed_logs.push_back(std::move(log));
        }
        const double avg = total / n_seeds;
        bool better = avg < result.best_metric;
        if (!better && avg == result.best_metric && result.best_index >= 0)
            better = configs[ci].lr < result.best_config.lr;
        if (better) {
            result.best_index = int(ci);
            result.best_config = configs[ci];
            result.best_metric = avg;
        }
        result.logs.push_back(std::move(seed_logs));
    }
    return result;
}

}  // namespace kbl
