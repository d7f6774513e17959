#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbl/kernels.hpp"
#include "kbl/rng.hpp"

namespace kbl {

/// Value and flat parameter gradient at one state.
struct GradientRecord {
    double value = 0.0;
    Eigen::VectorXd grad;
};

/**
 * Small fully-connected network with a linear output layer.
 *
 * Parameters live in one flat vector ordered layer-major: for each layer,
 * the weight matrix row-major (one row per output unit), then the bias.
 * This ordering is part of the checkpoint contract.
 *
 * The relu derivative at an exactly-zero preactivation is 0 (subgradient
 * convention, pinned by tests).
 */
struct Mlp {
    enum class Activation { Relu, Tanh };

    std::vector<int> widths;  // input, hidden..., output
    Activation activation = Activation::Relu;

    Mlp() = default;
    Mlp(std::vector<int> w, Activation act) : widths(std::move(w)), activation(act) {
        if (widths.size() < 2) throw std::invalid_argument("Mlp: need at least input and output widths");
        for (int x : widths)
            if (x <= 0) throw std::invalid_argument("Mlp: widths must be positive");
    }

    int n_layers() const { return int(widths.size()) - 1; }

    long n_params() const {
        long n = 0;
        for (int l = 0; l < n_layers(); ++l) n += long(widths[l]) * widths[l + 1] + widths[l + 1];
        return n;
    }

    /// Uniform fan-in initialization: every weight and bias of a layer with
    /// fan_in inputs is drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    Eigen::VectorXd init_params(Rng& rng) const {
        Eigen::VectorXd theta(n_params());
        long k = 0;
        for (int l = 0; l < n_layers(); ++l) {
            double bound = 1.0 / std::sqrt(double(widths[l]));
            long count = long(widths[l]) * widths[l + 1] + widths[l + 1];
            for (long i = 0; i < count; ++i) theta[k++] = rng.uniform(-bound, bound);
        }
        return theta;
    }

    Eigen::VectorXd forward(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const {
        check(theta, x);
        Eigen::VectorXd a = x;
        long k = 0;
        for (int l = 0; l < n_layers(); ++l) {
            a = affine(theta, k, l, a);
            if (l + 1 < n_layers()) apply_activation(a);
        }
        return a;
    }

    /**
     * Reverse-mode derivative of cotangent . output with respect to theta.
     * Passing the cotangent explicitly lets a scalar value function use
     * [1] while a policy mean network backpropagates an arbitrary vector.
     */
    Eigen::VectorXd backward(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& cotangent, Eigen::VectorXd* grad_theta) const {
        check(theta, x);
        const int depth = n_layers();
        std::vector<Eigen::VectorXd> acts(depth + 1);  // post-activation per layer
        std::vector<Eigen::VectorXd> pre(depth);       // preactivations
        acts[0] = x;
        long k = 0;
        for (int l = 0; l < depth; ++l) {
            pre[l] = affine(theta, k, l, acts[l]);
            acts[l + 1] = pre[l];
            if (l + 1 < depth) apply_activation(acts[l + 1]);
        }
        if (cotangent.size() != widths.back())
            throw std::invalid_argument("Mlp: cotangent length mismatch");

        grad_theta->setZero(n_params());
        Eigen::VectorXd g = cotangent;
        for (int l = depth - 1; l >= 0; --l) {
            if (l + 1 < depth) {  // undo the activation between layers l and l+1
                for (Eigen::Index i = 0; i < g.size(); ++i)
                    g[i] *= activation_derivative(pre[l][i]);
            }
            long base = layer_offset(l);
            const int in = widths[l], out = widths[l + 1];
            for (int o = 0; o < out; ++o) {
                for (int i = 0; i < in; ++i) (*grad_theta)[base + long(o) * in + i] = g[o] * acts[l][i];
                (*grad_theta)[base + long(out) * in + o] = g[o];
            }
            if (l > 0) {
                Eigen::VectorXd gx = Eigen::VectorXd::Zero(in);
                for (int o = 0; o < out; ++o)
                    for (int i = 0; i < in; ++i) gx[i] += theta[base + long(o) * in + i] * g[o];
                g = std::move(gx);
            }
        }
        return acts[depth];
    }

    long layer_offset(int layer) const {
        long k = 0;
        for (int l = 0; l < layer; ++l) k += long(widths[l]) * widths[l + 1] + widths[l + 1];
        return k;
    }

    std::string describe() const {
        std::string s = "mlp";
        for (int w : widths) s += " " + std::to_string(w);
        s += activation == Activation::Relu ? " relu" : " tanh";
        return s;
    }

private:
    void check(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const {
        if (theta.size() != n_params()) throw std::invalid_argument("Mlp: parameter length mismatch");
        if (x.size() != widths.front()) throw std::invalid_argument("Mlp: input dimension mismatch");
    }

    Eigen::VectorXd affine(const Eigen::VectorXd& theta, long& k, int l, const Eigen::VectorXd& a) const {
        const int in = widths[l], out = widths[l + 1];
        Eigen::VectorXd z(out);
        for (int o = 0; o < out; ++o) {
            double acc = 0.0;
            for (int i = 0; i < in; ++i) acc += theta[k + long(o) * in + i] * a[i];
            z[o] = acc + theta[k + long(out) * in + o];
        }
        k += long(out) * in + out;
        return z;
    }

    void apply_activation(Eigen::VectorXd& v) const {
        if (activation == Activation::Relu) {
            for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = v[i] > 0.0 ? v[i] : 0.0;
        } else {
            for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = std::tanh(v[i]);
        }
    }

    double activation_derivative(double z) const {
        if (activation == Activation::Relu) return z > 0.0 ? 1.0 : 0.0;
        double t = std::tanh(z);
        return 1.0 - t * t;
    }
};

/**
 * Scalar value function, linear in features or a one-output MLP, with a
 * flat mutable parameter vector so optimizers treat both kinds alike.
 */
struct ValueFunction {
    enum class Kind { Linear, Mlp };

    Kind kind = Kind::Linear;
    FeatureMap features;  // linear kind
    struct Mlp net;       // mlp kind
    Eigen::VectorXd theta;

    static ValueFunction linear(FeatureMap f) {
        ValueFunction vf;
        vf.kind = Kind::Linear;
        vf.features = std::move(f);
        vf.theta = Eigen::VectorXd::Zero(vf.features.dim());
        return vf;
    }

    static ValueFunction mlp(int input_dim, std::vector<int> hidden, Mlp::Activation act,
                             std::uint64_t init_seed) {
        ValueFunction vf;
        vf.kind = Kind::Mlp;
        std::vector<int> widths{input_dim};
        widths.insert(widths.end(), hidden.begin(), hidden.end());
        widths.push_back(1);
        vf.net = Mlp(std::move(widths), act);
        Rng rng(init_seed);
        vf.theta = vf.net.init_params(rng);
        return vf;
    }

    long n_params() const { return theta.size(); }

    double value(const Eigen::VectorXd& s) const {
        if (!theta.allFinite()) throw std::runtime_error("ValueFunction: non-finite parameters");
        if (kind == Kind::Linear) return features(s).dot(theta);
        return net.forward(theta, s)[0];
    }

    GradientRecord value_and_grad(const Eigen::VectorXd& s) const {
        if (!theta.allFinite()) throw std::runtime_error("ValueFunction: non-finite parameters");
        GradientRecord rec;
        if (kind == Kind::Linear) {
            rec.grad = features(s);
            rec.value = rec.grad.dot(theta);
        } else {
            Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
            Eigen::VectorXd out = net.backward(theta, s, one, &rec.grad);
            rec.value = out[0];
        }
        return rec;
    }

    /// Elementwise identical to value_and_grad; a plain loop so batched
    /// and single paths match bitwise.
    std::vector<GradientRecord> batched_values_and_grads(const std::vector<Eigen::VectorXd>& states) const {
        std::vector<GradientRecord> out;
        out.reserve(states.size());
        for (const auto& s : states) out.push_back(value_and_grad(s));
        return out;
    }

    std::string describe() const {
        if (kind == Kind::Linear) return "linear " + std::to_string(features.dim());
        return net.describe();
    }
};

// ---------------------------------------------------------------------------
// Checkpoints: text header, then theta as little-endian 64-bit floats.
// ---------------------------------------------------------------------------

struct Checkpoint {
    std::string kind;          // "linear" or "mlp"
    std::string architecture;  // e.g. "linear 3" or "mlp 2 80 1 relu"
    Eigen::VectorXd theta;
};

inline void save_checkpoint(const std::string& path, const ValueFunction& vf) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
    f << "kbl-checkpoint 1\n";
    f << "kind = " << (vf.kind == ValueFunction::Kind::Linear ? "linear" : "mlp") << "\n";
    f << "architecture = " << vf.describe() << "\n";
    f << "n_params = " << vf.theta.size() << "\n";
    static_assert(sizeof(double) == 8);
    f.write(reinterpret_cast<const char*>(vf.theta.data()), vf.theta.size() * 8);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(f, line) || line != "kbl-checkpoint 1")
        throw std::runtime_error("checkpoint: bad magic line");
    Checkpoint ck;
    long n = -1;
    for (int i = 0; i < 3; ++i) {
        if (!std::getline(f, line)) throw std::runtime_error("checkpoint: truncated header");
        auto eq = line.find(" = ");
        if (eq == std::string::npos) throw std::runtime_error("checkpoint: malformed header line");
        std::string key = line.substr(0, eq), val = line.substr(eq + 3);
        if (key == "kind") ck.kind = val;
        else if (key == "architecture") ck.architecture = val;
        else if (key == "n_params") n = std::stol(val);
        else throw std::runtime_error("checkpoint: unknown header key " + key);
    }
    if (n < 0) throw std::runtime_error("checkpoint: missing n_params");
    ck.theta.resize(n);
    f.read(reinterpret_cast<char*>(ck.theta.data()), n * 8);
    if (f.gcount() != n * 8) throw std::runtime_error("checkpoint: truncated parameter block");
    return ck;
}

/// Rebuilds the MLP architecture recorded in a checkpoint header.
inline Mlp mlp_from_architecture(const std::string& arch) {
    std::istringstream in(arch);
    std::string tag;
    in >> tag;
    if (tag != "mlp") throw std::runtime_error("checkpoint: not an mlp architecture: " + arch);
    std::vector<int> widths;
    std::string tok;
    Mlp::Activation act = Mlp::Activation::Relu;
    while (in >> tok) {
        if (tok == "relu") act = Mlp::Activation::Relu;
        else if (tok == "tanh") act = Mlp::Activation::Tanh;
        else widths.push_back(std::stoi(tok));
    }
    return Mlp(widths, act);
}

}  // namespace kbl
