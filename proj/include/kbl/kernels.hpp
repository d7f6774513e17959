#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace kbl {

/**
 * Feature map used by linear value functions and the linear kernel.
 *
 * Identity passes the raw (already normalized) state through. Table maps
 * a discrete state, encoded as a 1-d vector [index], to the matching row
 * of a feature matrix. OneHot maps [index] to an indicator basis vector.
 */
struct FeatureMap {
    enum class Kind { Identity, Table, OneHot };

    Kind kind = Kind::Identity;
    int identity_dim = 0;
    Eigen::MatrixXd table;  // Table kind: row per discrete state
    int one_hot_dim = 0;

    static FeatureMap identity(int dim) {
        FeatureMap f;
        f.kind = Kind::Identity;
        f.identity_dim = dim;
        return f;
    }
    static FeatureMap from_table(Eigen::MatrixXd rows) {
        FeatureMap f;
        f.kind = Kind::Table;
        f.table = std::move(rows);
        return f;
    }
    static FeatureMap one_hot(int n) {
        FeatureMap f;
        f.kind = Kind::OneHot;
        f.one_hot_dim = n;
        return f;
    }

    int dim() const {
        switch (kind) {
            case Kind::Identity: return identity_dim;
            case Kind::Table: return int(table.cols());
            case Kind::OneHot: return one_hot_dim;
        }
        return 0;
    }

    Eigen::VectorXd operator()(const Eigen::VectorXd& s) const {
        switch (kind) {
            case Kind::Identity:
                if (s.size() != identity_dim)
                    throw std::invalid_argument("FeatureMap: state dimension mismatch");
                return s;
            case Kind::Table: {
                int i = discrete_index(s);
                if (i < 0 || i >= table.rows())
                    throw std::invalid_argument("FeatureMap: state index out of range");
                return table.row(i).transpose();
            }
            case Kind::OneHot: {
                int i = discrete_index(s);
                if (i < 0 || i >= one_hot_dim)
                    throw std::invalid_argument("FeatureMap: state index out of range");
                Eigen::VectorXd e = Eigen::VectorXd::Zero(one_hot_dim);
                e[i] = 1.0;
                return e;
            }
        }
        throw std::logic_error("FeatureMap: unknown kind");
    }

    static int discrete_index(const Eigen::VectorXd& s) {
        if (s.size() != 1) throw std::invalid_argument("FeatureMap: expected 1-d [index] state");
        return int(std::llround(s[0]));
    }
};

/**
 * Symmetric positive-definite kernel over states or state-action pairs.
 *
 * Gaussian kinds use k(x, y) = exp(-||x - y||^2 / h^2) with h the length
 * scale, so k(x, x) = 1. The linear kind is k(x, y) = phi(x)^T phi(y).
 * The state-action kind applies the Gaussian form to concatenated
 * [state, action] vectors, i.e. the distance splits as
 * ||ds||^2 + ||da||^2.
 */
struct Kernel {
    enum class Kind { GaussianRbf, LinearFeature, StateActionRbf };

    Kind kind = Kind::GaussianRbf;
    double length_scale = 0.5;
    FeatureMap features;  // LinearFeature kind only

    static Kernel gaussian(double h) {
        Kernel k;
        k.kind = Kind::GaussianRbf;
        k.length_scale = h;
        return k;
    }
    static Kernel linear(FeatureMap f) {
        Kernel k;
        k.kind = Kind::LinearFeature;
        k.features = std::move(f);
        return k;
    }
    static Kernel state_action(double h) {
        Kernel k;
        k.kind = Kind::StateActionRbf;
        k.length_scale = h;
        return k;
    }

    double eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
        if (x.size() != y.size()) throw std::invalid_argument("Kernel: dimension mismatch");
        switch (kind) {
            case Kind::GaussianRbf:
            case Kind::StateActionRbf: {
                if (length_scale <= 0.0) throw std::invalid_argument("Kernel: bandwidth must be positive");
                double d2 = 0.0;
                for (Eigen::Index i = 0; i < x.size(); ++i) {
                    double d = x[i] - y[i];
                    d2 += d * d;
                }
                return std::exp(-d2 / (length_scale * length_scale));
            }
            case Kind::LinearFeature: {
                Eigen::VectorXd fx = features(x), fy = features(y);
                double acc = 0.0;
                for (Eigen::Index i = 0; i < fx.size(); ++i) acc += fx[i] * fy[i];
                return acc;
            }
        }
        throw std::logic_error("Kernel: unknown kind");
    }
};

/**
 * Median-heuristic bandwidth (alpha * med)^2, where med is the median of
 * all n(n-1)/2 pairwise Euclidean distances. The returned value is the
 * denominator of exp(-d^2 / h_sq); the matching Kernel length scale is
 * its square root, alpha * med.
 */
inline double median_bandwidth(const std::vector<Eigen::VectorXd>& points, double alpha) {
    if (points.size() < 2) throw std::invalid_argument("median_bandwidth: need at least 2 points");
    std::vector<double> dists;
    dists.reserve(points.size() * (points.size() - 1) / 2);
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j)
            dists.push_back((points[i] - points[j]).norm());
    std::sort(dists.begin(), dists.end());
    double med;
    std::size_t m = dists.size();
    if (m % 2 == 1)
        med = dists[m / 2];
    else
        med = 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
    if (med <= 0.0) throw std::invalid_argument("median_bandwidth: all points identical");
    double h = alpha * med;
    return h * h;
}

/// Gram matrix G(i, j) = k(x_i, x_j) over the rows of `points`.
/// The upper triangle is computed once and mirrored, so G is exactly
/// symmetric.
inline Eigen::MatrixXd gram_matrix(const Kernel& kernel, const Eigen::MatrixXd& points) {
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            double v = kernel.eval(points.row(i).transpose(), points.row(j).transpose());
            g(i, j) = v;
            g(j, i) = v;
        }
    }
    return g;
}

}  // namespace kbl
