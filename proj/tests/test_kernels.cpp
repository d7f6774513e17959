#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "kbl/kernels.hpp"
#include "kbl/rng.hpp"

using kbl::FeatureMap;
using kbl::Kernel;

static Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

TEST_CASE("gaussian kernel hand value and unit diagonal", "[kernels]") {
    Kernel k = Kernel::gaussian(0.5);
    // ||x - y||^2 = 0.3^2 + 0.4^2 = 0.25, so d^2 / h^2 = 0.25 / 0.25 = 1.
    CHECK(k.eval(vec2(0, 0), vec2(0.3, 0.4)) == Catch::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(k.eval(vec2(0.7, -0.2), vec2(0.7, -0.2)) == 1.0);
}

TEST_CASE("gaussian kernel is exactly symmetric in floating point", "[kernels]") {
    kbl::Rng rng(21);
    Kernel k = Kernel::gaussian(0.37);
    for (int t = 0; t < 100; ++t) {
        Eigen::VectorXd x = vec2(rng.uniform(-2, 2), rng.uniform(-2, 2));
        Eigen::VectorXd y = vec2(rng.uniform(-2, 2), rng.uniform(-2, 2));
        REQUIRE(k.eval(x, y) == k.eval(y, x));
    }
}

TEST_CASE("gaussian kernel rejects bad inputs", "[kernels]") {
    Kernel k = Kernel::gaussian(0.0);
    CHECK_THROWS_AS(k.eval(vec2(0, 0), vec2(1, 1)), std::invalid_argument);
    Kernel ok = Kernel::gaussian(1.0);
    Eigen::VectorXd x3(3);
    x3 << 1, 2, 3;
    CHECK_THROWS_AS(ok.eval(vec2(0, 0), x3), std::invalid_argument);
}

TEST_CASE("linear kernel is the feature dot product", "[kernels]") {
    Eigen::MatrixXd table(3, 2);
    table << 1, 0, 2, 1, 0, 3;
    Kernel k = Kernel::linear(FeatureMap::from_table(table));
    Eigen::VectorXd s0(1), s1(1), s2(1);
    s0 << 0;
    s1 << 1;
    s2 << 2;
    CHECK(k.eval(s0, s1) == 2.0);   // [1,0].[2,1]
    CHECK(k.eval(s1, s2) == 3.0);   // [2,1].[0,3]
    CHECK(k.eval(s1, s1) == 5.0);   // [2,1].[2,1]
}

TEST_CASE("one-hot features give the indicator kernel", "[kernels]") {
    Kernel k = Kernel::linear(FeatureMap::one_hot(4));
    Eigen::VectorXd a(1), b(1);
    a << 2;
    b << 3;
    CHECK(k.eval(a, a) == 1.0);
    CHECK(k.eval(a, b) == 0.0);
}

TEST_CASE("feature map validates indices and dimensions", "[kernels]") {
    FeatureMap id = FeatureMap::identity(2);
    CHECK(id(vec2(0.5, 0.25)) == vec2(0.5, 0.25));
    Eigen::VectorXd s3(3);
    s3 << 1, 2, 3;
    CHECK_THROWS_AS(id(s3), std::invalid_argument);
    FeatureMap oh = FeatureMap::one_hot(3);
    Eigen::VectorXd bad(1);
    bad << 3;
    CHECK_THROWS_AS(oh(bad), std::invalid_argument);
    CHECK(oh.dim() == 3);
    CHECK(id.dim() == 2);
}

TEST_CASE("state-action kernel splits the squared distance", "[kernels]") {
    Kernel k = Kernel::state_action(1.0);
    // [s; a] pairs: ds^2 = 0.25, da^2 = 0.09 -> k = exp(-0.34).
    Eigen::VectorXd x(3), y(3);
    x << 0.0, 0.0, 0.1;
    y << 0.3, 0.4, 0.4;
    CHECK(k.eval(x, y) == Catch::Approx(std::exp(-0.34)).epsilon(1e-15));
}

TEST_CASE("median bandwidth on hand-counted point sets", "[kernels]") {
    // Points 0, 1, 3 on a line: distances {1, 2, 3}, median 2.
    std::vector<Eigen::VectorXd> pts;
    for (double x : {0.0, 1.0, 3.0}) {
        Eigen::VectorXd v(1);
        v << x;
        pts.push_back(v);
    }
    CHECK(kbl::median_bandwidth(pts, 1.0) == Catch::Approx(4.0));
    CHECK(kbl::median_bandwidth(pts, 0.5) == Catch::Approx(1.0));

    // Even count: 0, 1, 2, 4 -> distances {1, 1, 2, 2, 3, 4}, median 2.
    Eigen::VectorXd v(1);
    v << 2.0;
    pts.insert(pts.begin() + 2, v);
    pts[3][0] = 4.0;
    CHECK(kbl::median_bandwidth(pts, 1.0) == Catch::Approx(4.0));
}

TEST_CASE("median bandwidth rejects degenerate inputs", "[kernels]") {
    std::vector<Eigen::VectorXd> one{vec2(0, 0)};
    CHECK_THROWS_AS(kbl::median_bandwidth(one, 1.0), std::invalid_argument);
    std::vector<Eigen::VectorXd> same{vec2(1, 1), vec2(1, 1), vec2(1, 1)};
    CHECK_THROWS_AS(kbl::median_bandwidth(same, 1.0), std::invalid_argument);
}

TEST_CASE("median bandwidth matches a sort-free quadratic oracle", "[kernels]") {
    // Oracle: count-based median over the full pairwise distance multiset.
    kbl::Rng rng(55);
    std::vector<Eigen::VectorXd> pts;
    std::vector<double> dists;
    for (int i = 0; i < 64; ++i) pts.push_back(vec2(rng.uniform(), rng.uniform()));
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) dists.push_back((pts[i] - pts[j]).norm());
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
    double hi = dists[dists.size() / 2];
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2 - 1, dists.end());
    double med = dists.size() % 2 ? hi : 0.5 * (hi + dists[dists.size() / 2 - 1]);
    CHECK(kbl::median_bandwidth(pts, 0.3) == Catch::Approx(0.09 * med * med).epsilon(1e-14));
}

TEST_CASE("gaussian gram matrices are positive semidefinite", "[kernels]") {
    kbl::Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        kbl::Rng sub = rng.substream(trial);
        int n = 5 + int(sub.uniform_int(15));
        Eigen::MatrixXd pts(n, 2);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < 2; ++j) pts(i, j) = sub.uniform(-1, 1);
        Eigen::MatrixXd g = kbl::gram_matrix(Kernel::gaussian(0.5 + sub.uniform()), pts);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
        REQUIRE(eig.eigenvalues().minCoeff() >= -1e-10);
    }
}

TEST_CASE("duplicated points make the gram rank-deficient", "[kernels]") {
    Eigen::MatrixXd pts(3, 2);
    pts << 0.2, 0.4, 0.2, 0.4, 0.9, 0.1;  // rows 0 and 1 coincide
    Eigen::MatrixXd g = kbl::gram_matrix(Kernel::gaussian(0.5), pts);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
    CHECK(std::abs(eig.eigenvalues().minCoeff()) < 1e-12);
}

TEST_CASE("linear-feature gram equals phi phi^T exactly", "[kernels]") {
    kbl::Rng rng(88);
    Eigen::MatrixXd table(5, 3);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 3; ++j) table(i, j) = rng.uniform(-1, 1);
    Eigen::MatrixXd idx(5, 1);
    for (int i = 0; i < 5; ++i) idx(i, 0) = i;
    Eigen::MatrixXd g = kbl::gram_matrix(Kernel::linear(FeatureMap::from_table(table)), idx);
    Eigen::MatrixXd expect = table * table.transpose();
    // Same multiply-accumulate order as a plain dot product: exact equality.
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) REQUIRE(g(i, j) == Catch::Approx(expect(i, j)).margin(1e-15));
}

TEST_CASE("gram matrix is exactly symmetric with unit diagonal", "[kernels]") {
    kbl::Rng rng(33);
    Eigen::MatrixXd pts(6, 2);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 2; ++j) pts(i, j) = rng.uniform();
    Eigen::MatrixXd g = kbl::gram_matrix(Kernel::gaussian(0.5), pts);
    CHECK((g - g.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < 6; ++i) CHECK(g(i, i) == 1.0);
    // Spot-check one entry against a direct evaluation.
    CHECK(g(1, 4) == Kernel::gaussian(0.5).eval(pts.row(1).transpose(), pts.row(4).transpose()));
}
