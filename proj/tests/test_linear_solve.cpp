#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "kbl/linear_solve.hpp"
#include "kbl/losses.hpp"
#include "kbl/tabular.hpp"

using namespace kbl;

static Eigen::VectorXd vec1(double x) {
    Eigen::VectorXd v(1);
    v << x;
    return v;
}

static Transition make_t(double s, double r, double sp, bool terminal = false) {
    Transition t;
    t.state = vec1(s);
    t.action = vec1(0);
    t.reward = r;
    t.next_state = vec1(sp);
    t.terminal = terminal;
    return t;
}

// Deterministic 3-cycle used by several cases.
static TabularMdp cycle_mdp() {
    TabularMdp mdp;
    mdp.n_states = 3;
    mdp.n_actions = 1;
    mdp.discount = 0.9;
    mdp.terminal = {false, false, false};
    mdp.reward = Eigen::MatrixXd(3, 1);
    mdp.reward << 1.0, -0.2, 0.4;
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(3, 3);
    p(0, 1) = p(1, 2) = p(2, 0) = 1.0;
    mdp.transition = {p};
    mdp.validate();
    return mdp;
}

static std::vector<Transition> enumerate_cycle(const TabularMdp& mdp) {
    std::vector<Transition> out;
    for (int s = 0; s < 3; ++s) out.push_back(make_t(s, mdp.reward(s, 0), (s + 1) % 3));
    return out;
}

TEST_CASE("one-hot enumeration of a deterministic MDP recovers V^pi", "[linear-solve]") {
    TabularMdp mdp = cycle_mdp();
    TabularPolicy pol;
    pol.probs = Eigen::MatrixXd::Ones(3, 1);
    Eigen::VectorXd v_star = solve_value_function_direct(mdp, pol);
    LinearSystemBundle bundle = make_bundle(enumerate_cycle(mdp), FeatureMap::one_hot(3), 0.9);
    LinearSolveResult td = td_closed_form(bundle);
    LinearSolveResult kbe = kloss_closed_form(bundle);
    CHECK((td.theta - v_star).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK((kbe.theta - v_star).lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK(td.condition >= 1.0);
}

TEST_CASE("scalar bundle reduces to the ratio formula", "[linear-solve]") {
    // d = 1: theta = sum x_i r_i / sum x_i z_i.
    LinearSystemBundle b;
    b.gamma = 0.5;
    b.x.resize(3, 1);
    b.x << 1.0, 2.0, -1.0;
    b.x_next.resize(3, 1);
    b.x_next << 0.5, 1.0, 2.0;
    b.r.resize(3);
    b.r << 0.3, -0.1, 0.7;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < 3; ++i) {
        num += b.x(i, 0) * b.r[i];
        den += b.x(i, 0) * (b.x(i, 0) - 0.5 * b.x_next(i, 0));
    }
    CHECK(td_closed_form(b).theta[0] == Catch::Approx(num / den).epsilon(1e-13));
}

TEST_CASE("normal-equation residual is verified below 1e-10", "[linear-solve]") {
    Rng rng(7);
    LinearSystemBundle b;
    b.gamma = 0.9;
    b.x.resize(40, 4);
    b.x_next.resize(40, 4);
    b.r.resize(40);
    for (int i = 0; i < 40; ++i) {
        for (int j = 0; j < 4; ++j) {
            b.x(i, j) = rng.uniform(-1, 1);
            b.x_next(i, j) = rng.uniform(-1, 1);
        }
        b.r[i] = rng.uniform(-1, 1);
    }
    LinearSolveResult td = td_closed_form(b);
    Eigen::MatrixXd a = b.x.transpose() * b.z();
    CHECK((a * td.theta - b.x.transpose() * b.r).norm() < 1e-10);
}

TEST_CASE("kernel-loss and TD closed forms coincide", "[linear-solve]") {
    // The equivalence (X^T Z)^{-1} X^T r = (Z^T X X^T Z)^{-1} Z^T X X^T r
    // on 100 random well-conditioned bundles.
    Rng rng(11);
    int done = 0, attempts = 0;
    while (done < 100 && attempts < 1000) {
        Rng sub = rng.substream(attempts++);
        LinearSystemBundle b;
        b.gamma = sub.uniform(0.3, 0.99);
        int n = 20 + int(sub.uniform_int(30)), d = 2 + int(sub.uniform_int(4));
        b.x.resize(n, d);
        b.x_next.resize(n, d);
        b.r.resize(n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j) {
                b.x(i, j) = sub.uniform(-1, 1);
                b.x_next(i, j) = sub.uniform(-1, 1);
            }
            b.r[i] = sub.uniform(-1, 1);
        }
        LinearSolveResult td = td_closed_form(b);
        if (td.condition > 1e4) continue;  // keep the comparison numerically meaningful
        ++done;
        LinearSolveResult kbe = kloss_closed_form(b);
        REQUIRE((kbe.theta - td.theta).lpNorm<Eigen::Infinity>() < 1e-8);
    }
    REQUIRE(done == 100);
}

TEST_CASE("linear-kernel v-stat loss equals the norm of the expected update", "[linear-solve]") {
    // With k = phi^T phi the pairwise sum collapses: loss = (1/n^2)||X^T delta||^2.
    Rng rng(13);
    Eigen::MatrixXd table(4, 3);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) table(i, j) = rng.uniform(-1, 1);
    FeatureMap features = FeatureMap::from_table(table);
    ValueFunction vf = ValueFunction::linear(features);
    vf.theta << 0.5, -0.2, 0.9;
    std::vector<Transition> batch;
    for (int i = 0; i < 12; ++i)
        batch.push_back(make_t(double(rng.uniform_int(4)), rng.uniform(-1, 1),
                               double(rng.uniform_int(4))));
    LossEstimate est = kernel_loss_vstat(vf, batch, Kernel::linear(features), 0.9);
    LinearSystemBundle b = make_bundle(batch, features, 0.9);
    Eigen::VectorXd delta = b.r - b.z() * vf.theta;
    double direct = (b.x.transpose() * delta).squaredNorm() / (12.0 * 12.0);
    CHECK(est.loss == Catch::Approx(direct).margin(1e-13));
}

TEST_CASE("v-stat gradient vanishes at the closed-form minimizer", "[linear-solve]") {
    Rng rng(17);
    Eigen::MatrixXd table(5, 3);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 3; ++j) table(i, j) = rng.uniform(-1, 1);
    FeatureMap features = FeatureMap::from_table(table);
    std::vector<Transition> batch;
    for (int i = 0; i < 40; ++i)
        batch.push_back(make_t(double(rng.uniform_int(5)), rng.uniform(-1, 1),
                               double(rng.uniform_int(5))));
    LinearSolveResult kbe = kloss_closed_form(make_bundle(batch, features, 0.9));
    ValueFunction vf = ValueFunction::linear(features);
    vf.theta = kbe.theta;
    LossEstimate est = kernel_loss_vstat(vf, batch, Kernel::linear(features), 0.9);
    CHECK(est.grad.lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("gradient descent on the linear-kernel loss reaches the solver's point", "[linear-solve]") {
    Rng rng(19);
    Eigen::MatrixXd table(4, 2);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 2; ++j) table(i, j) = rng.uniform(-1, 1);
    FeatureMap features = FeatureMap::from_table(table);
    std::vector<Transition> batch;
    for (int i = 0; i < 30; ++i)
        batch.push_back(make_t(double(rng.uniform_int(4)), rng.uniform(-1, 1),
                               double(rng.uniform_int(4))));
    LinearSolveResult kbe = kloss_closed_form(make_bundle(batch, features, 0.9));
    ValueFunction vf = ValueFunction::linear(features);
    vf.theta.setZero();
    Kernel k = Kernel::linear(features);
    for (int step = 0; step < 60000; ++step)
        vf.theta -= 0.5 * kernel_loss_vstat(vf, batch, k, 0.9).grad;
    CHECK((vf.theta - kbe.theta).lpNorm<Eigen::Infinity>() < 1e-4);
}

TEST_CASE("singular systems fail with a condition estimate; ridge rescues", "[linear-solve]") {
    // Duplicated feature column makes X^T Z rank-deficient.
    LinearSystemBundle b;
    b.gamma = 0.9;
    b.x.resize(6, 2);
    b.x_next.resize(6, 2);
    b.r.resize(6);
    Rng rng(23);
    for (int i = 0; i < 6; ++i) {
        b.x(i, 0) = rng.uniform(-1, 1);
        b.x(i, 1) = b.x(i, 0);
        b.x_next(i, 0) = rng.uniform(-1, 1);
        b.x_next(i, 1) = b.x_next(i, 0);
        b.r[i] = rng.uniform(-1, 1);
    }
    try {
        td_closed_form(b);
        FAIL("expected singularity error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("condition") != std::string::npos);
    }
    CHECK_THROWS_AS(kloss_closed_form(b), std::runtime_error);
    CHECK_NOTHROW(kloss_closed_form(b, 1e-10));
}

TEST_CASE("certainty equivalence on an exact enumeration", "[linear-solve]") {
    TabularMdp mdp = cycle_mdp();
    TabularPolicy pol;
    pol.probs = Eigen::MatrixXd::Ones(3, 1);
    Eigen::VectorXd v_star = solve_value_function_direct(mdp, pol);
    CertaintyEquivalenceResult ce = certainty_equivalence(enumerate_cycle(mdp), 0.9);
    REQUIRE(ce.states == std::vector<int>{0, 1, 2});
    for (int s = 0; s < 3; ++s) CHECK(ce.value_of(s) == Catch::Approx(v_star[s]).margin(1e-10));
}

TEST_CASE("certainty equivalence equals the one-hot kernel-loss solve", "[linear-solve]") {
    // Random 3-state dataset; both paths computed independently.
    Rng rng(29);
    std::vector<Transition> data;
    for (int i = 0; i < 60; ++i) {
        int s = int(rng.uniform_int(3)), sp = int(rng.uniform_int(3));
        data.push_back(make_t(s, rng.uniform(-1, 1), sp));
    }
    CertaintyEquivalenceResult ce = certainty_equivalence(data, 0.9);
    LinearSolveResult kbe = kloss_closed_form(make_bundle(data, FeatureMap::one_hot(3), 0.9));
    for (int s = 0; s < 3; ++s) REQUIRE(ce.value_of(s) == Catch::Approx(kbe.theta[s]).margin(1e-8));

    // Duplicating every transition leaves the frequencies, hence the
    // values, unchanged.
    std::vector<Transition> tripled;
    for (int c = 0; c < 3; ++c) tripled.insert(tripled.end(), data.begin(), data.end());
    CertaintyEquivalenceResult ce3 = certainty_equivalence(tripled, 0.9);
    for (int s = 0; s < 3; ++s) REQUIRE(ce3.value_of(s) == Catch::Approx(ce.value_of(s)).margin(1e-12));
}

TEST_CASE("certainty equivalence rejects dead-end observations", "[linear-solve]") {
    std::vector<Transition> data{make_t(0, 1.0, 1), make_t(1, 0.5, 2)};
    // State 2 is observed as a next state, is not terminal, and never
    // appears as a start state: no outgoing data.
    CHECK_THROWS_AS(certainty_equivalence(data, 0.9), std::runtime_error);
    // Marking it terminal resolves the dead end (value pinned at 0).
    data[1].terminal = true;
    CertaintyEquivalenceResult ce = certainty_equivalence(data, 0.9);
    CHECK(ce.value_of(1) == Catch::Approx(0.5).margin(1e-12));
    CHECK(ce.value_of(0) == Catch::Approx(1.0 + 0.9 * 0.5).margin(1e-12));
}
