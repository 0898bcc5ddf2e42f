#include <doctest.h>

#include <Eigen/Core>
#include <cmath>
#include <map>
#include <vector>

#include "gelc/errors.hpp"
#include "gelc/model.hpp"
#include "gelc/npmle.hpp"
#include "gelc/partition.hpp"
#include "gelc/quadrature.hpp"
#include "gelc/rng.hpp"
#include "oracles/turnbull_oracle.hpp"

using namespace gelc;

namespace {

using MembershipMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

const Eigen::VectorXd kNoX = Eigen::VectorXd(0);

Dataset make_dataset(const std::vector<double>& ys, const std::vector<ObservedInterval>& ivs) {
    Dataset data;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        Observation o;
        o.y = ys[i];
        o.x = kNoX;
        o.interval = ivs[i];
        data.push_back(o);
    }
    return data;
}

// Plain-loop transcription of the outcome-informed EM step, kept independent
// of the library's vectorized path.
Eigen::VectorXd looped_update(const Eigen::VectorXd& w, const Partition& part,
                              const CellDensityMatrix& C) {
    const int n = part.n();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(w.size());
    for (int i = 0; i < n; ++i) {
        double denom = 0.0;
        for (int j : part.row_cells[i]) denom += w[j] * C.values(i, j);
        for (int j : part.row_cells[i]) out[j] += w[j] * C.values(i, j) / denom;
    }
    return out / static_cast<double>(n);
}

// Random mixed collection: exact points and half-open intervals on a coarse
// grid so ties and nesting occur often.
std::vector<ObservedInterval> random_intervals(RandomStream& rng, int n) {
    std::vector<ObservedInterval> ivs;
    for (int i = 0; i < n; ++i) {
        const double a = 0.5 * static_cast<double>(rng.next_u64() % 28);
        if (rng.next_double() < 0.3) {
            ivs.push_back({a, a, true, true});
        } else {
            const double b = a + 0.5 * static_cast<double>(1 + rng.next_u64() % 10);
            ivs.push_back({a, b, true, false});
        }
    }
    return ivs;
}

}  // namespace

TEST_CASE("all-exact data yields the empirical distribution immediately") {
    const std::vector<ObservedInterval> ivs = {
        {1.0, 1.0, true, true}, {2.0, 2.0, true, true}, {1.0, 1.0, true, true},
        {4.0, 4.0, true, true}, {2.0, 2.0, true, true}, {1.0, 1.0, true, true}};
    const Partition part = build_partition(ivs);
    REQUIRE(part.m() == 3);

    const Dataset data = make_dataset({0.9, 1.8, 1.1, 3.7, 2.2, 0.8}, ivs);
    ParameterVector th;
    th.alpha = 0.1;
    th.beta = Eigen::VectorXd(0);
    th.gamma = 0.2;
    th.phi = 1.0;
    const CellDensityMatrix C = cell_density_matrix(data, part, Family::gamma_log, th, 1e-8);

    const WeightSolveResult ws = solve_weights(uniform_weights(part), part, C, 1e-10);
    CHECK(ws.converged);
    CHECK(ws.iterations <= 2);
    // Masses are the sample frequencies of 1, 2, 4 regardless of theta.
    CHECK(ws.w[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(ws.w[1] == doctest::Approx(2.0 / 6.0).epsilon(1e-14));
    CHECK(ws.w[2] == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
}

TEST_CASE("classic solver puts all mass on the shared middle cell") {
    // Closed [1,3] and [2,5] overlap exactly on [2,3]; the NPMLE concentrates
    // there and the flanking cells starve.
    const std::vector<ObservedInterval> ivs = {{1.0, 3.0, true, true}, {2.0, 5.0, true, true}};
    const Partition part = build_partition(ivs);
    REQUIRE(part.m() == 3);
    CHECK(part.cells[1].left == 2.0);
    CHECK(part.cells[1].right == 3.0);

    const WeightSolveResult ws = solve_classic_weights(part, 1e-12, 200000);
    CHECK(ws.converged);
    CHECK(ws.w[0] == doctest::Approx(0.0).epsilon(1e-8));
    CHECK(ws.w[1] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(ws.w[2] == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("one outcome-informed step matches hand-computed masses") {
    const std::vector<ObservedInterval> ivs = {
        {0.0, 2.0, true, false}, {1.0, 3.0, true, false}, {2.0, 2.0, true, true}};
    const Partition part = build_partition(ivs);
    REQUIRE(part.m() == 4);

    CellDensityMatrix C;
    C.values = Eigen::MatrixXd::Zero(3, 4);
    C.row_log_shift = Eigen::VectorXd::Zero(3);
    C.values(0, 0) = 0.5;
    C.values(0, 1) = 1.0;
    C.values(1, 1) = 0.8;
    C.values(1, 2) = 2.0;
    C.values(1, 3) = 0.4;
    C.values(2, 2) = 1.5;

    const Eigen::VectorXd w0 = Eigen::VectorXd::Constant(4, 0.25);
    const Eigen::VectorXd w1 = gelc_weight_update(w0, part, C);
    CHECK(w1[0] == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
    CHECK(w1[1] == doctest::Approx(11.0 / 36.0).epsilon(1e-12));
    CHECK(w1[2] == doctest::Approx(13.0 / 24.0).epsilon(1e-12));
    CHECK(w1[3] == doctest::Approx(1.0 / 24.0).epsilon(1e-12));

    // A second step agrees with the loop transcription to full precision.
    const Eigen::VectorXd w2 = gelc_weight_update(w1, part, C);
    const Eigen::VectorXd w2_loop = looped_update(w1, part, C);
    for (int j = 0; j < 4; ++j) CHECK(w2[j] == doctest::Approx(w2_loop[j]).epsilon(1e-14));
}

TEST_CASE("disjoint observations recover group frequencies in one step") {
    std::vector<ObservedInterval> ivs;
    for (int i = 0; i < 5; ++i) ivs.push_back({0.0, 1.0, true, false});
    for (int i = 0; i < 3; ++i) ivs.push_back({4.0, 6.0, true, false});
    const Partition part = build_partition(ivs);
    REQUIRE(part.m() == 2);

    const Eigen::VectorXd w1 = turnbull_update(uniform_weights(part), part.kappa);
    CHECK(w1[0] == doctest::Approx(5.0 / 8.0).epsilon(1e-14));
    CHECK(w1[1] == doctest::Approx(3.0 / 8.0).epsilon(1e-14));
}

TEST_CASE("updates preserve the simplex and zero stays zero") {
    RandomStream rng(101, stream_tag("npmle-simplex"));
    for (int trial = 0; trial < 30; ++trial) {
        const auto ivs = random_intervals(rng, 12);
        const Partition part = build_partition(ivs);
        const int m = part.m();

        CellDensityMatrix C;
        C.values = Eigen::MatrixXd::Zero(part.n(), m);
        C.row_log_shift = Eigen::VectorXd::Zero(part.n());
        for (int i = 0; i < part.n(); ++i)
            for (int j : part.row_cells[i]) C.values(i, j) = rng.next_uniform(0.05, 3.0);

        Eigen::VectorXd w = uniform_weights(part);
        if (m > 1) {
            // Knock one coordinate out; EM must keep it at exactly zero.
            w[0] = 0.0;
            w /= w.sum();
        }
        bool row_lost = false;
        for (int i = 0; i < part.n(); ++i) {
            double d = 0.0;
            for (int j : part.row_cells[i]) d += w[j] * C.values(i, j);
            if (d <= 0.0) row_lost = true;
        }
        if (row_lost) continue;  // zeroing w[0] emptied some row; skip draw

        for (int step = 0; step < 5; ++step) {
            w = gelc_weight_update(w, part, C);
            CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(w.minCoeff() >= 0.0);
            if (m > 1) CHECK(w[0] == 0.0);
        }
    }
}

TEST_CASE("conditional loglikelihood is monotone along the iteration") {
    RandomStream rng(102, stream_tag("npmle-monotone"));
    for (int trial = 0; trial < 10; ++trial) {
        const auto ivs = random_intervals(rng, 15);
        const Partition part = build_partition(ivs);

        Dataset data;
        std::vector<double> ys;
        for (const auto& iv : ivs) ys.push_back(rng.next_uniform(0.3, 4.0));
        data = make_dataset(ys, ivs);
        ParameterVector th;
        th.alpha = 0.2;
        th.beta = Eigen::VectorXd(0);
        th.gamma = 0.05;
        th.phi = 0.8;
        const CellDensityMatrix C = cell_density_matrix(data, part, Family::gamma_log, th, 1e-9);

        Eigen::VectorXd w = uniform_weights(part);
        double prev = conditional_loglik(w, part, C);
        for (int step = 0; step < 50; ++step) {
            w = gelc_weight_update(w, part, C);
            const double cur = conditional_loglik(w, part, C);
            CHECK(cur >= prev - 1e-12 * (1.0 + std::fabs(prev)));
            prev = cur;
        }

        const WeightSolveResult ws = solve_weights(uniform_weights(part), part, C, 1e-10, 100000);
        CHECK(ws.converged);
        CHECK(ws.min_loglik_delta >= -1e-12 * (1.0 + std::fabs(ws.loglik)));
        CHECK(ws.loglik == doctest::Approx(conditional_loglik(ws.w, part, C)).epsilon(1e-12));
    }
}

TEST_CASE("outcome-free masses aggregate to the atom-EM oracle") {
    // With gamma = 0 the density is row-constant, the outcome drops out of
    // the update, and the augmented solve must reproduce the classic NPMLE
    // on the maximal-overlap groups (within-group splits are not identified,
    // group totals are).
    RandomStream rng(103, stream_tag("npmle-gamma0"));
    for (int trial = 0; trial < 20; ++trial) {
        const auto ivs = random_intervals(rng, 10 + static_cast<int>(rng.next_u64() % 6));
        const Partition part = build_partition(ivs);

        std::vector<double> ys;
        for (std::size_t i = 0; i < ivs.size(); ++i) ys.push_back(rng.next_bernoulli(0.5) ? 1.0 : 0.0);
        const Dataset data = make_dataset(ys, ivs);
        ParameterVector th;
        th.alpha = 0.3;
        th.beta = Eigen::VectorXd(0);
        th.gamma = 0.0;
        th.phi = 1.0;
        const CellDensityMatrix C =
            cell_density_matrix(data, part, Family::bernoulli_logit, th, 1e-10);

        // Sets whose NPMLE sits on the simplex boundary (a candidate group
        // with zero limit mass) make plain EM steps decay harmonically on
        // both sides, so the comparable accuracy here is ~1e-7, not the
        // solver tolerance. Interior sets agree to ~1e-12.
        const WeightSolveResult ws = solve_weights(uniform_weights(part), part, C, 1e-12, 2000000);
        REQUIRE(ws.converged);

        const std::vector<ObservedInterval> groups = classic_turnbull_intervals(ivs).cells;
        const oracle::AtomSolution ref = oracle::atom_em_masses(ivs);
        const std::vector<double> want = oracle::aggregate_masses(ref, groups);

        for (std::size_t g = 0; g < groups.size(); ++g) {
            double got = 0.0;
            for (int j = 0; j < part.m(); ++j)
                if (groups[g].contains_interval(part.cells[j])) got += ws.w[j];
            CHECK(std::fabs(got - want[g]) < 1e-6);
        }
        // Nothing leaks outside the maximal-overlap groups.
        double outside = ws.w.sum();
        for (std::size_t g = 0; g < groups.size(); ++g)
            for (int j = 0; j < part.m(); ++j)
                if (groups[g].contains_interval(part.cells[j])) outside -= ws.w[j];
        CHECK(std::fabs(outside) < 1e-6);
    }
}

TEST_CASE("solver reports a small self-consistency residual") {
    RandomStream rng(104, stream_tag("npmle-residual"));
    for (int trial = 0; trial < 10; ++trial) {
        const auto ivs = random_intervals(rng, 12);
        const Partition part = build_partition(ivs);
        std::vector<double> ys;
        for (std::size_t i = 0; i < ivs.size(); ++i) ys.push_back(rng.next_uniform(0.5, 3.0));
        const Dataset data = make_dataset(ys, ivs);
        ParameterVector th;
        th.alpha = 0.4;
        th.beta = Eigen::VectorXd(0);
        th.gamma = -0.1;
        th.phi = 1.2;
        const CellDensityMatrix C = cell_density_matrix(data, part, Family::gamma_log, th, 1e-9);

        const WeightSolveResult ws = solve_weights(uniform_weights(part), part, C, 1e-10, 200000);
        REQUIRE(ws.converged);
        CHECK(ws.residual < 1e-8);

        const Eigen::VectorXd next = gelc_weight_update(ws.w, part, C);
        CHECK((next - ws.w).cwiseAbs().maxCoeff() ==
              doctest::Approx(ws.residual).epsilon(1e-10).scale(1e-12));
    }
}

TEST_CASE("iteration cap leaves the convergence flag down") {
    const std::vector<ObservedInterval> ivs = {{1.0, 3.0, true, true}, {2.0, 5.0, true, true}};
    const Partition part = build_partition(ivs);
    const WeightSolveResult ws = solve_classic_weights(part, 1e-14, 2);
    CHECK_FALSE(ws.converged);
    CHECK(ws.iterations == 2);
}

TEST_CASE("rows with no conditional mass are flagged, not averaged over") {
    const std::vector<ObservedInterval> ivs = {{0.0, 1.0, true, false}, {4.0, 6.0, true, false}};
    const Partition part = build_partition(ivs);
    REQUIRE(part.m() == 2);

    CellDensityMatrix C;
    C.values = Eigen::MatrixXd::Zero(2, 2);
    C.row_log_shift = Eigen::VectorXd::Zero(2);
    C.values(0, 0) = 1.0;
    C.values(1, 1) = 1.0;

    Eigen::VectorXd w(2);
    w << 1.0, 0.0;  // second observation's only cell carries no mass
    CHECK_THROWS_AS(conditional_loglik(w, part, C), DegenerateLikelihoodError);
    try {
        conditional_loglik(w, part, C);
    } catch (const DegenerateLikelihoodError& e) {
        CHECK(e.observation_index == 1);
    }
}

TEST_CASE("constant density matrix reduces the outcome step to the classic one") {
    RandomStream rng(105, stream_tag("npmle-reduce"));
    const auto ivs = random_intervals(rng, 14);
    const Partition part = build_partition(ivs);

    CellDensityMatrix C;
    C.values = Eigen::MatrixXd::Zero(part.n(), part.m());
    C.row_log_shift = Eigen::VectorXd::Zero(part.n());
    for (int i = 0; i < part.n(); ++i)
        for (int j : part.row_cells[i]) C.values(i, j) = 0.37;

    Eigen::VectorXd w = uniform_weights(part);
    for (int step = 0; step < 3; ++step) {
        const Eigen::VectorXd a = gelc_weight_update(w, part, C);
        const Eigen::VectorXd b = turnbull_update(w, part.kappa);
        for (int j = 0; j < part.m(); ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-14));
        w = a;
    }
}
