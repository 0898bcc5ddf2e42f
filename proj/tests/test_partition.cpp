#include <doctest.h>

#include <vector>

#include "gelc/partition.hpp"
#include "gelc/rng.hpp"
#include "oracles/turnbull_oracle.hpp"

using namespace gelc;

namespace {

std::vector<ObservedInterval> random_intervals(RandomStream& rng, int n) {
    std::vector<ObservedInterval> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        // Mix exact points and half-open censored intervals on a coarse grid
        // so endpoint collisions actually happen.
        const double a = std::round(rng.next_uniform(0.0, 20.0) * 2.0) / 2.0;
        if (rng.next_bernoulli(0.3)) {
            out.push_back({a, a, true, true});
        } else {
            const double b = a + std::round(rng.next_uniform(0.5, 6.0) * 2.0) / 2.0;
            out.push_back({a, b, true, false});
        }
    }
    return out;
}

}  // namespace

TEST_CASE("two overlapping half-open intervals split at the interior endpoint") {
    const Partition part = build_partition({{1, 3, true, false}, {2, 5, true, false}});
    REQUIRE(part.m() == 3);
    CHECK(part.cells[0] == ObservedInterval{1, 2, true, false});
    CHECK(part.cells[1] == ObservedInterval{2, 3, true, false});
    CHECK(part.cells[2] == ObservedInterval{3, 5, true, false});
    CHECK(part.kappa(0, 0) == 1);
    CHECK(part.kappa(0, 1) == 1);
    CHECK(part.kappa(0, 2) == 0);
    CHECK(part.kappa(1, 0) == 0);
    CHECK(part.kappa(1, 1) == 1);
    CHECK(part.kappa(1, 2) == 1);
    CHECK(part.lengths[0] == 1.0);
    CHECK(part.lengths[2] == 2.0);
}

TEST_CASE("identical exact observations collapse to one point cell") {
    const Partition part = build_partition({{4, 4, true, true}, {4, 4, true, true}});
    REQUIRE(part.m() == 1);
    CHECK(part.cells[0] == ObservedInterval{4, 4, true, true});
    CHECK(part.lengths[0] == 0.0);
    CHECK(part.kappa(0, 0) == 1);
    CHECK(part.kappa(1, 0) == 1);
}

TEST_CASE("an exact observation carves a point cell out of covering intervals") {
    const Partition part =
        build_partition({{0, 2, true, false}, {1, 1, true, true}, {1, 4, true, false}});
    REQUIRE(part.m() == 4);
    CHECK(part.cells[0] == ObservedInterval{0, 1, true, false});
    CHECK(part.cells[1] == ObservedInterval{1, 1, true, true});
    CHECK(part.cells[2] == ObservedInterval{1, 2, false, false});
    CHECK(part.cells[3] == ObservedInterval{2, 4, true, false});

    const std::vector<std::vector<int>> want = {{1, 1, 1, 0}, {0, 1, 0, 0}, {0, 1, 1, 1}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) CHECK(part.kappa(i, j) == want[i][j]);
}

TEST_CASE("every observation is exactly the union of its cells") {
    RandomStream rng(314, stream_tag("partition-union"));
    for (int trial = 0; trial < 1000; ++trial) {
        const auto intervals = random_intervals(rng, 1 + static_cast<int>(rng.next_u64() % 12));
        const Partition part = build_partition(intervals);

        CHECK(part.m() <= 2 * static_cast<int>(intervals.size()));
        for (int j = 0; j + 1 < part.m(); ++j)
            CHECK_FALSE(part.cells[j].intersects(part.cells[j + 1]));

        for (int i = 0; i < part.n(); ++i) {
            REQUIRE(!part.row_cells[i].empty());
            // The selected cells must tile the observation: adjacent with no
            // gaps, matching endpoints and openness at both ends.
            const auto& js = part.row_cells[i];
            const ObservedInterval& obs = intervals[i];
            const ObservedInterval& first = part.cells[js.front()];
            const ObservedInterval& last = part.cells[js.back()];
            CHECK(first.left == obs.left);
            CHECK(first.left_closed == obs.left_closed);
            CHECK(last.right == obs.right);
            CHECK(last.right_closed == obs.right_closed);
            for (std::size_t k = 0; k + 1 < js.size(); ++k) {
                const ObservedInterval& cur = part.cells[js[k]];
                const ObservedInterval& nxt = part.cells[js[k + 1]];
                CHECK(cur.right == nxt.left);
                // Exactly one side takes the shared endpoint.
                CHECK(cur.right_closed != nxt.left_closed);
            }
        }
    }
}

TEST_CASE("building from a partition's own cells is idempotent") {
    RandomStream rng(2718, stream_tag("partition-idempotent"));
    for (int trial = 0; trial < 200; ++trial) {
        const auto intervals = random_intervals(rng, 1 + static_cast<int>(rng.next_u64() % 10));
        const Partition part = build_partition(intervals);
        const Partition again = build_partition(part.cells);
        REQUIRE(again.m() == part.m());
        for (int j = 0; j < part.m(); ++j) CHECK(again.cells[j] == part.cells[j]);
    }
}

TEST_CASE("endpoint rounding merges near-identical values") {
    CHECK(round_endpoint(1.0000000000004, 12) == 1.0);
    CHECK(round_endpoint(2.5, 12) == 2.5);
    CHECK(round_endpoint(1e17, 12) == 1e17);
    const Partition part = build_partition({{1.0, 2.0, true, false},
                                            {1.0 + 2e-13, 2.0, true, false}});
    CHECK(part.m() == 1);
}

TEST_CASE("classic intervals for the textbook overlapping pair") {
    const Partition tb = classic_turnbull_intervals({{1, 3, true, true}, {2, 5, true, true}});
    REQUIRE(tb.m() == 1);
    CHECK(tb.cells[0] == ObservedInterval{2, 3, true, true});
    CHECK(tb.kappa(0, 0) == 1);
    CHECK(tb.kappa(1, 0) == 1);
}

TEST_CASE("classic intervals keep exact points and disjoint observations") {
    const Partition single = classic_turnbull_intervals({{4, 4, true, true}});
    REQUIRE(single.m() == 1);
    CHECK(single.cells[0] == ObservedInterval{4, 4, true, true});

    const Partition two =
        classic_turnbull_intervals({{0, 1, true, true}, {2, 3, true, true}});
    REQUIRE(two.m() == 2);
    CHECK(two.cells[0] == ObservedInterval{0, 1, true, true});
    CHECK(two.cells[1] == ObservedInterval{2, 3, true, true});
}

TEST_CASE("classic intervals agree with the maximal-covering-set oracle") {
    RandomStream rng(16180, stream_tag("classic-oracle"));
    for (int trial = 0; trial < 300; ++trial) {
        const auto intervals = random_intervals(rng, 1 + static_cast<int>(rng.next_u64() % 10));
        const Partition tb = classic_turnbull_intervals(intervals);
        const auto want = oracle::innermost_intervals(intervals);
        REQUIRE(tb.m() == static_cast<int>(want.size()));
        for (int j = 0; j < tb.m(); ++j) CHECK(tb.cells[j] == want[j]);
    }
}

TEST_CASE("every classic interval is a union of augmented cells") {
    RandomStream rng(41421, stream_tag("classic-subset"));
    for (int trial = 0; trial < 200; ++trial) {
        const auto intervals = random_intervals(rng, 2 + static_cast<int>(rng.next_u64() % 10));
        const Partition aug = build_partition(intervals);
        const Partition tb = classic_turnbull_intervals(intervals);
        for (const auto& classic : tb.cells) {
            double covered = 0.0;
            bool left_seen = false, right_seen = false;
            for (const auto& cell : aug.cells) {
                if (!classic.contains_interval(cell)) continue;
                covered += cell.length();
                if (cell.left == classic.left && cell.left_closed == classic.left_closed)
                    left_seen = true;
                if (cell.right == classic.right && cell.right_closed == classic.right_closed)
                    right_seen = true;
            }
            CHECK(left_seen);
            CHECK(right_seen);
            CHECK(covered == doctest::Approx(classic.length()).epsilon(1e-12));
        }
    }
}

TEST_CASE("empty input is rejected") {
    CHECK_THROWS_AS(build_partition({}), DomainError);
    CHECK_THROWS_AS(classic_turnbull_intervals({}), DomainError);
}
