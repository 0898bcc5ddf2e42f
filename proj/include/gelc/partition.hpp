// partition.hpp
//
// Augmented Turnbull intervals: the partition of the covariate support induced
// by every observed interval endpoint, together with the n x m membership
// matrix kappa, kappa(i,j) = 1 iff cell j is a subset of observation i's
// interval. Every observed interval is then an exact union of cells, which is
// what lets the censored-covariate likelihood be written as a finite sum.

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "gelc/model.hpp"

namespace gelc {

struct Partition {
    std::vector<ObservedInterval> cells;  // disjoint, ordered by left endpoint
    std::vector<double> lengths;          // |I_j|; 0 for degenerate point cells
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> kappa;  // n x m
    std::vector<std::vector<int>> row_cells;  // per row, the j with kappa(i,j)=1

    int n() const { return static_cast<int>(kappa.rows()); }
    int m() const { return static_cast<int>(cells.size()); }
};

// Round an endpoint to `digits` decimal places so that values recorded on a
// discrete scale compare equal exactly. Values too large for exact decimal
// rounding are returned unchanged.
double round_endpoint(double v, int digits);

// Build the augmented Turnbull partition. Cells are maximal intervals on which
// membership in every observation is constant; point cells appear wherever an
// exact observation (or an openness change) forces one. Stretches covered by
// no observation are omitted.
Partition build_partition(const std::vector<ObservedInterval>& intervals, int round_digits = 12);

// Classic Turnbull innermost intervals: a left endpoint immediately followed
// by a right endpoint in the sorted endpoint sequence. Returned with the
// same membership structure (alpha in place of kappa). Used as the reduction
// oracle for the outcome-free special case.
Partition classic_turnbull_intervals(const std::vector<ObservedInterval>& intervals,
                                     int round_digits = 12);

}  // namespace gelc
