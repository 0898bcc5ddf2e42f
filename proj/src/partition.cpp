#include "gelc/partition.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace gelc {

double round_endpoint(double v, int digits) {
    if (!std::isfinite(v)) return v;
    const double scale = std::pow(10.0, digits);
    const double scaled = v * scale;
    // Beyond 2^53 the scaled value no longer represents integers exactly and
    // rounding would only add noise.
    if (std::fabs(scaled) >= 9007199254740992.0) return v;
    return std::round(scaled) / scale;
}

namespace {

std::vector<ObservedInterval> rounded_copy(const std::vector<ObservedInterval>& intervals,
                                           int digits) {
    std::vector<ObservedInterval> out;
    out.reserve(intervals.size());
    for (ObservedInterval iv : intervals) {
        validate_interval(iv);
        iv.left = round_endpoint(iv.left, digits);
        iv.right = round_endpoint(iv.right, digits);
        if (iv.left == iv.right) {
            // Rounding may collapse a sliver to a point; points are closed.
            iv.left_closed = iv.right_closed = true;
        }
        out.push_back(iv);
    }
    return out;
}

void finish_partition(Partition& part, const std::vector<ObservedInterval>& obs) {
    const int n = static_cast<int>(obs.size());
    const int m = static_cast<int>(part.cells.size());
    part.lengths.resize(m);
    for (int j = 0; j < m; ++j) part.lengths[j] = part.cells[j].length();
    part.kappa.resize(n, m);
    part.row_cells.assign(n, {});
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            const bool in = obs[i].contains_interval(part.cells[j]);
            part.kappa(i, j) = in ? 1 : 0;
            if (in) part.row_cells[i].push_back(j);
        }
    }
}

}  // namespace

Partition build_partition(const std::vector<ObservedInterval>& intervals, int round_digits) {
    if (intervals.empty()) throw DomainError("build_partition: empty interval list");
    const std::vector<ObservedInterval> obs = rounded_copy(intervals, round_digits);

    std::vector<double> endpoints;
    endpoints.reserve(2 * obs.size());
    for (const auto& iv : obs) {
        endpoints.push_back(iv.left);
        endpoints.push_back(iv.right);
    }
    std::sort(endpoints.begin(), endpoints.end());
    endpoints.erase(std::unique(endpoints.begin(), endpoints.end()), endpoints.end());

    // Atomic pieces: each endpoint as a point, each gap between consecutive
    // endpoints as an open interval. Membership in every observation is
    // constant on each piece by construction.
    std::vector<ObservedInterval> pieces;
    pieces.reserve(2 * endpoints.size());
    for (std::size_t k = 0; k < endpoints.size(); ++k) {
        pieces.push_back({endpoints[k], endpoints[k], true, true});
        if (k + 1 < endpoints.size())
            pieces.push_back({endpoints[k], endpoints[k + 1], false, false});
    }

    const int n = static_cast<int>(obs.size());
    auto membership = [&](const ObservedInterval& piece) {
        std::vector<std::uint8_t> col(n);
        for (int i = 0; i < n; ++i) col[i] = obs[i].contains_interval(piece) ? 1 : 0;
        return col;
    };

    // Merge maximal runs of adjacent pieces with identical membership columns;
    // drop pieces covered by no observation.
    Partition part;
    std::vector<std::uint8_t> current_col;
    bool open_run = false;
    for (const auto& piece : pieces) {
        std::vector<std::uint8_t> col = membership(piece);
        const bool covered =
            std::any_of(col.begin(), col.end(), [](std::uint8_t b) { return b != 0; });
        if (!covered) {
            open_run = false;
            continue;
        }
        if (open_run && col == current_col) {
            ObservedInterval& last = part.cells.back();
            last.right = piece.right;
            last.right_closed = piece.right_closed;
        } else {
            part.cells.push_back(piece);
            current_col = std::move(col);
            open_run = true;
        }
    }

    finish_partition(part, obs);
    return part;
}

Partition classic_turnbull_intervals(const std::vector<ObservedInterval>& intervals,
                                     int round_digits) {
    if (intervals.empty()) throw DomainError("classic_turnbull_intervals: empty interval list");
    const std::vector<ObservedInterval> obs = rounded_copy(intervals, round_digits);

    // Endpoint events ordered along the line. At equal values the order is
    // open end < closed start < closed end < open start, which makes a start
    // immediately followed by an end exactly an innermost interval.
    struct Event {
        double value;
        int rank;  // 0 end-open, 1 start-closed, 2 end-closed, 3 start-open
        bool closed;
        bool is_start;
    };
    std::vector<Event> events;
    events.reserve(2 * obs.size());
    for (const auto& iv : obs) {
        events.push_back({iv.left, iv.left_closed ? 1 : 3, iv.left_closed, true});
        events.push_back({iv.right, iv.right_closed ? 2 : 0, iv.right_closed, false});
    }
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        if (a.value != b.value) return a.value < b.value;
        return a.rank < b.rank;
    });

    Partition part;
    for (std::size_t k = 1; k < events.size(); ++k) {
        const Event& prev = events[k - 1];
        const Event& cur = events[k];
        if (!prev.is_start || cur.is_start) continue;
        ObservedInterval cell{prev.value, cur.value, prev.closed, cur.closed};
        if (cell.left > cell.right) continue;
        if (cell.left == cell.right && !(cell.left_closed && cell.right_closed)) continue;
        if (!part.cells.empty() && part.cells.back() == cell) continue;
        part.cells.push_back(cell);
    }

    finish_partition(part, obs);
    return part;
}

}  // namespace gelc
