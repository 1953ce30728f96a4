#pragma once

#include <cstddef>
#include <vector>

#include "tabbench/common.hpp"

namespace tabbench::frontier {

struct PerfPoint {
    double m1;
    double m2;
    std::size_t config_id;  // opaque reference into the caller's records
};

enum class Orientation { MaxMax, MaxMin };

// Curve vertices as indices into the input vector, ordered by increasing m1.
struct FrontierCurve {
    std::vector<std::size_t> indices;
    Orientation orientation;
};

// Monotone-chain convex hull in clockwise order. Duplicates are removed and
// collinear interior points excluded. Degenerate sets (all collinear) return
// the distinct points in sorted order.
std::vector<std::size_t> convex_hull(const std::vector<PerfPoint>& points);

// Upper-right envelope walk from the max-m2 hull vertex (ties prefer larger
// m1). MaxMin is handled by negating m2.
FrontierCurve compute_frontier(std::vector<PerfPoint> points, Orientation orientation);

// Brute-force nondominated set; the test oracle companion to the frontier,
// also exported for reports.
std::vector<std::size_t> pareto_set(const std::vector<PerfPoint>& points, Orientation orientation);

}  // namespace tabbench::frontier
