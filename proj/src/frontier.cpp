#include "tabbench/frontier.hpp"

#include <algorithm>
#include <map>

namespace tabbench::frontier {

namespace {

double cross(const PerfPoint& o, const PerfPoint& a, const PerfPoint& b) {
    return (a.m1 - o.m1) * (b.m2 - o.m2) - (a.m2 - o.m2) * (b.m1 - o.m1);
}

// Distinct coordinates, each mapped to the smallest original index.
std::vector<std::size_t> dedup_sorted(const std::vector<PerfPoint>& points) {
    std::map<std::pair<double, double>, std::size_t> seen;
    for (std::size_t i = 0; i < points.size(); ++i) {
        auto key = std::make_pair(points[i].m1, points[i].m2);
        seen.try_emplace(key, i);  // first occurrence keeps the smallest index
    }
    std::vector<std::size_t> idx;
    idx.reserve(seen.size());
    for (const auto& [key, i] : seen) idx.push_back(i);
    // std::map ordering already sorts by (m1, m2)
    return idx;
}

}  // namespace

std::vector<std::size_t> convex_hull(const std::vector<PerfPoint>& points) {
    auto idx = dedup_sorted(points);
    const std::size_t n = idx.size();
    if (n <= 2) return idx;

    // Monotone chain, counterclockwise; strict turns drop collinear points.
    std::vector<std::size_t> hull(2 * n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {  // lower chain
        while (k >= 2 && cross(points[hull[k - 2]], points[hull[k - 1]], points[idx[i]]) <= 0) --k;
        hull[k++] = idx[i];
    }
    const std::size_t lower = k + 1;
    for (std::size_t i = n - 1; i-- > 0;) {  // upper chain
        while (k >= lower && cross(points[hull[k - 2]], points[hull[k - 1]], points[idx[i]]) <= 0) --k;
        hull[k++] = idx[i];
    }
    hull.resize(k - 1);
    if (hull.size() < 3) {
        // All points collinear; return the distinct set in sorted order.
        return idx;
    }
    std::reverse(hull.begin(), hull.end());  // clockwise
    return hull;
}

FrontierCurve compute_frontier(std::vector<PerfPoint> points, Orientation orientation) {
    if (orientation == Orientation::MaxMin) {
        for (auto& p : points) p.m2 = -p.m2;
    }
    FrontierCurve curve;
    curve.orientation = orientation;
    if (points.empty()) return curve;

    const auto hull = convex_hull(points);

    auto better_top = [&](std::size_t a, std::size_t b) {  // max m2, ties prefer larger m1
        return points[a].m2 > points[b].m2 ||
               (points[a].m2 == points[b].m2 && points[a].m1 > points[b].m1);
    };
    auto better_right = [&](std::size_t a, std::size_t b) {  // max m1, ties prefer larger m2
        return points[a].m1 > points[b].m1 ||
               (points[a].m1 == points[b].m1 && points[a].m2 > points[b].m2);
    };

    if (hull.size() < 3) {
        // Degenerate (collinear) set: the envelope is the max-m2 and max-m1
        // points; they coincide unless the line slopes downward.
        std::size_t top = hull[0], right = hull[0];
        for (std::size_t v : hull) {
            if (better_top(v, top)) top = v;
            if (better_right(v, right)) right = v;
        }
        curve.indices.push_back(top);
        if (right != top && !(points[top].m1 >= points[right].m1 && points[top].m2 >= points[right].m2))
            curve.indices.push_back(right);
        std::sort(curve.indices.begin(), curve.indices.end(),
                  [&](std::size_t a, std::size_t b) { return points[a].m1 < points[b].m1; });
        return curve;
    }

    // Walk the clockwise hull from the top vertex to the rightmost vertex;
    // that arc is the upper-right envelope.
    std::size_t top_pos = 0, right_pos = 0;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        if (better_top(hull[i], hull[top_pos])) top_pos = i;
        if (better_right(hull[i], hull[right_pos])) right_pos = i;
    }
    for (std::size_t i = top_pos;; i = (i + 1) % hull.size()) {
        curve.indices.push_back(hull[i]);
        if (i == right_pos) break;
    }
    std::sort(curve.indices.begin(), curve.indices.end(),
              [&](std::size_t a, std::size_t b) { return points[a].m1 < points[b].m1; });
    return curve;
}

std::vector<std::size_t> pareto_set(const std::vector<PerfPoint>& points, Orientation orientation) {
    const double sign = orientation == Orientation::MaxMin ? -1.0 : 1.0;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < points.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (i == j) continue;
            const double x1 = points[j].m1, x2 = sign * points[j].m2;
            const double y1 = points[i].m1, y2 = sign * points[i].m2;
            if ((x1 > y1 && x2 >= y2) || (x1 >= y1 && x2 > y2)) {
                dominated = true;
                break;
            }
        }
        if (!dominated) out.push_back(i);
    }
    return out;
}

}  // namespace tabbench::frontier
