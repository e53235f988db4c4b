#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "cardylab/hexlattice.hpp"

namespace cardylab {

using Polygon = std::vector<Point>;  // closed implicitly, no repeated endpoint

inline double signed_area(const Polygon& p) {
    double a = 0;
    for (std::size_t i = 0; i < p.size(); ++i) a += cross(p[i], p[(i + 1) % p.size()]);
    return a / 2;
}

inline double point_segment_distance(Point p, Point a, Point b) {
    Point d = b - a;
    double l2 = dot(d, d);
    double t = l2 > 0 ? std::clamp(dot(p - a, d) / l2, 0.0, 1.0) : 0.0;
    return norm(p - (a + t * d));
}

inline Point closest_on_segment(Point p, Point a, Point b) {
    Point d = b - a;
    double l2 = dot(d, d);
    double t = l2 > 0 ? std::clamp(dot(p - a, d) / l2, 0.0, 1.0) : 0.0;
    return a + t * d;
}

// +1 strictly inside, 0 on boundary, -1 outside
inline int point_in_polygon(const Polygon& poly, Point p) {
    bool inside = false;
    std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        Point a = poly[j], b = poly[i];
        if (cross(b - a, p - a) == 0 && std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
            std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y))
            return 0;
        if ((b.y > p.y) != (a.y > p.y)) {
            double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < x) inside = !inside;
        }
    }
    return inside ? 1 : -1;
}

// sign of the turn a->b->c; near-collinear within relative 1e-12 counts as 0
inline int orient(Point a, Point b, Point c) {
    Point u = b - a, w = c - a;
    double v = cross(u, w), tol = 1e-12 * norm(u) * norm(w);
    return v > tol ? 1 : (v < -tol ? -1 : 0);
}

inline bool on_segment(Point a, Point b, Point p) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

// closed segments intersect (touching counts)
inline bool segments_meet(Point a, Point b, Point c, Point d) {
    int o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(a, b, c)) return true;
    if (o2 == 0 && on_segment(a, b, d)) return true;
    if (o3 == 0 && on_segment(c, d, a)) return true;
    if (o4 == 0 && on_segment(c, d, b)) return true;
    return false;
}

inline bool segment_meets_rect(Point a, Point b, double x0, double y0, double x1, double y1) {
    auto inside = [&](Point p) { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; };
    if (inside(a) || inside(b)) return true;
    Point c[4] = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
    for (int i = 0; i < 4; ++i)
        if (segments_meet(a, b, c[i], c[(i + 1) % 4])) return true;
    return false;
}

inline Rect bounding_rect(const Polygon& p) {
    Rect r{1e300, 1e300, -1e300, -1e300};
    for (auto v : p) {
        r.x0 = std::min(r.x0, v.x);
        r.y0 = std::min(r.y0, v.y);
        r.x1 = std::max(r.x1, v.x);
        r.y1 = std::max(r.y1, v.y);
    }
    return r;
}

inline bool polygon_is_simple(const Polygon& p) {
    std::size_t n = p.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if (j == i + 1 || (i == 0 && j == n - 1)) continue;
            if (segments_meet(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n])) return false;
        }
    return true;
}

// uniform bucket grid over polygon edges for distance and crossing queries
class EdgeIndex {
public:
    explicit EdgeIndex(const Polygon& poly, int target_per_cell = 4) : poly_(poly) {
        box_ = bounding_rect(poly);
        double w = std::max(box_.x1 - box_.x0, 1e-12), h = std::max(box_.y1 - box_.y0, 1e-12);
        int cells = std::max<int>(1, int(poly.size()) / target_per_cell);
        double side = std::sqrt(w * h / cells);
        nx_ = std::clamp(int(w / side) + 1, 1, 2048);
        ny_ = std::clamp(int(h / side) + 1, 1, 2048);
        cw_ = w / nx_;
        ch_ = h / ny_;
        buckets_.assign(std::size_t(nx_) * ny_, {});
        for (std::size_t i = 0; i < poly.size(); ++i) {
            Point a = poly[i], b = poly[(i + 1) % poly.size()];
            int i0 = ix(std::min(a.x, b.x)), i1 = ix(std::max(a.x, b.x));
            int j0 = iy(std::min(a.y, b.y)), j1 = iy(std::max(a.y, b.y));
            for (int jj = j0; jj <= j1; ++jj)
                for (int ii = i0; ii <= i1; ++ii) {
                    double x0 = box_.x0 + ii * cw_, y0 = box_.y0 + jj * ch_;
                    if (segment_meets_rect(a, b, x0 - 1e-12, y0 - 1e-12, x0 + cw_ + 1e-12, y0 + ch_ + 1e-12))
                        buckets_[std::size_t(jj) * nx_ + ii].push_back(int(i));
                }
        }
    }

    // Euclidean distance from p to the polygon boundary
    double distance(Point p) const {
        double best = 1e300;
        int ci = ix(p.x), cj = iy(p.y);
        for (int ring = 0;; ++ring) {
            bool any = false;
            for (int jj = cj - ring; jj <= cj + ring; ++jj)
                for (int ii = ci - ring; ii <= ci + ring; ++ii) {
                    if (std::max(std::abs(ii - ci), std::abs(jj - cj)) != ring) continue;
                    if (ii < 0 || jj < 0 || ii >= nx_ || jj >= ny_) continue;
                    any = true;
                    for (int e : buckets_[std::size_t(jj) * nx_ + ii])
                        best = std::min(best, point_segment_distance(p, poly_[e], poly_[(e + 1) % poly_.size()]));
                }
            // everything beyond this ring is at least ring*min(cw,ch) away
            double reach = ring * std::min(cw_, ch_);
            if (best <= reach) break;
            if (!any && ring > nx_ + ny_ + 2) break;
        }
        return best;
    }

    // does any polygon edge meet the closed segment ab
    bool meets_segment(Point a, Point b) const {
        int i0 = ix(std::min(a.x, b.x)), i1 = ix(std::max(a.x, b.x));
        int j0 = iy(std::min(a.y, b.y)), j1 = iy(std::max(a.y, b.y));
        for (int jj = j0; jj <= j1; ++jj)
            for (int ii = i0; ii <= i1; ++ii)
                for (int e : buckets_[std::size_t(jj) * nx_ + ii])
                    if (segments_meet(a, b, poly_[e], poly_[(e + 1) % poly_.size()])) return true;
        return false;
    }

    const Polygon& polygon() const { return poly_; }

private:
    int ix(double x) const { return std::clamp(int((x - box_.x0) / cw_), 0, nx_ - 1); }
    int iy(double y) const { return std::clamp(int((y - box_.y0) / ch_), 0, ny_ - 1); }

    Polygon poly_;
    Rect box_;
    int nx_ = 1, ny_ = 1;
    double cw_ = 1, ch_ = 1;
    std::vector<std::vector<int>> buckets_;
};

}  // namespace cardylab
