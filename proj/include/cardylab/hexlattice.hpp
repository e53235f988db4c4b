#pragma once

// Pointy-top hexagons (two vertical edges), axial coordinates (q, r).
// Vertices live on an integer grid with unit steps (sqrt3*eps/2, eps/2):
// cell center -> (2q + r, 3r).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cardylab/error.hpp"

namespace cardylab {

inline const double kSqrt3 = std::sqrt(3.0);

struct Point {
    double x = 0, y = 0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }

struct HexCell {
    int q = 0, r = 0;
    friend bool operator==(HexCell a, HexCell b) { return a.q == b.q && a.r == b.r; }
    friend bool operator!=(HexCell a, HexCell b) { return !(a == b); }
    friend bool operator<(HexCell a, HexCell b) { return a.q != b.q ? a.q < b.q : a.r < b.r; }
};

struct Vertex {
    int x = 0, y = 0;
    friend bool operator==(Vertex a, Vertex b) { return a.x == b.x && a.y == b.y; }
    friend bool operator!=(Vertex a, Vertex b) { return !(a == b); }
    friend bool operator<(Vertex a, Vertex b) { return a.x != b.x ? a.x < b.x : a.y < b.y; }
};

struct HexCellHash {
    std::size_t operator()(HexCell c) const noexcept {
        return std::hash<std::uint64_t>()((std::uint64_t(std::uint32_t(c.q)) << 32) | std::uint32_t(c.r));
    }
};
struct VertexHash {
    std::size_t operator()(Vertex v) const noexcept {
        return std::hash<std::uint64_t>()((std::uint64_t(std::uint32_t(v.x)) << 32) | std::uint32_t(v.y));
    }
};

// directed edge between two adjacent lattice vertices
struct LatticeEdge {
    Vertex a, b;
    friend bool operator==(LatticeEdge e, LatticeEdge f) { return e.a == f.a && e.b == f.b; }
    LatticeEdge reversed() const { return {b, a}; }
};

inline constexpr std::array<std::array<int, 2>, 6> kNeighborDirs{{{1, 0}, {0, 1}, {-1, 1}, {-1, 0}, {0, -1}, {1, -1}}};
// corners at 30, 90, ..., 330 degrees
inline constexpr std::array<std::array<int, 2>, 6> kCornerOffsets{{{1, 1}, {0, 2}, {-1, 1}, {-1, -1}, {0, -2}, {1, -1}}};

inline std::array<HexCell, 6> neighbors(HexCell c) {
    std::array<HexCell, 6> out;
    for (int i = 0; i < 6; ++i) out[i] = {c.q + kNeighborDirs[i][0], c.r + kNeighborDirs[i][1]};
    return out;
}

inline bool adjacent(HexCell a, HexCell b) {
    int dq = b.q - a.q, dr = b.r - a.r;
    for (auto& d : kNeighborDirs)
        if (d[0] == dq && d[1] == dr) return true;
    return false;
}

inline Vertex center_vertex(HexCell c) { return {2 * c.q + c.r, 3 * c.r}; }

inline Vertex corner(HexCell c, int k) {
    Vertex v = center_vertex(c);
    return {v.x + kCornerOffsets[k][0], v.y + kCornerOffsets[k][1]};
}

inline std::array<Vertex, 6> corners(HexCell c) {
    std::array<Vertex, 6> out;
    for (int k = 0; k < 6; ++k) out[k] = corner(c, k);
    return out;
}

// edge shared with neighbor i runs from corner (i+5)%6 to corner i (ccw around c)
inline LatticeEdge edge_toward(HexCell c, int i) { return {corner(c, (i + 5) % 6), corner(c, i)}; }

inline bool is_center(Vertex v) {
    if (v.y % 3 != 0) return false;
    int r = v.y / 3;
    return ((v.x - r) % 2) == 0;
}

inline HexCell cell_at_center(Vertex v) {
    int r = v.y / 3;
    return {(v.x - r) / 2, r};
}

// the three cells meeting at a lattice vertex
inline std::array<HexCell, 3> cells_at_vertex(Vertex v) {
    std::array<HexCell, 3> out{};
    int m = 0;
    for (int k = 0; k < 6 && m < 3; ++k) {
        Vertex c{v.x - kCornerOffsets[k][0], v.y - kCornerOffsets[k][1]};
        if (is_center(c)) out[m++] = cell_at_center(c);
    }
    return out;
}

inline bool is_lattice_vertex(Vertex v) {
    int m = 0;
    for (int k = 0; k < 6; ++k)
        if (is_center({v.x - kCornerOffsets[k][0], v.y - kCornerOffsets[k][1]})) ++m;
    return m == 3;
}

inline bool is_lattice_edge(Vertex a, Vertex b) {
    int dx = b.x - a.x, dy = b.y - a.y;
    bool shape = (dx == 0 && std::abs(dy) == 2) || (std::abs(dx) == 1 && std::abs(dy) == 1);
    return shape && is_lattice_vertex(a) && is_lattice_vertex(b);
}

// macroscopic coordinates at eps = 1/n
inline Point to_point(Vertex v, int n) { return {v.x * kSqrt3 / (2.0 * n), v.y / (2.0 * n)}; }
inline Point cell_center(HexCell c, int n) { return to_point(center_vertex(c), n); }

// ---------------------------------------------------------------- paths

struct StringPath {
    std::vector<HexCell> cells;

    bool valid() const {
        std::unordered_set<HexCell, HexCellHash> seen;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (!seen.insert(cells[i]).second) return false;
            if (i > 0 && !adjacent(cells[i - 1], cells[i])) return false;
        }
        return true;
    }
};

// polyline of lattice vertices; edges are consecutive pairs
struct SegmentPath {
    std::vector<Vertex> vertices;

    std::size_t edge_count() const { return vertices.size() < 2 ? 0 : vertices.size() - 1; }

    std::vector<LatticeEdge> edges() const {
        std::vector<LatticeEdge> out;
        for (std::size_t i = 0; i + 1 < vertices.size(); ++i) out.push_back({vertices[i], vertices[i + 1]});
        return out;
    }

    bool closed() const { return vertices.size() > 2 && vertices.front() == vertices.back(); }

    bool valid() const {
        for (std::size_t i = 0; i + 1 < vertices.size(); ++i)
            if (!is_lattice_edge(vertices[i], vertices[i + 1])) return false;
        std::unordered_set<Vertex, VertexHash> seen;
        std::size_t end = closed() ? vertices.size() - 1 : vertices.size();
        for (std::size_t i = 0; i < end; ++i)
            if (!seen.insert(vertices[i]).second) return false;
        return true;
    }
};

// L-infinity diameter in macroscopic units
inline double segment_diameter(const SegmentPath& seg, int n) {
    if (seg.edge_count() == 0) throw Error(ErrorCode::EMPTY_SEGMENT, "segment has no edges");
    int x0 = seg.vertices[0].x, x1 = x0, y0 = seg.vertices[0].y, y1 = y0;
    for (auto v : seg.vertices) {
        x0 = std::min(x0, v.x);
        x1 = std::max(x1, v.x);
        y0 = std::min(y0, v.y);
        y1 = std::max(y1, v.y);
    }
    return std::max((x1 - x0) * kSqrt3 / (2.0 * n), (y1 - y0) / (2.0 * n));
}

// ---------------------------------------------------------------- distances
// Cell units: one unit = cell width sqrt3*eps. Centers fit in a closed box of side L iff
//   sqrt3/2*|dX| <= sqrt3*L  <=>  |dX| <= 2L
//   1.5*|dr|     <= sqrt3*L  <=>  3dr^2 <= 4L^2

inline bool fits_box(int dX, int dr, long L) { return std::abs(dX) <= 2 * L && 3L * dr * dr <= 4 * L * L; }

// unconstrained L-infinity center distance, rounded up to cell units
inline long linf_cells(HexCell a, HexCell b) {
    int dX = (2 * b.q + b.r) - (2 * a.q + a.r);
    int dr = b.r - a.r;
    long L = 0;
    while (!fits_box(dX, dr, L)) ++L;
    return L;
}

inline constexpr long kInfinite = std::numeric_limits<long>::max();

// min L such that a box of side L (cell units) contains a string in region joining x and y
template <class Region>
long d_inf(const Region& region, HexCell x, HexCell y) {
    auto in = [&](HexCell c) { return region.count(c) > 0; };
    if (!in(x) || !in(y)) return kInfinite;
    if (x == y) return 0;
    // connectivity check first
    {
        std::unordered_set<HexCell, HexCellHash> seen{x};
        std::deque<HexCell> dq{x};
        bool found = false;
        while (!dq.empty() && !found) {
            HexCell c = dq.front();
            dq.pop_front();
            for (auto nb : neighbors(c))
                if (in(nb) && seen.insert(nb).second) {
                    if (nb == y) found = true;
                    dq.push_back(nb);
                }
        }
        if (!found) return kInfinite;
    }
    int xX = 2 * x.q + x.r, yX = 2 * y.q + y.r;
    auto ok = [&](long L) {
        // box horizontal range [X0, X0 + 2L], row range [r0, r0 + R] in center coordinates
        long R = 0;
        while (3 * (R + 1) * (R + 1) <= 4 * L * L) ++R;
        int lo = std::max(xX, yX) - int(2 * L), hi = std::min(xX, yX);
        int rlo = std::max(x.r, y.r) - int(R), rhi = std::min(x.r, y.r);
        if (lo > hi || rlo > rhi) return false;
        for (int X0 = lo; X0 <= hi; ++X0)
            for (int r0 = rlo; r0 <= rhi; ++r0) {
                auto inbox = [&](HexCell c) {
                    int X = 2 * c.q + c.r;
                    return X >= X0 && X <= X0 + 2 * L && c.r >= r0 && c.r <= r0 + R && in(c);
                };
                std::unordered_set<HexCell, HexCellHash> seen{x};
                std::deque<HexCell> dq{x};
                while (!dq.empty()) {
                    HexCell c = dq.front();
                    dq.pop_front();
                    if (c == y) return true;
                    for (auto nb : neighbors(c))
                        if (inbox(nb) && seen.insert(nb).second) dq.push_back(nb);
                }
            }
        return false;
    };
    long L = linf_cells(x, y);
    while (!ok(L)) ++L;
    return L;
}

// ---------------------------------------------------------------- boxes

struct Rect {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

struct Box {
    int i = 0, j = 0;
    double x0 = 0, y0 = 0, side = 0;
    std::vector<HexCell> cells;
};

// closed hexagon vs closed axis-aligned box, separating axis test
inline bool hex_meets_box(HexCell c, int n, double bx0, double by0, double bx1, double by1) {
    std::array<Point, 6> p;
    for (int k = 0; k < 6; ++k) p[k] = to_point(corner(c, k), n);
    std::array<Point, 4> b{Point{bx0, by0}, Point{bx1, by0}, Point{bx1, by1}, Point{bx0, by1}};
    const double s = kSqrt3 / 2;
    std::array<Point, 5> axes{Point{1, 0}, Point{0, 1}, Point{0.5, s}, Point{-0.5, s}, Point{s, 0.5}};
    for (auto a : axes) {
        double h0 = 1e300, h1 = -1e300, q0 = 1e300, q1 = -1e300;
        for (auto v : p) {
            double t = dot(a, v);
            h0 = std::min(h0, t);
            h1 = std::max(h1, t);
        }
        for (auto v : b) {
            double t = dot(a, v);
            q0 = std::min(q0, t);
            q1 = std::max(q1, t);
        }
        if (h1 < q0 || q1 < h0) return false;
    }
    return true;
}

inline std::vector<Box> box_grid(Point origin, double side, Rect bounds, int n) {
    std::vector<Box> out;
    if (!(side > 0)) return out;
    const double tol = 1e-12 * std::max(1.0, side);
    int i0 = int(std::floor((bounds.x0 - origin.x) / side + tol));
    int i1 = int(std::ceil((bounds.x1 - origin.x) / side - tol));
    int j0 = int(std::floor((bounds.y0 - origin.y) / side + tol));
    int j1 = int(std::ceil((bounds.y1 - origin.y) / side - tol));
    i1 = std::max(i1, i0 + 1);
    j1 = std::max(j1, j0 + 1);
    const double eps = 1.0 / n;
    for (int j = j0; j < j1; ++j)
        for (int i = i0; i < i1; ++i) {
            Box b{i, j, origin.x + i * side, origin.y + j * side, side, {}};
            double bx1 = b.x0 + side, by1 = b.y0 + side;
            // candidate centers within circumradius eps of the box
            int r0 = int(std::floor((b.y0 - eps) / (1.5 * eps))) - 1;
            int r1 = int(std::ceil((by1 + eps) / (1.5 * eps))) + 1;
            for (int r = r0; r <= r1; ++r) {
                double xlo = (b.x0 - eps) / (kSqrt3 * eps) - r / 2.0;
                double xhi = (bx1 + eps) / (kSqrt3 * eps) - r / 2.0;
                for (int q = int(std::floor(xlo)) - 1; q <= int(std::ceil(xhi)) + 1; ++q)
                    if (hex_meets_box({q, r}, n, b.x0, b.y0, bx1, by1)) b.cells.push_back({q, r});
            }
            out.push_back(std::move(b));
        }
    return out;
}

}  // namespace cardylab
