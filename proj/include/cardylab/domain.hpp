#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "cardylab/error.hpp"
#include "cardylab/geometry.hpp"
#include "cardylab/hexlattice.hpp"
#include "cardylab/rng.hpp"
#include "cardylab/stats.hpp"

namespace cardylab {

struct Generator {
    std::string name;
    std::map<std::string, double> params;

    double param(const std::string& k, double fallback) const {
        auto it = params.find(k);
        return it == params.end() ? fallback : it->second;
    }
};

struct ContinuumDomain {
    Polygon boundary;                // counterclockwise
    std::array<Point, 4> marked{};   // A, B, C, D
    Generator generator;
};

enum class DomainKind { CANONICAL, SQUARE_REGULARIZED, SHRUNKEN };

inline const char* to_string(DomainKind k) {
    switch (k) {
    case DomainKind::CANONICAL: return "CANONICAL";
    case DomainKind::SQUARE_REGULARIZED: return "SQUARE_REGULARIZED";
    case DomainKind::SHRUNKEN: return "SHRUNKEN";
    }
    return "?";
}

enum Arc : int { ARC_AB = 0, ARC_BC = 1, ARC_CD = 2, ARC_DA = 3 };

// a boundary edge, directed so the domain is on its left; `cell` is the inside cell index
struct BoundaryEdge {
    Vertex a, b;
    int cell = -1;
};

struct DiscreteDomain {
    int n = 1;
    DomainKind kind = DomainKind::CANONICAL;

    std::vector<HexCell> cells;
    std::unordered_map<HexCell, int, HexCellHash> cell_index;
    std::vector<std::array<int, 6>> nbr;  // -1 outside

    std::vector<Vertex> vertices;
    std::unordered_map<Vertex, int, VertexHash> vertex_index;
    std::vector<std::array<int, 6>> cell_corners;
    std::vector<std::array<int, 3>> vadj;   // honeycomb neighbors inside the domain, -1 padded
    std::vector<std::array<int, 3>> vcells; // incident domain cells, -1 padded

    std::vector<BoundaryEdge> boundary;   // ccw loop
    std::vector<int> vertex_loop_pos;     // per vertex: position in loop or -1
    std::array<int, 4> marked_pos{};      // loop position of A_n..D_n (start vertex of that edge)
    std::array<Vertex, 4> marked{};
    std::vector<int> edge_arc;            // per boundary edge

    std::shared_ptr<const ContinuumDomain> source;

    // square regularization bookkeeping
    double grid_side = 0;                          // macroscopic square side
    std::vector<std::array<int, 2>> kept_squares;  // (i, j) grid indices
    std::array<bool, 4> relocated{};                // marked point moved far from the canonical one

    int find_cell(HexCell c) const {
        auto it = cell_index.find(c);
        return it == cell_index.end() ? -1 : it->second;
    }
    int find_vertex(Vertex v) const {
        auto it = vertex_index.find(v);
        return it == vertex_index.end() ? -1 : it->second;
    }
    bool contains(HexCell c) const { return find_cell(c) >= 0; }
    std::size_t count(HexCell c) const { return contains(c) ? 1 : 0; }
    int size() const { return int(cells.size()); }
    double eps() const { return 1.0 / n; }

    // boundary edges of arc k in ccw order
    std::vector<int> arc_edges(int k) const {
        std::vector<int> out;
        int E = int(boundary.size());
        int s = marked_pos[k], e = marked_pos[(k + 1) % 4];
        for (int p = s; p != e; p = (p + 1) % E) out.push_back(p);
        return out;
    }
    // vertices of the closed arc
    std::vector<int> arc_vertices(int k) const {
        std::vector<int> out;
        for (int p : arc_edges(k)) out.push_back(find_vertex(boundary[p].a));
        out.push_back(find_vertex(marked[(k + 1) % 4]));
        return out;
    }
    Point vertex_point(int v) const { return to_point(vertices[v], n); }
};

// ------------------------------------------------------------ assembly

namespace detail {

inline int add_vertex(DiscreteDomain& d, Vertex v) {
    auto [it, fresh] = d.vertex_index.emplace(v, int(d.vertices.size()));
    if (fresh) {
        d.vertices.push_back(v);
        d.vadj.push_back({-1, -1, -1});
        d.vcells.push_back({-1, -1, -1});
    }
    return it->second;
}

inline void push3(std::array<int, 3>& a, int v) {
    for (auto& x : a) {
        if (x == v) return;
        if (x < 0) {
            x = v;
            return;
        }
    }
}

}  // namespace detail

// builds indices and the boundary loop for an edge-connected cell set (sorted for determinism)
inline DiscreteDomain assemble_domain(std::vector<HexCell> cells, int n, DomainKind kind) {
    std::sort(cells.begin(), cells.end());
    DiscreteDomain d;
    d.n = n;
    d.kind = kind;
    d.cells = std::move(cells);
    for (int i = 0; i < d.size(); ++i) d.cell_index.emplace(d.cells[i], i);
    d.nbr.resize(d.cells.size());
    d.cell_corners.resize(d.cells.size());
    for (int i = 0; i < d.size(); ++i) {
        auto nb = neighbors(d.cells[i]);
        for (int k = 0; k < 6; ++k) d.nbr[i][k] = d.find_cell(nb[k]);
        for (int k = 0; k < 6; ++k) d.cell_corners[i][k] = detail::add_vertex(d, corner(d.cells[i], k));
    }
    for (int i = 0; i < d.size(); ++i)
        for (int k = 0; k < 6; ++k) {
            int a = d.cell_corners[i][k], b = d.cell_corners[i][(k + 1) % 6];
            detail::push3(d.vadj[a], b);
            detail::push3(d.vadj[b], a);
            detail::push3(d.vcells[a], i);
        }
    // boundary loop: edge corner k -> k+1 faces neighbor k+1
    std::unordered_map<Vertex, BoundaryEdge, VertexHash> out_edge;
    for (int i = 0; i < d.size(); ++i)
        for (int k = 0; k < 6; ++k)
            if (d.nbr[i][(k + 1) % 6] < 0) {
                BoundaryEdge e{corner(d.cells[i], k), corner(d.cells[i], (k + 1) % 6), i};
                out_edge[e.a] = e;
            }
    d.vertex_loop_pos.assign(d.vertices.size(), -1);
    if (out_edge.empty()) return d;
    // start at the lexicographically smallest boundary vertex for determinism
    Vertex start = out_edge.begin()->first;
    for (auto& kv : out_edge) start = std::min(start, kv.first);
    Vertex v = start;
    do {
        auto it = out_edge.find(v);
        if (it == out_edge.end()) break;
        d.vertex_loop_pos[d.find_vertex(v)] = int(d.boundary.size());
        d.boundary.push_back(it->second);
        v = it->second.b;
    } while (v != start && d.boundary.size() <= out_edge.size());
    return d;
}

// connected components of a cell subset (indices into d.cells), by edge adjacency
inline std::vector<int> cell_components(const std::vector<HexCell>& cells, std::vector<int>& comp) {
    std::unordered_map<HexCell, int, HexCellHash> idx;
    for (int i = 0; i < int(cells.size()); ++i) idx.emplace(cells[i], i);
    comp.assign(cells.size(), -1);
    std::vector<int> sizes;
    for (int s = 0; s < int(cells.size()); ++s) {
        if (comp[s] >= 0) continue;
        int c = int(sizes.size());
        sizes.push_back(0);
        std::vector<int> st{s};
        comp[s] = c;
        while (!st.empty()) {
            int u = st.back();
            st.pop_back();
            ++sizes[c];
            for (auto nb : neighbors(cells[u])) {
                auto it = idx.find(nb);
                if (it != idx.end() && comp[it->second] < 0) {
                    comp[it->second] = c;
                    st.push_back(it->second);
                }
            }
        }
    }
    return sizes;
}

// nearest boundary vertex of the domain; tie-break by smallest incident cell, then vertex
inline int nearest_boundary_vertex(const DiscreteDomain& d, Point p) {
    int best = -1;
    double bd = 1e300;
    HexCell bc{};
    for (const auto& e : d.boundary) {
        int v = d.find_vertex(e.a);
        double dist = norm(d.vertex_point(v) - p);
        HexCell mc{1 << 30, 1 << 30};
        for (int c : d.vcells[v])
            if (c >= 0) mc = std::min(mc, d.cells[c]);
        bool better = best < 0 || dist < bd - 1e-12 ||
                      (std::fabs(dist - bd) <= 1e-12 && (mc < bc || (mc == bc && d.vertices[v] < d.vertices[best])));
        if (better) {
            best = v;
            bd = dist;
            bc = mc;
        }
    }
    return best;
}

inline void assign_marked(DiscreteDomain& d, const std::array<int, 4>& vids) {
    for (int k = 0; k < 4; ++k)
        for (int j = 0; j < k; ++j)
            if (vids[k] == vids[j])
                throw Error(ErrorCode::MARKED_POINT_COLLISION, "two marked points share a boundary vertex");
    int E = int(d.boundary.size());
    std::array<int, 4> pos{};
    for (int k = 0; k < 4; ++k) {
        pos[k] = d.vertex_loop_pos[vids[k]];
        if (pos[k] < 0) throw Error(ErrorCode::MARKED_POINT_ORDER, "marked point is not on the boundary loop");
    }
    std::array<int, 4> rel{};
    for (int k = 0; k < 4; ++k) rel[k] = ((pos[k] - pos[0]) % E + E) % E;
    if (!(rel[1] > 0 && rel[2] > rel[1] && rel[3] > rel[2]))
        throw Error(ErrorCode::MARKED_POINT_ORDER, "marked points are not in counterclockwise order");
    d.marked_pos = pos;
    for (int k = 0; k < 4; ++k) d.marked[k] = d.vertices[vids[k]];
    d.edge_arc.assign(E, -1);
    for (int k = 0; k < 4; ++k)
        for (int p : d.arc_edges(k)) d.edge_arc[p] = k;
}

// ------------------------------------------------------------ generators

namespace gen {

inline ContinuumDomain square() {
    ContinuumDomain d;
    d.boundary = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    d.marked = {Point{0, 0}, Point{1, 0}, Point{1, 1}, Point{0, 1}};
    d.generator = {"square", {}};
    return d;
}

inline ContinuumDomain rectangle(double aspect) {
    ContinuumDomain d;
    d.boundary = {{0, 0}, {aspect, 0}, {aspect, 1}, {0, 1}};
    d.marked = {Point{0, 0}, Point{aspect, 0}, Point{aspect, 1}, Point{0, 1}};
    d.generator = {"rectangle", {{"aspect", aspect}}};
    return d;
}

// lattice-exact k x k parallelogram of hexagons at scale n; sides sit 1.25 eps outside the extreme centers
inline ContinuumDomain rhombus(int k, int n) {
    const double eps = 1.0 / n, off = 1.25 / 1.5;
    auto at = [&](double q, double r) { return Point{kSqrt3 * eps * (q + r / 2), 1.5 * eps * r}; };
    double lo = -off, hi = k - 1 + off;
    ContinuumDomain d;
    d.boundary = {at(lo, lo), at(hi, lo), at(hi, hi), at(lo, hi)};
    d.marked = {d.boundary[0], d.boundary[1], d.boundary[2], d.boundary[3]};
    d.generator = {"rhombus", {{"k", double(k)}, {"n", double(n)}}};
    return d;
}

// unit square with a channel of width w and depth d hanging below, centered at x = m; A at its far end
inline ContinuumDomain fjord(double w, double depth, double m = 0.5) {
    ContinuumDomain d;
    d.boundary = {{0, 0}, {m - w / 2, 0}, {m - w / 2, -depth}, {m + w / 2, -depth}, {m + w / 2, 0}, {1, 0}, {1, 1}, {0, 1}};
    d.marked = {Point{m, -depth}, Point{1, 0}, Point{1, 1}, Point{0, 1}};
    d.generator = {"fjord", {{"w", w}, {"d", depth}, {"m", m}}};
    return d;
}

// channels of halving width stacked below the unit square
inline ContinuumDomain nested_fjord(int levels, double w = 0.2, double depth = 0.6, double m = 0.5) {
    ContinuumDomain d;
    std::vector<Point> left, right;
    double y = 0;
    double step = depth / levels;
    for (int i = 0; i < levels; ++i) {
        double wi = w / std::pow(2.0, i);
        left.push_back({m - wi / 2, y});
        right.push_back({m + wi / 2, y});
        y -= step;
        left.push_back({m - wi / 2, y});
        right.push_back({m + wi / 2, y});
    }
    d.boundary.push_back({0, 0});
    for (auto p : left) d.boundary.push_back(p);
    for (auto it = right.rbegin(); it != right.rend(); ++it) d.boundary.push_back(*it);
    d.boundary.push_back({1, 0});
    d.boundary.push_back({1, 1});
    d.boundary.push_back({0, 1});
    d.marked = {Point{m, -depth}, Point{1, 0}, Point{1, 1}, Point{0, 1}};
    d.generator = {"nested-fjord", {{"levels", double(levels)}, {"w", w}, {"d", depth}, {"m", m}}};
    return d;
}

// Koch snowflake with 3*4^depth edges, scaled into the unit square
inline ContinuumDomain koch(int depth) {
    const double h = kSqrt3 / 2;
    std::vector<Point> pts{{0, 0}, {1, 0}, {0.5, h}};
    for (int it = 0; it < depth; ++it) {
        std::vector<Point> nx;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            Point a = pts[i], b = pts[(i + 1) % pts.size()];
            Point dlt = (1.0 / 3) * (b - a);
            Point p1 = a + dlt, p2 = a + 2.0 * dlt;
            // outward bump lies to the right of a ccw edge
            Point peak = p1 + Point{dlt.x * 0.5 + dlt.y * h, -dlt.x * h + dlt.y * 0.5};
            nx.insert(nx.end(), {a, p1, peak, p2});
        }
        pts = std::move(nx);
    }
    Rect r = bounding_rect(pts);
    double s = 1.0 / std::max(r.x1 - r.x0, r.y1 - r.y0);
    for (auto& p : pts) p = Point{(p.x - r.x0) * s, (p.y - r.y0) * s};
    ContinuumDomain d;
    d.boundary = pts;
    Rect b = bounding_rect(pts);
    std::array<Point, 4> targets{Point{b.x0, b.y0}, Point{b.x1, b.y0}, Point{b.x1, b.y1}, Point{b.x0, b.y1}};
    for (int k = 0; k < 4; ++k) {
        double bd = 1e300;
        for (auto p : pts)
            if (norm(p - targets[k]) < bd) {
                bd = norm(p - targets[k]);
                d.marked[k] = p;
            }
    }
    d.generator = {"koch", {{"depth", double(depth)}}};
    return d;
}

inline ContinuumDomain disk(double radius, Point c = {0, 0}, int sides = 64) {
    ContinuumDomain d;
    for (int i = 0; i < sides; ++i) {
        double t = 2 * M_PI * i / sides;
        d.boundary.push_back({c.x + radius * std::cos(t), c.y + radius * std::sin(t)});
    }
    for (int k = 0; k < 4; ++k) {
        double t = M_PI * (1.25 + 0.5 * k);
        d.marked[k] = {c.x + radius * std::cos(t), c.y + radius * std::sin(t)};
    }
    d.generator = {"disk", {{"radius", radius}, {"cx", c.x}, {"cy", c.y}}};
    return d;
}

// unit room, tunnel of width t and length h on top, then a wide flat chamber of width W and height c; A on the chamber roof
inline ContinuumDomain tunnel_chamber(double t = 0.12, double h = 0.3, double W = 1.6, double c = 0.2) {
    ContinuumDomain d;
    double m = 0.5;
    d.boundary = {{0, 0},           {1, 0},           {1, 1},           {m + t / 2, 1},     {m + t / 2, 1 + h},
                  {m + W / 2, 1 + h}, {m + W / 2, 1 + h + c}, {m - W / 2, 1 + h + c}, {m - W / 2, 1 + h}, {m - t / 2, 1 + h},
                  {m - t / 2, 1},   {0, 1}};
    d.marked = {Point{m, 1 + h + c}, Point{0, 0}, Point{1, 0}, Point{1, 1}};
    d.generator = {"tunnel-chamber", {{"t", t}, {"h", h}, {"W", W}, {"c", c}}};
    return d;
}

}  // namespace gen

inline std::vector<std::string> builtin_domains() {
    return {"square", "rectangle", "rhombus", "fjord", "nested-fjord", "koch", "disk", "tunnel-chamber"};
}

inline ContinuumDomain make_domain(const Generator& g) {
    if (g.name == "square") return gen::square();
    if (g.name == "rectangle") return gen::rectangle(g.param("aspect", 2.0));
    if (g.name == "rhombus") return gen::rhombus(int(g.param("k", 8)), int(g.param("n", 8)));
    if (g.name == "fjord") return gen::fjord(g.param("w", 0.05), g.param("d", 0.6), g.param("m", 0.5));
    if (g.name == "nested-fjord")
        return gen::nested_fjord(int(g.param("levels", 2)), g.param("w", 0.2), g.param("d", 0.6), g.param("m", 0.5));
    if (g.name == "koch") return gen::koch(int(g.param("depth", 3)));
    if (g.name == "disk") return gen::disk(g.param("radius", 0.5), {g.param("cx", 0.0), g.param("cy", 0.0)});
    if (g.name == "tunnel-chamber")
        return gen::tunnel_chamber(g.param("t", 0.12), g.param("h", 0.3), g.param("W", 1.6), g.param("c", 0.2));
    throw Error(ErrorCode::BAD_CONFIG, "unknown generator '" + g.name + "'");
}

// ------------------------------------------------------------ canonical approximation

// closed hexagon strictly inside the open polygon
inline bool hex_inside(const EdgeIndex& idx, HexCell c, int n) {
    const double eps = 1.0 / n;
    Point ctr = cell_center(c, n);
    if (point_in_polygon(idx.polygon(), ctr) != 1) return false;
    double dist = idx.distance(ctr);
    if (dist > eps * (1 + 1e-9)) return true;
    if (dist < eps * kSqrt3 / 2 * (1 - 1e-9)) return false;
    auto cs = corners(c);
    for (int k = 0; k < 6; ++k) {
        Point a = to_point(cs[k], n), b = to_point(cs[(k + 1) % 6], n);
        if (idx.meets_segment(a, b)) return false;
        if (point_in_polygon(idx.polygon(), a) != 1) return false;
    }
    return true;
}

inline std::vector<HexCell> candidate_cells(const Rect& r, int n) {
    const double eps = 1.0 / n;
    std::vector<HexCell> out;
    int r0 = int(std::floor(r.y0 / (1.5 * eps))) - 1, r1 = int(std::ceil(r.y1 / (1.5 * eps))) + 1;
    for (int rr = r0; rr <= r1; ++rr) {
        int q0 = int(std::floor(r.x0 / (kSqrt3 * eps) - rr / 2.0)) - 1;
        int q1 = int(std::ceil(r.x1 / (kSqrt3 * eps) - rr / 2.0)) + 1;
        for (int q = q0; q <= q1; ++q) out.push_back({q, rr});
    }
    return out;
}

// cell whose center is farthest from the polygon boundary (largest inscribed disk proxy)
inline HexCell deepest_cell(const std::vector<HexCell>& cells, const EdgeIndex& idx, int n, double* depth = nullptr) {
    HexCell best = cells.front();
    double bd = -1;
    for (auto c : cells) {
        double dist = idx.distance(cell_center(c, n));
        if (dist > bd + 1e-12 || (std::fabs(dist - bd) <= 1e-12 && c < best)) {
            bd = dist;
            best = c;
        }
    }
    if (depth) *depth = bd;
    return best;
}

inline std::vector<HexCell> component_of(const std::vector<HexCell>& cells, HexCell seed) {
    std::vector<int> comp;
    cell_components(cells, comp);
    int target = -1;
    for (int i = 0; i < int(cells.size()); ++i)
        if (cells[i] == seed) target = comp[i];
    std::vector<HexCell> out;
    for (int i = 0; i < int(cells.size()); ++i)
        if (comp[i] == target) out.push_back(cells[i]);
    return out;
}

inline DiscreteDomain canonical_approximation(const ContinuumDomain& dom, int n) {
    EdgeIndex idx(dom.boundary);
    std::vector<HexCell> inside;
    for (auto c : candidate_cells(bounding_rect(dom.boundary), n))
        if (hex_inside(idx, c, n)) inside.push_back(c);
    if (inside.empty()) throw Error(ErrorCode::NO_INTERIOR_HEXAGON, "no hexagon closure fits inside the domain");
    HexCell deep = deepest_cell(inside, idx, n);
    DiscreteDomain d = assemble_domain(component_of(inside, deep), n, DomainKind::CANONICAL);
    d.source = std::make_shared<ContinuumDomain>(dom);
    std::array<int, 4> vids{};
    for (int k = 0; k < 4; ++k) vids[k] = nearest_boundary_vertex(d, dom.marked[k]);
    assign_marked(d, vids);
    return d;
}

// the boundary loop accounts for every boundary edge
inline bool simply_connected(const DiscreteDomain& d) {
    std::size_t edges = 0;
    for (int i = 0; i < d.size(); ++i)
        for (int k = 0; k < 6; ++k) edges += d.nbr[i][k] < 0;
    return edges == d.boundary.size();
}

// domain from an explicit cell list; marked points snap to the nearest boundary vertices
inline DiscreteDomain cell_domain(std::vector<HexCell> cells, int n, const std::array<Point, 4>& marks) {
    if (cells.empty()) throw Error(ErrorCode::NO_INTERIOR_HEXAGON, "empty cell list");
    std::vector<int> comp;
    if (cell_components(cells, comp).size() != 1) throw Error(ErrorCode::BAD_CONFIG, "cells are not edge-connected");
    DiscreteDomain d = assemble_domain(std::move(cells), n, DomainKind::CANONICAL);
    if (!simply_connected(d)) throw Error(ErrorCode::BAD_CONFIG, "cell set has holes");
    std::array<int, 4> vids{};
    for (int k = 0; k < 4; ++k) vids[k] = nearest_boundary_vertex(d, marks[k]);
    assign_marked(d, vids);
    return d;
}

// ------------------------------------------------------------ square regularization

namespace detail {

// open hexagon meets open box
inline bool hex_interior_meets_box(HexCell c, int n, double bx0, double by0, double bx1, double by1) {
    std::array<Point, 6> p;
    for (int k = 0; k < 6; ++k) p[k] = to_point(corner(c, k), n);
    std::array<Point, 4> b{Point{bx0, by0}, Point{bx1, by0}, Point{bx1, by1}, Point{bx0, by1}};
    const double s = kSqrt3 / 2, tol = 1e-12 / n;
    std::array<Point, 5> axes{Point{1, 0}, Point{0, 1}, Point{0.5, s}, Point{-0.5, s}, Point{s, 0.5}};
    for (auto a : axes) {
        double h0 = 1e300, h1 = -1e300, q0 = 1e300, q1 = -1e300;
        for (auto v : p) {
            h0 = std::min(h0, dot(a, v));
            h1 = std::max(h1, dot(a, v));
        }
        for (auto v : b) {
            q0 = std::min(q0, dot(a, v));
            q1 = std::max(q1, dot(a, v));
        }
        if (h1 <= q0 + tol || q1 <= h0 + tol) return false;
    }
    return true;
}

inline std::int64_t square_key(int i, int j) { return (std::int64_t(i) << 32) ^ std::uint32_t(j); }

}  // namespace detail

inline DiscreteDomain square_regularize(const DiscreteDomain& disc, double a1) {
    if (disc.kind != DomainKind::CANONICAL || !disc.source)
        throw Error(ErrorCode::BAD_CONFIG, "square regularization needs a canonical approximation");
    const int n = disc.n;
    const ContinuumDomain& dom = *disc.source;
    EdgeIndex idx(dom.boundary);
    int s = std::max(1, int(std::lround(std::pow(double(n), a1))));
    double L = s * kSqrt3 / n;
    Rect br = bounding_rect(dom.boundary);
    int i0 = int(std::floor(br.x0 / L)) - 1, i1 = int(std::ceil(br.x1 / L)) + 1;
    int j0 = int(std::floor(br.y0 / L)) - 1, j1 = int(std::ceil(br.y1 / L)) + 1;
    std::unordered_map<std::int64_t, bool> kept;
    std::vector<std::array<int, 2>> kept_list;
    for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i) {
            // closed square within the closed domain: a square flush with a boundary edge is kept
            const double t = 1e-9 * L;
            Point c[4] = {{i * L + t, j * L + t}, {(i + 1) * L - t, j * L + t}, {(i + 1) * L - t, (j + 1) * L - t}, {i * L + t, (j + 1) * L - t}};
            bool ok = true;
            for (int k = 0; k < 4 && ok; ++k) {
                if (point_in_polygon(dom.boundary, c[k]) != 1) ok = false;
                else if (idx.meets_segment(c[k], c[(k + 1) % 4])) ok = false;
            }
            if (ok) {
                kept[detail::square_key(i, j)] = true;
                kept_list.push_back({i, j});
            }
        }
    std::vector<HexCell> cells;
    const double eps = 1.0 / n;
    for (auto c : disc.cells) {
        Point ctr = cell_center(c, n);
        int a0 = int(std::floor((ctr.x - eps) / L)), a1i = int(std::floor((ctr.x + eps) / L));
        int b0 = int(std::floor((ctr.y - eps) / L)), b1 = int(std::floor((ctr.y + eps) / L));
        bool ok = true;
        for (int j = b0; j <= b1 && ok; ++j)
            for (int i = a0; i <= a1i && ok; ++i)
                if (!kept.count(detail::square_key(i, j)) &&
                    detail::hex_interior_meets_box(c, n, i * L, j * L, (i + 1) * L, (j + 1) * L))
                    ok = false;
        if (ok) cells.push_back(c);
    }
    if (cells.empty()) throw Error(ErrorCode::EMPTY_REGULARIZATION, "no grid square survives");
    std::vector<int> comp;
    auto sizes = cell_components(cells, comp);
    HexCell deep = deepest_cell(disc.cells, idx, n);
    int target = -1;
    for (int i = 0; i < int(cells.size()); ++i)
        if (cells[i] == deep) target = comp[i];
    if (target < 0) target = int(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    std::vector<HexCell> keep;
    for (int i = 0; i < int(cells.size()); ++i)
        if (comp[i] == target) keep.push_back(cells[i]);

    DiscreteDomain d = assemble_domain(std::move(keep), n, DomainKind::SQUARE_REGULARIZED);
    d.source = disc.source;
    d.grid_side = L;
    d.kept_squares = kept_list;

    // juncture procedure: non-kept grid squares touching the old boundary and edge-adjacent to a kept
    // square carry the arc labels of the old boundary edges passing through them
    std::unordered_map<std::int64_t, std::array<bool, 4>> labels;
    for (int p = 0; p < int(disc.boundary.size()); ++p) {
        Point a = to_point(disc.boundary[p].a, n), b = to_point(disc.boundary[p].b, n);
        Point mid = 0.5 * (a + b);
        int i = int(std::floor(mid.x / L)), j = int(std::floor(mid.y / L));
        labels[detail::square_key(i, j)][disc.edge_arc[p]] = true;
    }
    auto frontier = [&](int i, int j) {
        if (kept.count(detail::square_key(i, j))) return false;
        return kept.count(detail::square_key(i + 1, j)) || kept.count(detail::square_key(i - 1, j)) ||
               kept.count(detail::square_key(i, j + 1)) || kept.count(detail::square_key(i, j - 1));
    };
    std::array<int, 4> vids{};
    for (int k = 0; k < 4; ++k) {
        int in_arc = (k + 3) % 4, out_arc = k;  // arcs ending and starting at marked point k
        Point mk = to_point(disc.marked[k], n);
        double best = 1e300;
        Point anchor = mk;
        for (auto& [key, lab] : labels) {
            int i = int(key >> 32), j = int(std::int32_t(std::uint32_t(key)));
            if (!frontier(i, j)) continue;
            auto consider = [&](Point p) {
                double dd = norm(p - mk);
                if (dd < best) {
                    best = dd;
                    anchor = p;
                }
            };
            if (lab[in_arc] && lab[out_arc]) consider({(i + 0.5) * L, (j + 0.5) * L});
            if (!lab[in_arc]) continue;
            // edge-neighbors of the other type: take the shared-edge corner nearer the marked point
            const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
            for (int t = 0; t < 4; ++t) {
                auto it = labels.find(detail::square_key(i + di[t], j + dj[t]));
                if (it == labels.end() || !it->second[out_arc] || !frontier(i + di[t], j + dj[t])) continue;
                Point c1, c2;
                if (di[t] != 0) {
                    double x = (di[t] > 0 ? i + 1 : i) * L;
                    c1 = {x, j * L};
                    c2 = {x, (j + 1) * L};
                } else {
                    double y = (dj[t] > 0 ? j + 1 : j) * L;
                    c1 = {i * L, y};
                    c2 = {(i + 1) * L, y};
                }
                consider(norm(c1 - mk) <= norm(c2 - mk) ? c1 : c2);
            }
        }
        vids[k] = nearest_boundary_vertex(d, anchor);
        d.relocated[k] = norm(d.vertex_point(vids[k]) - mk) > 2 * kSqrt3 * L + 2 * eps;
    }
    try {
        assign_marked(d, vids);
    } catch (const Error&) {
        // fall back to plain nearest-vertex placement
        for (int k = 0; k < 4; ++k) vids[k] = nearest_boundary_vertex(d, to_point(disc.marked[k], n));
        assign_marked(d, vids);
    }
    return d;
}

// ------------------------------------------------------------ Minkowski dimension

struct MinkowskiReport {
    std::vector<double> scales;
    std::vector<double> counts;  // mean cover count over randomly shifted grids
    double fitted_dimension = 0;
    Interval ci;
};

// boxes of a grid with origin (ox, oy) met by the polygon boundary
inline long box_count(const Polygon& poly, double side, double ox = 0, double oy = 0) {
    std::unordered_map<std::int64_t, char> seen;
    for (std::size_t e = 0; e < poly.size(); ++e) {
        Point a = poly[e], b = poly[(e + 1) % poly.size()];
        int steps = std::max(1, int(std::ceil(norm(b - a) / (side / 16))));
        for (int s = 0; s <= steps; ++s) {
            Point p = a + (double(s) / steps) * (b - a);
            seen[detail::square_key(int(std::floor((p.x - ox) / side)), int(std::floor((p.y - oy) / side)))] = 1;
        }
    }
    return long(seen.size());
}

// Averaging over grid offsets removes most of the phase bias of a single aligned grid.
inline MinkowskiReport minkowski_estimate(const ContinuumDomain& dom, std::vector<double> scales,
                                          std::uint64_t stream = 0x4D494E4Bull, int offsets = 16) {
    std::sort(scales.begin(), scales.end(), std::greater<>());
    if (scales.size() < 4 || scales.back() <= 0 || scales.front() / scales.back() < 100 * (1 - 1e-9))
        throw Error(ErrorCode::BAD_CONFIG, "need at least 4 scales spanning 2 decades");
    MinkowskiReport rep;
    rep.scales = scales;
    std::vector<double> x, y;
    for (std::size_t i = 0; i < scales.size(); ++i) {
        double s = scales[i], acc = 0;
        PhiloxEngine rng(stream, i);
        for (int t = 0; t < offsets; ++t) {
            double ox = rng.uniform() * s, oy = rng.uniform() * s;
            acc += double(box_count(dom.boundary, s, ox, oy));
        }
        rep.counts.push_back(acc / offsets);
        x.push_back(std::log(1 / s));
        y.push_back(std::log(rep.counts.back()));
    }
    if (std::all_of(rep.counts.begin(), rep.counts.end(), [&](double c) { return c == rep.counts.front(); }))
        throw Error(ErrorCode::DEGENERATE_FIT, "all box counts equal");
    auto f = linear_fit(x, y);
    rep.fitted_dimension = f->slope;
    rep.ci = bootstrap_slope(x, y, 1000, stream);
    return rep;
}

}  // namespace cardylab
