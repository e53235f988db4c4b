#pragma once

#include <string>
#include <vector>

#include "cardylab/domain.hpp"
#include "cardylab/percolation.hpp"

namespace fixtures {

using namespace cardylab;

struct Fixture {
    std::string name;
    DiscreteDomain dom;
    std::vector<int> annulus;  // empty when no circuit query applies
    int hole_cell = -1;

    Fixture(std::string n, DiscreteDomain d) : name(std::move(n)), dom(std::move(d)) {}
};

inline std::array<Point, 4> bbox_marks(const std::vector<HexCell>& cells, int n) {
    double x0 = 1e9, y0 = 1e9, x1 = -1e9, y1 = -1e9;
    for (auto c : cells) {
        Point p = cell_center(c, n);
        x0 = std::min(x0, p.x), y0 = std::min(y0, p.y), x1 = std::max(x1, p.x), y1 = std::max(y1, p.y);
    }
    double e = 1.0 / n;
    return {Point{x0 - e, y0 - e}, Point{x1 + e, y0 - e}, Point{x1 + e, y1 + e}, Point{x0 - e, y1 + e}};
}

inline std::vector<HexCell> parallelogram(int cols, int rows) {
    std::vector<HexCell> out;
    for (int r = 0; r < rows; ++r)
        for (int q = 0; q < cols; ++q) out.push_back({q, r});
    return out;
}

inline std::array<Point, 4> parallelogram_marks(int cols, int rows, int n) {
    auto at = [&](double q, double r) { return Point{kSqrt3 * (q + r / 2) / n, 1.5 * r / n}; };
    double o = 0.8;
    return {at(-o, -o), at(cols - 1 + o, -o), at(cols - 1 + o, rows - 1 + o), at(-o, rows - 1 + o)};
}

inline DiscreteDomain rhombus_domain(int cols, int rows, int n = 8) {
    return cell_domain(parallelogram(cols, rows), n, parallelogram_marks(cols, rows, n));
}

inline int hex_dist(HexCell a, HexCell b) {
    int dq = a.q - b.q, dr = a.r - b.r;
    return (std::abs(dq) + std::abs(dr) + std::abs(dq + dr)) / 2;
}

inline std::vector<HexCell> hex_blob(int radius) {
    std::vector<HexCell> out;
    for (int q = -radius; q <= radius; ++q)
        for (int r = -radius; r <= radius; ++r)
            if (hex_dist({q, r}, {0, 0}) <= radius) out.push_back({q, r});
    return out;
}

// small fixtures (<= 20 cells)
inline std::vector<Fixture> small_fixtures() {
    std::vector<Fixture> fx;
    const int n = 8;
    fx.push_back({"rhombus2", rhombus_domain(2, 2, n)});
    fx.push_back({"rhombus3", rhombus_domain(3, 3, n)});
    fx.push_back({"rhombus4", rhombus_domain(4, 4, n)});
    fx.push_back({"parallelogram2x3", rhombus_domain(2, 3, n)});
    fx.push_back({"parallelogram3x5", rhombus_domain(3, 5, n)});
    fx.push_back({"parallelogram5x4", rhombus_domain(5, 4, n)});
    {
        // mini-fjord: 4x3 block with a one-cell-wide channel hanging below
        auto cells = parallelogram(4, 3);
        cells.push_back({2, -1});
        cells.push_back({3, -2});
        cells.push_back({3, -3});
        Point tip = cell_center({3, -3}, n) + Point{0, -1.0 / n};
        auto m = parallelogram_marks(4, 3, n);
        fx.push_back({"mini-fjord", cell_domain(cells, n, {tip, m[1], m[2], m[3]})});
    }
    {
        auto cells = hex_blob(2);
        Fixture f{"hexblob2", cell_domain(cells, n, bbox_marks(cells, n))};
        for (auto c : cells)
            if (hex_dist(c, {0, 0}) == 1) f.annulus.push_back(f.dom.find_cell(c));
        f.hole_cell = f.dom.find_cell({0, 0});
        fx.push_back(std::move(f));
    }
    {
        // thick annulus: rings 1..2 of a radius-2 blob minus nothing, hole = center; outer fringe = ring 2
        auto cells = hex_blob(2);
        Fixture f{"hexblob2-thick", cell_domain(cells, n, bbox_marks(cells, n))};
        for (auto c : cells)
            if (hex_dist(c, {0, 0}) >= 1) f.annulus.push_back(f.dom.find_cell(c));
        f.hole_cell = f.dom.find_cell({0, 0});
        fx.push_back(std::move(f));
    }
    {
        std::vector<HexCell> cells;  // L shape
        for (int q = 0; q < 5; ++q) cells.push_back({q, 0});
        for (int q = 0; q < 5; ++q) cells.push_back({q, 1});
        for (int r = 2; r < 6; ++r) cells.push_back({-r / 2, r});
        for (int r = 2; r < 6; ++r) cells.push_back({1 - r / 2, r});
        fx.push_back({"L-shape", cell_domain(cells, n, bbox_marks(cells, n))});
    }
    {
        std::vector<HexCell> cells;  // triangle
        for (int r = 0; r < 5; ++r)
            for (int q = 0; q < 5 - r; ++q) cells.push_back({q, r});
        auto m = bbox_marks(cells, n);
        fx.push_back({"triangle", cell_domain(cells, n, m)});
    }
    {
        std::vector<HexCell> cells;  // ribbon
        for (int q = 0; q < 7; ++q) cells.push_back({q, 0});
        for (int q = 0; q < 6; ++q) cells.push_back({q, 1});
        fx.push_back({"ribbon", cell_domain(cells, n, bbox_marks(cells, n))});
    }
    return fx;
}

// vertex nearest to the centroid of cell centers
inline int central_vertex(const DiscreteDomain& d) {
    Point c{0, 0};
    for (auto h : d.cells) c = c + cell_center(h, d.n);
    c = (1.0 / d.size()) * c;
    int best = 0;
    for (int v = 1; v < int(d.vertices.size()); ++v)
        if (norm(d.vertex_point(v) - c) < norm(d.vertex_point(best) - c) - 1e-12) best = v;
    return best;
}

}  // namespace fixtures
