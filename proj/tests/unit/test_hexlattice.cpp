#include <gtest/gtest.h>

#include <set>

#include "cardylab/hexlattice.hpp"
#include "cardylab/rng.hpp"

using namespace cardylab;

TEST(HexLattice, NeighborOrder) {
    auto nb = neighbors({0, 0});
    std::array<HexCell, 6> want{{{1, 0}, {0, 1}, {-1, 1}, {-1, 0}, {0, -1}, {1, -1}}};
    for (int i = 0; i < 6; ++i) EXPECT_EQ(nb[i], want[i]);
}

TEST(HexLattice, NeighborSymmetry) {
    HexCell a{3, -2};
    for (HexCell b : neighbors(a)) {
        auto back = neighbors(b);
        EXPECT_NE(std::find(back.begin(), back.end(), a), back.end());
    }
}

TEST(HexLattice, CommonNeighbors) {
    auto na = neighbors({0, 0}), nb = neighbors({1, 0});
    std::set<std::pair<int, int>> sa;
    for (auto c : na) sa.insert({c.q, c.r});
    int common = 0;
    for (auto c : nb) common += sa.count({c.q, c.r});
    EXPECT_EQ(common, 2);
}

TEST(HexLattice, AdjacentCentersAtSqrt3Eps) {
    int n = 7;
    for (HexCell b : neighbors({2, 5})) {
        Point d = cell_center(b, n) - cell_center({2, 5}, n);
        EXPECT_NEAR(norm(d), std::sqrt(3.0) / n, 1e-14);
    }
}

TEST(HexLattice, EdgesBoundTwoCells) {
    HexCell c{0, 0};
    for (int i = 0; i < 6; ++i) {
        LatticeEdge e = edge_toward(c, i);
        int count = 0;
        for (HexCell x : cells_at_vertex(e.a))
            for (HexCell y : cells_at_vertex(e.b))
                if (x == y) ++count;
        EXPECT_EQ(count, 2);
    }
}

namespace {

struct CellSet {
    std::set<std::pair<int, int>> s;
    std::size_t count(HexCell c) const { return s.count({c.q, c.r}); }
    void add(HexCell c) { s.insert({c.q, c.r}); }
};

// smallest box side (cell units) holding both centers, from real coordinates
long linf_oracle(HexCell a, HexCell b) {
    Point d = cell_center(b, 1) - cell_center(a, 1);
    double m = std::max(std::fabs(d.x), std::fabs(d.y)) / kSqrt3;
    long L = 0;
    while (L < m - 1e-9) ++L;
    return L;
}

// constrained distance by sliding real boxes whose lower-left corner sits on a center coordinate
long d_inf_oracle(const CellSet& region, HexCell x, HexCell y) {
    for (long L = linf_oracle(x, y); L < 64; ++L) {
        double side = L * kSqrt3;
        std::vector<double> xs, ys;
        for (auto [q, r] : region.s) {
            Point p = cell_center({q, r}, 1);
            xs.push_back(p.x);
            ys.push_back(p.y);
        }
        for (double x0 : xs)
            for (double y0 : ys) {
                auto inside = [&](HexCell c) {
                    Point p = cell_center(c, 1);
                    return region.count(c) && p.x >= x0 - 1e-9 && p.x <= x0 + side + 1e-9 && p.y >= y0 - 1e-9 &&
                           p.y <= y0 + side + 1e-9;
                };
                if (!inside(x) || !inside(y)) continue;
                std::set<std::pair<int, int>> seen{{x.q, x.r}};
                std::vector<HexCell> st{x};
                while (!st.empty()) {
                    HexCell c = st.back();
                    st.pop_back();
                    if (c == y) return L;
                    for (auto nb : neighbors(c))
                        if (inside(nb) && seen.insert({nb.q, nb.r}).second) st.push_back(nb);
                }
            }
    }
    return kInfinite;
}

}  // namespace

TEST(HexLattice, RandomCellsSixRegular) {
    PhiloxEngine rng(1, 1);
    for (int i = 0; i < 10000; ++i) {
        HexCell c{int(rng.below(2001)) - 1000, int(rng.below(2001)) - 1000};
        auto nb = neighbors(c);
        std::set<std::pair<int, int>> u;
        for (auto x : nb) {
            u.insert({x.q, x.r});
            ASSERT_TRUE(adjacent(x, c));
        }
        ASSERT_EQ(u.size(), 6u);
    }
}

TEST(DInf, Examples) {
    CellSet all;
    for (int q = -6; q <= 6; ++q)
        for (int r = -6; r <= 6; ++r) all.add({q, r});
    EXPECT_EQ(d_inf(all, {0, 0}, {0, 0}), 0);
    EXPECT_EQ(d_inf(all, {0, 0}, {2, 0}), linf_oracle({0, 0}, {2, 0}));
    EXPECT_EQ(d_inf(all, {0, 0}, {2, 0}), 2);
    CellSet two;
    two.add({0, 0});
    two.add({3, 0});
    EXPECT_EQ(d_inf(two, {0, 0}, {3, 0}), kInfinite);
}

TEST(DInf, ConvexRegionMatchesUnconstrained) {
    // box-shaped regions up to 12 x 12 cells
    for (int w : {3, 6, 12}) {
        CellSet box;
        for (int r = 0; r < w; ++r)
            for (int X = 0; X < w; ++X) box.add({X - r / 2, r});
        std::vector<HexCell> cs;
        for (auto [q, r] : box.s) cs.push_back({q, r});
        for (std::size_t i = 0; i < cs.size(); i += 5)
            for (std::size_t j = 0; j < cs.size(); j += 7) {
                long got = d_inf(box, cs[i], cs[j]);
                ASSERT_EQ(got, linf_oracle(cs[i], cs[j]));
                ASSERT_EQ(got, d_inf_oracle(box, cs[i], cs[j]));
            }
    }
}

TEST(DInf, ConstrainedAgreesWithOracleAndTriangle) {
    // a U-shaped region forces detours
    CellSet u;
    for (int r = 0; r < 16; ++r) {
        u.add({-r / 2, r});
        u.add({1 - r / 2, r});
        u.add({5 - r / 2, r});
        u.add({6 - r / 2, r});
    }
    for (int X = 0; X < 7; ++X) u.add({X, 0});
    std::vector<HexCell> cs;
    for (auto [q, r] : u.s) cs.push_back({q, r});
    for (std::size_t i = 0; i < cs.size(); i += 3)
        for (std::size_t j = 0; j < cs.size(); j += 4) {
            long dij = d_inf(u, cs[i], cs[j]);
            ASSERT_EQ(dij, d_inf_oracle(u, cs[i], cs[j]));
            ASSERT_EQ(dij, d_inf(u, cs[j], cs[i]));
            for (std::size_t k = 0; k < cs.size(); k += 9)
                ASSERT_LE(dij, d_inf(u, cs[i], cs[k]) + d_inf(u, cs[k], cs[j]) + 1);
        }
    // the two arms' tops are close in the plane but far inside the region
    HexCell a{-7, 15}, b{-2, 15};
    EXPECT_GT(d_inf(u, a, b), linf_oracle(a, b));
}

TEST(SegmentDiameter, Examples) {
    const int n = 10;
    const double eps = 1.0 / n;
    SegmentPath edge{{corner({0, 0}, 5), corner({0, 0}, 0)}};  // a vertical edge
    EXPECT_NEAR(segment_diameter(edge, n), eps, 1e-15);
    SegmentPath hex;
    for (int k = 0; k <= 6; ++k) hex.vertices.push_back(corner({0, 0}, k % 6));
    EXPECT_TRUE(hex.closed());
    EXPECT_TRUE(hex.valid());
    EXPECT_NEAR(segment_diameter(hex, n), 2 * eps, 1e-15);
    for (int k = 1; k <= 6; ++k) {
        // zigzag across the tops of k hexagons in a row
        SegmentPath top;
        top.vertices.push_back(corner({0, 0}, 2));
        for (int i = 0; i < k; ++i) {
            top.vertices.push_back(corner({i, 0}, 1));
            top.vertices.push_back(corner({i, 0}, 0));
        }
        ASSERT_TRUE(top.valid());
        double d = segment_diameter(top, n), w = kSqrt3 * eps;
        EXPECT_GE(d, k * w - 1e-12);
        EXPECT_LE(d, (k + 2) * w + 1e-12);
    }
    EXPECT_THROW(segment_diameter(SegmentPath{}, n), Error);
}

TEST(BoxGrid, Examples) {
    const int n = 8;
    Rect b{0, 0, 1, 1};
    auto one = box_grid({0, 0}, 1.0, b, n);
    ASSERT_EQ(one.size(), 1u);
    auto four = box_grid({0, 0}, 0.5, b, n);
    EXPECT_EQ(four.size(), 4u);
    // a hexagon centered on the vertical line x = 0.5 belongs to both halves
    HexCell c{0, 0};
    for (int q = 0; q < 60; ++q)
        if (std::fabs(cell_center({q, 2}, 100).x - 0.5) < 0.5 / 100) c = {q, 2};
    auto halves = box_grid({0, 0}, 0.5, Rect{0, 0, 1, 0.5}, 100);
    ASSERT_EQ(halves.size(), 2u);
    auto has = [&](const Box& bx) { return std::find(bx.cells.begin(), bx.cells.end(), c) != bx.cells.end(); };
    EXPECT_TRUE(has(halves[0]));
    EXPECT_TRUE(has(halves[1]));
    // single box lists every hexagon meeting the unit square, and only those
    for (auto h : one[0].cells) {
        Point p = cell_center(h, n);
        EXPECT_LT(std::max({-p.x, p.x - 1, -p.y, p.y - 1}), 1.0 / n + 1e-12);
    }
}
