#include <gtest/gtest.h>

#include <set>

#include "cardylab/domain.hpp"

using namespace cardylab;

namespace {

bool closure_inside(const ContinuumDomain& dom, HexCell c, int n) {
    for (auto v : corners(c))
        if (point_in_polygon(dom.boundary, to_point(v, n)) != 1) return false;
    // edges must not cross the boundary
    auto cs = corners(c);
    for (int k = 0; k < 6; ++k) {
        Point a = to_point(cs[k], n), b = to_point(cs[(k + 1) % 6], n);
        for (std::size_t e = 0; e < dom.boundary.size(); ++e)
            if (segments_meet(a, b, dom.boundary[e], dom.boundary[(e + 1) % dom.boundary.size()])) return false;
    }
    return true;
}

void check_arcs(const DiscreteDomain& d) {
    ASSERT_FALSE(d.boundary.empty());
    std::vector<int> seen(d.boundary.size(), 0);
    int prev_end = -1;
    for (int k = 0; k < 4; ++k) {
        auto e = d.arc_edges(k);
        ASSERT_FALSE(e.empty()) << "arc " << k;
        if (prev_end >= 0) {
            EXPECT_EQ(e.front(), (prev_end + 1) % int(d.boundary.size()));
        }
        for (int x : e) {
            ++seen[x];
            EXPECT_EQ(d.edge_arc[x], k);
        }
        prev_end = e.back();
    }
    for (int s : seen) EXPECT_EQ(s, 1);
    // the loop is closed and consecutive
    for (std::size_t i = 0; i < d.boundary.size(); ++i)
        EXPECT_EQ(d.boundary[i].b, d.boundary[(i + 1) % d.boundary.size()].a);
}

double hausdorff(const std::vector<Point>& a, const std::vector<Point>& b) {
    double h = 0;
    for (int pass = 0; pass < 2; ++pass) {
        const auto& x = pass ? b : a;
        const auto& y = pass ? a : b;
        for (auto p : x) {
            double m = 1e300;
            for (auto q : y) m = std::min(m, norm(p - q));
            h = std::max(h, m);
        }
    }
    return h;
}

std::vector<Point> boundary_points(const DiscreteDomain& d) {
    std::vector<Point> out;
    for (auto& e : d.boundary) out.push_back(to_point(e.a, d.n));
    return out;
}

}  // namespace

TEST(Canonical, UnitSquareCellsInside) {
    auto sq = gen::square();
    auto d = canonical_approximation(sq, 4);
    EXPECT_GT(d.size(), 0);
    for (auto c : d.cells) EXPECT_TRUE(closure_inside(sq, c, 4));
    check_arcs(d);
}

TEST(Canonical, MaximalOnSquare) {
    auto sq = gen::square();
    for (int n : {8, 16}) {
        auto d = canonical_approximation(sq, n);
        for (int q = -2 * n; q < 2 * n; ++q)
            for (int r = -2; r < 2 * n; ++r)
                if (closure_inside(sq, {q, r}, n)) {
                    EXPECT_TRUE(d.contains({q, r}));
                }
    }
}

TEST(Canonical, CoarseCoveredByFine) {
    auto sq = gen::square();
    auto d4 = canonical_approximation(sq, 4), d8 = canonical_approximation(sq, 8);
    // every point of a coarse cell lies in a fine cell, or within one fine hexagon of the fine boundary
    for (auto c : d4.cells) {
        Point p = cell_center(c, 4);
        double best = 1e300;
        for (auto f : d8.cells) best = std::min(best, norm(cell_center(f, 8) - p));
        EXPECT_LE(best, 1.0 / 8 + 1e-12);
    }
}

TEST(Canonical, NoInteriorHexagon) {
    auto tiny = gen::disk(0.4, {0, 0});
    try {
        canonical_approximation(tiny, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NO_INTERIOR_HEXAGON);
    }
}

TEST(Canonical, MarkedPointCollision) {
    auto sq = gen::square();
    sq.marked = {Point{0, 0}, Point{0.01, 0}, Point{1, 1}, Point{0, 1}};
    try {
        canonical_approximation(sq, 4);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MARKED_POINT_COLLISION);
    }
}

TEST(Canonical, BuiltinsAreValid) {
    for (auto name : builtin_domains()) {
        SCOPED_TRACE(name);
        Generator g{name, {}};
        auto dom = make_domain(g);
        EXPECT_TRUE(polygon_is_simple(dom.boundary));
        EXPECT_GT(signed_area(dom.boundary), 0);
        int n = name == "rhombus" ? 8 : 16;
        auto d = canonical_approximation(dom, n);
        check_arcs(d);
        EXPECT_TRUE(simply_connected(d));
    }
}

TEST(Generators, RhombusIsLatticeParallelogram) {
    auto d = canonical_approximation(gen::rhombus(8, 8), 8);
    EXPECT_EQ(d.size(), 64);
    std::set<int> qs, rs;
    for (auto c : d.cells) {
        qs.insert(c.q);
        rs.insert(c.r);
    }
    EXPECT_EQ(qs.size(), 8u);
    EXPECT_EQ(rs.size(), 8u);
}

TEST(Generators, FjordPutsADeepInTunnel) {
    auto f = gen::fjord(0.05, 0.6);
    EXPECT_TRUE(polygon_is_simple(f.boundary));
    EXPECT_NEAR(f.marked[0].y, -0.6, 1e-12);
    EXPECT_EQ(point_in_polygon(f.boundary, {0.5, -0.3}), 1);
}

TEST(Generators, KochEdgeCount) {
    auto k = gen::koch(3);
    EXPECT_EQ(k.boundary.size(), 3u * 64u);
    EXPECT_TRUE(polygon_is_simple(k.boundary));
}

TEST(Regularize, SubsetOfCanonical) {
    for (auto name : builtin_domains()) {
        if (name == "rhombus") continue;
        for (int n : {8, 16, 32}) {
            SCOPED_TRACE(name + " n=" + std::to_string(n));
            DiscreteDomain d;
            try {
                d = canonical_approximation(make_domain({name, {}}), n);
            } catch (const Error&) {
                continue;
            }
            DiscreteDomain r;
            try {
                r = square_regularize(d, 0.3);
            } catch (const Error& e) {
                EXPECT_EQ(e.code(), ErrorCode::EMPTY_REGULARIZATION);
                continue;
            }
            for (auto c : r.cells) EXPECT_TRUE(d.contains(c));
            check_arcs(r);
        }
    }
}

TEST(Regularize, UnitGridOnConvexDomain) {
    // squares one cell wide: cells lost are confined to a boundary layer one square thick
    auto d = canonical_approximation(gen::square(), 32);
    auto r = square_regularize(d, 0.0);
    double L = r.grid_side;
    EXPECT_NEAR(L, kSqrt3 / 32, 1e-12);
    for (auto c : d.cells)
        if (!r.contains(c)) {
            Point p = cell_center(c, 32);
            double dist = std::min({p.x, 1 - p.x, p.y, 1 - p.y});
            EXPECT_LE(dist, 2 * L + 1.0 / 32);
        }
}

TEST(Regularize, SquareKeepsMarkedOrder) {
    auto d = canonical_approximation(gen::square(), 32);
    auto r = square_regularize(d, 0.4);
    check_arcs(r);
    for (int k = 0; k < 4; ++k) {
        EXPECT_LT(norm(to_point(r.marked[k], 32) - to_point(d.marked[k], 32)), 2 * kSqrt3 * r.grid_side + 0.1);
        EXPECT_FALSE(r.relocated[k]);
    }
}

TEST(Regularize, HausdorffToCanonicalBoundary) {
    for (int n : {16, 32}) {
        auto d = canonical_approximation(gen::square(), n);
        double a1 = 0.5;
        auto r = square_regularize(d, a1);
        double bound = std::sqrt(2.0) * std::pow(n, a1) / n * (1 + 2 * kSqrt3 / std::pow(n, a1));
        bound = std::sqrt(2.0) * r.grid_side + 2 * kSqrt3 / n;
        EXPECT_LE(hausdorff(boundary_points(r), boundary_points(d)), bound);
    }
}

TEST(Regularize, BoundaryLengthBoundOnKoch) {
    auto k = gen::koch(3);
    std::vector<double> scales{0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005};
    double alpha = minkowski_estimate(k, scales).fitted_dimension;
    double a1 = 0.3;
    std::vector<double> ratio;
    for (int n : {64, 128, 256}) {
        auto r = square_regularize(canonical_approximation(k, n), a1);
        double len = double(r.boundary.size()) / n;
        ratio.push_back(len / std::pow(n, alpha * (1 - a1)));
    }
    // a single constant fitted at the coarsest scale bounds the finer ones
    for (double x : ratio) EXPECT_LE(x, ratio.front() * 1.05);
}

TEST(Regularize, RejectsNonCanonical) {
    auto r = square_regularize(canonical_approximation(gen::square(), 16), 0.3);
    EXPECT_THROW(square_regularize(r, 0.3), Error);
}

TEST(Minkowski, SmoothBoundaries) {
    // well below the diameter, where the +1 per edge end no longer bends the log-log line
    std::vector<double> scales{0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001};
    EXPECT_NEAR(minkowski_estimate(gen::square(), scales).fitted_dimension, 1.0, 0.05);
    ContinuumDomain thin;  // a sliver: effectively a straight segment
    thin.boundary = {{0.001, 0.0001}, {0.999, 0.0001}, {0.999, 0.0002}, {0.001, 0.0002}};
    EXPECT_NEAR(minkowski_estimate(thin, scales).fitted_dimension, 1.0, 0.05);
}

TEST(Minkowski, KochDimension) {
    // box counts of the depth-5 curve follow the 4-per-third recursion above its finest segment
    std::vector<double> scales;
    for (int i = 0; i < 10; ++i) scales.push_back(0.5 * std::pow(100.0, -i / 9.0));
    auto rep = minkowski_estimate(gen::koch(5), scales);
    EXPECT_NEAR(rep.fitted_dimension, std::log(4.0) / std::log(3.0), 0.05);
    for (std::size_t i = 1; i < rep.counts.size(); ++i) EXPECT_GE(rep.counts[i], rep.counts[i - 1]);
    EXPECT_TRUE(rep.ci.contains(rep.fitted_dimension));
}

TEST(Minkowski, Errors) {
    EXPECT_THROW(minkowski_estimate(gen::square(), {0.5, 0.2, 0.1}), Error);
    ContinuumDomain dot;
    dot.boundary = {{0, 0}, {1e-9, 0}, {0, 1e-9}};
    try {
        minkowski_estimate(dot, {10, 5, 1, 0.1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DEGENERATE_FIT);
    }
}
