#include <gtest/gtest.h>

#include "cardylab/ccs.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace cardylab;

namespace {

int marked_vertex(const DiscreteDomain& d, int k) { return d.find_vertex(d.marked[k]); }

std::vector<int> interior_grid(const DiscreteDomain& d, int per_side, double margin) {
    std::vector<int> out;
    for (int i = 0; i < per_side; ++i)
        for (int j = 0; j < per_side; ++j) {
            Point p{margin + (1 - 2 * margin) * i / (per_side - 1), margin + (1 - 2 * margin) * j / (per_side - 1)};
            int best = 0;
            for (int v = 1; v < int(d.vertices.size()); ++v)
                if (norm(d.vertex_point(v) - p) < norm(d.vertex_point(best) - p)) best = v;
            if (std::find(out.begin(), out.end(), best) == out.end()) out.push_back(best);
        }
    return out;
}

}  // namespace

TEST(Ccs, BoundaryValuesAtB) {
    auto d = fixtures::rhombus_domain(6, 6);
    int b = marked_vertex(d, 1);
    auto f = estimate_ccs(d, {b}, 2000, 11);
    EXPECT_EQ(f.sB[0].mean, 1.0);
    EXPECT_EQ(f.sC[0].mean, 0.0);
    EXPECT_EQ(f.sD[0].mean, 0.0);
    EXPECT_EQ(f.sn[0], cplx(1.0, 0.0));
}

TEST(Ccs, SCVanishesAtAEverySample) {
    auto d = canonical_approximation(gen::square(), 16);
    int a = marked_vertex(d, 0);
    LinearFunctional only_c;
    only_c.wB = {0};
    only_c.wC = {1};
    only_c.wD = {0};
    CcsOptions opt;
    opt.functionals = {only_c};
    auto f = estimate_ccs(d, {a}, 5000, 12, opt);
    EXPECT_EQ(f.sC[0].hits, 0u);
    EXPECT_EQ(f.functionals[0].mean, cplx(0, 0));
    EXPECT_EQ(f.functionals[0].var_re, 0.0);
    auto r = crossing_probability(f, a);
    EXPECT_FALSE(r.routes_disagree);
    EXPECT_EQ(r.direct, r.imaginary);
    EXPECT_GT(r.c_n, 0.2);
    EXPECT_LT(r.c_n, 0.8);
}

TEST(Ccs, SnIdentityOnStoredMeans) {
    auto d = fixtures::rhombus_domain(5, 5);
    std::vector<int> pts;
    for (int v = 0; v < int(d.vertices.size()); v += 3) pts.push_back(v);
    auto f = estimate_ccs(d, pts, 3000, 13);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        EXPECT_EQ(f.sn[i], f.sB[i].mean + kTau * f.sC[i].mean + kTau2 * f.sD[i].mean);
        for (auto* s : {&f.sB[i], &f.sC[i], &f.sD[i]}) {
            EXPECT_GE(s->mean, 0.0);
            EXPECT_LE(s->mean, 1.0);
        }
    }
}

TEST(Ccs, RhombusCenterMatchesEnumeration) {
    auto d = fixtures::rhombus_domain(3, 3);
    int z = fixtures::central_vertex(d);
    auto f = estimate_ccs(d, {z}, 100000, 14);
    const ProbEstimate* comp[3] = {&f.sB[0], &f.sC[0], &f.sD[0]};
    for (int k = 0; k < 3; ++k) {
        double exact = brute_force(d, s_event_query(d, k, z)).value();
        EXPECT_NEAR(comp[k]->mean, exact, 4 * comp[k]->stderr_ + 1e-12) << "component " << k;
    }
}

TEST(Ccs, RhombusDirectRouteEqualsEnumeration) {
    auto d = fixtures::rhombus_domain(4, 4);
    int a = marked_vertex(d, 0);
    auto q = s_event_query(d, 2, a);
    // independent count of S_D(A_n) by simple-path enumeration over all colorings
    std::uint64_t hits = 0;
    const int N = d.size();
    std::vector<std::uint8_t> col(N);
    for (std::uint64_t m = 0; m < (1ull << N); ++m) {
        for (int i = 0; i < N; ++i) col[i] = (m >> i) & 1u;
        hits += oracles::separated_by_enumeration(d, col, q)[a];
    }
    Rational exact = brute_force(d, q);
    auto mine = make_rational(hits, 1ull << N);
    EXPECT_EQ(mine.num, exact.num);
    EXPECT_EQ(mine.den, exact.den);
    auto f = estimate_ccs(d, {a}, 50000, 15);
    EXPECT_NEAR(crossing_probability(f, a).c_n, exact.value(), 4 * f.sD[0].stderr_);
}

TEST(Ccs, ColorExchange) {
    auto d = fixtures::rhombus_domain(6, 6);
    auto pts = std::vector<int>{fixtures::central_vertex(d), marked_vertex(d, 0)};
    CcsOptions blue;
    blue.color = Color::BLUE;
    auto y = estimate_ccs(d, pts, 20000, 16);
    auto b = estimate_ccs(d, pts, 20000, 17, blue);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double se = std::hypot(y.sD[i].stderr_, b.sD[i].stderr_);
        EXPECT_NEAR(y.sD[i].mean, b.sD[i].mean, 4 * se + 1e-12);
        se = std::hypot(y.sB[i].stderr_, b.sB[i].stderr_);
        EXPECT_NEAR(y.sB[i].mean, b.sB[i].mean, 4 * se + 1e-12);
    }
}

TEST(Ccs, WorkerCountDoesNotChangeOutput) {
    auto d = fixtures::rhombus_domain(6, 6);
    std::vector<int> pts{fixtures::central_vertex(d), 0, 5};
    setenv("CARDY_LAB_THREADS", "1", 1);
    auto a = ccs_csv(estimate_ccs(d, pts, 9000, 18));
    setenv("CARDY_LAB_THREADS", "3", 1);
    auto b = ccs_csv(estimate_ccs(d, pts, 9000, 18));
    unsetenv("CARDY_LAB_THREADS");
    EXPECT_EQ(a, b);
}

TEST(Ccs, Errors) {
    auto d = fixtures::rhombus_domain(3, 3);
    EXPECT_THROW(estimate_ccs(d, {int(d.vertices.size())}, 10, 1), Error);
    auto f = estimate_ccs(d, {0}, 10, 1);
    try {
        crossing_probability(f, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::POINT_NOT_ESTIMATED);
    }
}

TEST(Ccs, CrossingRoutesOnPlainValues) {
    auto r = crossing_from_values(1, 0, 0);
    EXPECT_EQ(r.direct, 0.0);
    EXPECT_NEAR(r.imaginary, 0.0, 1e-15);
    r = crossing_from_values(0, 0, 1);
    EXPECT_EQ(r.direct, 1.0);
    EXPECT_NEAR(r.imaginary, 1.0, 1e-15);
    EXPECT_TRUE(crossing_from_values(0.2, 0.1, 0.3).routes_disagree);
}

TEST(Holder, ConstantFieldIsDegenerate) {
    std::vector<Point> xy;
    std::vector<cplx> v;
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) {
            xy.push_back({i / 9.0, j / 9.0});
            v.push_back({0.3, -0.2});
        }
    auto h = holder_profile(xy, v, 0.5);
    EXPECT_TRUE(h.degenerate);
    EXPECT_TRUE(std::isnan(h.sigma));
}

TEST(Holder, IdentityFieldIsLipschitz) {
    std::vector<Point> xy;
    std::vector<cplx> v;
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j) {
            xy.push_back({i / 11.0, j / 11.0});
            v.push_back({i / 11.0, j / 11.0});
        }
    auto h = holder_profile(xy, v, 0.5);
    EXPECT_FALSE(h.degenerate);
    EXPECT_NEAR(h.sigma, 1.0, 0.1);
    EXPECT_TRUE(h.ci.contains(h.sigma));
}

TEST(Holder, TooFewPairs) {
    std::vector<Point> xy{{0, 0}, {1, 0}, {0, 1}};
    std::vector<cplx> v(3);
    try {
        holder_profile(xy, v, 2.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::INSUFFICIENT_PAIRS);
    }
}

TEST(Holder, EstimatedFieldOnSquare) {
    auto d = canonical_approximation(gen::square(), 32);
    auto pts = interior_grid(d, 16, 0.1);
    ASSERT_GE(pts.size(), 50u);
    auto f = estimate_ccs(d, pts, 100000, 19);
    auto h = holder_profile(f, 0.125);
    EXPECT_GT(h.sigma, 0.0);
    EXPECT_GT(h.ci.lo, 0.0);
    std::printf("sigma_hat %.4f CI [%.4f, %.4f]\n", h.sigma, h.ci.lo, h.ci.hi);
}

TEST(Ccs, CsvHeader) {
    auto d = fixtures::rhombus_domain(3, 3);
    auto csv = ccs_csv(estimate_ccs(d, {0, 1}, 100, 1));
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "x,y,sB,sB_err,sC,sC_err,sD,sD_err,re_Sn,im_Sn");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}
