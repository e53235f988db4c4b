#include <gtest/gtest.h>

#include <random>

#include "cardylab/discana.hpp"
#include "support/fixtures.hpp"

using namespace cardylab;

namespace {

using CellSet = std::unordered_set<HexCell, HexCellHash>;

std::vector<Vertex> all_corners(const std::vector<HexCell>& cells) {
    std::unordered_set<Vertex, VertexHash> s;
    for (auto h : cells)
        for (auto v : corners(h)) s.insert(v);
    return {s.begin(), s.end()};
}

std::vector<HexCell> patch(int side) {
    std::vector<HexCell> out;
    for (int q = 0; q < side; ++q)
        for (int r = 0; r < side; ++r) out.push_back({q, r});
    return out;
}

// random edge-connected blob inside the patch with holes filled
CellSet random_blob(std::mt19937_64& rng, int side) {
    CellSet in;
    std::uniform_int_distribution<int> pos(0, side - 1);
    HexCell seed{pos(rng), pos(rng)};
    in.insert(seed);
    std::vector<HexCell> list{seed};
    int target = 1 + int(rng() % 120);
    while (int(in.size()) < target) {
        HexCell c = list[rng() % list.size()];
        HexCell nb = neighbors(c)[rng() % 6];
        if (nb.q < 0 || nb.r < 0 || nb.q >= side || nb.r >= side) continue;
        if (in.insert(nb).second) list.push_back(nb);
    }
    // flood the complement from outside the patch; unreached cells are holes
    CellSet outside;
    std::vector<HexCell> st{{-1, -1}};
    outside.insert({-1, -1});
    while (!st.empty()) {
        HexCell c = st.back();
        st.pop_back();
        for (auto nb : neighbors(c)) {
            if (nb.q < -1 || nb.r < -1 || nb.q > side || nb.r > side) continue;
            if (in.count(nb) || outside.count(nb)) continue;
            outside.insert(nb);
            st.push_back(nb);
        }
    }
    for (int q = 0; q < side; ++q)
        for (int r = 0; r < side; ++r)
            if (!outside.count({q, r})) in.insert({q, r});
    return in;
}

// trapezoid error summed over the hexagon edges; the exact parts telescope to zero
cplx trapezoid_defect(HexCell h, int n, int power) {
    auto cs = corners(h);
    cplx acc{};
    for (int k = 0; k < 6; ++k) {
        cplx a = vertex_z(cs[k], n), b = vertex_z(cs[(k + 1) % 6], n);
        cplx trap = 0.5 * (std::pow(a, power) + std::pow(b, power)) * (b - a);
        cplx exact = (std::pow(b, power + 1) - std::pow(a, power + 1)) / double(power + 1);
        acc += trap - exact;
    }
    return acc;
}

}  // namespace

TEST(Contour, ConstantAndIdentityIntegrateToZero) {
    const int n = 16;
    auto cells = patch(8);
    auto c = outer_contour(CellSet(cells.begin(), cells.end()), n);
    auto verts = all_corners(cells);
    auto k = sample_field(verts, n, [](cplx) { return cplx(0.3, -1.7); });
    EXPECT_EQ(contour_integral(k, c), cplx(0, 0));
    auto id = sample_field(verts, n, [](cplx z) { return z; });
    EXPECT_LT(std::abs(contour_integral(id, c)), 1e-15);
}

TEST(Contour, ConjugateAroundHexagonIsTwiceAreaTimesI) {
    const int n = 10;
    HexCell h{3, -2};
    auto cs = corners(h);
    auto f = sample_field({cs.begin(), cs.end()}, n, [](cplx z) { return std::conj(z); });
    double eps = 1.0 / n;
    cplx want(0, 2 * 1.5 * kSqrt3 * eps * eps);
    EXPECT_NEAR(std::abs(hexagon_residual(f, h, n) - want), 0.0, 1e-16);
}

TEST(Contour, HexagonResidualOfPolynomials) {
    const int n = 8;
    for (HexCell h : {HexCell{0, 0}, HexCell{5, 2}, HexCell{-3, 7}}) {
        auto cs = corners(h);
        std::vector<Vertex> vs(cs.begin(), cs.end());
        auto id = sample_field(vs, n, [](cplx z) { return z; });
        EXPECT_LT(std::abs(hexagon_residual(id, h, n)), 1e-16);
        for (int p : {2, 3}) {
            auto f = sample_field(vs, n, [p](cplx z) { return std::pow(z, p); });
            EXPECT_LT(std::abs(hexagon_residual(f, h, n) - trapezoid_defect(h, n, p)), 1e-14) << "power " << p;
        }
        // the defect of z^2 cancels over the six edges (edge vectors are sixth roots up to scale)
        EXPECT_LT(std::abs(trapezoid_defect(h, n, 2)), 1e-15);
    }
}

TEST(Contour, MissingVertexValue) {
    HexCell h{0, 0};
    VertexField f;
    f[corner(h, 0)] = 1.0;
    try {
        hexagon_residual(f, h, 4);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MISSING_VERTEX_VALUE);
    }
}

TEST(Contour, DecompositionIdentityIsExact) {
    std::mt19937_64 rng(7);
    const int side = 20, n = 20;
    auto cells = patch(side + 2);
    for (auto& c : cells) c = {c.q - 1, c.r - 1};
    auto verts = all_corners(cells);
    std::uniform_real_distribution<double> u(-1, 1);
    VertexField f;
    for (auto v : verts) f[v] = {u(rng), u(rng)};
    for (int t = 0; t < 100; ++t) {
        auto blob = random_blob(rng, side);
        auto rep = residual_report(f, blob, n);
        ASSERT_TRUE(rep.decomposition_exact) << "trial " << t;
        cplx sum{};
        for (auto r : rep.per_hexagon) sum += r;
        EXPECT_NEAR(std::abs(sum - rep.contour_total), 0.0, 1e-12);
    }
}

TEST(Contour, OuterContourIsSimpleAndCcw) {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 20; ++t) {
        auto blob = random_blob(rng, 12);
        auto c = outer_contour(blob, 12);
        EXPECT_TRUE(c.path.valid());
        EXPECT_GT(signed_area2(c.ring()), 0);
        EXPECT_EQ(c.edge_count() % 2, 0u);
    }
}

TEST(Contour, WeightsReproduceIntegral) {
    const int n = 12;
    auto cells = patch(5);
    auto c = outer_contour(CellSet(cells.begin(), cells.end()), n);
    auto f = sample_field(all_corners(cells), n, [](cplx z) { return std::exp(z) + std::conj(z) * z; });
    auto w = contour_weights(c);
    auto ring = c.ring();
    cplx s{};
    for (std::size_t i = 0; i < ring.size(); ++i) s += f.at(ring[i]) * w[i];
    EXPECT_NEAR(std::abs(s - contour_integral(f, c)), 0.0, 1e-13);
}

TEST(Residual, EstimatedFieldBoundedByOscillation) {
    auto d = canonical_approximation(gen::square(), 8);
    std::vector<int> pts(d.vertices.size());
    for (int v = 0; v < int(pts.size()); ++v) pts[v] = v;
    auto f = field_of(d, estimate_ccs(d, pts, 4000, 21));
    for (auto h : d.cells) {
        double r = std::abs(hexagon_residual(f, h, d.n));
        EXPECT_LE(r, 6 * d.eps() * hexagon_oscillation(f, h) + 1e-15);
    }
}

TEST(RhoFit, HolomorphicFieldIsDegenerate) {
    std::vector<ContourRun> runs;
    for (int n : {8, 16, 32, 64}) {
        auto d = canonical_approximation(gen::square(), n);
        auto c = outer_contour(cells_in_box(d, 0.25, 0.25, 0.75, 0.75), n);
        auto f = sample_field(c.ring(), n, [](cplx z) { return cplx(1, 0) + 2.0 * z; });
        ComplexEstimate e;
        e.mean = contour_integral(f, c);
        runs.push_back({n, e});
    }
    for (auto& r : runs) EXPECT_LT(std::abs(r.integral.mean), 1e-14);
    EXPECT_EQ(rho_fit(runs, 1).verdict, FitVerdict::DEGENERATE);
}

TEST(RhoFit, ConjugateFieldHasZeroExponent) {
    std::vector<ContourRun> runs;
    for (int n : {8, 16, 32, 64}) {
        auto d = canonical_approximation(gen::square(), n);
        auto c = outer_contour(cells_in_box(d, 0.25, 0.25, 0.75, 0.75), n);
        auto f = sample_field(c.ring(), n, [](cplx z) { return std::conj(z); });
        ComplexEstimate e;
        e.mean = contour_integral(f, c);
        runs.push_back({n, e});
    }
    auto fit = rho_fit(runs, 3);
    EXPECT_EQ(fit.verdict, FitVerdict::OK);
    EXPECT_NEAR(fit.exponent, 0.0, 0.1);
}

TEST(RhoFit, NoiseDominatedIsReported) {
    std::vector<ScalePoint> pts{{8, 1.0, 0.01}, {16, 0.5, 0.01}, {32, 0.2, 0.01}, {64, 0.02, 0.01}};
    EXPECT_EQ(fit_log_eps(pts, 1, true).verdict, FitVerdict::MC_NOISE_DOMINATED);
    auto ok = fit_log_eps({{8, 1.0, 0.01}, {16, 0.5, 0.01}, {32, 0.25, 0.01}, {64, 0.125, 0.01}}, 1, true);
    EXPECT_EQ(ok.verdict, FitVerdict::OK);
    EXPECT_NEAR(ok.exponent, 1.0, 1e-9);
    EXPECT_TRUE(ok.ci.contains(1.0));
    EXPECT_THROW(fit_log_eps({{8, 1, 0}, {16, 1, 0}, {32, 1, 0}}, 1, true), Error);
}

TEST(Cauchy, ReproducesConstantAndLinearFields) {
    auto d = canonical_approximation(gen::square(), 16);
    auto c = domain_contour(d);
    auto ring = c.ring();
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.2, 0.8);
    CauchyExtension k(c, sample_field(ring, d.n, [](cplx) { return cplx(0.4, 0.25); }));
    CauchyExtension lin(c, sample_field(ring, d.n, [](cplx z) { return cplx(2, -1) * z + cplx(0.5, 0.5); }));
    for (int t = 0; t < 50; ++t) {
        cplx w(u(rng), u(rng));
        EXPECT_NEAR(std::abs(cauchy_evaluate(k, w) - cplx(0.4, 0.25)), 0.0, 1e-13);
        EXPECT_NEAR(std::abs(cauchy_evaluate(lin, w) - (cplx(2, -1) * w + cplx(0.5, 0.5))), 0.0, 1e-13);
    }
}

TEST(Cauchy, WeightsMatchEvaluation) {
    auto d = canonical_approximation(gen::square(), 8);
    auto c = domain_contour(d);
    auto ring = c.ring();
    auto f = sample_field(ring, d.n, [](cplx z) { return std::exp(cplx(0, 3) * z); });
    CauchyExtension ext(c, f);
    cplx w(0.4, 0.6);
    auto k = ext.weights(w);
    cplx s{};
    for (std::size_t i = 0; i < ring.size(); ++i) s += f.at(ring[i]) * k[i];
    EXPECT_NEAR(std::abs(s - ext.evaluate(w)), 0.0, 1e-12);
    // holomorphic inside: the extension approximates the function itself
    EXPECT_NEAR(std::abs(ext.evaluate(w) - std::exp(cplx(0, 3) * w)), 0.0, 0.02);
}

TEST(Cauchy, TooClose) {
    auto d = canonical_approximation(gen::square(), 8);
    auto c = domain_contour(d);
    CauchyExtension ext(c, sample_field(c.ring(), d.n, [](cplx) { return cplx(1, 0); }));
    try {
        ext.evaluate(c.points()[3] + cplx(0.01 / d.n, 0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TOO_CLOSE_TO_CONTOUR);
    }
}

TEST(Winding, Triangle) {
    std::vector<cplx> tri{1.0, kTau, kTau2};
    EXPECT_EQ(winding_number(tri, 0.0), 1);
    EXPECT_EQ(winding_number(tri, 2.0), 0);
    std::vector<cplx> twice{1.0, kTau, kTau2, 1.0, kTau, kTau2, 1.0};
    EXPECT_EQ(winding_number(twice, 0.0), 2);
    std::vector<cplx> rev(tri.rbegin(), tri.rend());
    EXPECT_EQ(winding_number(rev, 0.0), -1);
    try {
        winding_number(tri, 0.5 * (kTau + kTau2));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::POINT_ON_CURVE);
    }
}

TEST(Shrunken, TriangleMembership) {
    for (double delta : {0.01, 0.5, 0.99}) EXPECT_TRUE(in_shrunken_triangle(0.0, delta));
    EXPECT_TRUE(in_shrunken_triangle(0.9, 0.05));
    EXPECT_FALSE(in_shrunken_triangle(0.9, 0.2));
    EXPECT_FALSE(in_shrunken_triangle(-0.6, 0.0));
}

TEST(Shrunken, MembersGrowWithA4AndPreserveWinding) {
    auto d = canonical_approximation(gen::square(), 16);
    // identity-like boundary data: a map of the square onto a region around the origin
    auto c = domain_contour(d);
    CauchyExtension ext(c, sample_field(c.ring(), d.n, [](cplx z) { return 2.0 * (z - cplx(0.5, 0.5)); }));
    std::size_t prev = 0;
    for (double a4 : {0.05, 0.2, 0.5, 1.0, 3.0}) {
        auto s = extract_shrunken(ext, d, a4);
        EXPECT_GE(s.member_cells.size(), prev);
        prev = s.member_cells.size();
    }
    try {
        CauchyExtension far(c, sample_field(c.ring(), d.n, [](cplx) { return cplx(5, 5); }));
        extract_shrunken(far, d, 0.1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EMPTY_SHRUNKEN);
    }
}

TEST(InnerOffset, ShrinksWithOffset) {
    auto d = canonical_approximation(gen::square(), 32);
    auto c1 = inner_offset_contour(d, 1), c3 = inner_offset_contour(d, 3);
    EXPECT_GT(signed_area2(c1.ring()), signed_area2(c3.ring()));
    EXPECT_TRUE(c3.path.valid());
    EXPECT_EQ(offset_cells(32, 0.6), 2);
    EXPECT_EQ(offset_cells(64, 0.6), 3);
}
