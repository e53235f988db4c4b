#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cardylab/ccs.hpp"
#include "cardylab/domain.hpp"
#include "cardylab/exact_sum.hpp"
#include "cardylab/stats.hpp"

namespace cardylab {

using VertexField = std::unordered_map<Vertex, cplx, VertexHash>;

inline cplx to_cplx(Point p) { return {p.x, p.y}; }
inline cplx vertex_z(Vertex v, int n) { return to_cplx(to_point(v, n)); }

// closed, simple, counterclockwise lattice polygon
struct LatticeContour {
    SegmentPath path;
    int n = 1;

    std::size_t edge_count() const { return path.edge_count(); }
    double length() const { return double(edge_count()) / n; }
    // vertices without the closing repeat
    std::vector<Vertex> ring() const { return {path.vertices.begin(), path.vertices.end() - 1}; }
    std::vector<cplx> points() const {
        std::vector<cplx> out;
        for (auto v : path.vertices) out.push_back(vertex_z(v, n));
        return out;
    }
};

// twice the signed area, in vertex units
inline long long signed_area2(const std::vector<Vertex>& ring) {
    long long a = 0;
    for (std::size_t i = 0; i < ring.size(); ++i) {
        auto p = ring[i], q = ring[(i + 1) % ring.size()];
        a += (long long)p.x * q.y - (long long)q.x * p.y;
    }
    return a;
}

inline LatticeContour make_contour(std::vector<Vertex> verts, int n) {
    if (verts.size() < 3) throw Error(ErrorCode::BAD_CONFIG, "contour needs at least 3 vertices");
    if (verts.front() != verts.back()) verts.push_back(verts.front());
    LatticeContour c{SegmentPath{std::move(verts)}, n};
    if (!c.path.valid()) throw Error(ErrorCode::BAD_CONFIG, "contour is not a simple lattice loop");
    if (signed_area2(c.ring()) < 0) std::reverse(c.path.vertices.begin(), c.path.vertices.end());
    return c;
}

inline LatticeContour hexagon_contour(HexCell h, int n) {
    auto cs = corners(h);
    return make_contour({cs.begin(), cs.end()}, n);
}

// outer boundary of an edge-connected cell set. On the honeycomb each vertex has at most one
// outgoing boundary edge, so the loops are unambiguous; the outer one has the largest area.
template <class CellSet>
LatticeContour outer_contour(const CellSet& cells, int n) {
    std::unordered_map<Vertex, Vertex, VertexHash> next;
    std::vector<Vertex> starts;
    for (HexCell c : cells) {
        auto nb = neighbors(c);
        for (int k = 0; k < 6; ++k)
            if (!cells.count(nb[(k + 1) % 6])) {
                Vertex a = corner(c, k), b = corner(c, (k + 1) % 6);
                next[a] = b;
                starts.push_back(a);
            }
    }
    if (next.empty()) throw Error(ErrorCode::GEOMETRY_DEGENERATE, "cell set has no boundary");
    std::sort(starts.begin(), starts.end());
    std::unordered_set<Vertex, VertexHash> used;
    std::vector<Vertex> best;
    long long best_area = 0;
    for (Vertex s : starts) {
        if (used.count(s)) continue;
        std::vector<Vertex> ring;
        Vertex v = s;
        do {
            used.insert(v);
            ring.push_back(v);
            v = next.at(v);
        } while (v != s);
        long long a = signed_area2(ring);
        if (a > best_area) {
            best_area = a;
            best = std::move(ring);
        }
    }
    return make_contour(std::move(best), n);
}

inline LatticeContour domain_contour(const DiscreteDomain& d) {
    std::vector<Vertex> ring;
    for (const auto& e : d.boundary) ring.push_back(e.a);
    return make_contour(std::move(ring), d.n);
}

// ------------------------------------------------------------ contour integrals

// trapezoid sum of (f(a)+f(b))/2 (b-a), held exactly
inline LatticeIntegral contour_integral_exact(const VertexField& f, const LatticeContour& c) {
    LatticeIntegral acc;
    const auto& vs = c.path.vertices;
    auto at = [&](Vertex v) {
        auto it = f.find(v);
        if (it == f.end()) throw Error(ErrorCode::MISSING_VERTEX_VALUE, "field has no value at a contour vertex");
        return it->second;
    };
    for (std::size_t i = 0; i + 1 < vs.size(); ++i) {
        int dX = vs[i + 1].x - vs[i].x, dY = vs[i + 1].y - vs[i].y;
        acc.add_edge(0.5 * at(vs[i]), dX, dY);
        acc.add_edge(0.5 * at(vs[i + 1]), dX, dY);
    }
    return acc;
}

inline cplx contour_integral(const VertexField& f, const LatticeContour& c) { return contour_integral_exact(f, c).value(c.n); }

inline LatticeIntegral hexagon_residual_exact(const VertexField& f, HexCell h, int n) {
    return contour_integral_exact(f, hexagon_contour(h, n));
}
inline cplx hexagon_residual(const VertexField& f, HexCell h, int n) { return hexagon_residual_exact(f, h, n).value(n); }

// per-vertex weights w with contour_integral = sum_v f(v) w(v)
inline std::vector<cplx> contour_weights(const LatticeContour& c) {
    auto ring = c.ring();
    std::vector<cplx> w(ring.size());
    for (std::size_t i = 0; i < ring.size(); ++i) {
        Vertex prev = ring[(i + ring.size() - 1) % ring.size()], next = ring[(i + 1) % ring.size()];
        w[i] = 0.5 * (vertex_z(next, c.n) - vertex_z(prev, c.n));
    }
    return w;
}

template <class F>
VertexField sample_field(const std::vector<Vertex>& verts, int n, F&& f) {
    VertexField out;
    for (auto v : verts) out[v] = f(vertex_z(v, n));
    return out;
}

inline VertexField field_of(const DiscreteDomain& d, const CcsField& f) {
    VertexField out;
    for (std::size_t i = 0; i < f.points.size(); ++i) out[d.vertices[f.points[i]]] = f.sn[i];
    return out;
}

struct ResidualReport {
    int n = 1;
    std::vector<HexCell> cells;
    std::vector<cplx> per_hexagon;
    cplx contour_total{};
    bool decomposition_exact = false;  // contour sum == sum of residuals, bit for bit
};

// residuals of all cells enclosed by the outer contour of `cells`
template <class CellSet>
ResidualReport residual_report(const VertexField& f, const CellSet& cells, int n) {
    ResidualReport r;
    r.n = n;
    r.cells.assign(cells.begin(), cells.end());
    std::sort(r.cells.begin(), r.cells.end());
    auto c = outer_contour(cells, n);
    LatticeIntegral total = contour_integral_exact(f, c), parts;
    for (HexCell h : r.cells) {
        auto e = hexagon_residual_exact(f, h, n);
        r.per_hexagon.push_back(e.value(n));
        parts.merge(e);
    }
    r.contour_total = total.value(n);
    r.decomposition_exact = total == parts;
    return r;
}

// largest difference between any two of the six corner values
inline double hexagon_oscillation(const VertexField& f, HexCell h) {
    auto cs = corners(h);
    double m = 0;
    for (int i = 0; i < 6; ++i)
        for (int j = i + 1; j < 6; ++j) m = std::max(m, std::abs(f.at(cs[i]) - f.at(cs[j])));
    return m;
}

// ------------------------------------------------------------ exponent fits

enum class FitVerdict { OK, DEGENERATE, MC_NOISE_DOMINATED };

inline const char* to_string(FitVerdict v) {
    switch (v) {
    case FitVerdict::OK: return "OK";
    case FitVerdict::DEGENERATE: return "DEGENERATE";
    case FitVerdict::MC_NOISE_DOMINATED: return "MC_NOISE_DOMINATED";
    }
    return "?";
}

struct ScalePoint {
    int n = 1;
    double value = 0;   // magnitude
    double stderr_ = 0;
};

struct ExponentFit {
    FitVerdict verdict = FitVerdict::OK;
    double exponent = std::nan("");
    Interval ci{std::nan(""), std::nan("")};
    std::vector<ScalePoint> points;
    std::string note;
};

// slope of log value against log eps; the CI comes from a parametric bootstrap that redraws each
// value from its Monte Carlo error bar and refits
inline ExponentFit fit_log_eps(std::vector<ScalePoint> pts, std::uint64_t stream, bool noise_check, int reps = 2000) {
    if (pts.size() < 4) throw Error(ErrorCode::INSUFFICIENT_POINTS, "need at least 4 scales");
    std::sort(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.n < b.n; });
    ExponentFit out;
    out.points = pts;
    // rounding floor of the exact contour sums
    if (std::all_of(pts.begin(), pts.end(), [](auto& p) { return p.value <= 1e-13; })) {
        out.verdict = FitVerdict::DEGENERATE;
        out.note = "all values vanish to rounding";
        return out;
    }
    const auto& last = pts.back();
    if (noise_check && last.value < 3 * last.stderr_) {
        out.verdict = FitVerdict::MC_NOISE_DOMINATED;
        out.note = "value at the largest n is below three standard errors";
        return out;
    }
    std::vector<double> x, y;
    for (auto& p : pts) {
        if (p.value <= 0) {
            out.verdict = FitVerdict::DEGENERATE;
            out.note = "zero value at some scale";
            return out;
        }
        x.push_back(std::log(1.0 / p.n));
        y.push_back(std::log(p.value));
    }
    auto f = linear_fit(x, y);
    if (!f) throw Error(ErrorCode::DEGENERATE_FIT, "scales do not spread");
    out.exponent = f->slope;
    PhiloxEngine eng(stream, 0xF17);
    std::vector<double> slopes, by(y.size());
    for (int r = 0; r < reps; ++r) {
        bool ok = true;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double v = pts[i].value + pts[i].stderr_ * eng.normal();
            if (v <= 0) {
                ok = false;
                break;
            }
            by[i] = std::log(v);
        }
        if (!ok) continue;
        if (auto g = linear_fit(x, by)) slopes.push_back(g->slope);
    }
    out.ci = {percentile(slopes, 0.025), percentile(slopes, 0.975)};
    if (slopes.size() < std::size_t(reps) * 9 / 10) out.note = "some bootstrap draws hit zero";
    return out;
}

// |contour integral of S_n| per scale, with the Monte Carlo error propagated per sample
struct ContourRun {
    int n = 1;
    ComplexEstimate integral;
};

inline ExponentFit rho_fit(const std::vector<ContourRun>& runs, std::uint64_t stream) {
    std::vector<ScalePoint> pts;
    for (auto& r : runs) pts.push_back({r.n, std::abs(r.integral.mean), r.integral.stderr_abs()});
    return fit_log_eps(pts, stream, true);
}

// contour integral of S_n on a lattice-snapped macroscopic contour, from a single Monte Carlo run
inline ContourRun estimate_contour_integral(const DiscreteDomain& d, const LatticeContour& c, std::uint64_t samples,
                                            std::uint64_t stream) {
    std::vector<int> pts;
    for (auto v : c.ring()) {
        int id = d.find_vertex(v);
        if (id < 0) throw Error(ErrorCode::POINT_OUTSIDE_DOMAIN, "contour leaves the domain");
        pts.push_back(id);
    }
    CcsOptions opt;
    opt.functionals.push_back(LinearFunctional::of_sn(contour_weights(c)));
    auto f = estimate_ccs(d, pts, samples, stream, opt);
    return {d.n, f.functionals[0]};
}

// cells whose centers lie in an axis-aligned box, restricted to the component of the cell nearest its center
inline std::unordered_set<HexCell, HexCellHash> cells_in_box(const DiscreteDomain& d, double x0, double y0, double x1,
                                                             double y1) {
    std::vector<HexCell> in;
    for (auto h : d.cells) {
        Point p = cell_center(h, d.n);
        if (p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1) in.push_back(h);
    }
    if (in.empty()) throw Error(ErrorCode::GEOMETRY_DEGENERATE, "no cells in the contour box");
    std::vector<int> comp;
    cell_components(in, comp);
    Point mid{(x0 + x1) / 2, (y0 + y1) / 2};
    int best = 0;
    for (int i = 1; i < int(in.size()); ++i)
        if (norm(cell_center(in[i], d.n) - mid) < norm(cell_center(in[best], d.n) - mid)) best = i;
    std::unordered_set<HexCell, HexCellHash> out;
    for (int i = 0; i < int(in.size()); ++i)
        if (comp[i] == comp[best]) out.insert(in[i]);
    return out;
}

// ------------------------------------------------------------ Cauchy extension

struct CauchyExtension {
    LatticeContour contour;
    std::vector<cplx> z;  // contour vertices, closing repeat included
    std::vector<cplx> s;  // boundary values at z

    CauchyExtension(LatticeContour c, const VertexField& f) : contour(std::move(c)) {
        for (auto v : contour.path.vertices) {
            auto it = f.find(v);
            if (it == f.end()) throw Error(ErrorCode::MISSING_VERTEX_VALUE, "boundary field misses a contour vertex");
            z.push_back(vertex_z(v, contour.n));
            s.push_back(it->second);
        }
    }

    double distance_to_contour(cplx w) const {
        double best = 1e300;
        for (std::size_t i = 0; i + 1 < z.size(); ++i) {
            cplx a = z[i], d = z[i + 1] - z[i];
            double t = std::clamp(((w - a) * std::conj(d)).real() / std::norm(d), 0.0, 1.0);
            best = std::min(best, std::abs(w - (a + t * d)));
        }
        return best;
    }

    // exact integral of the linear interpolant over each edge:
    //   int_a^b s/(zeta-w) dzeta = (s_b - s_a) + (s_a + (s_b - s_a)(w-a)/(b-a)) Log((b-w)/(a-w))
    // the principal Log is the correct branch on a straight edge that avoids w
    cplx evaluate_unchecked(cplx w) const {
        cplx acc{};
        for (std::size_t i = 0; i + 1 < z.size(); ++i) {
            cplx a = z[i], b = z[i + 1], ds = s[i + 1] - s[i];
            acc += ds + (s[i] + ds * (w - a) / (b - a)) * std::log((b - w) / (a - w));
        }
        return acc / cplx(0, 2 * M_PI);
    }

    cplx evaluate(cplx w) const {
        if (distance_to_contour(w) < 0.25 / contour.n)
            throw Error(ErrorCode::TOO_CLOSE_TO_CONTOUR, "point within eps/4 of the contour");
        return evaluate_unchecked(w);
    }

    // kernel weights k_v(w) with F(w) = sum_v s_v k_v(w), for per-sample propagation
    std::vector<cplx> weights(cplx w) const {
        std::size_t m = z.size() - 1;
        std::vector<cplx> k(m, 0);
        for (std::size_t i = 0; i < m; ++i) {
            cplx a = z[i], b = z[i + 1], L = std::log((b - w) / (a - w));
            k[i] += L * (b - w) / (b - a) - 1.0;
            k[(i + 1) % m] += 1.0 + L * (w - a) / (b - a);
        }
        for (auto& x : k) x /= cplx(0, 2 * M_PI);
        return k;
    }
};

inline cplx cauchy_evaluate(const CauchyExtension& ext, cplx w) { return ext.evaluate(w); }

// ------------------------------------------------------------ winding

inline int winding_number(const std::vector<cplx>& curve, cplx w) {
    if (curve.size() < 2) throw Error(ErrorCode::BAD_CONFIG, "curve needs at least two points");
    std::vector<cplx> c = curve;
    if (c.front() != c.back()) c.push_back(c.front());
    double total = 0, scale = 0;
    for (auto p : c) scale = std::max(scale, std::abs(p - w));
    for (std::size_t i = 0; i + 1 < c.size(); ++i) {
        cplx a = c[i] - w, b = c[i + 1] - w, d = b - a;
        double t = std::norm(d) > 0 ? std::clamp(-(a * std::conj(d)).real() / std::norm(d), 0.0, 1.0) : 0.0;
        if (std::abs(a + t * d) <= 1e-14 * std::max(scale, 1e-300))
            throw Error(ErrorCode::POINT_ON_CURVE, "point lies on the curve");
        total += std::arg(b / a);
    }
    return int(std::lround(total / (2 * M_PI)));
}

// ------------------------------------------------------------ inner offset and shrunken domain

// outer boundary of cells whose L-infinity center distance to every outside cell is at least m cells
inline LatticeContour inner_offset_contour(const DiscreteDomain& d, long m) {
    std::vector<HexCell> outside;
    {
        std::unordered_set<HexCell, HexCellHash> seen;
        for (int i = 0; i < d.size(); ++i)
            for (int k = 0; k < 6; ++k)
                if (d.nbr[i][k] < 0) {
                    HexCell o = neighbors(d.cells[i])[k];
                    if (seen.insert(o).second) outside.push_back(o);
                }
    }
    std::vector<HexCell> keep;
    for (auto h : d.cells) {
        long dist = kInfinite;
        for (auto o : outside) dist = std::min(dist, linf_cells(h, o));
        if (dist >= m) keep.push_back(h);
    }
    if (keep.empty()) throw Error(ErrorCode::GEOMETRY_DEGENERATE, "inner offset is empty");
    std::vector<int> comp;
    auto sizes = cell_components(keep, comp);
    int big = int(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    std::unordered_set<HexCell, HexCellHash> part;
    for (int i = 0; i < int(keep.size()); ++i)
        if (comp[i] == big) part.insert(keep[i]);
    return outer_contour(part, d.n);
}

// offset of n^-a5 in macroscopic units, rounded to whole cells of width sqrt3*eps
inline long offset_cells(int n, double a5) { return std::max(1L, std::lround(std::pow(n, 1 - a5) / kSqrt3)); }

inline bool in_shrunken_triangle(cplx p, double delta) {
    for (cplx v : {cplx(1, 0), kTau, kTau2})
        if ((p * std::conj(v)).real() < -(1 - delta) / 2 - 1e-15) return false;
    return true;
}

struct ShrunkenDomain {
    double a4 = 0, delta = 0;
    std::vector<HexCell> member_cells;
    std::array<HexCell, 3> marked{};  // B, C, D preimages
    std::vector<cplx> images;         // F at member cell centers
};

inline ShrunkenDomain extract_shrunken(const CauchyExtension& ext, const DiscreteDomain& base, double a4) {
    if (!(a4 > 0)) throw Error(ErrorCode::BAD_CONFIG, "a4 must be positive");
    ShrunkenDomain s;
    s.a4 = a4;
    s.delta = std::pow(double(base.n), -a4);
    const double eps = 1.0 / base.n;
    std::array<double, 3> best{1e300, 1e300, 1e300};
    const cplx tips[3] = {1.0 - s.delta, (1 - s.delta) * kTau, (1 - s.delta) * kTau2};
    for (auto h : base.cells) {
        cplx w = to_cplx(cell_center(h, base.n));
        if (ext.distance_to_contour(w) <= eps / 4) continue;
        cplx fw = ext.evaluate_unchecked(w);
        if (!in_shrunken_triangle(fw, s.delta)) continue;
        s.member_cells.push_back(h);
        s.images.push_back(fw);
        for (int k = 0; k < 3; ++k)
            if (std::abs(fw - tips[k]) < best[k]) {
                best[k] = std::abs(fw - tips[k]);
                s.marked[k] = h;
            }
    }
    if (s.member_cells.empty()) throw Error(ErrorCode::EMPTY_SHRUNKEN, "no cell maps into the shrunken triangle");
    return s;
}

}  // namespace cardylab
