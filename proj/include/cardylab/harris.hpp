#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cardylab/domain.hpp"
#include "cardylab/parallel.hpp"
#include "cardylab/percolation.hpp"

namespace cardylab {

struct HarrisConfig {
    double theta = 0.02;
    double delta = -1;  // negative: theta / 4
    int B = 8;
    int r = 580;
    std::uint64_t samples_per_decision = 4000;
    double Gamma = 6.0;  // ring cap = ceil(Gamma * log n)
    int max_rings = -1;  // negative: from Gamma
    double kappa = 3.0;  // effective-region constant in the diameter sandwich
    std::uint64_t stream = 0x48415252ull;

    double margin() const { return delta < 0 ? theta / 4 : delta; }
    double window_lo() const { return theta + margin(); }
    double window_hi() const { return 1 - theta - margin(); }
    int ring_cap(int n) const { return max_rings >= 0 ? max_rings : int(std::ceil(Gamma * std::log(double(n)))); }

    void validate() const {
        // the increment bound holds with ratio 1/2, which caps theta below (1/2) / (1 + 1/2)
        if (!(theta > 0 && theta < 1.0 / 3)) throw Error(ErrorCode::BAD_CONFIG, "theta must lie in (0, 1/3)");
        if (!(window_lo() < window_hi())) throw Error(ErrorCode::BAD_CONFIG, "decision window is empty");
        if (B < 1 || r < 1 || samples_per_decision < 1) throw Error(ErrorCode::BAD_CONFIG, "B, r and samples must be positive");
    }
};

enum class SegmentKind { INITIAL, PERMANENT, TEMPORARY, EFFECTIVE, BOXED };

inline const char* to_string(SegmentKind k) {
    switch (k) {
    case SegmentKind::INITIAL: return "INITIAL";
    case SegmentKind::PERMANENT: return "PERMANENT";
    case SegmentKind::TEMPORARY: return "TEMPORARY";
    case SegmentKind::EFFECTIVE: return "EFFECTIVE";
    case SegmentKind::BOXED: return "BOXED";
    }
    return "?";
}

// A segment is stored through the cells on the station side of it. The lattice path is the interface
// between those cells and the rest of the domain, so separation questions reduce to membership.
struct HarrisSegment {
    SegmentKind kind = SegmentKind::INITIAL;
    std::vector<char> side;            // per domain cell: on the station side
    std::vector<SegmentPath> pieces;   // interface, station side on the left
    int J = 0;                         // separation from the predecessor, cell units
    double diameter = 0;               // L-infinity diameter, cell units

    std::size_t side_size() const { return std::size_t(std::count(side.begin(), side.end(), 1)); }
    std::size_t edge_count() const {
        std::size_t e = 0;
        for (auto& p : pieces) e += p.edge_count();
        return e;
    }
};

struct HarrisContext {
    const DiscreteDomain* dom = nullptr;
    Point omega;
    int omega_cell = -1;
    Point center;
    double Delta = 0;
    std::vector<char> disk;  // cells of the central disk
};

// ------------------------------------------------------------ cell-set helpers

namespace harris_detail {

// exact smallest L with fits_box(dX, dr, L)
inline long linf_fast(HexCell a, HexCell b) {
    long dX = std::labs(long(2 * b.q + b.r) - long(2 * a.q + a.r));
    long dr = std::labs(long(b.r) - long(a.r));
    long L1 = (dX + 1) / 2;
    long L2 = long(std::ceil(std::sqrt(0.75 * double(dr * dr))));
    while (L2 > 0 && 4 * (L2 - 1) * (L2 - 1) >= 3 * dr * dr) --L2;
    while (4 * L2 * L2 < 3 * dr * dr) ++L2;
    return std::max(L1, L2);
}

inline std::vector<char> flood(const DiscreteDomain& d, const std::vector<int>& starts, const std::vector<char>& allowed) {
    std::vector<char> seen(d.size(), 0);
    std::vector<int> st;
    for (int s : starts)
        if (allowed[s] && !seen[s]) {
            seen[s] = 1;
            st.push_back(s);
        }
    while (!st.empty()) {
        int u = st.back();
        st.pop_back();
        for (int v : d.nbr[u])
            if (v >= 0 && allowed[v] && !seen[v]) {
                seen[v] = 1;
                st.push_back(v);
            }
    }
    return seen;
}

inline std::vector<int> members(const std::vector<char>& m) {
    std::vector<int> out;
    for (int i = 0; i < int(m.size()); ++i)
        if (m[i]) out.push_back(i);
    return out;
}

// cells of `a` with a neighbor satisfying pred
template <class Pred>
std::vector<int> touching(const DiscreteDomain& d, const std::vector<char>& a, Pred&& pred) {
    std::vector<int> out;
    for (int i = 0; i < d.size(); ++i) {
        if (!a[i]) continue;
        for (int v : d.nbr[i])
            if (v >= 0 && pred(v)) {
                out.push_back(i);
                break;
            }
    }
    return out;
}

inline bool on_boundary(const DiscreteDomain& d, int cell) {
    for (int v : d.nbr[cell])
        if (v < 0) return true;
    return false;
}

inline std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace harris_detail

// interface of a station-side cell set as lattice paths, station side on the left
inline std::vector<SegmentPath> interface_paths(const DiscreteDomain& d, const std::vector<char>& side) {
    std::unordered_map<Vertex, Vertex, VertexHash> next;
    std::unordered_set<Vertex, VertexHash> has_in;
    for (int i = 0; i < d.size(); ++i) {
        if (!side[i]) continue;
        for (int k = 0; k < 6; ++k) {
            int j = d.nbr[i][(k + 1) % 6];
            if (j >= 0 && !side[j]) {
                Vertex a = corner(d.cells[i], k), b = corner(d.cells[i], (k + 1) % 6);
                next[a] = b;
                has_in.insert(b);
            }
        }
    }
    std::vector<Vertex> starts;
    for (auto& kv : next)
        if (!has_in.count(kv.first)) starts.push_back(kv.first);
    std::sort(starts.begin(), starts.end());
    std::vector<SegmentPath> out;
    std::unordered_set<Vertex, VertexHash> used;
    auto walk = [&](Vertex s) {
        SegmentPath p;
        p.vertices.push_back(s);
        Vertex v = s;
        while (true) {
            auto it = next.find(v);
            if (it == next.end() || used.count(v)) break;
            used.insert(v);
            v = it->second;
            p.vertices.push_back(v);
            if (v == s) break;
        }
        out.push_back(std::move(p));
    };
    for (Vertex s : starts) walk(s);
    // closed loops only arise when the side does not reach the boundary
    std::vector<Vertex> rest;
    for (auto& kv : next)
        if (!used.count(kv.first)) rest.push_back(kv.first);
    std::sort(rest.begin(), rest.end());
    for (Vertex s : rest)
        if (!used.count(s)) walk(s);
    return out;
}

inline double diameter_cells(const std::vector<SegmentPath>& pieces) {
    bool any = false;
    int x0 = 0, x1 = 0, y0 = 0, y1 = 0;
    for (auto& p : pieces)
        for (auto v : p.vertices) {
            if (!any) {
                x0 = x1 = v.x;
                y0 = y1 = v.y;
                any = true;
            }
            x0 = std::min(x0, v.x);
            x1 = std::max(x1, v.x);
            y0 = std::min(y0, v.y);
            y1 = std::max(y1, v.y);
        }
    // vertex units are (sqrt3 eps/2, eps/2); one cell unit is sqrt3 eps
    return std::max((x1 - x0) / 2.0, (y1 - y0) / (2.0 * kSqrt3));
}

inline HarrisSegment make_segment(const DiscreteDomain& d, std::vector<char> side, SegmentKind kind, int J) {
    HarrisSegment s;
    s.kind = kind;
    s.side = std::move(side);
    s.pieces = interface_paths(d, s.side);
    s.J = J;
    s.diameter = diameter_cells(s.pieces);
    return s;
}

// Station-side region of a raw wall: the station's component, closed up by everything the disk
// cannot reach. Its interface is then a single cut, the part of the wall seen from the station.
inline std::vector<char> normalize_side(const HarrisContext& ctx, const std::vector<char>& raw) {
    const auto& d = *ctx.dom;
    using namespace harris_detail;
    if (!raw[ctx.omega_cell]) return {};
    auto reach = flood(d, {ctx.omega_cell}, raw);
    for (int i = 0; i < d.size(); ++i)
        if (reach[i] && ctx.disk[i]) throw Error(ErrorCode::SEPARATION_VIOLATED, "station side meets the central disk");
    std::vector<char> free(d.size());
    for (int i = 0; i < d.size(); ++i) free[i] = !reach[i];
    auto disk_side = flood(d, members(ctx.disk), free);
    std::vector<char> side(d.size());
    for (int i = 0; i < d.size(); ++i) side[i] = !disk_side[i];
    return side;
}

// ------------------------------------------------------------ central disk and base segment

inline HarrisContext central_disk(const DiscreteDomain& d) {
    HarrisContext ctx;
    ctx.dom = &d;
    double best = -1;
    for (int i = 0; i < d.size(); ++i) {
        Point c = cell_center(d.cells[i], d.n);
        double m = 1e300;
        for (const auto& e : d.boundary) {
            Point a = to_point(e.a, d.n), b = to_point(e.b, d.n);
            Point ab = b - a;
            double t = std::clamp(((c - a).x * ab.x + (c - a).y * ab.y) / (ab.x * ab.x + ab.y * ab.y), 0.0, 1.0);
            m = std::min(m, norm(c - (a + t * ab)));
        }
        if (m > best + 1e-12) {
            best = m;
            ctx.center = c;
        }
    }
    ctx.Delta = best / 2;
    ctx.disk.assign(d.size(), 0);
    for (int i = 0; i < d.size(); ++i)
        if (norm(cell_center(d.cells[i], d.n) - ctx.center) <= ctx.Delta) ctx.disk[i] = 1;
    return ctx;
}

// station cell: the boundary cell nearest to omega
inline void set_station(HarrisContext& ctx, Point omega) {
    const auto& d = *ctx.dom;
    ctx.omega = omega;
    double best = 1e300;
    for (int i = 0; i < d.size(); ++i) {
        if (!harris_detail::on_boundary(d, i)) continue;
        double m = norm(cell_center(d.cells[i], d.n) - omega);
        if (m < best - 1e-12) {
            best = m;
            ctx.omega_cell = i;
        }
    }
    if (ctx.disk[ctx.omega_cell]) throw Error(ErrorCode::GEOMETRY_DEGENERATE, "station lies in the central disk");
}

// L-infinity distance from a point to the central disk
inline double linf_to_disk(const HarrisContext& ctx, Point p) {
    double best = 1e300;
    for (int k = 0; k < 3600; ++k) {
        double t = 2 * M_PI * k / 3600;
        Point q{ctx.center.x + ctx.Delta * std::cos(t), ctx.center.y + ctx.Delta * std::sin(t)};
        best = std::min(best, std::max(std::fabs(q.x - p.x), std::fabs(q.y - p.y)));
    }
    return best;
}

// boundary of the smallest square around the station that touches the central disk
inline HarrisSegment base_segment(const HarrisContext& ctx) {
    const auto& d = *ctx.dom;
    double h = linf_to_disk(ctx, ctx.omega);
    std::vector<char> raw(d.size(), 0);
    for (int i = 0; i < d.size(); ++i) {
        Point c = cell_center(d.cells[i], d.n);
        raw[i] = std::max(std::fabs(c.x - ctx.omega.x), std::fabs(c.y - ctx.omega.y)) < h && !ctx.disk[i];
    }
    auto side = normalize_side(ctx, raw);
    if (side.empty()) throw Error(ErrorCode::GEOMETRY_DEGENERATE, "station cell outside the base square");
    return make_segment(d, std::move(side), SegmentKind::INITIAL, 0);
}

// ------------------------------------------------------------ sliding

// L-infinity cell distance from the disk-side fringe of `g`, for cells on its station side (-1 elsewhere)
inline std::vector<long> fringe_distance(const DiscreteDomain& d, const HarrisSegment& g) {
    using namespace harris_detail;
    std::vector<char> out(d.size());
    for (int i = 0; i < d.size(); ++i) out[i] = !g.side[i];
    auto fr = touching(d, out, [&](int v) { return bool(g.side[v]); });
    std::vector<long> dist(d.size(), -1);
    for (int i = 0; i < d.size(); ++i) {
        if (!g.side[i]) continue;
        long m = kInfinite;
        for (int f : fr) m = std::min(m, linf_fast(d.cells[i], d.cells[f]));
        dist[i] = m;
    }
    return dist;
}

inline std::vector<char> slide_side(const HarrisContext& ctx, const std::vector<long>& dist, long ell) {
    std::vector<char> raw(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i) raw[i] = dist[i] > ell;
    return normalize_side(ctx, raw);
}

// the segment obtained by moving g by ell cell units toward the station
inline HarrisSegment slide(const HarrisContext& ctx, const HarrisSegment& g, long ell) {
    const auto& d = *ctx.dom;
    if (ell < 1) throw Error(ErrorCode::BAD_CONFIG, "slide length must be positive");
    if (!g.side[ctx.omega_cell]) throw Error(ErrorCode::SEPARATION_VIOLATED, "segment does not separate the station");
    for (int i = 0; i < d.size(); ++i)
        if (g.side[i] && ctx.disk[i]) throw Error(ErrorCode::SEPARATION_VIOLATED, "segment does not separate the disk");
    auto dist = fringe_distance(d, g);
    if (dist[ctx.omega_cell] <= ell + 3) throw Error(ErrorCode::TOO_CLOSE, "station within ell + 3 of the segment");
    auto side = slide_side(ctx, dist, ell);
    return make_segment(d, std::move(side), SegmentKind::TEMPORARY, int(ell));
}

// Part of a wall (a set of dual edges, given as cell pairs) that the station sees, as a segment.
inline HarrisSegment yellow_segment(const HarrisContext& ctx, const std::vector<std::pair<int, int>>& wall) {
    const auto& d = *ctx.dom;
    std::vector<std::vector<int>> blocked(d.size());
    for (auto [a, b] : wall) {
        blocked[a].push_back(b);
        blocked[b].push_back(a);
    }
    std::vector<char> seen(d.size(), 0);
    std::vector<int> st{ctx.omega_cell};
    seen[ctx.omega_cell] = 1;
    while (!st.empty()) {
        int u = st.back();
        st.pop_back();
        if (ctx.disk[u]) throw Error(ErrorCode::NOT_SEPARATING, "wall does not separate the station from the disk");
        for (int v : d.nbr[u])
            if (v >= 0 && !seen[v] && std::find(blocked[u].begin(), blocked[u].end(), v) == blocked[u].end()) {
                seen[v] = 1;
                st.push_back(v);
            }
    }
    return make_segment(d, normalize_side(ctx, seen), SegmentKind::TEMPORARY, 0);
}

// every station-to-disk cell string crosses the interface (flood with interface edges removed)
inline bool separates(const HarrisContext& ctx, const HarrisSegment& g) {
    const auto& d = *ctx.dom;
    std::vector<char> seen(d.size(), 0);
    std::vector<int> st{ctx.omega_cell};
    seen[ctx.omega_cell] = 1;
    while (!st.empty()) {
        int u = st.back();
        st.pop_back();
        if (ctx.disk[u]) return false;
        for (int v : d.nbr[u])
            if (v >= 0 && !seen[v] && g.side[u] == g.side[v]) {
                seen[v] = 1;
                st.push_back(v);
            }
    }
    return true;
}

// ------------------------------------------------------------ crossing decisions

// yellow crossings inside a cell region between two cell lists, several regions on common samples
struct RegionQuery {
    std::vector<char> region;
    std::vector<int> src, tgt;
};

struct RegionRun {
    std::vector<ProbEstimate> yellow;
    std::uint64_t any_blue = 0;  // samples where at least one of the first `seal` regions has no yellow crossing
    std::uint64_t samples = 0;
};

inline RegionRun run_regions(const DiscreteDomain& d, const std::vector<RegionQuery>& qs, std::uint64_t samples,
                             std::uint64_t stream, std::size_t seal = 0, Color color = Color::YELLOW) {
    std::vector<int> subset;
    {
        std::vector<char> any(d.size(), 0);
        for (auto& q : qs)
            for (int i = 0; i < d.size(); ++i) any[i] |= q.region[i];
        subset = harris_detail::members(any);
    }
    CellSampler sampler(d, &subset);
    auto key = stream_key(stream);
    const std::uint8_t want = std::uint8_t(color);
    std::uint64_t nb = (samples + kSampleBlock - 1) / kSampleBlock;
    struct Part {
        std::vector<std::uint64_t> hits;
        std::uint64_t any_blue = 0;
    };
    std::vector<Part> parts(nb);
    for_each_block(samples, kSampleBlock, [&](std::uint64_t b, std::uint64_t i0, std::uint64_t i1, int) {
        std::vector<std::uint8_t> col(d.size(), 0);
        std::vector<std::uint32_t> mark(d.size(), 0);
        std::uint32_t stamp = 0;
        std::vector<int> st;
        Part p;
        p.hits.assign(qs.size(), 0);
        for (std::uint64_t i = i0; i < i1; ++i) {
            sampler.sample(key, i, col.data());
            bool blue_any = false;
            for (std::size_t k = 0; k < qs.size(); ++k) {
                const auto& q = qs[k];
                ++stamp;
                st.clear();
                bool hit = false;
                for (int s : q.src)
                    if (col[s] == want && mark[s] != stamp) {
                        mark[s] = stamp;
                        st.push_back(s);
                    }
                std::vector<char> const& R = q.region;
                // target membership via a second stamp range
                while (!st.empty() && !hit) {
                    int u = st.back();
                    st.pop_back();
                    if (std::binary_search(q.tgt.begin(), q.tgt.end(), u)) hit = true;
                    for (int v : d.nbr[u])
                        if (v >= 0 && R[v] && col[v] == want && mark[v] != stamp) {
                            mark[v] = stamp;
                            st.push_back(v);
                        }
                }
                p.hits[k] += hit;
                if (k < seal && !hit) blue_any = true;
            }
            p.any_blue += blue_any;
        }
        parts[b] = std::move(p);
    });
    RegionRun out;
    out.samples = samples;
    std::vector<std::uint64_t> hits(qs.size(), 0);
    for (auto& p : parts) {
        for (std::size_t k = 0; k < qs.size(); ++k) hits[k] += p.hits[k];
        out.any_blue += p.any_blue;
    }
    for (auto h : hits) out.yellow.push_back(ProbEstimate::from(h, samples));
    return out;
}

// fragment between an outer segment (disk side) and an inner one (station side)
inline RegionQuery fragment_query(const DiscreteDomain& d, const HarrisSegment& outer, const std::vector<char>& inner_side) {
    RegionQuery q;
    q.region.assign(d.size(), 0);
    for (int i = 0; i < d.size(); ++i) q.region[i] = outer.side[i] && !(inner_side.empty() ? false : inner_side[i]);
    q.src = harris_detail::touching(d, q.region, [&](int v) { return !outer.side[v]; });
    if (!inner_side.empty()) q.tgt = harris_detail::touching(d, q.region, [&](int v) { return bool(inner_side[v]); });
    std::sort(q.tgt.begin(), q.tgt.end());
    return q;
}

struct Decision {
    long index = 0;  // slide length, or backslide step
    double p = 0, stderr_ = 0;
    bool backslide = false;
};

struct SConstructResult {
    enum Status { HIT, NEAR_OMEGA, WINDOW_UNREACHABLE } status = HIT;
    std::optional<HarrisSegment> segment;
    std::vector<Decision> trace;
    bool backslid = false;
    ProbEstimate crossing;
};

class DecisionMaker {
public:
    DecisionMaker(const HarrisContext& ctx, const HarrisConfig& cfg) : ctx_(ctx), cfg_(cfg) {}

    ProbEstimate crossing(const HarrisSegment& outer, const std::vector<char>& inner_side) {
        const auto& d = *ctx_.dom;
        auto q = fragment_query(d, outer, inner_side);
        ++count_;
        if (std::none_of(q.region.begin(), q.region.end(), [](char c) { return c; })) return ProbEstimate::from(1, 1);
        std::uint64_t s = harris_detail::mix(cfg_.stream ^ harris_detail::mix(count_));
        return run_regions(d, {q}, cfg_.samples_per_decision, s).yellow[0];
    }

    // yellow crossing from the segment to the station cell
    ProbEstimate to_station(const HarrisSegment& g) {
        const auto& d = *ctx_.dom;
        auto q = fragment_query(d, g, {});
        q.tgt = {ctx_.omega_cell};
        ++count_;
        std::uint64_t s = harris_detail::mix(cfg_.stream ^ harris_detail::mix(count_));
        return run_regions(d, {q}, cfg_.samples_per_decision, s).yellow[0];
    }

    std::uint64_t decisions() const { return count_; }

private:
    const HarrisContext& ctx_;
    const HarrisConfig& cfg_;
    std::uint64_t count_ = 0;
};

// Slide toward the station until the yellow crossing first drops into the window; if it jumps past
// the window, slide the far segment back toward a barrier at half the distance.
inline SConstructResult s_construct(const HarrisContext& ctx, const HarrisSegment& prev, const HarrisConfig& cfg,
                                    DecisionMaker& dm) {
    const auto& d = *ctx.dom;
    SConstructResult res;
    auto dist = fringe_distance(d, prev);
    // the station keeps at least one cell of room; the standalone slide asks for three
    long lmax = dist[ctx.omega_cell] - 2;
    const double hi = cfg.window_hi(), lo = cfg.window_lo();
    std::map<long, std::pair<ProbEstimate, std::vector<char>>> memo;
    auto eval = [&](long ell) -> const std::pair<ProbEstimate, std::vector<char>>& {
        auto it = memo.find(ell);
        if (it != memo.end()) return it->second;
        auto side = slide_side(ctx, dist, ell);
        auto p = dm.crossing(prev, side);
        res.trace.push_back({ell, p.mean, p.stderr_, false});
        return memo.emplace(ell, std::make_pair(p, std::move(side))).first->second;
    };
    if (lmax < 1) {
        res.status = SConstructResult::NEAR_OMEGA;
        return res;
    }
    // doubling, then bisection on the slide index (the crossing decreases as the fragment grows)
    long good = -1, bad = 0;
    for (long ell = 1;; ell = std::min(2 * ell, lmax)) {
        if (eval(ell).first.mean <= hi) {
            good = ell;
            break;
        }
        bad = ell;
        if (ell == lmax) break;
    }
    if (good < 0) {
        res.status = SConstructResult::NEAR_OMEGA;
        return res;
    }
    while (good - bad > 1) {
        long mid = (good + bad) / 2;
        (eval(mid).first.mean <= hi ? good : bad) = mid;
    }
    const auto& hit = eval(good);
    if (hit.first.mean >= lo) {
        res.segment = make_segment(d, hit.second, SegmentKind::TEMPORARY, int(good));
        res.crossing = hit.first;
        return res;
    }
    // backslide: grow the far side back toward the barrier at half the distance
    res.backslid = true;
    long L = (good + 1) / 2;
    std::vector<char> barrier = L >= 1 ? slide_side(ctx, dist, L) : prev.side;
    std::vector<char> far = hit.second;
    // distance of barrier-side cells from the far station side
    std::vector<int> far_fringe = harris_detail::touching(d, far, [&](int v) { return !far[v]; });
    std::vector<long> bd(d.size(), -1);
    for (int i = 0; i < d.size(); ++i) {
        if (!barrier[i] || far[i]) continue;
        long m = kInfinite;
        for (int f : far_fringe) m = std::min(m, harris_detail::linf_fast(d.cells[i], d.cells[f]));
        bd[i] = m;
    }
    for (long m = 1;; ++m) {
        std::vector<char> raw(d.size());
        bool grew_all = true;
        for (int i = 0; i < d.size(); ++i) {
            raw[i] = far[i] || (bd[i] >= 0 && bd[i] <= m);
            if (barrier[i] && !raw[i]) grew_all = false;
        }
        auto side = normalize_side(ctx, raw);
        auto p = dm.crossing(prev, side);
        res.trace.push_back({m, p.mean, p.stderr_, true});
        if (p.mean >= lo) {
            if (p.mean > hi) break;
            HarrisSegment s = make_segment(d, std::move(side), SegmentKind::TEMPORARY, 0);
            long J = kInfinite;
            for (int i = 0; i < d.size(); ++i)
                if (s.side[i]) J = std::min(J, dist[i]);
            s.J = int(std::max(1L, J - 1));
            res.segment = std::move(s);
            res.crossing = p;
            return res;
        }
        if (grew_all) break;
    }
    res.status = SConstructResult::WINDOW_UNREACHABLE;
    return res;
}

// ------------------------------------------------------------ effective and boxed segments

struct EffectiveResult {
    HarrisSegment segment;
    bool trimmed = false;
    double kappa_prime = 0;  // diameter / (B J)
};

inline EffectiveResult q_construct(const HarrisContext& ctx, const HarrisSegment& YI, const HarrisSegment& YF,
                                   const HarrisConfig& cfg) {
    (void)ctx;
    EffectiveResult out;
    out.segment = YF;
    out.segment.kind = SegmentKind::EFFECTIVE;
    const double J = std::max(1, YF.J);
    if (YF.diameter <= 3 * cfg.B * J) {
        out.kappa_prime = YF.diameter / (cfg.B * J);
        return out;
    }
    // keep the stretch of the interface nearest the outer segment, capped at diameter 3 B J
    out.trimmed = true;
    const auto& d = *ctx.dom;
    std::vector<char> outside(d.size());
    for (int i = 0; i < d.size(); ++i) outside[i] = !YI.side[i];
    auto fr = harris_detail::touching(d, outside, [&](int v) { return bool(YI.side[v]); });
    std::size_t bp = 0, bv = 0;
    double bdist = 1e300;
    for (std::size_t p = 0; p < YF.pieces.size(); ++p)
        for (std::size_t k = 0; k < YF.pieces[p].vertices.size(); ++k) {
            Point x = to_point(YF.pieces[p].vertices[k], d.n);
            for (int f : fr) {
                double dd = norm(cell_center(d.cells[f], d.n) - x);
                if (dd < bdist) {
                    bdist = dd;
                    bp = p;
                    bv = k;
                }
            }
        }
    const auto& vs = YF.pieces[bp].vertices;
    std::size_t a = bv, b = bv;
    auto diam = [&](std::size_t i, std::size_t j) {
        return diameter_cells({SegmentPath{std::vector<Vertex>(vs.begin() + i, vs.begin() + j + 1)}});
    };
    while (true) {
        bool moved = false;
        if (a > 0 && diam(a - 1, b) <= 3 * cfg.B * J) {
            --a;
            moved = true;
        }
        if (b + 1 < vs.size() && diam(a, b + 1) <= 3 * cfg.B * J) {
            ++b;
            moved = true;
        }
        if (!moved) break;
    }
    out.segment.pieces = {SegmentPath{std::vector<Vertex>(vs.begin() + a, vs.begin() + b + 1)}};
    out.segment.diameter = diameter_cells(out.segment.pieces);
    out.kappa_prime = out.segment.diameter / (cfg.B * J);
    if (out.segment.diameter * cfg.B < J) throw Error(ErrorCode::GEOMETRY_DEGENERATE, "effective segment below J / B");
    return out;
}

struct BoxTiling {
    int b = 1;                       // box side in cells
    std::size_t boxes = 0, full = 0, deleted = 0, component = 0;
    std::size_t path_length = 0;     // boxes on a shortest component path across the fragment
    bool ok = false;
    std::string error;
};

struct BoxedResult {
    std::optional<HarrisSegment> segment;
    BoxTiling tiling;
};

// Box tiling of the fragment at side 2^-2r J (at least one cell). Boxes meeting the inner segment and
// their neighbors are dropped; the far side of the full-box cluster touching the outer segment gives
// the boxed segment.
inline BoxedResult r_construct(const HarrisContext& ctx, const HarrisSegment& YI, const HarrisSegment& YF,
                               const HarrisConfig& cfg) {
    const auto& d = *ctx.dom;
    BoxedResult out;
    auto& T = out.tiling;
    T.b = std::max(1, int(std::floor(std::ldexp(double(YF.J), -2 * cfg.r))));
    const int b = T.b;
    auto box_of = [&](HexCell c) {
        auto fl = [b](int v) { return v >= 0 ? v / b : -((-v + b - 1) / b); };
        return std::pair<int, int>{fl(c.q), fl(c.r)};
    };
    std::vector<char> frag(d.size());
    for (int i = 0; i < d.size(); ++i) frag[i] = YI.side[i] && !YF.side[i];
    std::map<std::pair<int, int>, std::vector<int>> boxes;
    for (int i = 0; i < d.size(); ++i)
        if (frag[i]) boxes[box_of(d.cells[i])].push_back(i);
    T.boxes = boxes.size();
    std::map<std::pair<int, int>, int> state;  // 0 partial, 1 full, 2 deleted
    for (auto& [k, cells] : boxes) state[k] = int(cells.size()) == b * b ? 1 : 0;
    std::set<std::pair<int, int>> meet;
    for (auto& [k, cells] : boxes)
        for (int c : cells)
            for (int v : d.nbr[c])
                if (v >= 0 && YF.side[v]) meet.insert(k);
    for (auto k : meet)
        for (int dq = -1; dq <= 1; ++dq)
            for (int dr = -1; dr <= 1; ++dr) {
                auto it = state.find(std::pair<int, int>{k.first + dq, k.second + dr});
                if (it != state.end() && it->second != 2) {
                    it->second = 2;
                    ++T.deleted;
                }
            }
    for (auto& [k, s] : state) T.full += s == 1;
    // full boxes touching the outer segment, grown through box adjacency
    auto touches_outer = [&](const std::vector<int>& cells) {
        for (int c : cells)
            for (int v : d.nbr[c])
                if (v >= 0 && !YI.side[v]) return true;
        return false;
    };
    static const int dirs[6][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, -1}, {-1, 1}};
    std::map<std::pair<int, int>, int> depth;
    std::deque<std::pair<int, int>> dq;
    for (auto& [k, s] : state)
        if (s == 1 && touches_outer(boxes[k])) {
            depth[k] = 1;
            dq.push_back(k);
        }
    while (!dq.empty()) {
        auto k = dq.front();
        dq.pop_front();
        for (auto& dd : dirs) {
            std::pair<int, int> nk{k.first + dd[0], k.second + dd[1]};
            auto it = state.find(nk);
            if (it != state.end() && it->second == 1 && !depth.count(nk)) {
                depth[nk] = depth[k] + 1;
                dq.push_back(nk);
            }
        }
    }
    T.component = depth.size();
    if (depth.empty()) {
        T.error = "NO_BOX_PATH";
        return out;
    }
    std::vector<char> cluster(d.size(), 0);
    for (auto& [k, dep] : depth) {
        for (int c : boxes[k]) cluster[c] = 1;
        T.path_length = std::max<std::size_t>(T.path_length, std::size_t(dep));
    }
    // station side of the cluster
    std::vector<char> raw(d.size());
    for (int i = 0; i < d.size(); ++i) raw[i] = YI.side[i] && !cluster[i];
    std::vector<char> side;
    try {
        side = normalize_side(ctx, raw);
    } catch (const Error& e) {
        T.error = to_string(e.code());
        return out;
    }
    if (side.empty()) {
        T.error = "NO_BOX_PATH";
        return out;
    }
    // the cluster must span the fragment: every boxed-side cell is beyond it
    for (int i = 0; i < d.size(); ++i)
        if (YF.side[i] && !side[i]) {
            T.error = "NO_BOX_PATH";
            return out;
        }
    out.segment = make_segment(d, std::move(side), SegmentKind::BOXED, YF.J);
    T.ok = true;
    return out;
}

// ------------------------------------------------------------ the system

struct HarrisRing {
    int index = 0;
    int J = 0, b = 1;
    double outer_diameter = 0, inner_diameter = 0;
    ProbEstimate crossing;          // accepted decision estimate
    ProbEstimate to_station;        // yellow crossing from the inner segment to the station cell
    bool backslid = false;
    std::vector<Decision> trace;
    EffectiveResult effective;
    BoxTiling boxes;
    std::optional<HarrisSegment> boxed;
};

enum class Termination { RING_CAP, NEAR_OMEGA, STUCK };

inline const char* to_string(Termination t) {
    switch (t) {
    case Termination::RING_CAP: return "RING_CAP";
    case Termination::NEAR_OMEGA: return "NEAR_OMEGA";
    case Termination::STUCK: return "STUCK";
    }
    return "?";
}

struct HarrisSystem {
    HarrisContext ctx;
    HarrisConfig cfg;
    std::vector<HarrisSegment> segments;  // P_0 (base) .. P_K, outside in
    std::vector<HarrisRing> rings;        // ring k lies between segments k and k+1
    Termination termination = Termination::RING_CAP;
    std::string note;
    ProbEstimate base_to_station;
    std::uint64_t decisions = 0;
};

inline HarrisSystem build_system(const DiscreteDomain& d, Point omega, const HarrisConfig& cfg) {
    cfg.validate();
    HarrisSystem sys;
    sys.cfg = cfg;
    sys.ctx = central_disk(d);
    set_station(sys.ctx, omega);
    const auto& ctx = sys.ctx;
    DecisionMaker dm(ctx, sys.cfg);
    sys.segments.push_back(base_segment(ctx));
    sys.base_to_station = dm.to_station(sys.segments[0]);
    const int cap = cfg.ring_cap(d.n);
    for (int k = 0; k < cap; ++k) {
        const HarrisSegment prev = sys.segments.back();
        SConstructResult s;
        try {
            s = s_construct(ctx, prev, sys.cfg, dm);
        } catch (const Error& e) {
            sys.termination = Termination::STUCK;
            sys.note = std::string(to_string(e.code())) + ": " + e.what();
            break;
        }
        if (s.status == SConstructResult::NEAR_OMEGA) {
            sys.termination = Termination::NEAR_OMEGA;
            break;
        }
        if (s.status == SConstructResult::WINDOW_UNREACHABLE) {
            sys.termination = Termination::STUCK;
            sys.note = "WINDOW_UNREACHABLE";
            break;
        }
        HarrisRing ring;
        ring.index = k;
        ring.J = s.segment->J;
        ring.crossing = s.crossing;
        ring.backslid = s.backslid;
        ring.trace = s.trace;
        ring.outer_diameter = prev.diameter;
        ring.inner_diameter = s.segment->diameter;
        try {
            ring.effective = q_construct(ctx, prev, *s.segment, sys.cfg);
        } catch (const Error& e) {
            ring.effective.segment = *s.segment;
            sys.note = std::string("ring ") + std::to_string(k) + ": " + to_string(e.code());
        }
        auto boxed = r_construct(ctx, prev, *s.segment, sys.cfg);
        ring.boxes = boxed.tiling;
        ring.b = boxed.tiling.b;
        ring.boxed = std::move(boxed.segment);
        HarrisSegment next = *s.segment;
        next.kind = SegmentKind::PERMANENT;
        ring.to_station = dm.to_station(next);
        sys.rings.push_back(std::move(ring));
        sys.segments.push_back(std::move(next));
        if (k + 1 == cap) sys.termination = Termination::RING_CAP;
    }
    sys.decisions = dm.decisions();
    return sys;
}

// ------------------------------------------------------------ verification

struct RingCheck {
    ProbEstimate yellow, blue_separation;
};

struct RingVerification {
    std::vector<RingCheck> rings;
    int seal_m = 0;
    double seal_failure = 0, seal_failure_stderr = 0, seal_bound = 0;  // bound: (1 - theta)^m
};

inline RingVerification verify_rings(const DiscreteDomain& d, const HarrisSystem& sys, std::uint64_t samples,
                                     std::uint64_t stream, int seal_m = 5) {
    RingVerification out;
    std::vector<RegionQuery> qs;
    for (std::size_t k = 0; k + 1 < sys.segments.size(); ++k) qs.push_back(fragment_query(d, sys.segments[k], sys.segments[k + 1].side));
    if (qs.empty()) return out;
    out.seal_m = std::min<int>(seal_m, int(qs.size()));
    auto run = run_regions(d, qs, samples, stream, std::size_t(out.seal_m));
    for (auto& y : run.yellow) {
        // on a topological rectangle, no yellow traverse is exactly a blue separating path
        ProbEstimate blue = ProbEstimate::from(y.samples - y.hits, y.samples);
        out.rings.push_back({y, blue});
    }
    auto fail = ProbEstimate::from(samples - run.any_blue, samples);
    out.seal_failure = fail.mean;
    out.seal_failure_stderr = fail.stderr_;
    out.seal_bound = std::pow(1 - sys.cfg.theta, out.seal_m);
    return out;
}

inline int cell_near(const DiscreteDomain& d, Point s) {
    int best = 0;
    for (int i = 1; i < d.size(); ++i)
        if (norm(cell_center(d.cells[i], d.n) - s) < norm(cell_center(d.cells[best], d.n) - s) - 1e-12) best = i;
    return best;
}

inline int count_separating_rings(const HarrisSystem& sys, Point s) {
    int c = cell_near(*sys.ctx.dom, s), k = 0;
    for (auto& g : sys.segments) k += g.side[c] ? 1 : 0;
    return k;
}

enum class EndpointClass { SPANS_DA_AB, SAME_ARC, OTHER };

inline const char* to_string(EndpointClass c) {
    switch (c) {
    case EndpointClass::SPANS_DA_AB: return "SPANS_DA_AB";
    case EndpointClass::SAME_ARC: return "SAME_ARC";
    case EndpointClass::OTHER: return "OTHER";
    }
    return "?";
}

inline EndpointClass classify_pair(int arc_a, int arc_b) {
    if (arc_a == arc_b) return EndpointClass::SAME_ARC;
    if ((arc_a == ARC_DA && arc_b == ARC_AB) || (arc_a == ARC_AB && arc_b == ARC_DA)) return EndpointClass::SPANS_DA_AB;
    return EndpointClass::OTHER;
}

struct EndpointReport {
    std::vector<std::array<int, 2>> arcs;  // per segment
    std::vector<EndpointClass> classes;
    int v = 0;          // segments not spanning [D,A] to [A,B]
    int conflicts = 0;  // consecutive segments whose boundary spans are not nested
};

inline EndpointReport classify_endpoints(const HarrisSystem& sys, const DiscreteDomain& d) {
    EndpointReport rep;
    const int E = int(d.boundary.size());
    const int pa = d.marked_pos[0];
    std::vector<std::array<int, 2>> spans;  // loop offsets from A of the two endpoints, signed
    for (auto& g : sys.segments) {
        std::array<int, 2> arcs{-1, -1};
        std::array<int, 2> off{0, 0};
        if (!g.pieces.empty()) {
            Vertex ends[2] = {g.pieces.front().vertices.front(), g.pieces.back().vertices.back()};
            for (int e = 0; e < 2; ++e) {
                int vid = d.find_vertex(ends[e]);
                int pos = vid >= 0 ? d.vertex_loop_pos[vid] : -1;
                if (pos >= 0) {
                    arcs[e] = d.edge_arc[pos];
                    int o = ((pos - pa) % E + E) % E;
                    off[e] = o > E / 2 ? o - E : o;
                }
            }
        }
        rep.arcs.push_back(arcs);
        auto c = classify_pair(arcs[0], arcs[1]);
        rep.classes.push_back(c);
        if (c != EndpointClass::SPANS_DA_AB) ++rep.v;
        spans.push_back({std::min(off[0], off[1]), std::max(off[0], off[1])});
    }
    for (std::size_t k = 0; k + 1 < spans.size(); ++k)
        if (spans[k + 1][0] < spans[k][0] || spans[k + 1][1] > spans[k][1]) ++rep.conflicts;
    return rep;
}

// ------------------------------------------------------------ calibration

// hard-way crossing of a width-a, height-1 rectangle at scale n
inline ProbEstimate hard_way_crossing(int aspect, int n, std::uint64_t samples, std::uint64_t stream) {
    auto d = canonical_approximation(gen::rectangle(double(aspect)), n);
    return estimate(d, arc_query(d, ARC_BC, ARC_DA), samples, stream);
}

// smallest integer aspect whose hard-way crossing is below theta^2
inline int calibrate_B(double theta, int n, std::uint64_t samples, std::uint64_t stream, std::vector<ProbEstimate>* trace = nullptr) {
    for (int a = 1; a <= 16; ++a) {
        auto p = hard_way_crossing(a, n, samples, stream + a);
        if (trace) trace->push_back(p);
        if (p.mean < theta * theta) return a;
    }
    throw Error(ErrorCode::DEGENERATE_FIT, "no aspect up to 16 reached theta^2");
}

// probability of a monochrome circuit in the hexagonal annulus R <= |x| <= ratio R around a cell
inline ProbEstimate annulus_circuit(int R, int ratio, std::uint64_t samples, std::uint64_t stream) {
    const int R2 = ratio * R;
    std::vector<HexCell> cells;
    auto hd = [](HexCell c) { return (std::abs(c.q) + std::abs(c.r) + std::abs(c.q + c.r)) / 2; };
    for (int q = -R2; q <= R2; ++q)
        for (int r = -R2; r <= R2; ++r)
            if (hd({q, r}) <= R2) cells.push_back({q, r});
    auto d = assemble_domain(cells, R2 + 1, DomainKind::CANONICAL);
    RegionQuery q;
    q.region.assign(d.size(), 0);
    for (int i = 0; i < d.size(); ++i) {
        int h = hd(d.cells[i]);
        q.region[i] = h >= R;
        if (h == R) q.src.push_back(i);
        if (h == R2) q.tgt.push_back(i);
    }
    std::sort(q.tgt.begin(), q.tgt.end());
    // a circuit of one color exists iff the other color has no crossing
    auto run = run_regions(d, {q}, samples, stream, 0, Color::YELLOW);
    const auto& y = run.yellow[0];
    return ProbEstimate::from(y.samples - y.hits, y.samples);
}

// smallest integer r with (1 - lambda)^(r - 1) < (theta - theta^2)^2
inline int calibrate_r(double theta, double lambda) {
    double t2 = (theta - theta * theta) * (theta - theta * theta);
    for (int r = 1; r < 100000; ++r)
        if (std::pow(1 - lambda, r - 1) < t2) return r;
    throw Error(ErrorCode::DEGENERATE_FIT, "circuit probability too small to calibrate r");
}

}  // namespace cardylab
