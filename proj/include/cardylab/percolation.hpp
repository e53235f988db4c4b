#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <vector>

#include "cardylab/domain.hpp"
#include "cardylab/error.hpp"
#include "cardylab/parallel.hpp"
#include "cardylab/rng.hpp"

namespace cardylab {

enum class Color : std::uint8_t { BLUE = 0, YELLOW = 1 };

inline Color flip(Color c) { return c == Color::BLUE ? Color::YELLOW : Color::BLUE; }

struct Coloring {
    std::vector<std::uint8_t> colors;          // per cell, 1 = yellow
    std::array<int, 4> forced{-1, -1, -1, -1}; // per arc: -1 free, else forced color
    std::uint64_t stream = 0, index = 0;
};

struct ProbEstimate {
    double mean = 0, stderr_ = 0;
    std::uint64_t samples = 0, hits = 0;

    static ProbEstimate from(std::uint64_t hits, std::uint64_t samples) {
        ProbEstimate p;
        p.samples = samples;
        p.hits = hits;
        p.mean = samples ? double(hits) / double(samples) : 0.0;
        p.stderr_ = samples ? std::sqrt(p.mean * (1 - p.mean) / double(samples)) : 0.0;
        return p;
    }
};

struct Rational {
    std::uint64_t num = 0, den = 1;
    double value() const { return double(num) / double(den); }
    friend bool operator==(Rational a, Rational b) { return a.num == b.num && a.den == b.den; }
};

inline Rational make_rational(std::uint64_t num, std::uint64_t den) {
    std::uint64_t g = std::gcd(num, den);
    if (g == 0) g = 1;
    return {num / g, den / g};
}

// ------------------------------------------------------------ sampling

// groups cells by (row, 128-wide column block) so one Philox call colors up to 128 cells;
// the bit for a cell depends only on its lattice coordinates
class CellSampler {
public:
    explicit CellSampler(const DiscreteDomain& d, const std::vector<int>* subset = nullptr) {
        std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> groups;
        auto add = [&](int i) {
            HexCell c = d.cells[i];
            groups[{c.r, c.q >> 7}].push_back({i, c.q & 127});
        };
        if (subset)
            for (int i : *subset) add(i);
        else
            for (int i = 0; i < d.size(); ++i) add(i);
        for (auto& [key, members] : groups) groups_.push_back({key.first, key.second, members});
    }

    void sample(Philox4x32Key key, std::uint64_t index, std::uint8_t* colors) const {
        for (const auto& g : groups_) {
            auto bits = block_bits(key, index, g.row, g.group);
            for (auto [cell, bit] : g.members) colors[cell] = (bits[bit >> 5] >> (bit & 31)) & 1u;
        }
    }

private:
    struct Group {
        int row, group;
        std::vector<std::pair<int, int>> members;
    };
    std::vector<Group> groups_;
};

inline Coloring sample_coloring(const DiscreteDomain& d, std::uint64_t stream, std::uint64_t index,
                                std::array<int, 4> forced = {-1, -1, -1, -1}) {
    Coloring c;
    c.colors.assign(d.cells.size(), 0);
    c.forced = forced;
    c.stream = stream;
    c.index = index;
    CellSampler(d).sample(stream_key(stream), index, c.colors.data());
    return c;
}

// ------------------------------------------------------------ queries

enum class QueryKind { ARC_TO_ARC, SEPARATING_PATH, CIRCUIT };

struct CrossingQuery {
    QueryKind kind = QueryKind::ARC_TO_ARC;
    Color color = Color::YELLOW;
    std::vector<int> source, target;  // boundary edge ids
    std::optional<int> witness;       // vertex id
    std::vector<int> avoid;           // boundary edge ids
    std::vector<int> annulus;         // cell ids (CIRCUIT)
    int hole_cell = -1;               // a domain cell inside the hole (CIRCUIT)
};

inline std::vector<int> arc_union(const DiscreteDomain& d, std::initializer_list<int> arcs) {
    std::vector<int> out;
    for (int a : arcs) {
        auto e = d.arc_edges(a);
        out.insert(out.end(), e.begin(), e.end());
    }
    return out;
}

inline CrossingQuery arc_query(const DiscreteDomain& d, int src_arc, int tgt_arc, Color c = Color::YELLOW) {
    CrossingQuery q;
    q.kind = QueryKind::ARC_TO_ARC;
    q.color = c;
    q.source = d.arc_edges(src_arc);
    q.target = d.arc_edges(tgt_arc);
    return q;
}

// S-function events: for a marked point X in {B, C, D}, the crossing joins the two arcs incident to X
// and must separate z from the opposite arc. index 0 = S_B, 1 = S_C, 2 = S_D.
inline CrossingQuery s_event_query(const DiscreteDomain& d, int which, int witness) {
    // arcs: (B,C) = [B,C]; (C,D) = [C,D]; (D,B) = [D,A] u [A,B]
    std::vector<int> bc = d.arc_edges(ARC_BC), cd = d.arc_edges(ARC_CD), db = arc_union(d, {ARC_DA, ARC_AB});
    CrossingQuery q;
    q.kind = QueryKind::SEPARATING_PATH;
    q.color = Color::YELLOW;
    q.witness = witness;
    if (which == 0) {  // S_B: (D,B) -> (B,C), avoid (C,D)
        q.source = db;
        q.target = bc;
        q.avoid = cd;
    } else if (which == 1) {  // S_C: (B,C) -> (C,D), avoid (D,B)
        q.source = bc;
        q.target = cd;
        q.avoid = db;
    } else {  // S_D: (C,D) -> (D,B), avoid (B,C)
        q.source = cd;
        q.target = db;
        q.avoid = bc;
    }
    return q;
}

// query resolved into cell/vertex sets
struct CompiledQuery {
    QueryKind kind = QueryKind::ARC_TO_ARC;
    std::uint8_t color = 1;
    std::vector<int> src_cells, tgt_cells;
    std::vector<char> is_src, is_tgt;    // per cell
    std::vector<int> avoid_cells;        // cells with an edge on the avoid arc
    std::vector<char> is_avoid;          // per vertex of the closed avoid arc
    std::vector<char> is_corner;         // per vertex: shared endpoint of source and target edges
    int witness = -1;
    // forced arcs of the query color: virtual nodes
    std::vector<std::vector<int>> forced_cells;
    std::vector<char> forced_touch_src, forced_touch_tgt;
    std::vector<std::vector<char>> forced_adj;
    // CIRCUIT
    std::vector<char> in_annulus;
    std::vector<int> inner_cells, outer_cells;
};

namespace detail {

inline void edge_cells(const DiscreteDomain& d, const std::vector<int>& edges, std::vector<int>& cells,
                       std::vector<char>& mask) {
    mask.assign(d.cells.size(), 0);
    for (int e : edges) {
        if (e < 0 || e >= int(d.boundary.size())) throw Error(ErrorCode::MALFORMED_QUERY, "edge id off the boundary");
        int c = d.boundary[e].cell;
        if (!mask[c]) {
            mask[c] = 1;
            cells.push_back(c);
        }
    }
}

}  // namespace detail

inline CompiledQuery compile_query(const DiscreteDomain& d, const CrossingQuery& q, std::array<int, 4> forced = {-1, -1, -1, -1}) {
    CompiledQuery c;
    c.kind = q.kind;
    c.color = std::uint8_t(q.color);
    if (q.kind == QueryKind::CIRCUIT) {
        if (q.witness || !q.avoid.empty() || q.annulus.empty() || q.hole_cell < 0)
            throw Error(ErrorCode::MALFORMED_QUERY, "circuit query needs an annulus and a hole cell only");
        c.in_annulus.assign(d.cells.size(), 0);
        for (int i : q.annulus) c.in_annulus[i] = 1;
        if (c.in_annulus[q.hole_cell]) throw Error(ErrorCode::MALFORMED_QUERY, "hole cell lies in the annulus");
        std::vector<char> hole(d.cells.size(), 0);
        std::vector<int> st{q.hole_cell};
        hole[q.hole_cell] = 1;
        while (!st.empty()) {
            int u = st.back();
            st.pop_back();
            for (int v : d.nbr[u]) {
                if (v < 0) throw Error(ErrorCode::MALFORMED_QUERY, "hole touches the domain boundary");
                if (!hole[v] && !c.in_annulus[v]) {
                    hole[v] = 1;
                    st.push_back(v);
                }
            }
        }
        for (int i : q.annulus) {
            bool inner = false, outer = false;
            for (int v : d.nbr[i]) {
                if (v < 0) outer = true;
                else if (hole[v]) inner = true;
                else if (!c.in_annulus[v]) outer = true;
            }
            if (inner) c.inner_cells.push_back(i);
            if (outer) c.outer_cells.push_back(i);
        }
        return c;
    }
    if (q.source.empty() || q.target.empty()) throw Error(ErrorCode::MALFORMED_QUERY, "empty source or target arc");
    {
        std::vector<char> used(d.boundary.size(), 0);
        for (int e : q.source) used.at(e) = 1;
        for (int e : q.target)
            if (used.at(e)) throw Error(ErrorCode::MALFORMED_QUERY, "source and target arcs overlap");
    }
    detail::edge_cells(d, q.source, c.src_cells, c.is_src);
    detail::edge_cells(d, q.target, c.tgt_cells, c.is_tgt);
    if (q.kind == QueryKind::SEPARATING_PATH) {
        if (!q.witness || q.avoid.empty() || !q.annulus.empty())
            throw Error(ErrorCode::MALFORMED_QUERY, "separating query needs a witness and an avoid arc");
        if (*q.witness < 0 || *q.witness >= int(d.vertices.size()))
            throw Error(ErrorCode::MALFORMED_QUERY, "witness is not a domain vertex");
        c.witness = *q.witness;
        c.is_avoid.assign(d.vertices.size(), 0);
        {
            std::vector<char> m;
            detail::edge_cells(d, q.avoid, c.avoid_cells, m);
        }
        for (int e : q.avoid)
            for (Vertex v : {d.boundary.at(e).a, d.boundary.at(e).b}) {
                int id = d.find_vertex(v);
                c.is_avoid[id] = 1;
            }
        c.is_corner.assign(d.vertices.size(), 0);
        std::vector<char> sv(d.vertices.size(), 0);
        for (int e : q.source) {
            sv[d.find_vertex(d.boundary[e].a)] = 1;
            sv[d.find_vertex(d.boundary[e].b)] = 1;
        }
        for (int e : q.target)
            for (Vertex v : {d.boundary[e].a, d.boundary[e].b}) {
                int id = d.find_vertex(v);
                if (sv[id] && !c.is_avoid[id]) c.is_corner[id] = 1;
            }
    } else if (q.witness || !q.avoid.empty() || !q.annulus.empty()) {
        throw Error(ErrorCode::MALFORMED_QUERY, "arc-to-arc query carries separating or circuit fields");
    }
    if (q.kind == QueryKind::ARC_TO_ARC && !d.edge_arc.empty()) {
        // forced arcs of the query color join whatever boundary pieces they share a vertex with
        std::vector<char> sv(d.vertices.size(), 0), tv(d.vertices.size(), 0);
        for (int e : q.source) sv[d.find_vertex(d.boundary[e].a)] = sv[d.find_vertex(d.boundary[e].b)] = 1;
        for (int e : q.target) tv[d.find_vertex(d.boundary[e].a)] = tv[d.find_vertex(d.boundary[e].b)] = 1;
        std::vector<int> arcs;
        for (int k = 0; k < 4; ++k)
            if (forced[k] == int(c.color)) arcs.push_back(k);
        for (int k : arcs) {
            std::vector<int> cells;
            std::vector<char> m;
            detail::edge_cells(d, d.arc_edges(k), cells, m);
            bool ts = false, tt = false;
            for (int v : d.arc_vertices(k)) {
                ts |= bool(sv[v]);
                tt |= bool(tv[v]);
            }
            c.forced_cells.push_back(cells);
            c.forced_touch_src.push_back(ts);
            c.forced_touch_tgt.push_back(tt);
        }
        // consecutive forced arcs meet at their shared marked point
        c.forced_adj.assign(arcs.size(), std::vector<char>(arcs.size(), 0));
        for (std::size_t i = 0; i < arcs.size(); ++i)
            for (std::size_t j = 0; j < arcs.size(); ++j)
                c.forced_adj[i][j] = i != j && ((arcs[i] + 1) % 4 == arcs[j] || (arcs[j] + 1) % 4 == arcs[i]);
    }
    return c;
}

// ------------------------------------------------------------ evaluation

// Reusable scratch space. Separating event: a vertex z is cut off by a crossing if, once the
// crossing's cells are removed, no remaining cell at z edge-connects to a cell on the avoid arc.
// The event for all z is solved at once: flood the uncolored cells from the avoid arc, take the
// colored cells bordering that flood, keep the biconnected block through a virtual source-target
// edge (every cell lying on some simple crossing), then flood again around that block.
class CrossingSolver {
public:
    explicit CrossingSolver(const DiscreteDomain& d)
        : d_(d), r0_(d.cells.size(), 0), reach_(d.cells.size(), 0), cstamp_(d.cells.size(), 0),
          cid_(d.cells.size(), -1) {}

    bool arc_to_arc(const std::uint8_t* col, const CompiledQuery& q) {
        ++gen_;
        std::vector<int>& st = stack_;
        st.clear();
        const auto color = q.color;
        const std::size_t K = q.forced_cells.size();
        std::vector<char> fused(K, 0);
        // forced arc k joins the cluster: seed its cells and any forced arcs it meets
        auto use_forced = [&](std::size_t k0, auto&& self) -> bool {
            if (fused[k0]) return false;
            fused[k0] = 1;
            if (q.forced_touch_tgt[k0]) return true;
            for (int c : q.forced_cells[k0])
                if (col[c] == color && cstamp_[c] != gen_) {
                    cstamp_[c] = gen_;
                    st.push_back(c);
                }
            for (std::size_t j = 0; j < K; ++j)
                if (q.forced_adj[k0][j] && self(j, self)) return true;
            return false;
        };
        for (std::size_t k = 0; k < K; ++k)
            if (q.forced_touch_src[k] && use_forced(k, use_forced)) return true;
        for (int c : q.src_cells)
            if (col[c] == color && cstamp_[c] != gen_) {
                cstamp_[c] = gen_;
                st.push_back(c);
            }
        while (!st.empty()) {
            int u = st.back();
            st.pop_back();
            if (q.is_tgt[u]) return true;
            for (std::size_t k = 0; k < K; ++k)
                if (!fused[k] && std::find(q.forced_cells[k].begin(), q.forced_cells[k].end(), u) != q.forced_cells[k].end() &&
                    use_forced(k, use_forced))
                    return true;
            for (int v : d_.nbr[u])
                if (v >= 0 && col[v] == color && cstamp_[v] != gen_) {
                    cstamp_[v] = gen_;
                    st.push_back(v);
                }
        }
        return false;
    }

    bool circuit(const std::uint8_t* col, const CompiledQuery& q) {
        // a circuit of the query color exists iff no path of the other color joins inner and outer fringes
        ++gen_;
        std::vector<int>& st = stack_;
        st.clear();
        std::vector<char> outer(d_.cells.size(), 0);
        for (int c : q.outer_cells) outer[c] = 1;
        for (int c : q.inner_cells)
            if (col[c] != q.color && cstamp_[c] != gen_) {
                cstamp_[c] = gen_;
                st.push_back(c);
            }
        while (!st.empty()) {
            int u = st.back();
            st.pop_back();
            if (outer[u]) return false;
            for (int v : d_.nbr[u])
                if (v >= 0 && q.in_annulus[v] && col[v] != q.color && cstamp_[v] != gen_) {
                    cstamp_[v] = gen_;
                    st.push_back(v);
                }
        }
        return true;
    }

    // Solves the separating event for every vertex at once. Returns true iff a crossing exists.
    bool solve_separation(const std::uint8_t* col, const CompiledQuery& q) {
        const std::uint8_t color = q.color;
        has_crossing_ = false;
        ++gen_;
        // R0: uncolored cells reachable from the avoid arc
        cell_flood(q.avoid_cells, [&](int c) { return col[c] == color; }, r0_);
        // frontier: colored cells on the avoid arc or next to R0
        frontier_.clear();
        auto mark = [&](int c) {
            if (c >= 0 && col[c] == color && cstamp_[c] != gen_) {
                cstamp_[c] = gen_;
                cid_[c] = int(frontier_.size());
                frontier_.push_back(c);
            }
        };
        for (int c : q.avoid_cells) mark(c);
        for (int c : visited_)
            for (int e : d_.nbr[c]) mark(e);
        // graph: frontier cells, S = F, T = F+1, virtual edge S-T
        const int F = int(frontier_.size()), S = F, T = F + 1, N = F + 2;
        adj_start_.assign(N + 1, 0);
        adj_.clear();
        auto for_each_nb = [&](int u, auto&& f) {
            if (u == S) {
                for (int c : q.src_cells)
                    if (cstamp_[c] == gen_) f(cid_[c]);
                f(T);
            } else if (u == T) {
                for (int c : q.tgt_cells)
                    if (cstamp_[c] == gen_) f(cid_[c]);
                f(S);
            } else {
                int c = frontier_[u];
                for (int v : d_.nbr[c])
                    if (v >= 0 && cstamp_[v] == gen_) f(cid_[v]);
                if (q.is_src[c]) f(S);
                if (q.is_tgt[c]) f(T);
            }
        };
        for (int u = 0; u < N; ++u) {
            for_each_nb(u, [&](int w) { adj_.push_back(w); });
            adj_start_[u + 1] = int(adj_.size());
        }
        in_block_.assign(N, 0);
        if (!block_of_virtual_edge(N, S, T)) return false;
        has_crossing_ = true;
        // final flood around the block cells
        ++gen_;
        for (int u = 0; u < F; ++u)
            if (in_block_[u]) cstamp_[frontier_[u]] = gen_;
        cell_flood(q.avoid_cells, [&](int c) { return cstamp_[c] == gen_; }, reach_);
        reach_gen_ = gen_;
        return true;
    }

    // after solve_separation
    bool separated(int v, const CompiledQuery& q) const {
        if (q.is_corner[v]) return true;
        if (q.is_avoid[v]) return false;
        if (!has_crossing_) return false;
        for (int c : d_.vcells[v])
            if (c >= 0 && reach_[c] == reach_gen_) return false;
        return true;
    }

    bool has_crossing(const std::uint8_t* col, const CompiledQuery& q) {
        switch (q.kind) {
        case QueryKind::ARC_TO_ARC: return arc_to_arc(col, q);
        case QueryKind::CIRCUIT: return circuit(col, q);
        case QueryKind::SEPARATING_PATH:
            if (q.is_corner[q.witness]) return true;
            if (q.is_avoid[q.witness]) return false;
            solve_separation(col, q);
            return separated(q.witness, q);
        }
        return false;
    }

private:
    template <class Blocked>
    void cell_flood(const std::vector<int>& starts, Blocked&& blocked, std::vector<std::uint32_t>& stamp) {
        visited_.clear();
        for (int c : starts)
            if (stamp[c] != gen_ && !blocked(c)) {
                stamp[c] = gen_;
                visited_.push_back(c);
            }
        for (std::size_t i = 0; i < visited_.size(); ++i)
            for (int e : d_.nbr[visited_[i]])
                if (e >= 0 && stamp[e] != gen_ && !blocked(e)) {
                    stamp[e] = gen_;
                    visited_.push_back(e);
                }
    }

    // iterative Tarjan; marks in_block_ for the block holding edge (S,T)
    bool block_of_virtual_edge(int N, int S, int T) {
        disc_.assign(N, -1);
        low_.assign(N, 0);
        estack_.clear();
        struct Frame {
            int v, parent, it;
        };
        std::vector<Frame> fs;
        int timer = 0;
        bool found = false;
        disc_[S] = low_[S] = timer++;
        fs.push_back({S, -1, adj_start_[S]});
        while (!fs.empty()) {
            Frame& f = fs.back();
            int v = f.v;
            if (f.it < adj_start_[v + 1]) {
                int w = adj_[f.it++];
                if (disc_[w] < 0) {
                    estack_.push_back({v, w});
                    disc_[w] = low_[w] = timer++;
                    fs.push_back({w, v, adj_start_[w]});
                } else if (w != f.parent && disc_[w] < disc_[v]) {
                    estack_.push_back({v, w});
                    low_[v] = std::min(low_[v], disc_[w]);
                }
                continue;
            }
            int parent = f.parent;
            fs.pop_back();
            if (parent < 0) break;
            low_[parent] = std::min(low_[parent], low_[v]);
            if (low_[v] >= disc_[parent]) {
                // pop one block
                std::size_t k = estack_.size();
                while (k > 0 && !(estack_[k - 1][0] == parent && estack_[k - 1][1] == v)) --k;
                bool hit = false;
                for (std::size_t i = k - 1; i < estack_.size(); ++i) {
                    auto e = estack_[i];
                    if ((e[0] == S && e[1] == T) || (e[0] == T && e[1] == S)) hit = true;
                }
                if (hit) {
                    for (std::size_t i = k - 1; i < estack_.size(); ++i) {
                        in_block_[estack_[i][0]] = 1;
                        in_block_[estack_[i][1]] = 1;
                    }
                    found = true;
                }
                estack_.resize(k - 1);
            }
        }
        if (!found) return false;
        // block must contain at least one cell besides S and T
        for (int u = 0; u < N - 2; ++u)
            if (in_block_[u]) return true;
        return false;
    }

    const DiscreteDomain& d_;
    std::uint32_t gen_ = 0, reach_gen_ = 0;
    std::vector<std::uint32_t> r0_, reach_, cstamp_;
    std::vector<int> cid_, frontier_, visited_, stack_;
    std::vector<int> adj_start_, adj_, disc_, low_;
    std::vector<char> in_block_;
    std::vector<std::array<int, 2>> estack_;
    bool has_crossing_ = false;
};

inline bool has_crossing(const DiscreteDomain& d, const Coloring& col, const CrossingQuery& q) {
    CompiledQuery c = compile_query(d, q, col.forced);
    CrossingSolver s(d);
    return s.has_crossing(col.colors.data(), c);
}

inline constexpr std::uint64_t kSampleBlock = 4096;

inline ProbEstimate estimate(const DiscreteDomain& d, const CrossingQuery& q, std::uint64_t samples, std::uint64_t stream,
                             std::array<int, 4> forced = {-1, -1, -1, -1}) {
    if (samples < 1) throw Error(ErrorCode::BAD_CONFIG, "samples must be positive");
    CompiledQuery c = compile_query(d, q, forced);
    CellSampler sampler(d);
    auto key = stream_key(stream);
    std::uint64_t nb = (samples + kSampleBlock - 1) / kSampleBlock;
    std::vector<std::uint64_t> hits(nb, 0);
    for_each_block(samples, kSampleBlock, [&](std::uint64_t b, std::uint64_t i0, std::uint64_t i1, int) {
        CrossingSolver solver(d);
        std::vector<std::uint8_t> col(d.cells.size());
        std::uint64_t h = 0;
        for (std::uint64_t i = i0; i < i1; ++i) {
            sampler.sample(key, i, col.data());
            h += solver.has_crossing(col.data(), c);
        }
        hits[b] = h;
    });
    return ProbEstimate::from(std::accumulate(hits.begin(), hits.end(), std::uint64_t(0)), samples);
}

inline Rational brute_force(const DiscreteDomain& d, const CrossingQuery& q, std::array<int, 4> forced = {-1, -1, -1, -1}) {
    const int N = d.size();
    if (N > 25) throw Error(ErrorCode::TOO_LARGE, "brute force limited to 25 cells");
    CompiledQuery c = compile_query(d, q, forced);
    CrossingSolver solver(d);
    std::vector<std::uint8_t> col(N);
    std::uint64_t hits = 0, total = std::uint64_t(1) << N;
    for (std::uint64_t m = 0; m < total; ++m) {
        for (int i = 0; i < N; ++i) col[i] = (m >> i) & 1u;
        hits += solver.has_crossing(col.data(), c);
    }
    return make_rational(hits, total);
}

}  // namespace cardylab
