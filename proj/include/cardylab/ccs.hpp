#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "cardylab/percolation.hpp"
#include "cardylab/stats.hpp"

namespace cardylab {

using cplx = std::complex<double>;

inline const cplx kTau{-0.5, kSqrt3 / 2};
inline const cplx kTau2{-0.5, -kSqrt3 / 2};

// Per-sample linear functional of the three indicator fields:
// value = sum_i wB[i]*1{B at pt i} + wC[i]*1{C at pt i} + wD[i]*1{D at pt i}.
struct LinearFunctional {
    std::vector<cplx> wB, wC, wD;  // indexed like CcsField::points

    // same weights w applied to S_n = S_B + tau S_C + tau^2 S_D
    static LinearFunctional of_sn(const std::vector<cplx>& w) {
        LinearFunctional f;
        f.wB = w;
        f.wC.resize(w.size());
        f.wD.resize(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) {
            f.wC[i] = w[i] * kTau;
            f.wD[i] = w[i] * kTau2;
        }
        return f;
    }
};

// mean and covariance of a complex per-sample statistic
struct ComplexEstimate {
    cplx mean{};
    double var_re = 0, var_im = 0, cov = 0;  // of the mean
    std::uint64_t samples = 0;

    double stderr_re() const { return std::sqrt(var_re); }
    double stderr_im() const { return std::sqrt(var_im); }
    // delta-method stderr of |mean|; falls back to the total spread when the mean is ~0
    double stderr_abs() const {
        double a = std::abs(mean);
        if (a < 1e-300) return std::sqrt(var_re + var_im);
        double ur = mean.real() / a, ui = mean.imag() / a;
        return std::sqrt(std::max(0.0, ur * ur * var_re + ui * ui * var_im + 2 * ur * ui * cov));
    }
};

struct CcsField {
    int n = 0;
    std::vector<int> points;  // vertex ids
    std::vector<Point> xy;
    std::vector<ProbEstimate> sB, sC, sD;
    std::vector<cplx> sn;
    std::uint64_t samples = 0;
    std::vector<ComplexEstimate> functionals;

    int index_of(int vertex) const {
        auto it = std::find(points.begin(), points.end(), vertex);
        return it == points.end() ? -1 : int(it - points.begin());
    }
};

struct CcsOptions {
    Color color = Color::YELLOW;
    std::vector<LinearFunctional> functionals;
};

namespace detail {

struct FunctionalAcc {
    double sr = 0, si = 0, srr = 0, sii = 0, sri = 0;
    void add(cplx v) {
        sr += v.real();
        si += v.imag();
        srr += v.real() * v.real();
        sii += v.imag() * v.imag();
        sri += v.real() * v.imag();
    }
    void merge(const FunctionalAcc& o) {
        sr += o.sr;
        si += o.si;
        srr += o.srr;
        sii += o.sii;
        sri += o.sri;
    }
    ComplexEstimate finish(std::uint64_t N) const {
        ComplexEstimate e;
        e.samples = N;
        double mr = sr / N, mi = si / N;
        e.mean = {mr, mi};
        if (N > 1) {
            double f = 1.0 / (double(N) * double(N - 1));
            e.var_re = std::max(0.0, (srr - N * mr * mr) * f);
            e.var_im = std::max(0.0, (sii - N * mi * mi) * f);
            e.cov = (sri - N * mr * mi) * f;
        }
        return e;
    }
};

}  // namespace detail

// S_B, S_C, S_D at the given vertices from common samples: every event is evaluated on the same coloring.
inline CcsField estimate_ccs(const DiscreteDomain& d, const std::vector<int>& pts, std::uint64_t samples,
                             std::uint64_t stream, const CcsOptions& opt = {}) {
    if (samples < 1) throw Error(ErrorCode::BAD_CONFIG, "samples must be positive");
    for (int v : pts)
        if (v < 0 || v >= int(d.vertices.size())) throw Error(ErrorCode::POINT_OUTSIDE_DOMAIN, "point is not a domain vertex");
    const std::size_t P = pts.size(), F = opt.functionals.size();
    for (const auto& f : opt.functionals)
        if (f.wB.size() != P || f.wC.size() != P || f.wD.size() != P)
            throw Error(ErrorCode::BAD_CONFIG, "functional weights do not match the point set");
    std::array<CompiledQuery, 3> cq;
    for (int k = 0; k < 3; ++k) {
        auto q = s_event_query(d, k, pts.empty() ? 0 : pts[0]);
        q.color = opt.color;
        cq[k] = compile_query(d, q);
    }
    CellSampler sampler(d);
    auto key = stream_key(stream);
    std::uint64_t nb = (samples + kSampleBlock - 1) / kSampleBlock;
    struct Partial {
        std::vector<std::uint64_t> hits;  // 3 * P
        std::vector<detail::FunctionalAcc> acc;
    };
    std::vector<Partial> parts(nb);
    for_each_block(samples, kSampleBlock, [&](std::uint64_t b, std::uint64_t i0, std::uint64_t i1, int) {
        CrossingSolver solver(d);
        std::vector<std::uint8_t> col(d.cells.size());
        Partial p;
        p.hits.assign(3 * P, 0);
        p.acc.assign(F, {});
        std::vector<std::uint8_t> ind(3 * P);
        for (std::uint64_t i = i0; i < i1; ++i) {
            sampler.sample(key, i, col.data());
            for (int k = 0; k < 3; ++k) {
                solver.solve_separation(col.data(), cq[k]);
                for (std::size_t j = 0; j < P; ++j) {
                    std::uint8_t s = solver.separated(pts[j], cq[k]);
                    ind[k * P + j] = s;
                    p.hits[k * P + j] += s;
                }
            }
            for (std::size_t f = 0; f < F; ++f) {
                const auto& fn = opt.functionals[f];
                cplx v{};
                for (std::size_t j = 0; j < P; ++j) {
                    if (ind[j]) v += fn.wB[j];
                    if (ind[P + j]) v += fn.wC[j];
                    if (ind[2 * P + j]) v += fn.wD[j];
                }
                p.acc[f].add(v);
            }
        }
        parts[b] = std::move(p);
    });
    std::vector<std::uint64_t> hits(3 * P, 0);
    std::vector<detail::FunctionalAcc> acc(F);
    for (const auto& p : parts) {
        for (std::size_t j = 0; j < 3 * P; ++j) hits[j] += p.hits[j];
        for (std::size_t f = 0; f < F; ++f) acc[f].merge(p.acc[f]);
    }
    CcsField field;
    field.n = d.n;
    field.points = pts;
    field.samples = samples;
    for (std::size_t j = 0; j < P; ++j) {
        field.xy.push_back(d.vertex_point(pts[j]));
        field.sB.push_back(ProbEstimate::from(hits[j], samples));
        field.sC.push_back(ProbEstimate::from(hits[P + j], samples));
        field.sD.push_back(ProbEstimate::from(hits[2 * P + j], samples));
        field.sn.push_back(field.sB[j].mean + kTau * field.sC[j].mean + kTau2 * field.sD[j].mean);
    }
    for (std::size_t f = 0; f < F; ++f) field.functionals.push_back(acc[f].finish(samples));
    return field;
}

enum class CrossingRoute { DIRECT, IMAGINARY };

struct CrossingResult {
    double c_n = 0, stderr_ = 0;
    CrossingRoute via = CrossingRoute::DIRECT;
    double direct = 0;     // S_D(A_n)
    double imaginary = 0;  // -(2/sqrt3) Im S_n(A_n) = S_D - S_C, formed from integer hit counts
    bool routes_disagree = false;
};

inline CrossingResult crossing_probability(const CcsField& field, int vertex, CrossingRoute via = CrossingRoute::DIRECT) {
    int i = field.index_of(vertex);
    if (i < 0) throw Error(ErrorCode::POINT_NOT_ESTIMATED, "vertex not in the estimated point set");
    CrossingResult r;
    r.via = via;
    r.direct = field.sD[i].mean;
    r.imaginary = (double(field.sD[i].hits) - double(field.sC[i].hits)) / double(field.samples);
    r.routes_disagree = field.sC[i].hits != 0;
    r.c_n = via == CrossingRoute::DIRECT ? r.direct : r.imaginary;
    // S_D - S_C stderr from the larger of the two binomial spreads is not exact; direct route is the reported one
    r.stderr_ = field.sD[i].stderr_;
    if (via == CrossingRoute::IMAGINARY) r.stderr_ = std::hypot(field.sD[i].stderr_, field.sC[i].stderr_);
    return r;
}

// the same two routes on plain component values
inline CrossingResult crossing_from_values(double sB, double sC, double sD) {
    CrossingResult r;
    r.direct = sD;
    cplx s = sB + kTau * sC + kTau2 * sD;
    r.imaginary = -(2 / kSqrt3) * s.imag();
    r.routes_disagree = sC != 0;
    r.c_n = r.direct;
    return r;
}

// ------------------------------------------------------------ Hoelder profile

struct HolderFit {
    bool degenerate = false;
    double sigma = std::nan("");
    Interval ci{std::nan(""), std::nan("")};
    std::size_t pairs = 0, bins = 0;
};

inline constexpr int kMinBinPairs = 5;

// Regression of log mean|f(z)-f(w)| on log|z-w| over pairs closer than psi, in log-spaced distance bins.
inline HolderFit holder_profile(const std::vector<Point>& xy, const std::vector<cplx>& val, double psi,
                                std::uint64_t stream = 0x484F4C44ull, int nbins = 8) {
    std::vector<double> ld, lv;
    double dmin = 1e300, dmax = 0;
    for (std::size_t i = 0; i < xy.size(); ++i)
        for (std::size_t j = i + 1; j < xy.size(); ++j) {
            double dz = norm(xy[i] - xy[j]);
            if (dz <= 0 || dz >= psi) continue;
            ld.push_back(std::log(dz));
            lv.push_back(std::abs(val[i] - val[j]));
            dmin = std::min(dmin, dz);
            dmax = std::max(dmax, dz);
        }
    HolderFit out;
    out.pairs = ld.size();
    if (ld.size() < 10) throw Error(ErrorCode::INSUFFICIENT_PAIRS, "fewer than 10 point pairs within psi");
    if (std::all_of(lv.begin(), lv.end(), [](double v) { return v == 0; })) {
        out.degenerate = true;
        return out;
    }
    double l0 = std::log(dmin), l1 = std::log(dmax) + 1e-12;
    auto binned = [&](const std::vector<std::size_t>& idx, std::vector<double>& bx, std::vector<double>& by) {
        std::vector<double> sd(nbins, 0), sv(nbins, 0);
        std::vector<int> cnt(nbins, 0);
        for (auto k : idx) {
            int b = l1 > l0 ? std::min(nbins - 1, int((ld[k] - l0) / (l1 - l0) * nbins)) : 0;
            sd[b] += ld[k];
            sv[b] += lv[k];
            ++cnt[b];
        }
        bx.clear();
        by.clear();
        for (int b = 0; b < nbins; ++b)
            if (cnt[b] >= kMinBinPairs && sv[b] > 0) {
                bx.push_back(sd[b] / cnt[b]);
                by.push_back(std::log(sv[b] / cnt[b]));
            }
    };
    std::vector<std::size_t> all(ld.size());
    for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
    std::vector<double> bx, by;
    binned(all, bx, by);
    out.bins = bx.size();
    auto f = bx.size() >= 3 ? linear_fit(bx, by) : std::nullopt;
    if (!f) throw Error(ErrorCode::INSUFFICIENT_PAIRS, "pairs span fewer than 3 distance bins");
    out.sigma = f->slope;
    // bootstrap over pairs
    PhiloxEngine eng(stream, 0x5157);
    std::vector<double> slopes;
    std::vector<std::size_t> pick(all.size());
    for (int rep = 0; rep < 400; ++rep) {
        for (auto& k : pick) k = eng.below(std::uint32_t(all.size()));
        binned(pick, bx, by);
        if (bx.size() >= 3)
            if (auto g = linear_fit(bx, by)) slopes.push_back(g->slope);
    }
    out.ci = {percentile(slopes, 0.025), percentile(slopes, 0.975)};
    return out;
}

inline HolderFit holder_profile(const CcsField& f, double psi, std::uint64_t stream = 0x484F4C44ull) {
    if (f.points.size() < 50) throw Error(ErrorCode::INSUFFICIENT_PAIRS, "need at least 50 points");
    return holder_profile(f.xy, f.sn, psi, stream);
}

// ------------------------------------------------------------ export

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string ccs_csv(const CcsField& f) {
    std::string out = "x,y,sB,sB_err,sC,sC_err,sD,sD_err,re_Sn,im_Sn\n";
    for (std::size_t i = 0; i < f.points.size(); ++i) {
        for (double v : {f.xy[i].x, f.xy[i].y, f.sB[i].mean, f.sB[i].stderr_, f.sC[i].mean, f.sC[i].stderr_, f.sD[i].mean,
                         f.sD[i].stderr_, f.sn[i].real(), f.sn[i].imag()}) {
            out += format_double(v);
            out += ',';
        }
        out.back() = '\n';
    }
    return out;
}

}  // namespace cardylab
