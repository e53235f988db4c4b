#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "cardylab/domain.hpp"
#include "cardylab/error.hpp"
#include "cardylab/stats.hpp"

namespace cardylab {

struct TriangleT {
    static constexpr double kHalfSqrt3 = 0.86602540378443864676;
    static std::array<std::complex<double>, 3> vertices() {
        return {std::complex<double>(1, 0), {-0.5, kHalfSqrt3}, {-0.5, -kHalfSqrt3}};
    }
    // crossing value read off a point of the triangle
    static double crossing_from(std::complex<double> h) { return -(2 / std::sqrt(3.0)) * h.imag(); }
};

namespace detail {

// Gamma(2/3) / Gamma(1/3)^2
inline double cardy_prefactor() { return std::tgamma(2.0 / 3) / (std::tgamma(1.0 / 3) * std::tgamma(1.0 / 3)); }

// eta^{1/3} 2F1(1/3, 2/3; 4/3; eta) times 3, summed until terms drop below 1e-17 relative
inline double cardy_series(double eta) {
    double term = 1, sum = 1;
    for (int k = 0; k < 2000; ++k) {
        term *= (1.0 / 3 + k) * (2.0 / 3 + k) / ((4.0 / 3 + k) * (k + 1)) * eta;
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return 3 * std::cbrt(eta) * sum;
}

}  // namespace detail

// probability of a crossing between the first and third arcs of a conformal rectangle with cross ratio eta.
// The series is used up to eta = 1/2 and the complement identity beyond, so both ends keep full accuracy.
inline double cardy_rectangle(double eta) {
    if (!(eta > 0 && eta < 1)) throw Error(ErrorCode::OUT_OF_RANGE, "cross ratio must lie in (0,1)");
    if (eta <= 0.5) return detail::cardy_prefactor() * detail::cardy_series(eta);
    return 1 - detail::cardy_prefactor() * detail::cardy_series(1 - eta);
}

// Cross ratio for an axis-parallel rectangle of width `aspect` and height 1 with its corners marked
// counterclockwise from the bottom left. Cardy's value at it is the probability of joining the two
// sides of length `aspect`. The Schwarz-Christoffel modulus k solves 2K(k)/K'(k) = aspect; the
// horizontal-crossing cross ratio is ((1-k)/(1+k))^2 and we return its complement.
inline double rectangle_cross_ratio(double aspect) {
    if (!(aspect > 0)) throw Error(ErrorCode::OUT_OF_RANGE, "aspect must be positive");
    auto ratio = [](double k) { return 2 * std::comp_ellint_1(k) / std::comp_ellint_1(std::sqrt((1 - k) * (1 + k))); };
    double lo = 0, hi = 1;
    // ratio increases from 0 to infinity on (0,1)
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid <= 0 || mid >= 1) break;
        (ratio(mid) < aspect ? lo : hi) = mid;
        if (hi - lo < 1e-17) break;
    }
    double k = 0.5 * (lo + hi);
    return 4 * k / ((1 + k) * (1 + k));  // 1 - ((1-k)/(1+k))^2 without cancellation
}

struct CInfinity {
    bool supported = false;
    double value = std::nan("");
};

inline CInfinity c_infinity(const ContinuumDomain& dom) {
    const auto& g = dom.generator;
    if (g.name == "square" || g.name == "rhombus") return {true, 0.5};
    if (g.name == "rectangle") return {true, cardy_rectangle(rectangle_cross_ratio(g.param("aspect", 2.0)))};
    return {};
}

// ------------------------------------------------------------ power laws

struct RateReport {
    std::vector<int> n_values;
    std::vector<double> errors, stderrs;
    std::vector<bool> noise_flags;  // true when the error is within 3 stderr of zero
    double psi_hat = std::nan(""), intercept = std::nan("");
    Interval ci{std::nan(""), std::nan("")};
    std::size_t used = 0;
};

struct PowerPoint {
    int n = 1;
    double value = 0, stderr_ = 0;
};

// value ~ c n^-psi by weighted least squares on log-log, over points above the noise floor.
// CI: parametric bootstrap from the error bars, or case resampling when no error bars are given.
inline RateReport power_law_fit(const std::vector<PowerPoint>& pts, std::uint64_t stream = 0x5053ull, int reps = 2000) {
    RateReport r;
    std::vector<double> x, y, w, se;
    for (const auto& p : pts) {
        r.n_values.push_back(p.n);
        r.errors.push_back(p.value);
        r.stderrs.push_back(p.stderr_);
        bool noisy = !(p.value > 3 * p.stderr_) || p.value <= 0;
        r.noise_flags.push_back(noisy);
        if (noisy) continue;
        x.push_back(std::log(double(p.n)));
        y.push_back(std::log(p.value));
        se.push_back(p.stderr_);
        double sl = p.stderr_ / p.value;  // stderr of the log
        w.push_back(sl > 0 ? 1 / (sl * sl) : 1.0);
    }
    r.used = x.size();
    if (x.size() < 3) throw Error(ErrorCode::INSUFFICIENT_POINTS, "fewer than 3 points above the noise floor");
    bool weighted = std::any_of(se.begin(), se.end(), [](double s) { return s > 0; });
    if (weighted && std::any_of(se.begin(), se.end(), [](double s) { return s == 0; })) w.assign(w.size(), 1.0);
    auto f = linear_fit(x, y, &w);
    if (!f) throw Error(ErrorCode::DEGENERATE_FIT, "n values do not spread");
    r.psi_hat = -f->slope;
    r.intercept = std::exp(f->intercept);
    if (!weighted) {
        Interval s = bootstrap_slope(x, y, reps, stream);
        r.ci = {-s.hi, -s.lo};
        return r;
    }
    PhiloxEngine eng(stream, 0xC1);
    std::vector<double> psis, by(y.size());
    for (int b = 0; b < reps; ++b) {
        bool ok = true;
        for (std::size_t i = 0; i < y.size(); ++i) {
            double v = std::exp(y[i]) + se[i] * eng.normal();
            if (v <= 0) {
                ok = false;
                break;
            }
            by[i] = std::log(v);
        }
        if (!ok) continue;
        if (auto g = linear_fit(x, by, &w)) psis.push_back(-g->slope);
    }
    r.ci = {percentile(psis, 0.025), percentile(psis, 0.975)};
    return r;
}

}  // namespace cardylab
