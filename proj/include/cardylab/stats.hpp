#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "cardylab/rng.hpp"

namespace cardylab {

struct LineFit {
    double slope = 0, intercept = 0;
};

// weighted least squares y = a + b x; nullopt when x has no spread
inline std::optional<LineFit> linear_fit(const std::vector<double>& x, const std::vector<double>& y,
                                         const std::vector<double>* w = nullptr) {
    double sw = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double wi = w ? (*w)[i] : 1.0;
        sw += wi;
        sx += wi * x[i];
        sy += wi * y[i];
    }
    if (sw <= 0) return std::nullopt;
    double mx = sx / sw, my = sy / sw, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double wi = w ? (*w)[i] : 1.0;
        sxx += wi * (x[i] - mx) * (x[i] - mx);
        sxy += wi * (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 1e-300 * sw)) return std::nullopt;
    double b = sxy / sxx;
    return LineFit{b, my - b * mx};
}

inline double percentile(std::vector<double> v, double p) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    double pos = p * (v.size() - 1);
    std::size_t i = std::size_t(std::floor(pos));
    std::size_t j = std::min(i + 1, v.size() - 1);
    double t = pos - i;
    return v[i] * (1 - t) + v[j] * t;
}

struct Interval {
    double lo = 0, hi = 0;
    bool contains(double v) const { return lo <= v && v <= hi; }
};

// percentile bootstrap of a fitted slope by resampling points with replacement
inline Interval bootstrap_slope(const std::vector<double>& x, const std::vector<double>& y, int reps,
                                std::uint64_t stream, double level = 0.95) {
    PhiloxEngine eng(stream, 0xB007);
    std::vector<double> slopes;
    std::vector<double> bx(x.size()), by(y.size());
    for (int b = 0; b < reps; ++b) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            std::size_t k = eng.below(std::uint32_t(x.size()));
            bx[i] = x[k];
            by[i] = y[k];
        }
        if (auto f = linear_fit(bx, by)) slopes.push_back(f->slope);
    }
    double a = (1 - level) / 2;
    return {percentile(slopes, a), percentile(slopes, 1 - a)};
}

}  // namespace cardylab
