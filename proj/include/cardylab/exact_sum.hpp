#pragma once

#include <cmath>
#include <complex>
#include <vector>

namespace cardylab {

// Shewchuk-style expansion: the running sum is held exactly as a list of
// non-overlapping partials, so the final value is the correctly rounded sum.
class ExactSum {
public:
    void add(double x) {
        std::size_t i = 0;
        for (double y : partials_) {
            if (std::fabs(x) < std::fabs(y)) std::swap(x, y);
            double hi = x + y;
            double lo = y - (hi - x);
            if (lo != 0.0) partials_[i++] = lo;
            x = hi;
        }
        partials_.resize(i);
        partials_.push_back(x);
    }

    // exact product of two doubles folded in (Dekker split via fma)
    void add_product(double a, double b) {
        double p = a * b;
        double e = std::fma(a, b, -p);
        add(p);
        if (e != 0.0) add(e);
    }

    void merge(const ExactSum& o) {
        for (double p : o.partials_) add(p);
    }

    double value() const {
        // fsum-style final rounding
        if (partials_.empty()) return 0.0;
        std::size_t n = partials_.size();
        double hi = partials_[n - 1];
        double lo = 0.0;
        std::size_t k = n - 1;
        while (k > 0) {
            double x = hi;
            double y = partials_[--k];
            hi = x + y;
            double yr = hi - x;
            lo = y - yr;
            if (lo != 0.0) break;
        }
        if (k > 0 && ((lo < 0.0 && partials_[k - 1] < 0.0) || (lo > 0.0 && partials_[k - 1] > 0.0))) {
            double y = lo * 2.0;
            double x = hi + y;
            if (y == x - hi) hi = x;
        }
        return hi;
    }

    bool is_zero() const { return value() == 0.0; }

private:
    std::vector<double> partials_;
};

// Exact accumulator for sums of s * dz with dz = eps/2 * (sqrt3*dX + i*dY), dX,dY integers.
// Holds Re(s)dX, Im(s)dY, Re(s)dY, Im(s)dX separately so sqrt3 and eps enter only at readout.
class LatticeIntegral {
public:
    void add_edge(std::complex<double> s, int dX, int dY) {
        a_.add_product(s.real(), dX);
        b_.add_product(s.imag(), dY);
        c_.add_product(s.real(), dY);
        d_.add_product(s.imag(), dX);
    }

    void merge(const LatticeIntegral& o) {
        a_.merge(o.a_);
        b_.merge(o.b_);
        c_.merge(o.c_);
        d_.merge(o.d_);
    }

    // value at lattice scale eps = 1/n
    std::complex<double> value(int n) const {
        const double s3 = std::sqrt(3.0);
        double h = 0.5 / n;
        return {h * (s3 * a_.value() - b_.value()), h * (c_.value() + s3 * d_.value())};
    }

    bool operator==(const LatticeIntegral& o) const {
        return a_.value() == o.a_.value() && b_.value() == o.b_.value() && c_.value() == o.c_.value() &&
               d_.value() == o.d_.value();
    }

private:
    ExactSum a_, b_, c_, d_;
};

}  // namespace cardylab
