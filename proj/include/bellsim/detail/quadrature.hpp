#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

namespace bellsim::detail {

/// Adaptive Simpson on [a, b]. The integrands here are smooth between known
/// breakpoints (pulse edge, gate edges), which callers split on beforehand.
template <typename F>
std::complex<double> adaptive_simpson_segment(const F& f, double a, double b, double tol, int depth) {
    const auto simpson = [&f](double lo, double hi) {
        const double mid = 0.5 * (lo + hi);
        return (hi - lo) / 6.0 * (f(lo) + 4.0 * f(mid) + f(hi));
    };
    struct Frame {
        double a, b;
        std::complex<double> whole;
        double tol;
        int depth;
    };
    std::complex<double> total = 0.0;
    std::vector<Frame> stack;
    stack.push_back({a, b, simpson(a, b), tol, depth});
    while (!stack.empty()) {
        Frame fr = stack.back();
        stack.pop_back();
        const double m = 0.5 * (fr.a + fr.b);
        const std::complex<double> left = simpson(fr.a, m);
        const std::complex<double> right = simpson(m, fr.b);
        const std::complex<double> err = left + right - fr.whole;
        if (std::abs(err) <= 15.0 * fr.tol || fr.b - fr.a < 1e-14) {
            total += left + right + err / 15.0;
            continue;
        }
        if (fr.depth <= 0)
            throw std::runtime_error("numerical integration did not converge to tolerance");
        stack.push_back({fr.a, m, left, 0.5 * fr.tol, fr.depth - 1});
        stack.push_back({m, fr.b, right, 0.5 * fr.tol, fr.depth - 1});
    }
    return total;
}

/// Integrate f over [a, b] split at the given breakpoints (values outside
/// (a, b) are ignored). Absolute tolerance.
template <typename F>
std::complex<double> integrate(const F& f, double a, double b, const std::vector<double>& breakpoints,
                               double tol = 1e-11) {
    if (!(b > a)) return 0.0;
    std::vector<double> knots{a, b};
    for (double x : breakpoints)
        if (x > a && x < b) knots.push_back(x);
    std::sort(knots.begin(), knots.end());
    std::complex<double> total = 0.0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        const double lo = knots[i], hi = knots[i + 1];
        if (hi - lo < 1e-15) continue;
        total += adaptive_simpson_segment(f, lo, hi, tol * (hi - lo) / (b - a), 48);
    }
    return total;
}

} // namespace bellsim::detail
