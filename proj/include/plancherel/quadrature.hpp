#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <numbers>
#include <thread>
#include <vector>

#include "plancherel/error.hpp"

namespace plancherel::quad {

/// One-dimensional rule: nodes and weights of equal length.
struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const noexcept { return nodes.size(); }

    template <class F>
    auto integrate(F&& f) const {
        using R = decltype(f(0.0));
        R sum{};
        for (std::size_t i = 0; i < nodes.size(); ++i)
            sum += weights[i] * f(nodes[i]);
        return sum;
    }
};

/// Gauss-Legendre rule with n nodes on [a, b] (Newton iteration on P_n).
inline Rule gauss_legendre(int n, double a = -1.0, double b = 1.0) {
    if (n < 1)
        throw ParameterError("gauss_legendre: need at least one node");
    Rule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) {
                p1 = x;
                p0 = 1.0;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16)
                break;
        }
        {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        r.nodes[i] = mid - half * x;
        r.weights[i] = half * w;
        r.nodes[n - 1 - i] = mid + half * x;
        r.weights[n - 1 - i] = half * w;
    }
    if (n == 1) {
        r.nodes[0] = mid;
        r.weights[0] = 2.0 * half;
    }
    return r;
}

/// Composite Gauss-Legendre: `panels` equal panels of `order` nodes on [a, b].
inline Rule composite_gauss_legendre(int panels, int order, double a, double b) {
    if (panels < 1)
        throw ParameterError("composite_gauss_legendre: need at least one panel");
    Rule out;
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const Rule g = gauss_legendre(order, a + p * h, a + (p + 1) * h);
        out.nodes.insert(out.nodes.end(), g.nodes.begin(), g.nodes.end());
        out.weights.insert(out.weights.end(), g.weights.begin(), g.weights.end());
    }
    return out;
}

/// Trapezoidal rule on a full period [offset, offset + 2 pi).
inline Rule periodic_trapezoid(int n, double offset = 0.0) {
    if (n < 1)
        throw ParameterError("periodic_trapezoid: need at least one node");
    Rule r;
    r.nodes.resize(n);
    r.weights.assign(n, 2.0 * std::numbers::pi / n);
    for (int i = 0; i < n; ++i)
        r.nodes[i] = offset + 2.0 * std::numbers::pi * i / n;
    return r;
}

inline constexpr double kMaxLogAbscissa = 138.0;

/// Double-exponential (sinh-sinh) rule on the whole real line.
///
/// x = s * sinh(pi/2 sinh t) with t on a uniform grid of step h, |t| <= t_max.
/// Algebraically decaying integrands converge geometrically in 1/h. The
/// abscissae are capped at |x| <= e^138 (about 1e60) so that products of a
/// few matrix entries stay finite.
inline Rule sinh_sinh(double h, double t_max, double scale = 1.0) {
    if (!(h > 0.0) || !(t_max > 0.0))
        throw ParameterError("sinh_sinh: step and range must be positive");
    Rule r;
    const int k_max = static_cast<int>(std::floor(t_max / h));
    const double half_pi = 0.5 * std::numbers::pi;
    for (int k = -k_max; k <= k_max; ++k) {
        const double t = k * h;
        const double u = half_pi * std::sinh(t);
        if (std::abs(u) > kMaxLogAbscissa)
            continue;
        r.nodes.push_back(scale * std::sinh(u));
        r.weights.push_back(scale * h * half_pi * std::cosh(t) * std::cosh(u));
    }
    return r;
}

/// Double-exponential (exp-sinh) rule on [0, inf): x = s * exp(pi/2 sinh t).
inline Rule exp_sinh(double h, double t_max, double scale = 1.0) {
    if (!(h > 0.0) || !(t_max > 0.0))
        throw ParameterError("exp_sinh: step and range must be positive");
    Rule r;
    const int k_max = static_cast<int>(std::floor(t_max / h));
    const double half_pi = 0.5 * std::numbers::pi;
    for (int k = -k_max; k <= k_max; ++k) {
        const double t = k * h;
        const double u = half_pi * std::sinh(t);
        if (u > kMaxLogAbscissa || u < -700.0)
            continue;
        const double x = scale * std::exp(u);
        r.nodes.push_back(x);
        r.weights.push_back(h * half_pi * std::cosh(t) * x);
    }
    return r;
}

/// t_max for which the sinh-sinh abscissae reach |x| = exp(log_x).
inline double sinh_sinh_range_for_log_extent(double log_x) {
    const double capped = std::min(std::max(log_x, 1.0), kMaxLogAbscissa - 1.0);
    // sinh(pi/2 sinh t) = X  ->  pi/2 sinh t ~ log(2X)
    return std::asinh((capped + std::log(2.0)) / (0.5 * std::numbers::pi));
}

/// Smallest t_max so that an |x|^{-1-2 decay} tail beyond the sinh-sinh
/// cutoff carries relative mass below `tail_tol`. `log_shift` moves the
/// point where the tail starts out to exp(log_shift).
inline double sinh_sinh_range_for_decay(double decay, double tail_tol = 1e-13, double log_shift = 0.0) {
    if (!(decay > 0.0))
        throw ConvergenceDomainError("integrand tail does not decay");
    // tail ~ X^{-2 decay} / (2 decay)
    const double log_x = -std::log(tail_tol * 2.0 * decay) / (2.0 * decay);
    return sinh_sinh_range_for_log_extent(log_x + log_shift);
}

/// Calls body(i) for i in [0, n) on up to `threads` workers. Each index is
/// processed exactly once; results written to disjoint slots stay
/// deterministic regardless of the worker count.
template <class Body>
void parallel_for(std::size_t n, Body&& body, unsigned threads = 0) {
    if (threads == 0)
        threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += threads)
                    body(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool)
        th.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

} // namespace plancherel::quad
