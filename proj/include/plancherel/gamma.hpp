#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "plancherel/error.hpp"

namespace plancherel {

using cplx = std::complex<double>;

namespace detail {

// Lanczos coefficients, g = 7, n = 9.
inline constexpr double kLanczosG = 7.0;
inline constexpr std::array<double, 9> kLanczosCoef = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

inline cplx lanczos_log_gamma(cplx z) {
    // valid for Re z >= 1/2
    z -= 1.0;
    cplx x = kLanczosCoef[0];
    for (int i = 1; i < 9; ++i)
        x += kLanczosCoef[i] / (z + static_cast<double>(i));
    const cplx t = z + kLanczosG + 0.5;
    return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t + std::log(x);
}

// log sin(pi z) without overflow for large |Im z|.
inline cplx log_sin_pi(cplx z) {
    const double pi = std::numbers::pi;
    const cplx i(0.0, 1.0);
    if (std::abs(z.imag()) < 20.0)
        return std::log(std::sin(pi * z));
    if (z.imag() > 0.0) {
        // sin(pi z) = e^{-i pi z} (e^{2 i pi z} - 1) / (2i)
        return -i * pi * z + std::log((std::exp(2.0 * i * pi * z) - 1.0) / (2.0 * i));
    }
    // sin(pi z) = e^{i pi z} (1 - e^{-2 i pi z}) / (2i)
    return i * pi * z + std::log((1.0 - std::exp(-2.0 * i * pi * z)) / (2.0 * i));
}

} // namespace detail

/// Distance from z to the nearest non-positive integer (infinity if Re z > 0.5).
inline double distance_to_gamma_pole(cplx z) {
    if (z.real() > 0.5)
        return std::numeric_limits<double>::infinity();
    const double n = std::round(z.real());
    if (n > 0.0)
        return std::numeric_limits<double>::infinity();
    return std::abs(z - cplx(n, 0.0));
}

/// Complex log-Gamma with exp(gamma_ln(z)) = Gamma(z).
///
/// For Re z >= 1/2 the imaginary part is the continuous branch that is real
/// on the positive axis; left of that line the reflection formula is used.
/// Throws PoleError within `pole_tol` of a non-positive integer.
inline cplx gamma_ln(cplx z, double pole_tol = 1e-12) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        throw ParameterError("gamma_ln: non-finite argument");
    if (distance_to_gamma_pole(z) < pole_tol)
        throw PoleError("gamma_ln: argument at a pole of Gamma");
    if (z.real() >= 0.5)
        return detail::lanczos_log_gamma(z);
    // Gamma(z) Gamma(1-z) = pi / sin(pi z)
    return std::log(std::numbers::pi) - detail::log_sin_pi(z) - detail::lanczos_log_gamma(1.0 - z);
}

/// Gamma(z) for complex z.
inline cplx gamma(cplx z, double pole_tol = 1e-12) {
    return std::exp(gamma_ln(z, pole_tol));
}

} // namespace plancherel
