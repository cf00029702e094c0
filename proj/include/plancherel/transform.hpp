#pragma once

// Spherical Fourier transform and wave packets on G/K, the horospherical
// transform on G/MNbar, and Cesaro means of oscillatory orbits.
//
// Normalizations: dg is the Haar measure fixed by dnbar (int_N a^{2 rho} = 1)
// and Lebesgue dH in orthonormal coordinates of a; the spectral measure is
// dlambda = dy / (2 pi)^r for lambda = i y, on the positive chamber for G/K
// and on all of i a* for G/MNbar.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "plancherel/cfunc.hpp"
#include "plancherel/error.hpp"
#include "plancherel/groups.hpp"
#include "plancherel/quadrature.hpp"
#include "plancherel/rootdata.hpp"
#include "plancherel/spherical.hpp"

namespace plancherel {

inline double spectral_measure_factor(int rank) { return std::pow(2.0 * std::numbers::pi, -rank); }

/// Values over a lambda-grid. Weights already include the (2 pi)^{-r}
/// factor of dlambda. Spherical sections carry one scalar per lambda and
/// the Plancherel density; horospherical sections carry one vector over the
/// K/M grid per lambda.
struct SpectralSection {
    int rank = 1;
    bool full_space = false;
    std::vector<SpectralParam> lambdas;
    std::vector<double> weights;
    std::vector<cplx> values;
    std::vector<double> density;
    std::vector<std::vector<cplx>> k_values;
    std::vector<double> k_weights;
    double lambda_max = 0.0;

    std::size_t size() const { return lambdas.size(); }
};

struct SpectralGridSpec {
    double lambda_max = 30.0;
    int radial_panels = 30;   // composite Gauss-Legendre in |lambda|
    int radial_order = 8;
    int angular_points = 12;  // rank two: Gauss-Legendre across the chamber
};

/// Quadrature nodes on the positive imaginary chamber, including the
/// (2 pi)^{-r} factor. Rank two uses polar coordinates in the sector
/// between the two chamber edges.
inline SpectralSection chamber_grid(const CFunctionEngine& engine, const SpectralGridSpec& spec) {
    if (!(spec.lambda_max > 0.0) || spec.radial_panels < 1 || spec.radial_order < 1 ||
        spec.angular_points < 1)
        throw ParameterError("chamber_grid: bounds and resolutions must be positive");
    SpectralSection s;
    s.rank = engine.root_datum().rank;
    s.lambda_max = spec.lambda_max;
    const double f = spectral_measure_factor(s.rank);
    const auto dirs = engine.chamber_directions();
    const quad::Rule rr = quad::composite_gauss_legendre(spec.radial_panels, spec.radial_order, 0.0, spec.lambda_max);
    if (s.rank == 1) {
        for (std::size_t i = 0; i < rr.size(); ++i) {
            s.lambdas.push_back(SpectralParam::imaginary(rr.nodes[i] * dirs[0]));
            s.weights.push_back(f * rr.weights[i]);
        }
        return s;
    }
    const double th0 = std::atan2(dirs[0][1], dirs[0][0]);
    double th1 = std::atan2(dirs[1][1], dirs[1][0]);
    double span = th1 - th0;
    while (span <= -std::numbers::pi) span += 2.0 * std::numbers::pi;
    while (span > std::numbers::pi) span -= 2.0 * std::numbers::pi;
    const quad::Rule ra = quad::gauss_legendre(spec.angular_points, 0.0, span);
    for (std::size_t i = 0; i < rr.size(); ++i)
        for (std::size_t j = 0; j < ra.size(); ++j) {
            const double th = th0 + ra.nodes[j];
            Vec y(2);
            y << std::cos(th), std::sin(th);
            s.lambdas.push_back(SpectralParam::imaginary(rr.nodes[i] * y));
            s.weights.push_back(f * rr.weights[i] * std::abs(ra.weights[j]) * rr.nodes[i]);
        }
    return s;
}

// ---------------------------------------------------------------------------
// Spherical transform

struct CartanGridSpec {
    int panels = 24;   // composite Gauss-Legendre per cone coordinate
    int order = 12;
};

/// Cartan-coordinate nodes over the support of a profile:
/// int_G f = c_G sum_i w_i f(H_i) with w_i including J(H_i).
struct CartanNodes {
    std::vector<Vec> h;
    std::vector<double> w;
};

inline CartanNodes cartan_nodes(const GroupModel& model, double cartan_const, double support,
                                const CartanGridSpec& spec) {
    if (!(cartan_const > 0.0))
        throw StateError("spherical transform: Cartan density not calibrated");
    const RootDatum& rd = model.root_datum();
    std::vector<Vec> gens;
    for (const Vec& g : model.negative_chamber_generators())
        gens.push_back(g / g.norm());
    CartanNodes out;
    if (model.rank() == 1) {
        const quad::Rule r = quad::composite_gauss_legendre(spec.panels, spec.order, 0.0, support);
        for (std::size_t i = 0; i < r.size(); ++i) {
            const Vec h = r.nodes[i] * gens[0];
            out.h.push_back(h);
            out.w.push_back(cartan_const * r.weights[i] * cartan_jacobian(rd, h));
        }
        return out;
    }
    // H = u g1 + v g2 with u, v >= 0; the cone chart has Jacobian |det(g1 g2)|
    Mat g(2, 2);
    g.col(0) = gens[0];
    g.col(1) = gens[1];
    const double det = std::abs(g.determinant());
    const double reach = support / std::sqrt(0.5 * (1.0 + gens[0].dot(gens[1])));
    const quad::Rule r = quad::composite_gauss_legendre(spec.panels, spec.order, 0.0, reach);
    for (std::size_t i = 0; i < r.size(); ++i)
        for (std::size_t j = 0; j < r.size(); ++j) {
            const Vec h = r.nodes[i] * gens[0] + r.nodes[j] * gens[1];
            if (h.norm() >= support)
                continue;
            out.h.push_back(h);
            out.w.push_back(cartan_const * det * r.weights[i] * r.weights[j] * cartan_jacobian(rd, h));
        }
    return out;
}

/// int_G |f|^2 dg
inline double radial_l2_norm_sq(const GroupModel& model, double cartan_const, const RadialProfile& f,
                                const CartanGridSpec& spec = {}) {
    const CartanNodes cn = cartan_nodes(model, cartan_const, f.support, spec);
    double s = 0.0;
    for (std::size_t i = 0; i < cn.h.size(); ++i)
        s += cn.w[i] * std::pow(f.at_chamber_point(cn.h[i]), 2);
    return s;
}

/// A profile counts as truncated when it has not decayed to (near) zero at
/// its support radius.
inline void require_decay_at_support(const RadialProfile& f, double rel = 1e-8) {
    double peak = 0.0;
    for (double v : f.values)
        peak = std::max(peak, std::abs(v));
    double edge = 0.0;
    if (f.rank == 1) {
        edge = std::abs(f.at_radius(f.support * (1.0 - 1e-9)));
    } else {
        for (const Vec& d : f.directions)
            edge = std::max(edge, std::abs(f.at_chamber_point(f.support * (1.0 - 1e-9) * d)));
    }
    if (edge > rel * std::max(peak, 1e-300))
        throw TruncationError("spherical transform: profile does not vanish at its support radius");
}

/// F f(lambda) = int_G f(g) phi_{-lambda}(g) dg on the lambda-grid of `grid`.
/// A resolution-doubling check runs at three lambda nodes.
inline SpectralSection spherical_transform(const SphericalEvaluator& ev, const CFunctionEngine& engine,
                                           double cartan_const, const RadialProfile& f,
                                           SpectralSection grid, const CartanGridSpec& spec = {},
                                           int threads = 0, double doubling_tol = 1e-6) {
    const GroupModel& model = ev.model();
    if (f.rank != model.rank())
        throw ParameterError("spherical_transform: profile rank does not match the model");
    require_decay_at_support(f);
    auto eval = [&](const CartanNodes& cn, const std::vector<double>& fv, const SpectralParam& lam) {
        cplx s = 0.0;
        for (std::size_t i = 0; i < cn.h.size(); ++i)
            if (fv[i] != 0.0)
                s += cn.w[i] * fv[i] * ev.phi_radial(-lam, cn.h[i]);
        return s;
    };
    auto values_on = [&](const CartanNodes& cn) {
        std::vector<double> fv(cn.h.size());
        for (std::size_t i = 0; i < cn.h.size(); ++i)
            fv[i] = f.at_chamber_point(cn.h[i]);
        return fv;
    };
    const CartanNodes cn = cartan_nodes(model, cartan_const, f.support, spec);
    const std::vector<double> fv = values_on(cn);
    grid.values.assign(grid.size(), 0.0);
    grid.density.assign(grid.size(), 0.0);
    quad::parallel_for(
        grid.size(),
        [&](std::size_t i) {
            grid.values[i] = eval(cn, fv, grid.lambdas[i]);
            const SpectralParam& l = grid.lambdas[i];
            // |c|^{-2} vanishes on the walls; off the imaginary axis there is no density
            const bool unitary = l.is_imaginary(1e-14 * std::max(1.0, l.norm())) &&
                                 engine.root_datum().is_regular(l, engine.options().regular_tol);
            grid.density[i] = unitary ? engine.plancherel_density(l) : 0.0;
        },
        threads);
    CartanGridSpec fine = spec;
    fine.panels *= 2;
    const CartanNodes cn2 = cartan_nodes(model, cartan_const, f.support, fine);
    const std::vector<double> fv2 = values_on(cn2);
    double peak = 0.0;
    for (const cplx& v : grid.values)
        peak = std::max(peak, std::abs(v));
    for (std::size_t i : {std::size_t{0}, grid.size() / 2, grid.size() - 1}) {
        const cplx v2 = eval(cn2, fv2, grid.lambdas[i]);
        if (std::abs(v2 - grid.values[i]) > doubling_tol * peak)
            throw QuadratureError("spherical_transform: Cartan grid doubling changed the transform");
    }
    return grid;
}

/// Polynomial tail model |F f| <= C (1 + |lambda|)^{-p}, density ~ |lambda|^q.
struct TailEstimate {
    double p = 0.0;
    double q = 0.0;
    double tail = 0.0;          // extrapolated int_{|lambda| > Lambda} |psi| |c|^{-2} dlambda
    double total = 0.0;         // int_{|lambda| <= Lambda} |psi| |c|^{-2} dlambda
    double relative = 0.0;
    double suggested_lambda_max = 0.0;
};

inline TailEstimate estimate_spectral_tail(const SpectralSection& s, double tol = 1e-4) {
    if (s.values.size() != s.size() || s.density.size() != s.size() || s.size() < 8)
        throw ParameterError("estimate_spectral_tail: section needs values and density on >= 8 nodes");
    TailEstimate t;
    std::vector<double> lx, lv, ld;
    double peak = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double a = std::abs(s.values[i]);
        t.total += s.weights[i] * a * s.density[i];
        peak = std::max(peak, a);
    }
    // fit over the outer half of the grid, ignoring round-off level values
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double r = s.lambdas[i].im.norm();
        const double a = std::abs(s.values[i]);
        if (r < 0.5 * s.lambda_max)
            continue;
        ld.push_back(std::log(s.density[i]));
        lx.push_back(std::log1p(r));
        lv.push_back(std::log(std::max(a, 1e-15 * peak)));
    }
    if (lx.size() < 2)
        throw ParameterError("estimate_spectral_tail: too few nodes in the outer half of the grid");
    t.p = -least_squares_line(lx, lv).slope;
    t.q = least_squares_line(lx, ld).slope;
    // int_L^inf C r^{q-p} r^{r-1} (2 pi)^{-r} vol(sector) dr, with C fitted
    // at the outermost node
    const int rank = s.rank;
    const double angle = rank == 1 ? 1.0 : std::numbers::pi / 3.0;
    const double expo = t.q - t.p + rank;  // integrand ~ r^{expo - 1}
    double c = 0.0;
    double rmax = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double r = s.lambdas[i].im.norm();
        if (r >= rmax) {
            rmax = r;
            c = std::max(std::abs(s.values[i]), 1e-15 * peak) * s.density[i] / std::pow(r, t.q - t.p);
        }
    }
    auto tail_at = [&](double L) {
        if (expo >= 0.0)
            return std::numeric_limits<double>::infinity();
        return spectral_measure_factor(rank) * angle * c * std::pow(L, expo) / (-expo);
    };
    t.tail = tail_at(s.lambda_max);
    t.relative = t.tail / std::max(t.total, 1e-300);
    if (t.relative > tol) {
        if (expo >= 0.0) {
            t.suggested_lambda_max = 2.0 * s.lambda_max;
        } else {
            // tail(L) = tol * total
            t.suggested_lambda_max =
                std::pow(tol * t.total * (-expo) / (spectral_measure_factor(rank) * angle * c), 1.0 / expo);
            t.suggested_lambda_max = std::max(t.suggested_lambda_max, 1.25 * s.lambda_max);
        }
    }
    return t;
}

/// int_{i a*_+} psi(lambda) phi_lambda(exp H) |c(lambda)|^{-2} dlambda.
/// Throws TruncationError (with a suggested Lambda_max) when the fitted
/// spectral tail exceeds `tail_tol` of the computed part.
inline cplx wave_packet(const SphericalEvaluator& ev, const SpectralSection& psi, const Vec& h,
                        double tail_tol = 1e-4) {
    if (psi.values.size() != psi.size() || psi.density.size() != psi.size())
        throw ParameterError("wave_packet: section lacks values or density");
    bool all_zero = true;
    for (const cplx& v : psi.values)
        if (v != 0.0)
            all_zero = false;
    if (all_zero)
        return 0.0;
    const TailEstimate t = estimate_spectral_tail(psi, tail_tol);
    if (t.relative > tail_tol)
        throw TruncationError("wave_packet: spectral tail exceeds tolerance", t.suggested_lambda_max);
    cplx s = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i)
        if (psi.values[i] != 0.0)
            s += psi.weights[i] * psi.values[i] * psi.density[i] * ev.phi_radial(psi.lambdas[i], h);
    return s;
}

/// int_{i a*_+} |psi|^2 |c|^{-2} dlambda
inline double spectral_l2_norm_sq(const SpectralSection& psi) {
    double s = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i)
        s += psi.weights[i] * std::norm(psi.values[i]) * psi.density[i];
    return s;
}

struct RoundTripReport {
    double sup_error = 0.0;
    double sup_norm = 0.0;
    double l2_norm_sq = 0.0;       // int_G |f|^2
    double spectral_norm_sq = 0.0; // int |F f|^2 |c|^{-2}
    double parseval_rel = 0.0;
    double lambda_max = 0.0;
    TailEstimate tail;
    std::vector<double> radii;
    std::vector<double> original;
    std::vector<double> reconstructed;
};

/// Transform, invert at `points` radii along a unit chamber direction and
/// compare. Lambda_max is enlarged by the tail-fit rule until the
/// extrapolated tail is below `tail_tol`.
inline RoundTripReport spherical_round_trip(const SphericalEvaluator& ev, const CFunctionEngine& engine,
                                            double cartan_const, const RadialProfile& f,
                                            SpectralGridSpec grid_spec, int points = 25,
                                            double tail_tol = 1e-4, int max_enlargements = 4,
                                            const CartanGridSpec& cartan = {}, int threads = 0) {
    RoundTripReport rep;
    SpectralSection F;
    for (int attempt = 0;; ++attempt) {
        F = spherical_transform(ev, engine, cartan_const, f, chamber_grid(engine, grid_spec), cartan, threads);
        rep.tail = estimate_spectral_tail(F, tail_tol);
        if (rep.tail.relative <= tail_tol)
            break;
        if (attempt >= max_enlargements)
            throw TruncationError("spherical_round_trip: spectral tail exceeds tolerance",
                                  rep.tail.suggested_lambda_max);
        const double ratio = rep.tail.suggested_lambda_max / grid_spec.lambda_max;
        grid_spec.radial_panels = static_cast<int>(std::ceil(grid_spec.radial_panels * ratio));
        grid_spec.lambda_max = rep.tail.suggested_lambda_max;
    }
    rep.lambda_max = grid_spec.lambda_max;
    const Vec dir = ev.model().negative_chamber_generators()[0].normalized();
    rep.radii.resize(points);
    rep.original.resize(points);
    rep.reconstructed.resize(points);
    quad::parallel_for(
        points,
        [&](std::size_t i) {
            const double r = f.support * i / points;
            rep.radii[i] = r;
            rep.original[i] = f.at_chamber_point(r * dir);
            rep.reconstructed[i] = wave_packet(ev, F, r * dir, tail_tol).real();
        },
        threads);
    for (int i = 0; i < points; ++i) {
        rep.sup_error = std::max(rep.sup_error, std::abs(rep.original[i] - rep.reconstructed[i]));
        rep.sup_norm = std::max(rep.sup_norm, std::abs(rep.original[i]));
    }
    rep.l2_norm_sq = radial_l2_norm_sq(ev.model(), cartan_const, f, cartan);
    rep.spectral_norm_sq = spectral_l2_norm_sq(F);
    rep.parseval_rel = std::abs(rep.spectral_norm_sq - rep.l2_norm_sq) / rep.l2_norm_sq;
    return rep;
}

/// Smooth bump b(|H| / R) with b(x) = (1 + c x^2) exp(-1 / (1 - x^2)) on [0, 1).
inline std::function<double(const Vec&)> smooth_bump(double radius, double shape = 0.0) {
    return [=](const Vec& h) {
        const double x = h.norm() / radius;
        return x >= 1.0 ? 0.0 : (1.0 + shape * x * x) * std::exp(-1.0 / (1.0 - x * x));
    };
}

/// exp(-|H|^2 / (2 sigma^2)) times a smooth cutoff that equals 1 for
/// |H| <= R/2 and vanishes for |H| >= R. Compactly supported and smooth, with
/// a spectral transform that decays like a Gaussian while the cutoff region
/// stays below exp(-R^2 / (8 sigma^2)).
inline std::function<double(const Vec&)> gaussian_bump(double sigma, double radius) {
    auto smooth_step = [](double t) {
        // 0 for t <= 0, 1 for t >= 1
        if (t <= 0.0)
            return 0.0;
        if (t >= 1.0)
            return 1.0;
        const double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
        return a / (a + b);
    };
    return [=](const Vec& h) {
        const double r = h.norm();
        if (r >= radius)
            return 0.0;
        const double cut = 1.0 - smooth_step(2.0 * r / radius - 1.0);
        return cut * std::exp(-0.5 * r * r / (sigma * sigma));
    };
}

// ---------------------------------------------------------------------------
// Horospherical transform

/// f(k, H) on K/M x a with K/M nodes from the spherical K-quadrature and a
/// uniform tensor grid on a. Values are k-major: values[k][a].
struct HoroFunction {
    KQuadrature k_grid;
    Vec a_lo;                     // lower corner of the a-grid
    double a_step = 0.05;
    int a_points = 0;             // per axis
    std::vector<std::vector<cplx>> values;

    int rank() const { return static_cast<int>(a_lo.size()); }
    std::size_t a_size() const {
        std::size_t n = 1;
        for (int i = 0; i < rank(); ++i)
            n *= a_points;
        return n;
    }
    Vec a_node(std::size_t idx) const {
        Vec h = a_lo;
        for (int i = rank() - 1; i >= 0; --i) {
            h[i] += a_step * static_cast<double>(idx % a_points);
            idx /= a_points;
        }
        return h;
    }

    /// The support box must fit inside the grid with a zero margin.
    static HoroFunction sample(const GroupModel& model, const std::function<cplx(const SmallMat&, const Vec&)>& f,
                               const Vec& lo, const Vec& hi, double step, int k_resolution) {
        if (lo.size() != model.rank() || hi.size() != model.rank() || !(step > 0.0))
            throw ParameterError("HoroFunction: bad a-box or step");
        HoroFunction out;
        const KGridKind kind = model.tag() == ModelTag::SL3R ? KGridKind::Full : KGridKind::ModM;
        out.k_grid = model.k_quadrature(k_resolution, kind);
        out.a_step = step;
        out.a_lo = lo;
        double span = 0.0;
        for (int i = 0; i < lo.size(); ++i)
            span = std::max(span, hi[i] - lo[i]);
        out.a_points = static_cast<int>(std::ceil(span / step)) + 1;
        const std::size_t na = out.a_size();
        out.values.assign(out.k_grid.size(), std::vector<cplx>(na));
        for (std::size_t k = 0; k < out.k_grid.size(); ++k)
            for (std::size_t j = 0; j < na; ++j) {
                const cplx v = f(out.k_grid.nodes[k], out.a_node(j));
                if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                    throw ParameterError("HoroFunction: non-finite value");
                out.values[k][j] = v;
            }
        return out;
    }

    /// Checks that the outer layer of the a-grid vanishes.
    void require_compact(double rel = 1e-12) const {
        double peak = 0.0, edge = 0.0;
        for (const auto& row : values)
            for (std::size_t j = 0; j < row.size(); ++j) {
                peak = std::max(peak, std::abs(row[j]));
                std::size_t idx = j;
                bool boundary = false;
                for (int i = 0; i < rank(); ++i) {
                    const std::size_t c = idx % a_points;
                    idx /= a_points;
                    if (c == 0 || c + 1 == static_cast<std::size_t>(a_points))
                        boundary = true;
                }
                if (boundary)
                    edge = std::max(edge, std::abs(row[j]));
            }
        if (edge > rel * std::max(peak, 1e-300))
            throw TruncationError("HoroFunction: values do not vanish on the boundary of the a-grid");
    }
};

/// ||f||^2 in L^2(G/MNbar): int_K int_a |f(k, H)|^2 e^{-2 rho(H)} dH dk
inline double horo_l2_norm_sq(const GroupModel& model, const HoroFunction& f) {
    const Vec& rho = model.root_datum().rho;
    const double cell = std::pow(f.a_step, f.rank());
    double s = 0.0;
    for (std::size_t k = 0; k < f.k_grid.size(); ++k) {
        double row = 0.0;
        for (std::size_t j = 0; j < f.a_size(); ++j)
            row += std::norm(f.values[k][j]) * std::exp(-2.0 * rho.dot(f.a_node(j)));
        s += f.k_grid.weights[k] * row * cell;
    }
    return s;
}

/// fhat(lambda)(k) = int_a e^{-rho(H)} f(k, H) e^{lambda(H)} dH for each lambda.
inline std::vector<std::vector<cplx>> horo_values(const GroupModel& model, const HoroFunction& f,
                                                  const std::vector<SpectralParam>& lambdas,
                                                  int threads = 0) {
    const Vec& rho = model.root_datum().rho;
    const double cell = std::pow(f.a_step, f.rank());
    const std::size_t na = f.a_size();
    std::vector<Vec> nodes(na);
    std::vector<double> damp(na);
    for (std::size_t j = 0; j < na; ++j) {
        nodes[j] = f.a_node(j);
        damp[j] = std::exp(-rho.dot(nodes[j])) * cell;
    }
    std::vector<std::vector<cplx>> out(lambdas.size(), std::vector<cplx>(f.k_grid.size()));
    quad::parallel_for(
        lambdas.size(),
        [&](std::size_t l) {
            std::vector<cplx> phase(na);
            for (std::size_t j = 0; j < na; ++j)
                phase[j] = damp[j] * std::exp(lambdas[l].pair(nodes[j]));
            for (std::size_t k = 0; k < f.k_grid.size(); ++k) {
                cplx s = 0.0;
                for (std::size_t j = 0; j < na; ++j)
                    s += f.values[k][j] * phase[j];
                out[l][k] = s;
            }
        },
        threads);
    return out;
}

/// Full-space Cartesian grid i[-Y, Y]^r with trapezoid weights times (2 pi)^{-r}.
inline SpectralSection full_space_grid(int rank, double y_max, double y_step) {
    if (!(y_max > 0.0) || !(y_step > 0.0))
        throw ParameterError("full_space_grid: bound and step must be positive");
    SpectralSection s;
    s.rank = rank;
    s.full_space = true;
    s.lambda_max = y_max;
    const int n = static_cast<int>(std::ceil(y_max / y_step));
    const double f = spectral_measure_factor(rank) * std::pow(y_step, rank);
    if (rank == 1) {
        for (int i = -n; i <= n; ++i)
            s.lambdas.push_back(SpectralParam::imaginary(Vec::Constant(1, i * y_step))), s.weights.push_back(f);
        return s;
    }
    for (int i = -n; i <= n; ++i)
        for (int j = -n; j <= n; ++j) {
            Vec y(2);
            y << i * y_step, j * y_step;
            s.lambdas.push_back(SpectralParam::imaginary(y));
            s.weights.push_back(f);
        }
    return s;
}

inline SpectralSection horo_transform(const GroupModel& model, const HoroFunction& f, SpectralSection grid,
                                      int threads = 0) {
    if (f.rank() != model.rank() || grid.rank != model.rank())
        throw ParameterError("horo_transform: rank mismatch");
    f.require_compact();
    grid.k_values = horo_values(model, f, grid.lambdas, threads);
    grid.k_weights = f.k_grid.weights;
    return grid;
}

/// int ||fhat(lambda)||^2_{L^2(K/M)} dlambda over the section
inline double horo_spectral_norm_sq(const SpectralSection& s) {
    double total = 0.0;
    for (std::size_t l = 0; l < s.size(); ++l) {
        double n = 0.0;
        for (std::size_t k = 0; k < s.k_weights.size(); ++k)
            n += s.k_weights[k] * std::norm(s.k_values[l][k]);
        total += s.weights[l] * n;
    }
    return total;
}

/// ||fhat(lambda)||^2_{L^2(K/M)} for many lambda. With A = diag(sqrt w_k) f
/// = U S V^*, the norm is ||S V^* e_lambda||^2 where e_lambda is the damped
/// exponential over the a-grid, so only the numerically nonzero singular
/// triples are needed.
class HoroNormEvaluator {
public:
    HoroNormEvaluator(const GroupModel& model, const HoroFunction& f, double drop = 1e-15) {
        f.require_compact();
        const Vec& rho = model.root_datum().rho;
        const double cell = std::pow(f.a_step, f.rank());
        const std::size_t na = f.a_size(), nk = f.k_grid.size();
        nodes_.resize(na);
        damp_.resize(na);
        for (std::size_t j = 0; j < na; ++j) {
            nodes_[j] = f.a_node(j);
            damp_[j] = std::exp(-rho.dot(nodes_[j])) * cell;
        }
        Eigen::MatrixXcd a(nk, na);
        for (std::size_t k = 0; k < nk; ++k)
            for (std::size_t j = 0; j < na; ++j)
                a(k, j) = std::sqrt(f.k_grid.weights[k]) * f.values[k][j];
        Eigen::BDCSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeThinV);
        const Eigen::VectorXd sv = svd.singularValues();
        int r = 0;
        while (r < sv.size() && sv[r] > drop * sv[0])
            ++r;
        r = std::max(r, 1);
        c_ = sv.head(r).asDiagonal() * svd.matrixV().leftCols(r).adjoint();
    }

    int rank() const { return static_cast<int>(c_.rows()); }

    double norm_sq(const SpectralParam& lambda) const {
        Eigen::VectorXcd e(nodes_.size());
        for (std::size_t j = 0; j < nodes_.size(); ++j)
            e[j] = damp_[j] * std::exp(lambda.pair(nodes_[j]));
        return (c_ * e).squaredNorm();
    }

    /// sum_l weight_l ||fhat(lambda_l)||^2
    double integrate(const SpectralSection& s, int threads = 0) const {
        std::vector<double> v(s.size());
        quad::parallel_for(s.size(), [&](std::size_t l) { v[l] = s.weights[l] * norm_sq(s.lambdas[l]); }, threads);
        double total = 0.0;
        for (double x : v)
            total += x;
        return total;
    }

private:
    std::vector<Vec> nodes_;
    std::vector<double> damp_;
    Eigen::MatrixXcd c_;
};

struct HoroParsevalReport {
    double lhs = 0.0;   // ||f||^2 on G/MNbar
    double rhs = 0.0;   // spectral side
    double relative = 0.0;
    double y_max = 0.0;
    double y_step = 0.0;
};

/// The spectral trapezoid rule is exact up to aliasing once its step is
/// below 2 pi / (a-support width); y_max is grown until the spectral norm
/// settles.
inline HoroParsevalReport horo_parseval(const GroupModel& model, const HoroFunction& f, double y_max = 0.0,
                                        int threads = 0) {
    HoroParsevalReport rep;
    const double width = f.a_step * (f.a_points - 1);
    rep.y_step = std::numbers::pi / width;
    rep.y_max = y_max > 0.0 ? y_max : std::numbers::pi / f.a_step;
    rep.lhs = horo_l2_norm_sq(model, f);
    rep.rhs = HoroNormEvaluator(model, f).integrate(full_space_grid(model.rank(), rep.y_max, rep.y_step), threads);
    rep.relative = std::abs(rep.rhs - rep.lhs) / rep.lhs;
    return rep;
}

struct ChamberRegroupingReport {
    double full = 0.0;       // Cartesian disk |y| <= R in i a*
    double regrouped = 0.0;  // sum_w int over the chamber sector of ||fhat(w lambda)||^2
    double relative = 0.0;
};

/// Compares the full-space spectral norm on the disk |y| <= R (polar
/// grid over the whole circle) with the sum over W of chamber integrals of
/// ||fhat(w lambda)||^2 (polar grid over one sector).
inline ChamberRegroupingReport chamber_regrouping(const CFunctionEngine& engine, const HoroFunction& f,
                                                  double radius, int radial_panels = 40, int radial_order = 8,
                                                  int angular_points = 24, int threads = 0) {
    const GroupModel& model = engine.model();
    const WeylGroup& wg = engine.weyl();
    const int rank = model.rank();
    ChamberRegroupingReport rep;
    SpectralGridSpec spec;
    spec.lambda_max = radius;
    spec.radial_panels = radial_panels;
    spec.radial_order = radial_order;
    spec.angular_points = angular_points;
    const SpectralSection chamber = chamber_grid(engine, spec);
    const HoroNormEvaluator norms(model, f);
    for (int w = 0; w < wg.order(); ++w) {
        SpectralSection moved = chamber;
        for (auto& l : moved.lambdas)
            l = wg.act(w, l);
        rep.regrouped += norms.integrate(moved, threads);
    }
    // whole disk, independent polar grid with W-order times the angular nodes
    SpectralSection disk;
    disk.rank = rank;
    disk.full_space = true;
    const quad::Rule rr = quad::composite_gauss_legendre(radial_panels, radial_order, 0.0, radius);
    const double fac = spectral_measure_factor(rank);
    if (rank == 1) {
        for (std::size_t i = 0; i < rr.size(); ++i)
            for (double sgn : {1.0, -1.0}) {
                disk.lambdas.push_back(SpectralParam::imaginary(Vec::Constant(1, sgn * rr.nodes[i])));
                disk.weights.push_back(fac * rr.weights[i]);
            }
    } else {
        const int na = angular_points * wg.order();
        for (std::size_t i = 0; i < rr.size(); ++i)
            for (int j = 0; j < na; ++j) {
                const double th = 2.0 * std::numbers::pi * (j + 0.5) / na;
                Vec y(2);
                y << std::cos(th), std::sin(th);
                disk.lambdas.push_back(SpectralParam::imaginary(rr.nodes[i] * y));
                disk.weights.push_back(fac * rr.weights[i] * rr.nodes[i] * 2.0 * std::numbers::pi / na);
            }
    }
    rep.full = norms.integrate(disk, threads);
    rep.relative = std::abs(rep.full - rep.regrouped) / rep.full;
    return rep;
}

/// Random right-M-invariant function on K/M times a smooth bump in H:
/// f(k, H) = b(|H - H0| / R) (c0 + sum_ij c_ij (k D k^T)_ij) with D fixed
/// so that k D k^T is M-invariant. The support lies in the box
/// |H_i| <= R + 0.4.
inline std::function<cplx(const SmallMat&, const Vec&)> random_horo_function(const GroupModel& model,
                                                                              std::mt19937_64& rng,
                                                                              double radius) {
    std::normal_distribution<double> nd;
    const int n = model.matrix_size();
    SmallMat d = SmallMat::Zero(n, n);
    if (model.tag() == ModelTag::SO0_1n)
        d(1, 1) = 1.0;
    else
        for (int i = 0; i < n; ++i)
            d(i, i) = i + 1.0;
    Eigen::MatrixXcd coef(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            coef(i, j) = cplx(nd(rng), nd(rng));
    const cplx c0(2.0 + std::abs(nd(rng)), nd(rng));
    Vec h0(model.rank());
    for (int i = 0; i < h0.size(); ++i)
        h0[i] = std::clamp(0.3 * nd(rng), -0.4, 0.4);
    const auto bump = smooth_bump(radius, 0.5 * nd(rng));
    return [=](const SmallMat& k, const Vec& h) {
        const double b = bump(h - h0);
        if (b == 0.0)
            return cplx(0.0);
        const SmallMat u = k * d * k.transpose();
        cplx s = c0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                s += coef(i, j) * u(i, j);
        return b * s;
    };
}

// ---------------------------------------------------------------------------
// Cesaro means of oscillatory orbits

/// Rejects multipliers that are ratios of small integers.
inline void require_irrational_multiplier(double c, int max_denominator = 1000, double tol = 1e-9) {
    if (!std::isfinite(c) || c == 0.0)
        throw ParameterError("cesaro: multiplier must be finite and non-zero");
    for (int q = 1; q <= max_denominator; ++q) {
        const double p = std::round(c * q);
        if (std::abs(c * q - p) <= tol * q)
            throw ParameterError("cesaro: multiplier is a ratio of small integers");
    }
}

struct EigenPair {
    SpectralParam lambda;     // must be imaginary
    Eigen::VectorXcd vector;
};

/// A_n(v) = n^{-2m} sum_{X in S_n} ||F e^X v||^2 with v = sum v_k, where
/// S_n = { sum_j n_j X_j : 0 <= n_j < n } over X_1..X_m (columns of
/// `basis`) and X_{j+m} = c X_j. For eigendata e^X v = sum e^{lambda_k(X)} v_k,
/// and the mean over S_n factorizes over the 2m generators.
inline double cesaro_average(const std::vector<EigenPair>& data, const Eigen::MatrixXcd& f, int n,
                             const Mat& basis, double c = std::numbers::sqrt2) {
    if (n < 1 || data.empty())
        throw ParameterError("cesaro_average: need n >= 1 and at least one eigenpair");
    require_irrational_multiplier(c);
    const int m = static_cast<int>(basis.cols());
    std::vector<Eigen::VectorXcd> u;
    for (const auto& e : data) {
        if (!e.lambda.is_imaginary(1e-14))
            throw ParameterError("cesaro_average: eigenvalue is not imaginary");
        if (e.lambda.rank() != basis.rows() || e.vector.size() != f.cols())
            throw ParameterError("cesaro_average: dimension mismatch");
        u.push_back(f * e.vector);
    }
    // generator phases theta_{k,j} = Im lambda_k(X_j)
    std::vector<std::vector<double>> theta(u.size());
    for (std::size_t k = 0; k < u.size(); ++k)
        for (int j = 0; j < m; ++j) {
            const double t = data[k].lambda.im.dot(basis.col(j));
            theta[k].push_back(t);
            theta[k].push_back(c * t);
        }
    double total = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k)
        for (std::size_t l = 0; l < u.size(); ++l) {
            cplx mean = 1.0;
            for (std::size_t g = 0; g < theta[k].size(); ++g) {
                const double d = theta[l][g] - theta[k][g];
                cplx s = 0.0;
                for (int i = 0; i < n; ++i)
                    s += std::polar(1.0, d * i);
                mean *= s / static_cast<double>(n);
            }
            total += (u[k].dot(u[l]) * mean).real();
        }
    return total;
}

/// The limit of A_n for eigendata with distinct eigenvalues: sum_k ||F v_k||^2.
inline double cesaro_limit_target(const std::vector<EigenPair>& data, const Eigen::MatrixXcd& f) {
    double s = 0.0;
    for (const auto& e : data)
        s += (f * e.vector).squaredNorm();
    return s;
}

/// A_n(v) for a general representation given by commuting matrices T_j
/// (the images of X_j), summed directly over S_n.
inline double cesaro_average_matrix(const std::vector<Eigen::MatrixXcd>& generators, const Eigen::VectorXcd& v,
                                    const Eigen::MatrixXcd& f, int n, double c = std::numbers::sqrt2) {
    if (n < 1 || generators.empty())
        throw ParameterError("cesaro_average_matrix: need n >= 1 and at least one generator");
    require_irrational_multiplier(c);
    for (const auto& t : generators) {
        if (t.rows() != v.size() || t.cols() != v.size())
            throw ParameterError("cesaro_average_matrix: dimension mismatch");
        const Eigen::VectorXcd ev = Eigen::ComplexEigenSolver<Eigen::MatrixXcd>(t).eigenvalues();
        for (const cplx& e : ev)
            if (std::abs(e.real()) > 1e-12 * std::max(1.0, std::abs(e)))
                throw ParameterError("cesaro_average_matrix: eigenvalue is not imaginary");
    }
    std::vector<Eigen::MatrixXcd> steps;
    for (const auto& t : generators) {
        steps.push_back(t.exp());
        steps.push_back((c * t).exp());
    }
    const std::size_t depth = steps.size();
    if (std::pow(static_cast<double>(n), static_cast<double>(depth)) > 1e9)
        throw SizeError("cesaro_average_matrix: S_n too large for direct summation");
    // iterate over S_n as nested products, innermost generator last
    double total = 0.0;
    std::function<void(std::size_t, const Eigen::VectorXcd&)> walk = [&](std::size_t g, const Eigen::VectorXcd& w) {
        if (g + 1 == depth) {
            Eigen::VectorXcd x = w;
            for (int i = 0; i < n; ++i) {
                total += (f * x).squaredNorm();
                x = steps[g] * x;
            }
            return;
        }
        Eigen::VectorXcd x = w;
        for (int i = 0; i < n; ++i) {
            walk(g + 1, x);
            x = steps[g] * x;
        }
    };
    walk(0, v);
    return total / std::pow(static_cast<double>(n), static_cast<double>(depth));
}

} // namespace plancherel
