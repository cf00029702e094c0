#pragma once

// Spherical functions
//
//   phi_lambda(g) = int_K a(g^{-1} k)^{rho - lambda} dk        (K-chart)
//
// and, for g = exp(H), the N-chart obtained by writing K/M as an open
// dense N-orbit:
//
//   phi_lambda(e^H) e^{-rho(H)}
//       = e^{lambda(H)} int_N a(n)^{rho - lambda} a(e^H n e^{-H})^{rho + lambda} dn.
//
// The N-chart keeps the damped value phi e^{-rho} at unit scale for all H
// in the negative chamber, which the asymptotic checks need; the K-chart is
// the primary evaluator and the two are cross-checked.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "plancherel/cfunc.hpp"
#include "plancherel/error.hpp"
#include "plancherel/groups.hpp"
#include "plancherel/quadrature.hpp"
#include "plancherel/rootdata.hpp"

namespace plancherel {

struct SphericalOptions {
    int k_resolution = 32;      // starting K resolution
    int max_doublings = 5;
    double rel_tol = 1e-10;     // doubling tolerance, relative to sum w |f|
    std::size_t max_nodes = 20'000'000;
    double n_step = 1.0 / 32.0; // DE step of the N-chart (checked at half)
    double n_tail = 1e-14;
    double n_tol = 1e-11;       // N-chart resolution tolerance (absolute, damped scale)
};

inline void validate(const SphericalOptions& o) {
    if (o.k_resolution < 2 || o.max_doublings < 1 || !(o.rel_tol > 0.0) || !(o.n_step > 0.0) ||
        !(o.n_tail > 0.0) || !(o.n_tol > 0.0) || o.max_nodes < 1)
        throw ParameterError("spherical options: resolutions and tolerances must be positive");
}

inline void to_json(nlohmann::json& j, const SphericalOptions& o) {
    j = nlohmann::json{{"k_resolution", o.k_resolution}, {"max_doublings", o.max_doublings},
                       {"rel_tol", o.rel_tol},           {"n_step", o.n_step},
                       {"n_tail", o.n_tail},             {"n_tol", o.n_tol},
                       {"max_nodes", o.max_nodes}};
}

inline void from_json(const nlohmann::json& j, SphericalOptions& o) {
    const SphericalOptions d;
    o.k_resolution = j.value("k_resolution", d.k_resolution);
    o.max_doublings = j.value("max_doublings", d.max_doublings);
    o.rel_tol = j.value("rel_tol", d.rel_tol);
    o.n_step = j.value("n_step", d.n_step);
    o.n_tail = j.value("n_tail", d.n_tail);
    o.n_tol = j.value("n_tol", d.n_tol);
    o.max_nodes = j.value("max_nodes", d.max_nodes);
    validate(o);
}

class SphericalEvaluator {
public:
    explicit SphericalEvaluator(ModelPtr model, SphericalOptions opts = {})
        : model_(std::move(model)), opts_(opts), rd_(model_->root_datum()), wg_(weyl_group(rd_)) {
        validate(opts_);
    }

    const GroupModel& model() const { return *model_; }
    const ModelPtr& model_ptr() const { return model_; }
    const RootDatum& root_datum() const { return rd_; }
    const WeylGroup& weyl() const { return wg_; }
    const SphericalOptions& options() const { return opts_; }

    /// K-grid used for a general g (integrands are right-M-invariant).
    KGridKind general_kind() const {
        return model_->tag() == ModelTag::SL3R ? KGridKind::Full : KGridKind::ModM;
    }
    /// K-grid used for g = exp(H) (rank one also left-M-invariant).
    KGridKind radial_kind() const {
        return model_->tag() == ModelTag::SO0_1n ? KGridKind::Radial : general_kind();
    }

    /// Quadrature value on a fixed grid; `mass` receives sum w |f|.
    cplx phi_on_grid(const SpectralParam& lambda, const SmallMat& g, int resolution, KGridKind kind,
                     double* mass = nullptr) const {
        check_lambda(lambda);
        const SmallMat ginv = g.inverse();
        const Vec rmr = rd_.rho - lambda.re;
        cplx sum = 0.0;
        double m = 0.0;
        model_->for_each_k(resolution, kind, [&](const SmallMat& k, double w) {
            const Vec h = model_->iwasawa_h(ginv * k);
            const cplx v = std::exp(cplx(rmr.dot(h), -lambda.im.dot(h)));
            sum += w * v;
            m += w * std::abs(v);
        });
        if (mass)
            *mass = m;
        return sum;
    }

    /// phi_lambda(g) by K-quadrature with resolution doubling.
    cplx phi(const SpectralParam& lambda, const SmallMat& g) const {
        if (!model_->is_valid(g))
            throw InvalidElementError("phi: matrix violates the model relations");
        return doubled(lambda, g, general_kind());
    }

    /// phi_lambda(exp H), using the reduced K-grid available for A.
    cplx phi_radial(const SpectralParam& lambda, const Vec& h) const {
        return doubled(lambda, model_->exp_a(h), radial_kind());
    }

    /// phi_lambda(exp H) e^{-rho(H)} through the N-chart, checked across two
    /// DE resolutions.
    cplx phi_damped_n_chart(const SpectralParam& lambda, const Vec& h) const {
        check_lambda(lambda);
        const SmallMat a = model_->exp_a(h);
        const SmallMat ainv = model_->exp_a(-h);
        const Vec rmr = rd_.rho - lambda.re;
        const Vec rpr = rd_.rho + lambda.re;
        // the integrand decays like a(n)^{2 rho} once |n| exceeds the scale
        // on which conjugation by e^H contracts N
        double decay = std::numeric_limits<double>::infinity();
        double shift = 0.0;
        for (int idx : rd_.positive) {
            decay = std::min(decay, rd_.rho.dot(rd_.roots[idx]) / rd_.roots[idx].squaredNorm());
            shift = std::max(shift, std::abs(rd_.roots[idx].dot(h)));
        }
        const double t_max = quad::sinh_sinh_range_for_decay(decay, opts_.n_tail, shift);
        auto pair_value = [&](const Vec& h1, const Vec& h2) {
            return std::exp(cplx(rmr.dot(h1) + rpr.dot(h2), lambda.im.dot(h2 - h1)));
        };
        // Ad(e^H) scales the root-space coordinate of alpha by e^{alpha(H)}
        std::vector<double> scale;
        for (int r : model_->n_roots())
            scale.push_back(std::exp(rd_.roots[r].dot(h)));
        auto on_coords = [&](const std::vector<double>& y) {
            std::vector<double> y2(y.size());
            for (std::size_t i = 0; i < y.size(); ++i)
                y2[i] = scale[i] * y[i];
            return pair_value(model_->iwasawa_h(model_->exp_n(y)), model_->iwasawa_h(model_->exp_n(y2)));
        };
        auto on_matrix = [&](const SmallMat& n) {
            return pair_value(model_->iwasawa_h(n), model_->iwasawa_h(a * n * ainv));
        };
        auto run = [&](double step) {
            if (rd_.rank == 1) {
                // oscillation frequency of the integrand in log r
                const double omega = 2.0 * lambda.im.norm() / rd_.root_length;
                return log_radial_n_integral(on_coords, 8.0 * step / (1.0 + 0.25 * omega), decay, shift);
            }
            return integrate_over_n<cplx>(*model_, all_n_indices(*model_), step, t_max, on_matrix);
        };
        const cplx coarse = run(opts_.n_step);
        const cplx fine = run(0.5 * opts_.n_step);
        if (!(std::abs(fine - coarse) <= opts_.n_tol * std::max(1.0, z_n())))
            throw QuadratureError("phi_damped_n_chart: resolutions disagree");
        return std::exp(cplx(lambda.re.dot(h), lambda.im.dot(h))) * fine / z_n();
    }

    /// Lebesgue-normalization constant of N used by the N-chart.
    double z_n() const {
        if (!(z_n_ > 0.0)) {
            QuadratureSpec q;
            q.check_truncation = false;
            z_n_ = compute_haar_normalization(*model_, q).z_n;
        }
        return z_n_;
    }
    void set_z_n(double z) { z_n_ = z; }

    /// phi_lambda(g) evaluated at the radial part of g.
    cplx phi_biinvariant(const SpectralParam& lambda, const SmallMat& g) const {
        if (!model_->is_valid(g))
            throw InvalidElementError("phi: matrix violates the model relations");
        return phi_radial(lambda, cartan_radial(*model_, g));
    }

    /// |int_K phi(g k h) dk - phi(g) phi(h)|. The outer K-integral doubles
    /// its resolution from 8 until it settles; the integrand is evaluated
    /// through the radial part of g k h.
    double mean_value_check(const SpectralParam& lambda, const SmallMat& g, const SmallMat& h,
                            int max_resolution = 64) const {
        auto outer = [&](int res, double* mass) {
            cplx avg = 0.0;
            double m = 0.0;
            model_->for_each_k(res, KGridKind::Full, [&](const SmallMat& k, double w) {
                const cplx v = phi_biinvariant(lambda, g * k * h);
                avg += w * v;
                m += w * std::abs(v);
            });
            *mass = m;
            return avg;
        };
        double mass = 0.0;
        int res = 8;
        cplx prev = outer(res, &mass);
        for (;;) {
            res *= 2;
            if (res > max_resolution)
                throw QuadratureError("mean_value_check: outer K-integral did not settle");
            const cplx cur = outer(res, &mass);
            const bool done = std::abs(cur - prev) <= 0.1 * opts_.rel_tol * std::max(mass, 1e-300) + 1e-12;
            prev = cur;
            if (done)
                break;
        }
        return std::abs(prev - phi(lambda, g) * phi(lambda, h));
    }

    /// max_w |phi_lambda(g) - phi_{w lambda}(g)|
    double w_invariance_check(const SpectralParam& lambda, const SmallMat& g) const {
        const cplx base = phi(lambda, g);
        double worst = 0.0;
        for (int w = 0; w < wg_.order(); ++w) {
            if (w == wg_.identity)
                continue;
            worst = std::max(worst, std::abs(phi(wg_.act(w, lambda), g) - base));
        }
        return worst;
    }

private:
    void check_lambda(const SpectralParam& lambda) const {
        if (lambda.rank() != rd_.rank || lambda.im.size() != rd_.rank || !lambda.finite())
            throw ParameterError("spectral parameter has the wrong rank or is not finite");
    }

    cplx doubled(const SpectralParam& lambda, const SmallMat& g, KGridKind kind) const {
        int res = opts_.k_resolution;
        cplx prev = phi_on_grid(lambda, g, res, kind);
        for (int d = 0; d < opts_.max_doublings; ++d) {
            res *= 2;
            if (model_->k_grid_size(res, kind) > opts_.max_nodes)
                break;
            double mass = 0.0;
            const cplx cur = phi_on_grid(lambda, g, res, kind, &mass);
            if (std::abs(cur - prev) <= opts_.rel_tol * mass)
                return cur;
            prev = cur;
        }
        throw QuadratureError("phi: K-quadrature did not settle under resolution doubling");
    }

    // Rank one: N ~ R^m with M acting transitively on spheres (m >= 2) or
    // trivially (m = 1). Trapezoid rule in u = log r; the integrand is
    // analytic in a strip around the real u-axis and decays exponentially at
    // both ends, so the rule converges geometrically even when the
    // integrand oscillates in log r over a long plateau.
    template <class F>
    cplx log_radial_n_integral(F&& f, double h, double decay, double log_shift) const {
        const int m = model_->dim_n();
        const double scale = n_coordinate_scale(*model_, 0);
        const double tiny = -std::log(opts_.n_tail);
        const double u_lo = std::log(scale) - tiny / m;
        const double u_hi = std::log(scale) + log_shift + tiny / (2.0 * decay);
        const int steps = static_cast<int>(std::ceil((u_hi - u_lo) / h));
        std::vector<double> y(m, 0.0);
        cplx total = 0.0;
        for (int i = 0; i <= steps; ++i) {
            const double r = std::exp(u_lo + i * h);
            const double jac = std::pow(r, m);   // r^{m-1} dr = r^m du
            y[0] = r;
            cplx v = f(y);
            if (m == 1) {
                y[0] = -r;
                v += f(y);
            } else {
                v *= m == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;
            }
            total += h * jac * v;
        }
        return total;
    }

    ModelPtr model_;
    SphericalOptions opts_;
    RootDatum rd_;
    WeylGroup wg_;
    mutable double z_n_ = 0.0;
};

// ---------------------------------------------------------------------------
// Constant term

/// True when alpha(X) < 0 for every positive root.
inline bool in_negative_chamber(const RootDatum& rd, const Vec& x, double tol = 1e-12) {
    for (int idx : rd.positive)
        if (!(rd.roots[idx].dot(x) < -tol))
            return false;
    return true;
}

struct ConstantTermData {
    SpectralParam lambda;
    Vec direction;                   // X in the open negative chamber
    std::vector<int> weyl_elements;  // w
    std::vector<SpectralParam> orbit;  // w lambda
    std::vector<cplx> coefficients;  // c(w lambda)
};

inline ConstantTermData make_constant_term_data(const CFunctionEngine& engine,
                                                const SpectralParam& lambda, const Vec& x) {
    const RootDatum& rd = engine.root_datum();
    if (!lambda.is_imaginary(1e-14 * std::max(1.0, lambda.norm())))
        throw ParameterError("constant term: lambda must be imaginary");
    if (!rd.is_regular(lambda, engine.options().regular_tol))
        throw SingularParameterError("constant term: lambda must be regular");
    if (x.size() != rd.rank || !in_negative_chamber(rd, x))
        throw ParameterError("constant term: X must lie in the open negative chamber");
    ConstantTermData d;
    d.lambda = lambda;
    d.direction = x;
    const WeylGroup& wg = engine.weyl();
    for (int w = 0; w < wg.order(); ++w) {
        const SpectralParam wl = wg.act(w, lambda);
        d.weyl_elements.push_back(w);
        d.orbit.push_back(wl);
        d.coefficients.push_back(engine.c(wl));
    }
    return d;
}

/// sum_w c(w lambda) e^{t (w lambda)(X)}
inline cplx constant_term_expansion(const ConstantTermData& d, double t) {
    if (!(t >= 0.0))
        throw ParameterError("constant_term_expansion: t must be >= 0");
    cplx s = 0.0;
    for (std::size_t i = 0; i < d.orbit.size(); ++i)
        s += d.coefficients[i] * std::exp(t * d.orbit[i].pair(d.direction));
    return s;
}

/// |phi_lambda(exp tX) e^{-t rho(X)} - constant term|
inline double asymptotic_residual(const SphericalEvaluator& ev, const ConstantTermData& d, double t) {
    const cplx damped = ev.phi_damped_n_chart(d.lambda, t * d.direction);
    return std::abs(damped - constant_term_expansion(d, t));
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rms = 0.0;
    int used = 0;
};

inline LineFit least_squares_line(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2)
        throw ParameterError("least_squares_line: need at least two points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        ss += r * r;
    }
    f.rms = std::sqrt(ss / n);
    f.used = static_cast<int>(n);
    return f;
}

struct AsymptoticFit {
    std::vector<double> t;
    std::vector<double> residual;
    LineFit fit;          // log residual against t, above the noise floor
    double rho_x = 0.0;   // rho(X)
};

/// Samples the residual on t0, t0 + dt, ..., t1 and fits its exponential
/// rate, ignoring samples at the quadrature noise floor. At least three
/// samples must lie above the floor.
inline AsymptoticFit fit_asymptotic_decay(const SphericalEvaluator& ev, const ConstantTermData& d,
                                          double t0 = 5.0, double t1 = 25.0, double dt = 1.0,
                                          double noise_floor = 1e-10) {
    AsymptoticFit out;
    out.rho_x = ev.root_datum().rho.dot(d.direction);
    std::vector<double> xs, ys;
    for (double t = t0; t <= t1 + 1e-12; t += dt) {
        const double r = asymptotic_residual(ev, d, t);
        out.t.push_back(t);
        out.residual.push_back(r);
        if (r > noise_floor) {
            xs.push_back(t);
            ys.push_back(std::log(r));
        }
    }
    if (xs.size() < 3)
        throw QuadratureError("fit_asymptotic_decay: residual at the noise floor on the whole window");
    out.fit = least_squares_line(xs, ys);
    return out;
}

// ---------------------------------------------------------------------------
// Temperedness

struct TemperednessResult {
    std::vector<double> t;
    std::vector<double> damped;   // |phi(exp tX)| e^{-t rho(X)}
    double degree = 0.0;          // slope of log damped against log(1 + t)
    double exp_rate = 0.0;        // slope of log damped against t
    double degree_bound = 0.0;    // |Sigma+| + 1
    bool exponential_growth = false;
};

/// Fits |phi_lambda(exp tX)| e^{-t rho(X)} <= C (1 + t)^d on t in [1, T].
/// The exponential-growth flag is raised when the polynomial degree exceeds
/// |Sigma+| + 1 and the log-linear rate exceeds |rho(X)| / 2.
inline TemperednessResult temperedness_bound_check(const SphericalEvaluator& ev,
                                                   const SpectralParam& lambda, const Vec& x,
                                                   double t_end = 30.0, int samples = 30) {
    const RootDatum& rd = ev.root_datum();
    if (!in_negative_chamber(rd, x))
        throw ParameterError("temperedness_bound_check: X must lie in the open negative chamber");
    if (!(t_end > 1.0) || samples < 3)
        throw ParameterError("temperedness_bound_check: need T > 1 and >= 3 samples");
    // phi_lambda = phi_{w lambda}; the N-chart needs Re lambda in the closed
    // negative chamber, so move Re lambda there first
    SpectralParam rep = lambda;
    const WeylGroup& wg = ev.weyl();
    for (int w = 0; w < wg.order(); ++w) {
        const SpectralParam cand = wg.act(w, lambda);
        bool ok = true;
        for (int idx : rd.positive)
            if (rd.roots[idx].dot(cand.re) > 1e-12)
                ok = false;
        if (ok) {
            rep = cand;
            break;
        }
    }
    TemperednessResult out;
    out.degree_bound = static_cast<double>(rd.positive.size()) + 1.0;
    std::vector<double> lx, lt, ly;
    for (int i = 0; i < samples; ++i) {
        const double t = 1.0 + (t_end - 1.0) * i / (samples - 1);
        const double v = std::abs(ev.phi_damped_n_chart(rep, t * x));
        out.t.push_back(t);
        out.damped.push_back(v);
        lx.push_back(std::log1p(t));
        lt.push_back(t);
        ly.push_back(std::log(std::max(v, 1e-300)));
    }
    out.degree = least_squares_line(lx, ly).slope;
    out.exp_rate = least_squares_line(lt, ly).slope;
    const double rho_x = std::abs(rd.rho.dot(x));
    out.exponential_growth = out.degree > out.degree_bound && out.exp_rate > 0.5 * rho_x;
    return out;
}

// ---------------------------------------------------------------------------
// Radial profiles and convolution

/// K-biinvariant function stored by its values on the closed negative
/// chamber. Rank one: nodes r_i = i h along the unit direction of a^-.
/// Rank two: a tensor grid in cone coordinates H = u g1 + v g2 with unit
/// wall directions g1, g2. Cubic (4-point Lagrange) interpolation; zero at
/// and beyond `support` (the |H| radius).
struct RadialProfile {
    int rank = 1;
    double step = 0.01;
    int nodes = 0;                  // per axis
    double support = 0.0;
    std::vector<double> values;     // rank one: nodes; rank two: nodes * nodes, u-major
    std::vector<Vec> directions;    // unit generators of a^-

    static RadialProfile sample(const GroupModel& model, const std::function<double(const Vec&)>& f,
                                double support, double step) {
        if (!(support > 0.0) || !(step > 0.0))
            throw ParameterError("RadialProfile: support and step must be positive");
        RadialProfile p;
        p.rank = model.rank();
        p.step = step;
        p.support = support;
        for (const Vec& g : model.negative_chamber_generators())
            p.directions.push_back(g / g.norm());
        const double reach = p.rank == 1 ? support : support / cone_min_norm(p.directions);
        p.nodes = static_cast<int>(std::ceil(reach / step)) + 3;
        if (p.rank == 1) {
            for (int i = 0; i < p.nodes; ++i) {
                const Vec h = (i * step) * p.directions[0];
                p.values.push_back(h.norm() >= support ? 0.0 : f(h));
            }
        } else {
            for (int i = 0; i < p.nodes; ++i)
                for (int j = 0; j < p.nodes; ++j) {
                    const Vec h = (i * step) * p.directions[0] + (j * step) * p.directions[1];
                    p.values.push_back(h.norm() >= support ? 0.0 : f(h));
                }
        }
        return p;
    }

    /// Rank one: value at distance r from the origin.
    double at_radius(double r) const {
        r = std::abs(r);
        if (r >= support)
            return 0.0;
        return interp1(r / step, [&](int i) { return node(i); });
    }

    /// Value at H in the closed negative chamber (rank two) or anywhere (rank one).
    double at_chamber_point(const Vec& h) const {
        if (rank == 1)
            return at_radius(h.norm());
        if (h.norm() >= support)
            return 0.0;
        Mat g(2, 2);
        g.col(0) = directions[0];
        g.col(1) = directions[1];
        const Vec uv = g.colPivHouseholderQr().solve(h);
        const double u = std::max(0.0, uv[0]) / step, v = std::max(0.0, uv[1]) / step;
        return interp1(u, [&](int i) { return interp1(v, [&](int j) { return node2(i, j); }); });
    }

    /// Value at any H, moving it into the negative chamber with W first.
    double operator()(const Vec& h, const WeylGroup& wg, const RootDatum& rd) const {
        if (rank == 1)
            return at_radius(h.norm());
        for (int w = 0; w < wg.order(); ++w) {
            const Vec img = wg.elements[w] * h;
            if (in_closed_negative(rd, img))
                return at_chamber_point(img);
        }
        return at_chamber_point(h);
    }

private:
    static double cone_min_norm(const std::vector<Vec>& d) {
        // smallest |u g1 + v g2| with max(u, v) = 1 is the sine of half the cone angle
        const double c = d[0].dot(d[1]);
        return std::sqrt(0.5 * (1.0 + c));
    }

    static bool in_closed_negative(const RootDatum& rd, const Vec& h) {
        for (int idx : rd.positive)
            if (rd.roots[idx].dot(h) > 1e-12 * std::max(1.0, h.norm()))
                return false;
        return true;
    }

    double node(int i) const {
        // even extension through the origin, zero past the grid
        i = std::abs(i);
        return i < nodes ? values[i] : 0.0;
    }
    double node2(int i, int j) const {
        if (i < 0 || j < 0)
            return node2(std::max(i, 0), std::max(j, 0));
        return (i < nodes && j < nodes) ? values[static_cast<std::size_t>(i) * nodes + j] : 0.0;
    }

    template <class F>
    static double interp1(double x, F&& at) {
        const int i = static_cast<int>(std::floor(x));
        const double s = x - i;
        if (s == 0.0)
            return at(i);
        const double p0 = at(i - 1), p1 = at(i), p2 = at(i + 1), p3 = at(i + 2);
        return p0 * (-s * (s - 1) * (s - 2) / 6.0) + p1 * ((s + 1) * (s - 1) * (s - 2) / 2.0) +
               p2 * (-(s + 1) * s * (s - 2) / 2.0) + p3 * ((s + 1) * s * (s - 1) / 6.0);
    }
};

struct ConvolutionSpec {
    int r_panels = 24;        // composite Gauss-Legendre on [0, support of f1]
    int r_order = 16;
    int k_points = 256;       // M\K/M quadrature (SL(2): theta in [0, pi); SO(1,n): polar angle)
};

/// Radial profile of f1 * f2 on the grid of f1, for rank-one models:
///   (f1 * f2)(e^H) = c_G int_{a^-} J(H') f1(H') int_K f2(e^{-H'} k e^H) dk dH'.
inline RadialProfile convolve_radial(const GroupModel& model, double cartan_const,
                                     const RadialProfile& f1, const RadialProfile& f2,
                                     const ConvolutionSpec& spec = {}) {
    if (model.rank() != 1 || f1.rank != 1 || f2.rank != 1)
        throw ParameterError("convolve_radial: rank-one models only");
    if (!(cartan_const > 0.0))
        throw StateError("convolve_radial: Cartan density not calibrated");
    const RootDatum& rd = model.root_datum();
    const Vec dir = model.negative_chamber_generators()[0].normalized();
    const double out_support = f1.support + f2.support;
    RadialProfile out;
    out.rank = 1;
    out.step = f1.step;
    out.support = out_support;
    out.directions = f1.directions;
    out.nodes = static_cast<int>(std::ceil(out_support / out.step)) + 3;
    const quad::Rule rrule = quad::composite_gauss_legendre(spec.r_panels, spec.r_order, 0.0, f1.support);
    // M\K/M nodes with weights summing to 1
    std::vector<SmallMat> ks;
    std::vector<double> kw;
    if (model.tag() == ModelTag::SL2R || model.param() == 2) {
        const KQuadrature kq = model.k_quadrature(spec.k_points, KGridKind::ModM);
        ks = kq.nodes;
        kw = kq.weights;
    } else {
        const KQuadrature kq = model.k_quadrature(spec.k_points, KGridKind::Radial);
        ks = kq.nodes;
        kw = kq.weights;
    }
    std::vector<double> jf(rrule.size());
    std::vector<SmallMat> left(rrule.size());
    for (std::size_t i = 0; i < rrule.size(); ++i) {
        const Vec h = rrule.nodes[i] * dir;
        jf[i] = rrule.weights[i] * cartan_jacobian(rd, h) * f1.at_radius(rrule.nodes[i]);
        left[i] = model.exp_a(-h);
    }
    for (int n = 0; n < out.nodes; ++n) {
        const double r = n * out.step;
        if (r >= out_support) {
            out.values.push_back(0.0);
            continue;
        }
        const SmallMat right = model.exp_a(r * dir);
        double total = 0.0;
        for (std::size_t i = 0; i < rrule.size(); ++i) {
            if (jf[i] == 0.0)
                continue;
            double inner = 0.0;
            for (std::size_t k = 0; k < ks.size(); ++k) {
                const Vec hr = cartan_radial(model, left[i] * ks[k] * right);
                inner += kw[k] * f2.at_radius(hr.norm());
            }
            total += jf[i] * inner;
        }
        out.values.push_back(cartan_const * total);
    }
    return out;
}

} // namespace plancherel
