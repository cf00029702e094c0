#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "plancherel/spherical.hpp"

using namespace plancherel;

namespace {

SpectralParam random_imaginary(int rank, std::mt19937_64& rng, double scale = 1.5) {
    std::normal_distribution<double> nd(0.0, scale);
    Vec v(rank);
    for (auto& x : v)
        x = nd(rng);
    return SpectralParam::imaginary(v);
}

SmallMat identity(const GroupModel& m) { return SmallMat::Identity(m.matrix_size(), m.matrix_size()); }

Vec unit_negative(const GroupModel& m) { return m.negative_chamber_generators()[0].normalized(); }

// P_nu(cosh r) = (1/pi) int_0^pi (cosh r + sinh r cos theta)^nu dtheta
cplx legendre_p(cplx nu, double r) {
    const quad::Rule q = quad::composite_gauss_legendre(8, 16, 0.0, std::numbers::pi);
    cplx s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
        s += q.weights[i] * std::pow(cplx(std::cosh(r) + std::sinh(r) * std::cos(q.nodes[i])), nu);
    return s / std::numbers::pi;
}

struct Engines {
    ModelPtr model;
    CFunctionEngine engine;
    SphericalEvaluator ev;
    explicit Engines(ModelPtr m)
        : model(m), engine(m, compute_haar_normalization(*m)), ev(m) {
        ev.set_z_n(engine.haar().z_n);
    }
};

Engines& sl2() { static Engines e(GroupModel::sl2r()); return e; }
Engines& so13() { static Engines e(GroupModel::so1n(3)); return e; }

} // namespace

TEST(Phi, OneAtIdentity) {
    std::mt19937_64 rng(1);
    for (const auto& m : {GroupModel::sl2r(), GroupModel::so1n(2), GroupModel::so1n(3), GroupModel::sl3r()}) {
        SphericalEvaluator ev(m);
        for (int i = 0; i < 3; ++i) {
            SpectralParam l = random_imaginary(m->rank(), rng);
            l.re = Vec::Random(m->rank());
            EXPECT_LT(std::abs(ev.phi(l, identity(*m)) - 1.0), 1e-9) << m->name();
        }
    }
}

TEST(Phi, KBiinvariant) {
    std::mt19937_64 rng(2);
    for (const auto& m : {GroupModel::sl2r(), GroupModel::so1n(2), GroupModel::so1n(3), GroupModel::sl3r()}) {
        SphericalEvaluator ev(m);
        for (int i = 0; i < 3; ++i) {
            const auto l = random_imaginary(m->rank(), rng);
            const SmallMat g = m->random_element(rng, 1.0);
            const cplx a = ev.phi(l, g);
            const cplx b = ev.phi(l, m->random_k(rng) * g * m->random_k(rng));
            EXPECT_LT(std::abs(a - b), 1e-9) << m->name();
            EXPECT_LT(std::abs(ev.phi_biinvariant(l, g) - a), 1e-9) << m->name();
        }
    }
}

TEST(Phi, RejectsInvalidInput) {
    SphericalEvaluator ev(GroupModel::sl2r());
    EXPECT_THROW(ev.phi(SpectralParam::imaginary(Vec::Zero(1)), 3.0 * SmallMat::Identity(2, 2)),
                 InvalidElementError);
    EXPECT_THROW(ev.phi(SpectralParam::imaginary(Vec::Zero(2)), SmallMat::Identity(2, 2)), ParameterError);
    SphericalOptions bad;
    bad.k_resolution = 1;
    EXPECT_THROW(SphericalEvaluator(GroupModel::sl2r(), bad), ParameterError);
}

TEST(Phi, Sl2ZeroTwoCharts) {
    // M-quotient grid against the full circle, and the K-chart against the N-chart
    auto& e = sl2();
    const SpectralParam zero = SpectralParam::imaginary(Vec::Zero(1));
    const Vec x = unit_negative(*e.model);
    for (double t : {0.5, 1.0, 2.0, 4.0}) {
        const SmallMat g = e.model->exp_a(t * x);
        const cplx a = e.ev.phi_on_grid(zero, g, 256, KGridKind::ModM, nullptr);
        const cplx b = e.ev.phi_on_grid(zero, g, 512, KGridKind::Full, nullptr);
        EXPECT_LT(std::abs(a - b), 1e-8) << t;
        const cplx n = e.ev.phi_damped_n_chart(zero, t * x) * std::exp(e.model->root_datum().rho.dot(t * x));
        EXPECT_LT(std::abs(a - n), 1e-8) << t;
    }
}

TEST(Phi, Sl2MatchesLegendreFunctions) {
    // phi_lambda(e^H) = P_{-1/2 + <lambda, alpha>/<alpha, alpha>}(cosh alpha(H))
    auto& e = sl2();
    const Vec a = e.model->root_datum().roots[0];
    const Vec x = unit_negative(*e.model);
    for (double s : {0.0, 0.7, 2.3})
        for (double t : {0.5, 1.5, 3.0}) {
            const SpectralParam l = SpectralParam::imaginary(s * a / a.squaredNorm());
            const cplx nu(-0.5, s / a.squaredNorm());
            const cplx oracle = legendre_p(nu, std::abs(a.dot(t * x)));
            EXPECT_LT(std::abs(e.ev.phi_radial(l, t * x) - oracle), 1e-12) << s << " " << t;
        }
    EXPECT_NEAR(e.ev.phi_radial(SpectralParam::imaginary(Vec::Zero(1)), 3.0 * x).real(), 0.775131808938221, 1e-13);
}

TEST(Phi, So13ClosedForm) {
    // three-dimensional hyperbolic space: phi = sin(nu r) / (nu sinh r)
    auto& e = so13();
    const Vec a = e.model->root_datum().roots[0];
    const Vec x = unit_negative(*e.model);
    for (double s : {0.3, 1.1, 4.0})
        for (double t : {0.5, 2.0, 6.0}) {
            const double nu = s / a.squaredNorm();
            const double r = std::abs(a.dot(t * x));
            const double oracle = std::sin(nu * r) / (nu * std::sinh(r));
            const cplx v = e.ev.phi_radial(SpectralParam::imaginary(s * a / a.squaredNorm()), t * x);
            EXPECT_LT(std::abs(v - oracle), 1e-12) << s << " " << t;
        }
}

TEST(Phi, UnitarityUnderInverse) {
    std::mt19937_64 rng(3);
    for (const auto& m : {GroupModel::sl2r(), GroupModel::so1n(3)}) {
        SphericalEvaluator ev(m);
        const auto l = random_imaginary(m->rank(), rng);
        const SmallMat g = m->random_element(rng, 1.0);
        EXPECT_LT(std::abs(ev.phi(l, g.inverse()) - std::conj(ev.phi(l, g))), 1e-9);
    }
}

TEST(MeanValue, TrivialArguments) {
    std::mt19937_64 rng(4);
    auto m = GroupModel::sl2r();
    SphericalEvaluator ev(m);
    const auto l = random_imaginary(1, rng);
    const SmallMat h = m->random_element(rng, 1.0);
    EXPECT_LT(ev.mean_value_check(l, identity(*m), h), 1e-9);
    EXPECT_LT(ev.mean_value_check(l, h, identity(*m)), 1e-9);
}

TEST(MeanValue, RandomArguments) {
    std::mt19937_64 rng(5);
    for (const auto& m : {GroupModel::sl2r(), GroupModel::so1n(2), GroupModel::so1n(3)}) {
        SphericalEvaluator ev(m);
        for (int i = 0; i < 4; ++i) {
            const auto l = random_imaginary(m->rank(), rng);
            const SmallMat g = m->random_element(rng, 1.0), h = m->random_element(rng, 1.0);
            EXPECT_LT(ev.mean_value_check(l, g, h), 1e-7) << m->name();
        }
    }
}

TEST(WInvariance, RankOneAndA2) {
    std::mt19937_64 rng(6);
    for (const auto& m : {GroupModel::sl2r(), GroupModel::so1n(3), GroupModel::sl3r()}) {
        SphericalEvaluator ev(m);
        const double tol = m->rank() == 1 ? 1e-8 : 1e-6;
        for (int i = 0; i < 2; ++i) {
            const auto l = random_imaginary(m->rank(), rng);
            EXPECT_LT(ev.w_invariance_check(l, m->random_element(rng, 1.0)), tol) << m->name();
        }
    }
}

TEST(ConstantTerm, TwoTermsInRankOne) {
    auto& e = sl2();
    const Vec x = unit_negative(*e.model);
    const SpectralParam l = SpectralParam::imaginary(Vec::Constant(1, 0.9));
    const auto d = make_constant_term_data(e.engine, l, x);
    ASSERT_EQ(d.orbit.size(), 2u);
    const cplx c0 = e.engine.c(l), c1 = e.engine.c(-l);
    EXPECT_LT(std::abs(constant_term_expansion(d, 0.0) - (c0 + c1)), 1e-14);
    for (double t : {0.0, 1.0, 7.5, 20.0}) {
        const cplx expect = c0 * std::exp(t * l.pair(x)) + c1 * std::exp(-t * l.pair(x));
        EXPECT_LT(std::abs(constant_term_expansion(d, t) - expect), 1e-13);
        EXPECT_LE(std::abs(constant_term_expansion(d, t)), std::abs(c0) + std::abs(c1) + 1e-14);
    }
    EXPECT_LE(asymptotic_residual(e.ev, d, 0.0), 1.0 + std::abs(c0) + std::abs(c1));
    EXPECT_THROW(constant_term_expansion(d, -1.0), ParameterError);
}

TEST(ConstantTerm, RejectsBadData) {
    auto& e = sl2();
    const Vec x = unit_negative(*e.model);
    EXPECT_THROW(make_constant_term_data(e.engine, SpectralParam::imaginary(Vec::Zero(1)), x),
                 SingularParameterError);
    EXPECT_THROW(make_constant_term_data(e.engine, SpectralParam::real(Vec::Constant(1, 0.2)), x), ParameterError);
    EXPECT_THROW(make_constant_term_data(e.engine, SpectralParam::imaginary(Vec::Constant(1, 1.0)), -x),
                 ParameterError);
}

TEST(ConstantTerm, ResidualDecreasesAlongRay) {
    // The residual oscillates under an e^{2 t alpha(X)} envelope, so the
    // decrease is asserted for its supremum over the remaining ray.
    auto& e = sl2();
    const Vec x = unit_negative(*e.model);
    const Vec& alpha = e.model->root_datum().roots[0];
    const SpectralParam l = SpectralParam::imaginary(alpha);
    const auto d = make_constant_term_data(e.engine, l, x);
    std::vector<double> r;
    for (double t = 2.0; t <= 20.0; t += 1.0)
        r.push_back(asymptotic_residual(e.ev, d, t));
    std::vector<double> tail_sup(r.size());
    double run = 0.0;
    for (std::size_t i = r.size(); i-- > 0;)
        tail_sup[i] = run = std::max(run, r[i]);
    for (std::size_t i = 2; i < r.size(); i += 2)
        EXPECT_LT(tail_sup[i], tail_sup[i - 2]) << 2.0 + i;
    for (std::size_t i = 0; i < r.size(); ++i)
        EXPECT_LT(r[i] * std::exp(-2.0 * (2.0 + i) * alpha.dot(x)), 0.6) << 2.0 + i;
}

TEST(ConstantTerm, FittedRateHasMargin) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.2, 3.0);
    for (Engines* e : {&sl2(), &so13()}) {
        const Vec x = unit_negative(*e->model);
        for (int i = 0; i < 5; ++i) {
            const SpectralParam l = SpectralParam::imaginary(Vec::Constant(1, u(rng)));
            const auto fit = fit_asymptotic_decay(e->ev, make_constant_term_data(e->engine, l, x));
            EXPECT_LE(fit.fit.slope, -0.1 * std::abs(fit.rho_x)) << e->model->name();
        }
    }
}

TEST(Temperedness, ZeroHasLogPolynomialGrowth) {
    auto& e = sl2();
    const auto r = temperedness_bound_check(e.ev, SpectralParam::imaginary(Vec::Zero(1)), unit_negative(*e.model));
    EXPECT_GE(r.degree, 0.5);
    EXPECT_LE(r.degree, 1.5);
    EXPECT_FALSE(r.exponential_growth);
}

TEST(Temperedness, ImaginaryNeverFlagsRealDoes) {
    std::mt19937_64 rng(8);
    for (Engines* e : {&sl2(), &so13()}) {
        const Vec x = unit_negative(*e->model);
        for (int i = 0; i < 3; ++i) {
            const auto r = temperedness_bound_check(e->ev, random_imaginary(1, rng), x);
            EXPECT_FALSE(r.exponential_growth) << e->model->name();
            EXPECT_LE(r.degree, r.degree_bound);
        }
        const auto bad = temperedness_bound_check(e->ev, SpectralParam::real(2.0 * e->model->root_datum().rho), x);
        EXPECT_TRUE(bad.exponential_growth) << e->model->name();
    }
}

TEST(Convolution, Commutative) {
    for (const auto& m : {GroupModel::sl2r(), GroupModel::so1n(3)}) {
        const double cg = std::pow(2.0, m->dim_n());
        const auto f1 = RadialProfile::sample(*m, [](const Vec& h) {
            const double x = h.norm() / 1.5;
            return x >= 1.0 ? 0.0 : (1.0 + 0.5 * x * x) * std::exp(-1.0 / (1.0 - x * x));
        }, 1.5, 0.02);
        const auto f2 = RadialProfile::sample(*m, [](const Vec& h) {
            const double x = h.norm();
            return x >= 1.0 ? 0.0 : (1.0 - 0.3 * x * x) * std::exp(-1.0 / (1.0 - x * x));
        }, 1.0, 0.02);
        const auto a = convolve_radial(*m, cg, f1, f2);
        const auto b = convolve_radial(*m, cg, f2, f1);
        double worst = 0.0;
        for (double r = 0.0; r < 2.5; r += 0.013)
            worst = std::max(worst, std::abs(a.at_radius(r) - b.at_radius(r)));
        EXPECT_LT(worst, 1e-6) << m->name();
    }
}

TEST(Convolution, ApproximateIdentity) {
    auto m = GroupModel::sl2r();
    const auto f = RadialProfile::sample(*m, [](const Vec& h) { return std::exp(-h.squaredNorm()); }, 1.5, 0.05);
    double prev = 1e300;
    for (double eps : {0.4, 0.2, 0.1}) {
        // unit-mass mollifier supported in |H| < eps
        auto bump = RadialProfile::sample(*m, [eps](const Vec& h) {
            const double x = h.norm() / eps;
            return x >= 1.0 ? 0.0 : std::exp(-1.0 / (1.0 - x * x));
        }, eps, eps / 100.0);
        double mass = 0.0;
        const quad::Rule q = quad::composite_gauss_legendre(8, 16, 0.0, eps);
        for (std::size_t i = 0; i < q.size(); ++i)
            mass += 2.0 * q.weights[i] * cartan_jacobian(m->root_datum(), q.nodes[i] * unit_negative(*m)) *
                    bump.at_radius(q.nodes[i]);
        for (auto& v : bump.values)
            v /= mass;
        const auto c = convolve_radial(*m, 2.0, f, bump);
        double err = 0.0;
        for (double r = 0.0; r < 1.0; r += 0.05)
            err = std::max(err, std::abs(c.at_radius(r) - f.at_radius(r)));
        EXPECT_LT(err, prev) << eps;
        prev = err;
    }
    EXPECT_LT(prev, 2e-2);
}

TEST(Convolution, RejectsRankTwo) {
    auto m = GroupModel::sl3r();
    const auto f = RadialProfile::sample(*m, [](const Vec&) { return 0.0; }, 1.0, 0.1);
    EXPECT_THROW(convolve_radial(*m, 8.0, f, f), ParameterError);
    auto s = GroupModel::sl2r();
    const auto g = RadialProfile::sample(*s, [](const Vec&) { return 0.0; }, 1.0, 0.1);
    EXPECT_THROW(convolve_radial(*s, 0.0, g, g), StateError);
}

TEST(Options, JsonRoundTrip) {
    SphericalOptions o;
    o.k_resolution = 64;
    o.n_step = 0.05;
    nlohmann::json j = o;
    const SphericalOptions back = j.get<SphericalOptions>();
    EXPECT_EQ(back.k_resolution, 64);
    EXPECT_EQ(back.n_step, 0.05);
    j["rel_tol"] = -1.0;
    EXPECT_THROW(j.get<SphericalOptions>(), ParameterError);
}
