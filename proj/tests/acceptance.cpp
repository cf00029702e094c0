// Acceptance run: one PASS/FAIL line per criterion.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "plancherel/plancherel.hpp"

using namespace plancherel;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::vector<ModelPtr> all_models() {
    return {GroupModel::sl2r(), GroupModel::so1n(2), GroupModel::so1n(3), GroupModel::sl3r()};
}

SpectralParam random_imaginary(int rank, std::mt19937_64& rng, double scale = 1.5) {
    std::normal_distribution<double> nd(0.0, scale);
    Vec v(rank);
    for (auto& x : v)
        x = nd(rng);
    return SpectralParam::imaginary(v);
}

Outcome iwasawa_reconstruction() {
    std::mt19937_64 rng(101);
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (const auto& m : all_models())
        for (int i = 0; i < 1000; ++i) {
            const SmallMat g = m->random_element(rng, 1.5);
            const IwasawaFactors f = iwasawa(*m, g);
            worst = std::max(worst, (f.k * m->exp_a(f.h) * f.nbar - g).norm() / g.norm());
        }
    const double dt = seconds_since(t0);
    return {worst < 1e-10 && dt < 5.0, fmt("max rel residual %.2e over 4x1000 elements, %.2fs", worst, dt)};
}

Outcome measure_normalization() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst_n = 0.0, worst_spread = 0.0;
    for (const auto& m : all_models()) {
        const auto h = compute_haar_normalization(*m);
        QuadratureSpec other;
        other.step = 0.06;
        worst_n = std::max(worst_n, std::abs(h.normalize(compute_haar_normalization(*m, other).z_n) - 1.0));
        const auto cal = calibrate_cartan_density(*m, h.z_n, default_calibration_functions(*m), 1.0);
        if (cal.ratios.size() < 3)
            return {false, "fewer than 3 calibration functions"};
        worst_spread = std::max(worst_spread, cal.max_rel_spread);
    }
    const double dt = seconds_since(t0);
    return {worst_n < 1e-8 && worst_spread < 1e-5 && dt < 30.0,
            fmt("|int a^{2rho} dn - 1| %.2e, calibration spread %.2e, %.1fs", worst_n, worst_spread, dt)};
}

Outcome c_function_oracle() {
    std::mt19937_64 rng(303);
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (const auto& m : {GroupModel::sl2r(), GroupModel::so1n(3), GroupModel::sl3r()}) {
        const CFunctionEngine e(m, compute_haar_normalization(*m));
        const RootDatum& rd = e.root_datum();
        double zmin = 1e300;
        for (int a : rd.positive)
            zmin = std::min(zmin, rd.rho.dot(rd.roots[a]) / rd.roots[a].squaredNorm());
        std::uniform_real_distribution<double> u(0.75, 2.0), v(-1.0, 1.0);
        for (int i = 0; i < 20; ++i) {
            const Vec re = -u(rng) / zmin * rd.rho;
            Vec im(rd.rank);
            for (auto& x : im)
                x = v(rng);
            double mz = 0.0;
            for (int a : rd.positive)
                mz = std::max(mz, std::abs(im.dot(rd.roots[a])) / rd.roots[a].squaredNorm());
            im *= 2.0 * std::abs(v(rng)) / mz;
            const SpectralParam l{re, im};
            const cplx a = e.c_integral(l, e.weyl().longest), b = e.c_product(l, e.weyl().longest);
            worst = std::max(worst, std::abs(a - b) / std::abs(a));
        }
    }
    const double dt = seconds_since(t0);
    return {worst < 1e-6 && dt < 60.0, fmt("max rel error %.2e over 3x20 points, %.1fs", worst, dt)};
}

Outcome maass_selberg() {
    std::mt19937_64 rng(404);
    double worst = 0.0;
    for (const auto& m : all_models()) {
        const CFunctionEngine e(m, compute_haar_normalization(*m));
        for (int i = 0; i < 100; ++i)
            worst = std::max(worst, e.maass_selberg_check(random_imaginary(m->rank(), rng)));
    }
    return {worst < 1e-6, fmt("max deviation %.2e over 4x100 parameters", worst)};
}

Outcome spherical_identities() {
    std::mt19937_64 rng(505);
    const auto t0 = std::chrono::steady_clock::now();
    double e_id = 0.0, e_bi = 0.0, e_mv = 0.0, e_w = 0.0;
    for (const auto& m : all_models()) {
        SphericalEvaluator ev(m);
        const SmallMat id = SmallMat::Identity(m->matrix_size(), m->matrix_size());
        for (int i = 0; i < 3; ++i) {
            const auto l = random_imaginary(m->rank(), rng);
            const SmallMat g = m->random_element(rng, 1.0);
            e_id = std::max(e_id, std::abs(ev.phi(l, id) - 1.0));
            e_bi = std::max(e_bi, std::abs(ev.phi(l, g) - ev.phi(l, m->random_k(rng) * g * m->random_k(rng))));
            e_w = std::max(e_w, ev.w_invariance_check(l, g));
        }
    }
    // mean value property at 20 random triples, split over two rank-one models
    for (const auto& m : {GroupModel::sl2r(), GroupModel::so1n(3)}) {
        SphericalEvaluator ev(m);
        for (int i = 0; i < 10; ++i) {
            const auto l = random_imaginary(1, rng);
            e_mv = std::max(e_mv, ev.mean_value_check(l, m->random_element(rng, 1.0), m->random_element(rng, 1.0)));
        }
    }
    const bool ok = e_id < 1e-9 && e_bi < 1e-9 && e_mv < 1e-7 && e_w < 1e-6;
    return {ok, fmt("phi(1) %.1e, biinvariance %.1e, mean value %.1e, W-invariance %.1e, %.1fs", e_id, e_bi, e_mv,
                    e_w, seconds_since(t0))};
}

Outcome constant_term_decay() {
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> ul(0.2, 3.0), us(0.7, 1.3);
    const auto t0 = std::chrono::steady_clock::now();
    double worst_margin = -1e300;
    for (const auto& m : {GroupModel::sl2r(), GroupModel::so1n(3)}) {
        const auto h = compute_haar_normalization(*m);
        const CFunctionEngine e(m, h);
        SphericalEvaluator ev(m);
        ev.set_z_n(h.z_n);
        const Vec unit = m->negative_chamber_generators()[0].normalized();
        for (int i = 0; i < 5; ++i) {
            const SpectralParam l = SpectralParam::imaginary(Vec::Constant(1, ul(rng)));
            const Vec x = us(rng) * unit;
            const auto fit = fit_asymptotic_decay(ev, make_constant_term_data(e, l, x));
            // slope <= -0.1 |rho(X)|  <=>  slope / |rho(X)| + 0.1 <= 0
            worst_margin = std::max(worst_margin, fit.fit.slope / std::abs(fit.rho_x) + 0.1);
        }
    }
    const double dt = seconds_since(t0);
    return {worst_margin <= 0.0 && dt < 120.0,
            fmt("max slope/|rho(X)| = %.3f (bound -0.1), 2x5 parameters, %.1fs", worst_margin - 0.1, dt)};
}

Outcome plancherel_round_trip() {
    auto m = GroupModel::sl2r();
    const auto t0 = std::chrono::steady_clock::now();
    const auto h = compute_haar_normalization(*m);
    const CFunctionEngine e(m, h);
    SphericalEvaluator ev(m);
    const double cg = calibrate_cartan_density(*m, h.z_n).constant;
    const auto f = RadialProfile::sample(*m, gaussian_bump(0.35, 2.5), 2.5, 0.005);
    SpectralGridSpec gs;
    gs.lambda_max = 10.0;
    gs.radial_panels = 10;
    const auto rep = spherical_round_trip(ev, e, cg, f, gs, 25);
    const double dt = seconds_since(t0);
    return {rep.sup_error < 1e-3 && rep.parseval_rel < 1e-3 && dt < 300.0,
            fmt("sup error %.2e, Parseval rel %.2e, Lambda_max %.1f (tail rel %.1e), %.1fs", rep.sup_error,
                rep.parseval_rel, rep.lambda_max, rep.tail.relative, dt)};
}

Outcome horospherical_parseval() {
    std::mt19937_64 rng(808);
    const auto t0 = std::chrono::steady_clock::now();
    double worst_p = 0.0, worst_r = 0.0;
    for (const auto& m : {GroupModel::sl2r(), GroupModel::so1n(3), GroupModel::sl3r()}) {
        const CFunctionEngine e(m, compute_haar_normalization(*m));
        const bool a2 = m->rank() == 2;
        const Vec lo = Vec::Constant(m->rank(), -1.6), hi = Vec::Constant(m->rank(), 1.6);
        for (int i = 0; i < (a2 ? 2 : 5); ++i) {
            const auto f = HoroFunction::sample(*m, random_horo_function(*m, rng, 1.0), lo, hi, a2 ? 0.1 : 0.05,
                                                a2 ? 8 : 16);
            worst_p = std::max(worst_p, horo_parseval(*m, f).relative);
            if (i == 0)
                worst_r = std::max(worst_r, chamber_regrouping(e, f, 20.0).relative);
        }
    }
    return {worst_p < 1e-4 && worst_r < 1e-6,
            fmt("Parseval rel %.2e over 12 functions, regrouping rel %.2e, %.1fs", worst_p, worst_r,
                seconds_since(t0))};
}

Outcome convolution_algebra() {
    std::mt19937_64 rng(909);
    std::uniform_real_distribution<double> us(0.3, 0.45), ur(1.4, 1.9);
    const auto t0 = std::chrono::steady_clock::now();
    double comm = 0.0, mult = 0.0;
    for (const auto& m : {GroupModel::sl2r(), GroupModel::so1n(3)}) {
        const auto h = compute_haar_normalization(*m);
        const CFunctionEngine e(m, h);
        SphericalEvaluator ev(m);
        const double cg = calibrate_cartan_density(*m, h.z_n).constant;
        const double r1 = ur(rng), r2 = ur(rng);
        const auto f1 = RadialProfile::sample(*m, gaussian_bump(us(rng), r1), r1, 0.02);
        const auto f2 = RadialProfile::sample(*m, gaussian_bump(us(rng), r2), r2, 0.02);
        const auto a = convolve_radial(*m, cg, f1, f2);
        const auto b = convolve_radial(*m, cg, f2, f1);
        for (double r = 0.0; r < r1 + r2; r += 0.013)
            comm = std::max(comm, std::abs(a.at_radius(r) - b.at_radius(r)));
        SpectralGridSpec gs;
        gs.lambda_max = 6.0;
        gs.radial_panels = 2;
        gs.radial_order = 4;
        const auto grid = chamber_grid(e, gs);
        const auto F1 = spherical_transform(ev, e, cg, f1, grid);
        const auto F2 = spherical_transform(ev, e, cg, f2, grid);
        const auto F12 = spherical_transform(ev, e, cg, a, grid);
        for (std::size_t i = 0; i < grid.size(); ++i)
            mult = std::max(mult, std::abs(F12.values[i] - F1.values[i] * F2.values[i]));
    }
    return {comm < 1e-6 && mult < 1e-5,
            fmt("commutativity %.2e, multiplicativity %.2e, %.1fs", comm, mult, seconds_since(t0))};
}

Outcome cesaro_means() {
    Eigen::VectorXcd v1(2), v2(2);
    v1 << 1.0, 0.5;
    v2 << 0.2, 1.0;
    Eigen::MatrixXcd F(2, 2);
    F << 1.0, 0.3, 0.1, 2.0;
    const std::vector<EigenPair> d = {{SpectralParam::imaginary(Vec::Constant(1, 0.7)), v1},
                                      {SpectralParam::imaginary(Vec::Constant(1, -1.3)), v2}};
    const double target = cesaro_limit_target(d, F);
    const double rel = std::abs(cesaro_average(d, F, 2000, Mat::Identity(1, 1)) - target) / target;
    Eigen::MatrixXcd T(2, 2);
    T << cplx(0, 0.7), 1.0, 0.0, cplx(0, 0.7);
    Eigen::VectorXcd v(2);
    v << 0.0, 1.0;
    const double a200 = cesaro_average_matrix({T}, v, F, 200), a2000 = cesaro_average_matrix({T}, v, F, 2000);
    return {rel < 0.005 && a2000 > 10.0 * a200,
            fmt("diagonalizable rel error %.2e at n=2000, Jordan A_2000/A_200 = %.1f", rel, a2000 / a200)};
}

Outcome temperedness_control() {
    std::mt19937_64 rng(1111);
    int false_flags = 0, runs = 0;
    bool control_flagged = true;
    double max_degree = 0.0;
    for (const auto& m : {GroupModel::sl2r(), GroupModel::so1n(3)}) {
        SphericalEvaluator ev(m);
        ev.set_z_n(compute_haar_normalization(*m).z_n);
        const Vec x = m->negative_chamber_generators()[0].normalized();
        std::vector<SpectralParam> ls = {SpectralParam::imaginary(Vec::Zero(1))};
        for (int i = 0; i < 4; ++i)
            ls.push_back(random_imaginary(1, rng));
        for (const auto& l : ls) {
            const auto r = temperedness_bound_check(ev, l, x, 30.0, 30);
            false_flags += r.exponential_growth;
            max_degree = std::max(max_degree, r.degree);
            ++runs;
        }
        control_flagged = control_flagged &&
                          temperedness_bound_check(ev, SpectralParam::real(2.0 * m->root_datum().rho), x)
                              .exponential_growth;
    }
    return {false_flags == 0 && control_flagged,
            fmt("%d/%d imaginary parameters flagged (max degree %.2f), lambda = 2 rho flagged: %s", false_flags,
                runs, max_degree, control_flagged ? "yes" : "no")};
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"Iwasawa reconstruction", iwasawa_reconstruction},
        {"measure normalization", measure_normalization},
        {"c-function oracle equivalence", c_function_oracle},
        {"Maass-Selberg relations", maass_selberg},
        {"spherical identities", spherical_identities},
        {"constant-term decay", constant_term_decay},
        {"Plancherel round trip", plancherel_round_trip},
        {"horospherical Parseval", horospherical_parseval},
        {"convolution algebra", convolution_algebra},
        {"Cesaro averaging", cesaro_means},
        {"temperedness negative control", temperedness_control},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s criterion %2zu: %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
