#pragma once

// Pipelines behind each plancherel_cli subcommand. Random samples are drawn
// sequentially from the seeded generator before any parallel work, and
// results are stored by index, so output does not depend on --threads.

#include <memory>
#include <optional>
#include <random>

#include "cli_support.hpp"

namespace cli {

using namespace plancherel;

/// Lazily built numerical state shared by the commands.
class Context {
public:
    explicit Context(const RunConfig& cfg) : cfg_(cfg), model_(cfg.make_model()), rng_(cfg.seed) {}

    const RunConfig& cfg() const { return cfg_; }
    const GroupModel& model() const { return *model_; }
    std::mt19937_64& rng() { return rng_; }
    int rank() const { return model_->rank(); }

    const HaarNormalization& haar() {
        if (!haar_)
            haar_ = compute_haar_normalization(*model_, cfg_.quadrature);
        return *haar_;
    }

    const CFunctionEngine& engine() {
        if (!engine_) {
            CFunctionOptions o;
            o.quad = cfg_.quadrature;
            o.threads = cfg_.threads;
            engine_ = std::make_unique<CFunctionEngine>(model_, haar(), o);
        }
        return *engine_;
    }

    SphericalEvaluator& evaluator() {
        if (!ev_) {
            ev_ = std::make_unique<SphericalEvaluator>(model_, cfg_.spherical);
            ev_->set_z_n(haar().z_n);
        }
        return *ev_;
    }

    double cartan_const() {
        if (!cartan_)
            cartan_ = calibrate_cartan_density(*model_, haar().z_n).constant;
        return *cartan_;
    }

    SpectralParam random_imaginary(double scale = 1.5) {
        std::normal_distribution<double> nd(0.0, scale);
        Vec v(rank());
        for (auto& x : v)
            x = nd(rng_);
        return SpectralParam::imaginary(v);
    }

    void require_rank_one(const std::string& what) const {
        if (rank() != 1)
            throw UsageError(what + " is available for rank-one models only");
    }

    template <class Body>
    void parallel(std::size_t n, Body&& body) const {
        quad::parallel_for(n, std::forward<Body>(body), cfg_.threads);
    }

private:
    const RunConfig& cfg_;
    ModelPtr model_;
    std::mt19937_64 rng_;
    std::optional<HaarNormalization> haar_;
    std::unique_ptr<CFunctionEngine> engine_;
    std::unique_ptr<SphericalEvaluator> ev_;
    std::optional<double> cartan_;
};

inline std::function<double(const Vec&)> bump_from_json(const json& b) {
    const std::string kind = b.value("kind", "gaussian");
    if (kind == "gaussian")
        return gaussian_bump(b.value("sigma", 0.35), b.value("radius", 2.5));
    if (kind == "smooth")
        return smooth_bump(b.value("radius", 2.0), b.value("shape", 0.0));
    throw UsageError("unknown bump kind '" + kind + "'");
}

/// A radial profile from a JSON file holding either a bump description
/// {"bump": {...}, "step": h} or sampled rank-one values
/// {"step": h, "support": R, "values": [f(0), f(h), ...]}.
inline RadialProfile load_profile(Context& ctx) {
    const RunConfig& cfg = ctx.cfg();
    json j = {{"bump", cfg.bump}, {"step", cfg.profile_step}};
    if (!cfg.input.empty()) {
        std::ifstream f(cfg.input);
        if (!f)
            throw UsageError("cannot read profile " + cfg.input);
        j = json::parse(f);
    }
    const double step = j.value("step", cfg.profile_step);
    if (j.contains("values")) {
        ctx.require_rank_one("a sampled profile");
        const double support = j.at("support").get<double>();
        auto values = j.at("values").get<std::vector<double>>();
        const auto samples = RadialProfile::sample(ctx.model(), [](const Vec&) { return 0.0; }, support, step);
        if (values.size() > samples.values.size())
            throw UsageError("profile has more values than its support and step allow");
        RadialProfile p = samples;
        std::copy(values.begin(), values.end(), p.values.begin());
        return p;
    }
    const json b = j.value("bump", cfg.bump);
    const double radius = b.value("radius", 2.5);
    return RadialProfile::sample(ctx.model(), bump_from_json(b), radius, step);
}

inline SpectralGridSpec grid_spec(const RunConfig& cfg) {
    SpectralGridSpec g;
    g.lambda_max = cfg.lambda_max;
    g.radial_panels = cfg.radial_panels;
    g.radial_order = cfg.radial_order;
    g.angular_points = cfg.angular_points;
    return g;
}

// ---------------------------------------------------------------------------

inline void run_calibrate(Context& ctx, Report& rep) {
    const HaarNormalization& h = ctx.haar();
    QuadratureSpec other = ctx.cfg().quadrature;
    other.step *= 0.6;
    const double recomputed = h.normalize(compute_haar_normalization(ctx.model(), other).z_n);
    rep.add(summarize("haar-normalization", {std::abs(recomputed - 1.0)}, ctx.cfg().tol("normalization")));
    const auto cal = calibrate_cartan_density(ctx.model(), h.z_n);
    auto c = summarize("calibration-spread", {cal.max_rel_spread}, ctx.cfg().tol("calibration_spread"));
    c.extra = {{"functions", cal.names}, {"ratios", cal.ratios}};
    rep.add(c);
    rep.results() = {{"z_n", h.z_n},
                     {"z_n_coarse", h.z_n_coarse},
                     {"z_n_wide", h.z_n_wide},
                     {"z_n_recomputed_ratio", recomputed},
                     {"cartan_const", cal.constant},
                     {"dim_n", ctx.model().dim_n()}};
}

inline void run_cfunc(Context& ctx, Report& rep) {
    const CFunctionEngine& e = ctx.engine();
    const RootDatum& rd = e.root_datum();
    json res = {{"fitted_constants", e.fitted_constants()}};
    if (!ctx.cfg().lambda.empty() || !ctx.cfg().lambda_re.empty()) {
        const SpectralParam l = ctx.cfg().spectral_param(ctx.rank());
        json per_w = json::array();
        for (int w = 0; w < e.weyl().order(); ++w)
            per_w.push_back({{"w", w}, {"length", e.weyl().length(w)}, {"c_product", cplx_json(e.c_product(l, w))}});
        res["lambda"] = lambda_json(l);
        res["c"] = cplx_json(e.c(l));
        res["c_w"] = per_w;
        if (l.is_imaginary() && rd.is_regular(l))
            res["density"] = e.plancherel_density(l);
    }
    // integral formula against the product formula at random points deep in
    // the convergence domain
    const int n = ctx.cfg().samples_or(20);
    double zmin = 1e300;
    for (int a : rd.positive)
        zmin = std::min(zmin, rd.rho.dot(rd.roots[a]) / rd.roots[a].squaredNorm());
    std::uniform_real_distribution<double> u(0.75, 2.0), v(-1.0, 1.0);
    std::vector<SpectralParam> pts;
    for (int i = 0; i < n; ++i) {
        const Vec re = -u(ctx.rng()) / zmin * rd.rho;
        Vec im(rd.rank);
        for (auto& x : im)
            x = v(ctx.rng());
        double mz = 0.0;
        for (int a : rd.positive)
            mz = std::max(mz, std::abs(im.dot(rd.roots[a])) / rd.roots[a].squaredNorm());
        im *= 2.0 * std::abs(v(ctx.rng())) / mz;
        pts.push_back({re, im});
    }
    std::vector<double> err(n);
    ctx.parallel(n, [&](std::size_t i) {
        const cplx a = e.c_integral(pts[i], e.weyl().longest), b = e.c_product(pts[i], e.weyl().longest);
        err[i] = std::abs(a - b) / std::abs(a);
    });
    rep.add(summarize("c-oracle", err, ctx.cfg().tol("c_oracle")));
    rep.results() = res;
}

inline void run_density(Context& ctx, Report& rep) {
    DensityGridSpec spec;
    spec.lambda_max = ctx.cfg().lambda_max;
    spec.points = ctx.cfg().points;
    const auto table = ctx.engine().tabulate_density(spec);
    {
        auto f = open_csv(rep.data_path("density.csv"));
        table.write_csv(f);
    }
    {
        std::ofstream f(rep.data_path("density.json"));
        write_json(f, table.to_json());
        f << "\n";
    }
    int bad = 0;
    double lo = 1e300, hi = 0.0;
    for (double d : table.density) {
        bad += !(d > 0.0) || !std::isfinite(d);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    auto c = summarize("density-positive", {static_cast<double>(bad)}, 0.5);
    c.extra = {{"min_density", lo}, {"max_density", hi}};
    rep.add(c);
    rep.results() = {{"samples", table.density.size()}, {"lambda_max", spec.lambda_max}, {"points_per_axis", spec.points}};
}

inline void run_phi(Context& ctx, Report& rep) {
    const RunConfig& cfg = ctx.cfg();
    const SpectralParam l = cfg.spectral_param(ctx.rank());
    const Vec x = cfg.direction(ctx.model());
    SphericalEvaluator& ev = ctx.evaluator();
    const RootDatum& rd = ev.root_datum();
    std::optional<ConstantTermData> d;
    if (l.is_imaginary() && rd.is_regular(l) && (x.norm() > 0.0))
        d = make_constant_term_data(ctx.engine(), l, x);
    std::vector<double> ts;
    for (double t = cfg.t_range[0]; t <= cfg.t_range[1] + 1e-12 * cfg.t_range[2]; t += cfg.t_range[2])
        ts.push_back(t);
    const double rho_x = rd.rho.dot(x);
    std::vector<cplx> phi(ts.size()), expansion(ts.size());
    std::vector<double> residual(ts.size(), std::nan(""));
    ctx.parallel(ts.size(), [&](std::size_t i) {
        // far out on rank one the K-integrand concentrates; use the damped N-chart
        if (ctx.rank() == 1 && ts[i] * x.norm() >= 2.0)
            phi[i] = ev.phi_damped_n_chart(l, ts[i] * x) * std::exp(ts[i] * rho_x);
        else
            phi[i] = ev.phi_radial(l, ts[i] * x);
        if (!d)
            return;
        expansion[i] = constant_term_expansion(*d, ts[i]) * std::exp(ts[i] * rho_x);
        residual[i] = ctx.rank() == 1 ? asymptotic_residual(ev, *d, ts[i])
                                      : std::abs(phi[i] * std::exp(-ts[i] * rho_x) - constant_term_expansion(*d, ts[i]));
    });
    auto f = open_csv(rep.data_path("phi.csv"));
    f << "t,re_phi,im_phi,re_expansion,im_expansion,residual\n";
    for (std::size_t i = 0; i < ts.size(); ++i) {
        f << ts[i] << "," << phi[i].real() << "," << phi[i].imag() << ",";
        if (d)
            f << expansion[i].real() << "," << expansion[i].imag() << "," << residual[i] << "\n";
        else
            f << ",,\n";
    }
    rep.results() = {{"lambda", lambda_json(l)},
                     {"geodesic", vec_json(x)},
                     {"rho_x", rho_x},
                     {"samples", ts.size()},
                     {"constant_term", d.has_value()}};
}

// ---------------------------------------------------------------------------
// checks

inline void check_mean_value(Context& ctx, Report& rep) {
    const int n = ctx.cfg().samples_or(10);
    std::vector<SpectralParam> ls;
    std::vector<SmallMat> gs, hs;
    for (int i = 0; i < n; ++i) {
        ls.push_back(ctx.random_imaginary());
        gs.push_back(ctx.model().random_element(ctx.rng(), 1.0));
        hs.push_back(ctx.model().random_element(ctx.rng(), 1.0));
    }
    const SphericalEvaluator& ev = ctx.evaluator();
    std::vector<double> r(n);
    ctx.parallel(n, [&](std::size_t i) { r[i] = ev.mean_value_check(ls[i], gs[i], hs[i]); });
    rep.add(summarize("mean-value", r, ctx.cfg().tol("mean_value")));
}

inline void check_w_invariance(Context& ctx, Report& rep) {
    const int n = ctx.cfg().samples_or(10);
    std::vector<SpectralParam> ls;
    std::vector<SmallMat> gs;
    for (int i = 0; i < n; ++i) {
        ls.push_back(ctx.random_imaginary());
        gs.push_back(ctx.model().random_element(ctx.rng(), 1.0));
    }
    const SphericalEvaluator& ev = ctx.evaluator();
    std::vector<double> r(n);
    ctx.parallel(n, [&](std::size_t i) { r[i] = ev.w_invariance_check(ls[i], gs[i]); });
    rep.add(summarize("w-invariance", r, ctx.cfg().tol("w_invariance")));
}

inline void check_maass_selberg(Context& ctx, Report& rep) {
    const int n = ctx.cfg().samples_or(100);
    std::vector<SpectralParam> ls;
    for (int i = 0; i < n; ++i)
        ls.push_back(ctx.random_imaginary());
    const CFunctionEngine& e = ctx.engine();
    std::vector<double> r(n);
    ctx.parallel(n, [&](std::size_t i) { r[i] = e.maass_selberg_check(ls[i]); });
    rep.add(summarize("maass-selberg", r, ctx.cfg().tol("maass_selberg")));
}

/// Residual after subtracting the constant term decays at rate
/// <= -rate |rho(X)|; the check residual is slope / |rho(X)| + rate.
inline void check_asymptotics(Context& ctx, Report& rep) {
    ctx.require_rank_one("the asymptotics check");
    const int n = ctx.cfg().samples_or(5);
    std::uniform_real_distribution<double> ul(0.2, 3.0), us(0.7, 1.3);
    const Vec unit = ctx.model().negative_chamber_generators()[0].normalized();
    std::vector<SpectralParam> ls;
    std::vector<Vec> xs;
    for (int i = 0; i < n; ++i) {
        ls.push_back(SpectralParam::imaginary(Vec::Constant(1, ul(ctx.rng()))));
        xs.push_back(us(ctx.rng()) * unit);
    }
    const double rate = ctx.cfg().tol("asymptotic_rate");
    const CFunctionEngine& e = ctx.engine();
    const SphericalEvaluator& ev = ctx.evaluator();
    std::vector<double> slope(n), margin(n);
    ctx.parallel(n, [&](std::size_t i) {
        const auto fit = fit_asymptotic_decay(ev, make_constant_term_data(e, ls[i], xs[i]));
        slope[i] = fit.fit.slope / std::abs(fit.rho_x);
        margin[i] = slope[i] + rate;
    });
    CheckResult c;
    c.name = "asymptotics";
    c.samples = n;
    c.threshold = 0.0;
    c.residual = *std::max_element(margin.begin(), margin.end());
    for (double m : margin)
        c.mean += m / n;
    c.pass = c.residual <= 0.0;
    c.extra = {{"normalized_slopes", slope}, {"required_rate", rate}};
    rep.add(c);
}

inline void check_tempered(Context& ctx, Report& rep) {
    ctx.require_rank_one("the temperedness check");
    const int n = ctx.cfg().samples_or(5);
    std::vector<SpectralParam> ls = {SpectralParam::imaginary(Vec::Zero(1))};
    for (int i = 1; i < n; ++i)
        ls.push_back(ctx.random_imaginary());
    const Vec x = ctx.cfg().direction(ctx.model());
    const SphericalEvaluator& ev = ctx.evaluator();
    std::vector<double> flagged(n), degree(n);
    ctx.parallel(n, [&](std::size_t i) {
        const auto r = temperedness_bound_check(ev, ls[i], x, 30.0, 30);
        flagged[i] = r.exponential_growth;
        degree[i] = r.degree;
    });
    auto c = summarize("tempered-imaginary", flagged, 0.5);
    c.extra = {{"degrees", degree}};
    rep.add(c);
    const auto ctrl = temperedness_bound_check(ev, SpectralParam::real(2.0 * ev.root_datum().rho), x);
    CheckResult k;
    k.name = "tempered-control-2rho";
    k.samples = 1;
    k.residual = ctrl.exp_rate;
    k.mean = ctrl.exp_rate;
    k.pass = ctrl.exponential_growth;
    k.extra = {{"flagged", ctrl.exponential_growth}};
    rep.add(k);
}

inline void check_parseval_horo(Context& ctx, Report& rep) {
    const int n = ctx.cfg().samples_or(5);
    const bool a2 = ctx.rank() == 2;
    const Vec lo = Vec::Constant(ctx.rank(), -1.6), hi = Vec::Constant(ctx.rank(), 1.6);
    std::vector<HoroFunction> fs;
    for (int i = 0; i < n; ++i)
        fs.push_back(HoroFunction::sample(ctx.model(), random_horo_function(ctx.model(), ctx.rng(), 1.0), lo, hi,
                                          a2 ? 0.1 : 0.05, a2 ? 8 : 16));
    std::vector<double> r(n);
    for (int i = 0; i < n; ++i)
        r[i] = horo_parseval(ctx.model(), fs[i], 0.0, ctx.cfg().threads).relative;
    rep.add(summarize("parseval-horo", r, ctx.cfg().tol("parseval_horo")));
    rep.add(summarize("chamber-regrouping", {chamber_regrouping(ctx.engine(), fs[0], 20.0).relative},
                      ctx.cfg().tol("regrouping")));
}

inline void check_convolution(Context& ctx, Report& rep) {
    ctx.require_rank_one("the convolution check");
    const int n = ctx.cfg().samples_or(1);
    std::uniform_real_distribution<double> us(0.3, 0.45), ur(1.4, 1.9);
    const double cg = ctx.cartan_const();
    SpectralGridSpec gs;
    gs.lambda_max = 6.0;
    gs.radial_panels = 2;
    gs.radial_order = 4;
    const auto grid = chamber_grid(ctx.engine(), gs);
    std::vector<double> comm, mult;
    for (int i = 0; i < n; ++i) {
        const double s1 = us(ctx.rng()), r1 = ur(ctx.rng()), s2 = us(ctx.rng()), r2 = ur(ctx.rng());
        const auto f1 = RadialProfile::sample(ctx.model(), gaussian_bump(s1, r1), r1, 0.02);
        const auto f2 = RadialProfile::sample(ctx.model(), gaussian_bump(s2, r2), r2, 0.02);
        const auto a = convolve_radial(ctx.model(), cg, f1, f2);
        const auto b = convolve_radial(ctx.model(), cg, f2, f1);
        double cm = 0.0, mm = 0.0;
        for (double r = 0.0; r < r1 + r2; r += 0.013)
            cm = std::max(cm, std::abs(a.at_radius(r) - b.at_radius(r)));
        const SphericalEvaluator& ev = ctx.evaluator();
        const auto F1 = spherical_transform(ev, ctx.engine(), cg, f1, grid, {}, ctx.cfg().threads);
        const auto F2 = spherical_transform(ev, ctx.engine(), cg, f2, grid, {}, ctx.cfg().threads);
        const auto F12 = spherical_transform(ev, ctx.engine(), cg, a, grid, {}, ctx.cfg().threads);
        for (std::size_t k = 0; k < grid.size(); ++k)
            mm = std::max(mm, std::abs(F12.values[k] - F1.values[k] * F2.values[k]));
        comm.push_back(cm);
        mult.push_back(mm);
    }
    rep.add(summarize("convolution-commutativity", comm, ctx.cfg().tol("commutativity")));
    rep.add(summarize("convolution-multiplicativity", mult, ctx.cfg().tol("multiplicativity")));
}

// ---------------------------------------------------------------------------

inline void run_transform_spherical(Context& ctx, Report& rep) {
    const RadialProfile f = load_profile(ctx);
    const auto grid = chamber_grid(ctx.engine(), grid_spec(ctx.cfg()));
    const double cg = ctx.cartan_const();
    const auto F = spherical_transform(ctx.evaluator(), ctx.engine(), cg, f, grid, {}, ctx.cfg().threads);
    auto out = open_csv(rep.data_path("spectrum_spherical.csv"));
    for (int j = 0; j < F.rank; ++j)
        out << "y" << j + 1 << ",";
    out << "weight,re,im,density\n";
    for (std::size_t i = 0; i < F.size(); ++i) {
        for (int j = 0; j < F.rank; ++j)
            out << F.lambdas[i].im[j] << ",";
        out << F.weights[i] << "," << F.values[i].real() << "," << F.values[i].imag() << "," << F.density[i] << "\n";
    }
    const double l2 = radial_l2_norm_sq(ctx.model(), cg, f);
    const double spec = spectral_l2_norm_sq(F);
    rep.results() = {{"cartan_const", cg},
                     {"l2_norm_sq", l2},
                     {"spectral_norm_sq", spec},
                     {"parseval_rel", std::abs(spec - l2) / l2},
                     {"tail_relative", estimate_spectral_tail(F).relative},
                     {"nodes", F.size()}};
}

inline void run_transform_horo(Context& ctx, Report& rep) {
    const bool a2 = ctx.rank() == 2;
    const Vec lo = Vec::Constant(ctx.rank(), -1.6), hi = Vec::Constant(ctx.rank(), 1.6);
    const auto f = HoroFunction::sample(ctx.model(), random_horo_function(ctx.model(), ctx.rng(), 1.0), lo, hi,
                                        a2 ? 0.1 : 0.05, a2 ? 8 : 16);
    const auto pr = horo_parseval(ctx.model(), f, 0.0, ctx.cfg().threads);
    const auto grid = full_space_grid(ctx.rank(), pr.y_max, pr.y_step);
    const HoroNormEvaluator norms(ctx.model(), f);
    std::vector<double> v(grid.size());
    ctx.parallel(grid.size(), [&](std::size_t i) { v[i] = norms.norm_sq(grid.lambdas[i]); });
    auto out = open_csv(rep.data_path("spectrum_horo.csv"));
    for (int j = 0; j < ctx.rank(); ++j)
        out << "y" << j + 1 << ",";
    out << "weight,norm_sq\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (int j = 0; j < ctx.rank(); ++j)
            out << grid.lambdas[i].im[j] << ",";
        out << grid.weights[i] << "," << v[i] << "\n";
    }
    rep.add(summarize("parseval-horo", {pr.relative}, ctx.cfg().tol("parseval_horo")));
    rep.results() = {{"l2_norm_sq", pr.lhs}, {"spectral_norm_sq", pr.rhs}, {"y_max", pr.y_max}, {"y_step", pr.y_step}};
}

inline void run_invert(Context& ctx, Report& rep) {
    const RadialProfile f = load_profile(ctx);
    const auto rt = spherical_round_trip(ctx.evaluator(), ctx.engine(), ctx.cartan_const(), f, grid_spec(ctx.cfg()),
                                         ctx.cfg().round_trip_points, 1e-4, 4, {}, ctx.cfg().threads);
    auto out = open_csv(rep.data_path("round_trip.csv"));
    out << "radius,original,reconstructed\n";
    for (std::size_t i = 0; i < rt.radii.size(); ++i)
        out << rt.radii[i] << "," << rt.original[i] << "," << rt.reconstructed[i] << "\n";
    double rms = 0.0;
    for (std::size_t i = 0; i < rt.radii.size(); ++i)
        rms += std::pow(rt.original[i] - rt.reconstructed[i], 2) / rt.radii.size();
    rms = std::sqrt(rms);
    rep.add(summarize("round-trip-sup", {rt.sup_error}, ctx.cfg().tol("round_trip_sup")));
    rep.add(summarize("round-trip-parseval", {rt.parseval_rel}, ctx.cfg().tol("round_trip_parseval")));
    rep.results() = {{"sup_error", rt.sup_error},
                     {"sup_norm", rt.sup_norm},
                     {"l2_norm_sq", rt.l2_norm_sq},
                     {"spectral_norm_sq", rt.spectral_norm_sq},
                     {"parseval_gap", std::abs(rt.l2_norm_sq - rt.spectral_norm_sq)},
                     {"rms_error", rms},
                     {"lambda_max", rt.lambda_max},
                     {"tail_relative", rt.tail.relative}};
}

/// Eigendata file:
///   {"basis": [[...], ...]            rows = rank, columns = generators
///    "multiplier": c,
///    "F": {"re": [[...]], "im": [[...]]},
///    "eigenpairs": [{"lambda": [...], "vector": {"re": [...], "im": [...]}}]}
inline void run_average(Context& ctx, Report& rep) {
    json spec = json::parse(R"({
        "basis": [[1.0]],
        "multiplier": 1.4142135623730951,
        "F": {"re": [[1.0, 0.3], [0.1, 2.0]], "im": [[0.0, 0.0], [0.0, 0.0]]},
        "eigenpairs": [
            {"lambda": [0.7], "vector": {"re": [1.0, 0.5], "im": [0.0, 0.0]}},
            {"lambda": [-1.3], "vector": {"re": [0.2, 1.0], "im": [0.0, 0.0]}}
        ]})");
    if (!ctx.cfg().spec.empty()) {
        std::ifstream f(ctx.cfg().spec);
        if (!f)
            throw UsageError("cannot read eigendata " + ctx.cfg().spec);
        spec = json::parse(f);
    }
    auto matrix = [](const json& rows) {
        const std::size_t r = rows.size(), c = rows.at(0).size();
        Mat m(r, c);
        for (std::size_t i = 0; i < r; ++i) {
            if (rows[i].size() != c)
                throw UsageError("ragged matrix in eigendata");
            for (std::size_t j = 0; j < c; ++j)
                m(i, j) = rows[i][j].get<double>();
        }
        return m;
    };
    auto cvector = [](const json& v) {
        const auto re = v.at("re").get<std::vector<double>>(), im = v.at("im").get<std::vector<double>>();
        if (re.size() != im.size())
            throw UsageError("vector parts differ in length");
        Eigen::VectorXcd out(re.size());
        for (std::size_t i = 0; i < re.size(); ++i)
            out[i] = cplx(re[i], im[i]);
        return out;
    };
    const Mat basis = matrix(spec.at("basis"));
    const double c = spec.value("multiplier", std::numbers::sqrt2);
    const Mat fre = matrix(spec.at("F").at("re")), fim = matrix(spec.at("F").at("im"));
    if (fre.rows() != fim.rows() || fre.cols() != fim.cols())
        throw UsageError("F parts differ in shape");
    const Eigen::MatrixXcd F = fre.cast<cplx>() + cplx(0, 1) * fim.cast<cplx>();
    std::vector<EigenPair> data;
    for (const auto& e : spec.at("eigenpairs")) {
        const auto l = e.at("lambda").get<std::vector<double>>();
        data.push_back({SpectralParam::imaginary(Eigen::Map<const Vec>(l.data(), l.size())), cvector(e.at("vector"))});
    }
    const double target = cesaro_limit_target(data, F);
    auto out = open_csv(rep.data_path("cesaro.csv"));
    out << "n,average,target,relative_error\n";
    json rows = json::array();
    double last = 0.0;
    for (int n : ctx.cfg().n_list) {
        const double a = cesaro_average(data, F, n, basis, c);
        last = std::abs(a - target) / target;
        out << n << "," << a << "," << target << "," << last << "\n";
        rows.push_back({{"n", n}, {"average", a}, {"relative_error", last}});
    }
    auto chk = summarize("cesaro-convergence", {last}, ctx.cfg().tol("cesaro"));
    chk.extra = {{"n", ctx.cfg().n_list.back()}};
    rep.add(chk);
    rep.results() = {{"target", target}, {"table", rows}};
}

} // namespace cli
