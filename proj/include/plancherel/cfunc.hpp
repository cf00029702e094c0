#pragma once

// Harish-Chandra c-functions.
//
//   c_w(lambda) = int_{N_w} a(n)^{rho - lambda} dn,
//
// N_w = exp of the root spaces of S(w) = {alpha > 0 : w alpha < 0}, so the
// integral converges for Re <lambda, alpha> < 0 on S(w). The Gamma-product
// form multiplies one rank-one factor per alpha in S(w), each carrying a
// constant fitted against the integral.
//
// Measures: dn on N is dY / z_n; on N_w we use dY_w / z_n^{dim N_w / dim N},
// the same per-dimension scale, which keeps the product over S(w)
// multiplicative in w.

#include <cmath>
#include <complex>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "plancherel/error.hpp"
#include "plancherel/gamma.hpp"
#include "plancherel/groups.hpp"
#include "plancherel/quadrature.hpp"
#include "plancherel/rootdata.hpp"

namespace plancherel {

struct CFunctionOptions {
    QuadratureSpec quad;       // resolution checks on the N-integrals
    double margin = 0.05;      // minimal Re z = -Re<lambda,alpha>/<alpha,alpha> on S(w)
    double pole_tol = 1e-8;    // Gamma argument this close to 0, -1, ... is a pole
    double regular_tol = 1e-10;
    unsigned threads = 0;      // for tabulation; 0 = hardware concurrency
};

/// Rank-one factor without its constant, in z = -<lambda,alpha>/<alpha,alpha>:
///   2^{-z} Gamma(z) / (Gamma((m/2 + 1 + z)/2) Gamma((m/2 + m2 + z)/2)).
/// Returns 0 on zeros (denominator poles); throws PoleError with `root` on
/// numerator poles.
inline cplx rank_one_factor(cplx z, int m, int m2, int root = -1, double pole_tol = 1e-8) {
    if (distance_to_gamma_pole(z) < pole_tol)
        throw PoleError("c-function factor at a pole", root);
    const cplx d1 = 0.5 * (0.5 * m + 1.0 + z);
    const cplx d2 = 0.5 * (0.5 * m + m2 + z);
    if (distance_to_gamma_pole(d1) < 1e-14 || distance_to_gamma_pole(d2) < 1e-14)
        return 0.0;
    return std::exp(-z * std::log(2.0) + gamma_ln(z, 0.0) - gamma_ln(d1, 0.0) - gamma_ln(d2, 0.0));
}

struct DensityGridSpec {
    double lambda_max = 40.0;  // chamber coordinates run over (0, lambda_max]
    int points = 200;          // per chamber coordinate
};

/// |c(lambda)|^{-2} sampled on a grid in the positive imaginary chamber.
/// Rank one: lambda = i t alpha/|alpha|; A2: lambda = i (u w1 + v w2) with
/// w1, w2 the unit vectors along the chamber walls.
struct SpectralDensityTable {
    std::vector<SpectralParam> grid;
    std::vector<cplx> c_values;
    std::vector<double> density;
    DensityGridSpec bounds;
    int rank = 1;

    void write_csv(std::ostream& os) const {
        os << std::setprecision(17);
        for (int j = 0; j < rank; ++j)
            os << "y" << j + 1 << ",";
        os << "re_c,im_c,density\n";
        for (std::size_t i = 0; i < grid.size(); ++i) {
            for (int j = 0; j < rank; ++j)
                os << grid[i].im[j] << ",";
            os << c_values[i].real() << "," << c_values[i].imag() << "," << density[i] << "\n";
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json pts = nlohmann::json::array();
        for (std::size_t i = 0; i < grid.size(); ++i) {
            pts.push_back({{"y", std::vector<double>(grid[i].im.data(), grid[i].im.data() + rank)},
                           {"c", {c_values[i].real(), c_values[i].imag()}},
                           {"density", density[i]}});
        }
        return {{"rank", rank},
                {"lambda_max", bounds.lambda_max},
                {"points_per_axis", bounds.points},
                {"samples", pts}};
    }
};

class CFunctionEngine {
public:
    /// Builds the engine and fits one constant per positive root.
    CFunctionEngine(ModelPtr model, HaarNormalization haar, CFunctionOptions opts = {})
        : model_(std::move(model)), haar_(haar), opts_(opts), rd_(model_->root_datum()),
          wg_(weyl_group(rd_)) {
        if (!(haar_.z_n > 0.0))
            throw StateError("CFunctionEngine: Haar normalization not computed");
        constants_.assign(rd_.roots.size(), 0.0);
        fit_constants();
    }

    const GroupModel& model() const { return *model_; }
    const RootDatum& root_datum() const { return rd_; }
    const WeylGroup& weyl() const { return wg_; }
    const HaarNormalization& haar() const { return haar_; }
    const CFunctionOptions& options() const { return opts_; }

    /// Fitted constant of the factor attached to a positive root.
    double fitted_constant(int root) const { return constants_.at(root); }
    std::vector<double> fitted_constants() const {
        std::vector<double> out;
        for (int idx : rd_.positive)
            out.push_back(constants_[idx]);
        return out;
    }

    /// z_alpha(lambda) = -<lambda, alpha> / <alpha, alpha>
    cplx z_value(const SpectralParam& lambda, int root) const { return -rd_.coroot_ratio(lambda, root); }

    /// The N_w integral; checked across two resolutions.
    cplx c_integral(const SpectralParam& lambda, int w) const {
        check_param(lambda);
        const auto s = inversion_set(rd_, wg_, w);
        if (s.empty())
            return 1.0;
        double decay = std::numeric_limits<double>::infinity();
        for (int idx : s) {
            const double re = z_value(lambda, idx).real();
            if (!(re >= opts_.margin))
                throw ConvergenceDomainError("c_integral: Re<lambda, alpha> must be <= -" +
                                             std::to_string(opts_.margin) +
                                             " <alpha, alpha> on the inversion set");
            decay = std::min(decay, re);
        }
        std::vector<int> which;
        for (int i = 0; i < model_->dim_n(); ++i)
            for (int idx : s)
                if (model_->n_roots()[i] == idx)
                    which.push_back(i);
        const Vec rho = rd_.rho;
        auto run = [&](double h) {
            const double t_max = quad::sinh_sinh_range_for_decay(decay, opts_.quad.tail_tol);
            return integrate_over_n<cplx>(*model_, which, h, t_max, [&](const SmallMat& n) {
                const Vec hv = model_->iwasawa_h(n);
                return std::exp(cplx((rho - lambda.re).dot(hv), -lambda.im.dot(hv)));
            });
        };
        const double norm = std::pow(haar_.z_n, double(which.size()) / model_->dim_n());
        const cplx coarse = run(opts_.quad.step) / norm;
        const cplx fine = run(0.5 * opts_.quad.step) / norm;
        if (!(std::abs(fine - coarse) <= opts_.quad.resolution_tol * std::abs(fine)))
            throw QuadratureError("c_integral: resolutions disagree");
        return fine;
    }

    /// Gindikin-Karpelevich product over S(w) with the fitted constants.
    cplx c_product(const SpectralParam& lambda, int w) const {
        check_param(lambda);
        cplx out = 1.0;
        for (int idx : inversion_set(rd_, wg_, w))
            out *= constants_[idx] * factor(lambda, idx);
        return out;
    }

    /// c = c_{w0}
    cplx c(const SpectralParam& lambda) const { return c_product(lambda, wg_.longest); }

    /// max_w | |c(w lambda)| - |c(lambda)| | / |c(lambda)|
    double maass_selberg_check(const SpectralParam& lambda) const {
        require_regular_imaginary(lambda, "maass_selberg_check");
        const double base = std::abs(c(lambda));
        double worst = 0.0;
        for (int w = 0; w < wg_.order(); ++w) {
            if (w == wg_.identity)
                continue;
            worst = std::max(worst, std::abs(std::abs(c(wg_.act(w, lambda))) - base) / base);
        }
        return worst;
    }

    /// |c(lambda)|^{-2} for regular imaginary lambda.
    double plancherel_density(const SpectralParam& lambda) const {
        require_regular_imaginary(lambda, "plancherel_density");
        return 1.0 / std::norm(c(lambda));
    }

    /// Unit vectors spanning the closed positive imaginary chamber.
    std::vector<Vec> chamber_directions() const {
        std::vector<Vec> out;
        for (const Vec& g : model_->negative_chamber_generators())
            out.push_back(-g / g.norm());
        return out;
    }

    SpectralDensityTable tabulate_density(const DensityGridSpec& spec) const {
        if (!(spec.lambda_max > 0.0) || spec.points < 1)
            throw ParameterError("tabulate_density: need lambda_max > 0 and points >= 1");
        SpectralDensityTable t;
        t.bounds = spec;
        t.rank = rd_.rank;
        const auto dirs = chamber_directions();
        const double step = spec.lambda_max / spec.points;
        if (rd_.rank == 1) {
            for (int i = 1; i <= spec.points; ++i)
                t.grid.push_back(SpectralParam::imaginary(i * step * dirs[0]));
        } else {
            for (int i = 1; i <= spec.points; ++i)
                for (int j = 1; j <= spec.points; ++j)
                    t.grid.push_back(SpectralParam::imaginary(i * step * dirs[0] + j * step * dirs[1]));
        }
        t.c_values.resize(t.grid.size());
        t.density.resize(t.grid.size());
        quad::parallel_for(
            t.grid.size(),
            [&](std::size_t i) {
                t.c_values[i] = c(t.grid[i]);
                t.density[i] = plancherel_density(t.grid[i]);
            },
            opts_.threads);
        return t;
    }

private:
    void check_param(const SpectralParam& lambda) const {
        if (lambda.rank() != rd_.rank || lambda.im.size() != rd_.rank)
            throw ParameterError("spectral parameter has the wrong rank");
        if (!lambda.finite())
            throw ParameterError("spectral parameter is not finite");
    }

    void require_regular_imaginary(const SpectralParam& lambda, const char* who) const {
        check_param(lambda);
        if (!lambda.is_imaginary(1e-14 * std::max(1.0, lambda.norm())))
            throw ParameterError(std::string(who) + ": lambda must be imaginary");
        if (!rd_.is_regular(lambda, opts_.regular_tol))
            throw SingularParameterError(std::string(who) + ": lambda lies on a wall");
    }

    cplx factor(const SpectralParam& lambda, int root) const {
        const int m = rd_.multiplicities[root];
        const int twice = rd_.find_root(2.0 * rd_.roots[root]);
        const int m2 = twice >= 0 ? rd_.multiplicities[twice] : 0;
        return rank_one_factor(z_value(lambda, root), m, m2, root, opts_.pole_tol);
    }

    // Walk a reduced word of w0 from the right; each step adds one root to
    // the inversion set, whose constant is the integral divided by the
    // factors fitted so far. The fit point -rho lies deep in every domain.
    void fit_constants() {
        const SpectralParam fit_point = SpectralParam::real(-rd_.rho);
        const auto& word = wg_.words[wg_.longest];
        int cur = wg_.identity;
        std::vector<bool> seen(rd_.roots.size(), false);
        for (auto it = word.rbegin(); it != word.rend(); ++it) {
            const int next = wg_.product[wg_.generators[*it]][cur];
            const auto s_next = inversion_set(rd_, wg_, next);
            int fresh = -1;
            for (int idx : s_next)
                if (!seen[idx])
                    fresh = idx;
            if (fresh < 0)
                throw StateError("fit_constants: reduced word did not add a root");
            const cplx integral = c_integral(fit_point, next);
            cplx known = 1.0;
            for (int idx : s_next)
                if (idx != fresh)
                    known *= constants_[idx] * factor(fit_point, idx);
            const cplx kappa = integral / (known * factor(fit_point, fresh));
            constants_[fresh] = kappa.real();
            seen[fresh] = true;
            cur = next;
        }
        for (int idx : rd_.positive)
            if (!(constants_[idx] > 0.0))
                throw CalibrationError("fit_constants: non-positive constant");
    }

    ModelPtr model_;
    HaarNormalization haar_;
    CFunctionOptions opts_;
    RootDatum rd_;
    WeylGroup wg_;
    std::vector<double> constants_;
};

} // namespace plancherel
