#pragma once

// Restricted root systems with multiplicities, the little Weyl group and
// spectral parameters. Covectors are coordinate vectors in a fixed
// orthonormal basis of a* (orthonormal for the form induced by the Killing
// form), so the Gram matrix is the identity and a, a* are identified.

#include <algorithm>
#include <cmath>
#include <complex>
#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "plancherel/error.hpp"

namespace plancherel {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using cplx = std::complex<double>;

enum class RootFamily { A1, A2, RankOne };

inline std::string to_string(RootFamily f) {
    switch (f) {
    case RootFamily::A1: return "A1";
    case RootFamily::A2: return "A2";
    case RootFamily::RankOne: return "rank_one";
    }
    return "?";
}

/// Point of a*_C stored as real and imaginary coordinate vectors.
struct SpectralParam {
    Vec re;
    Vec im;

    static SpectralParam real(const Vec& v) { return {v, Vec::Zero(v.size())}; }
    static SpectralParam imaginary(const Vec& v) { return {Vec::Zero(v.size()), v}; }

    int rank() const { return static_cast<int>(re.size()); }

    /// Complex pairing <lambda, v> with a real covector v.
    cplx pair(const Vec& v) const { return {re.dot(v), im.dot(v)}; }

    /// lambda(H) for H in a.
    cplx operator()(const Vec& h) const { return pair(h); }

    double norm() const { return std::sqrt(re.squaredNorm() + im.squaredNorm()); }

    bool finite() const { return re.allFinite() && im.allFinite(); }

    bool is_imaginary(double tol = 0.0) const { return re.cwiseAbs().maxCoeff() <= tol; }

    SpectralParam operator-() const { return {-re, -im}; }
    SpectralParam operator+(const SpectralParam& o) const { return {re + o.re, im + o.im}; }
    SpectralParam operator-(const SpectralParam& o) const { return {re - o.re, im - o.im}; }
    SpectralParam operator*(double s) const { return {re * s, im * s}; }
    SpectralParam conj() const { return {re, -im}; }

    /// Action of a linear map on a* (both parts).
    SpectralParam transformed(const Mat& m) const { return {m * re, m * im}; }
};

/// Restricted root datum in orthonormal coordinates.
struct RootDatum {
    RootFamily family = RootFamily::RankOne;
    int rank = 1;
    std::vector<Vec> roots;           // all of Sigma
    std::vector<int> multiplicities;  // parallel to roots
    std::vector<int> positive;        // indices into roots
    std::vector<int> simple;          // indices into roots
    Vec rho;
    Mat gram;                         // identity in the chosen basis
    int family_multiplicity = 1;      // parameter the datum was built from
    double root_length = 1.0;

    double inner(const Vec& a, const Vec& b) const { return a.dot(gram * b); }

    /// <lambda, alpha> / <alpha, alpha>
    cplx coroot_ratio(const SpectralParam& lambda, int root) const {
        const Vec& a = roots[root];
        return lambda.pair(gram * a) / inner(a, a);
    }

    /// Index of the root equal to v (within tol), or -1.
    int find_root(const Vec& v, double tol = 1e-9) const {
        for (std::size_t i = 0; i < roots.size(); ++i)
            if ((roots[i] - v).norm() <= tol * std::max(1.0, v.norm()))
                return static_cast<int>(i);
        return -1;
    }

    bool is_positive(int root) const {
        return std::find(positive.begin(), positive.end(), root) != positive.end();
    }

    /// Index of -alpha.
    int negative_of(int root) const { return find_root(-roots[root]); }

    /// Regularity test |<lambda, alpha>| >= tol * |lambda| * |alpha| for all roots.
    bool is_regular(const SpectralParam& lambda, double tol = 1e-10) const {
        const double ln = lambda.norm();
        for (int idx : positive) {
            const Vec& a = roots[idx];
            if (std::abs(lambda.pair(gram * a)) < tol * ln * std::sqrt(inner(a, a)) || ln == 0.0)
                return false;
        }
        return true;
    }
};

/// Builds one of the supported root data. `root_length` is |alpha| for
/// the (simple) roots in the orthonormal basis.
inline RootDatum build_root_datum(RootFamily family, int multiplicity = 1,
                                  double root_length = 1.0) {
    if (multiplicity < 1)
        throw ParameterError("build_root_datum: multiplicity must be >= 1");
    if (!(root_length > 0.0) || !std::isfinite(root_length))
        throw ParameterError("build_root_datum: root length must be positive");
    RootDatum rd;
    rd.family = family;
    rd.family_multiplicity = multiplicity;
    rd.root_length = root_length;
    switch (family) {
    case RootFamily::A1:
    case RootFamily::RankOne: {
        rd.rank = 1;
        Vec a(1);
        a << root_length;
        rd.roots = {a, -a};
        rd.multiplicities = {multiplicity, multiplicity};
        rd.positive = {0};
        rd.simple = {0};
        break;
    }
    case RootFamily::A2: {
        if (multiplicity != 1)
            throw ParameterError("build_root_datum: A2 is supported with multiplicity 1 only");
        rd.rank = 2;
        Vec a1(2), a2(2);
        a1 << root_length, 0.0;
        a2 << -0.5 * root_length, 0.5 * std::sqrt(3.0) * root_length;
        const Vec a12 = a1 + a2;
        rd.roots = {a1, a2, a12, -a1, -a2, -a12};
        rd.multiplicities.assign(6, 1);
        rd.positive = {0, 1, 2};
        rd.simple = {0, 1};
        break;
    }
    }
    rd.gram = Mat::Identity(rd.rank, rd.rank);
    rd.rho = Vec::Zero(rd.rank);
    for (int idx : rd.positive)
        rd.rho += 0.5 * rd.multiplicities[idx] * rd.roots[idx];
    return rd;
}

/// Orthogonal reflection of a* in the hyperplane orthogonal to alpha.
inline Mat reflection_matrix(const RootDatum& rd, const Vec& alpha) {
    const Mat id = Mat::Identity(rd.rank, rd.rank);
    return id - 2.0 * alpha * (rd.gram * alpha).transpose() / rd.inner(alpha, alpha);
}

/// Finite reflection group generated by the simple reflections.
struct WeylGroup {
    std::vector<Mat> elements;
    int identity = 0;
    int longest = 0;
    std::vector<int> generators;   // indices of simple reflections
    std::vector<int> inverse;      // index of the inverse element
    std::vector<std::vector<int>> product; // product[a][b] = index of a*b
    std::vector<std::vector<int>> words;   // a reduced word in simple reflection positions

    int order() const { return static_cast<int>(elements.size()); }

    int find(const Mat& m, double tol = 1e-9) const {
        for (std::size_t i = 0; i < elements.size(); ++i)
            if ((elements[i] - m).cwiseAbs().maxCoeff() <= tol)
                return static_cast<int>(i);
        return -1;
    }

    int length(int w) const { return static_cast<int>(words[w].size()); }

    SpectralParam act(int w, const SpectralParam& lambda) const {
        return lambda.transformed(elements[w]);
    }
    Vec act(int w, const Vec& v) const { return elements[w] * v; }
};

/// Generates W by breadth-first closure over the simple reflections.
inline WeylGroup weyl_group(const RootDatum& rd, int element_cap = 1024) {
    WeylGroup wg;
    std::vector<Mat> gens;
    for (int s : rd.simple)
        gens.push_back(reflection_matrix(rd, rd.roots[s]));
    wg.elements.push_back(Mat::Identity(rd.rank, rd.rank));
    wg.words.push_back({});
    std::deque<int> queue{0};
    while (!queue.empty()) {
        const int cur = queue.front();
        queue.pop_front();
        for (std::size_t g = 0; g < gens.size(); ++g) {
            const Mat next = gens[g] * wg.elements[cur];
            if (wg.find(next) >= 0)
                continue;
            if (wg.order() >= element_cap)
                throw SizeError("weyl_group: closure exceeded element cap");
            wg.elements.push_back(next);
            auto word = wg.words[cur];
            word.insert(word.begin(), static_cast<int>(g));
            wg.words.push_back(std::move(word));
            queue.push_back(wg.order() - 1);
        }
    }
    for (const Mat& g : gens)
        wg.generators.push_back(wg.find(g));
    const int n = wg.order();
    wg.inverse.assign(n, -1);
    wg.product.assign(n, std::vector<int>(n, -1));
    for (int a = 0; a < n; ++a) {
        wg.inverse[a] = wg.find(wg.elements[a].transpose());
        for (int b = 0; b < n; ++b)
            wg.product[a][b] = wg.find(wg.elements[a] * wg.elements[b]);
    }
    // the longest element sends rho to -rho
    for (int a = 0; a < n; ++a)
        if ((wg.elements[a] * rd.rho + rd.rho).norm() < 1e-9 * std::max(1.0, rd.rho.norm()))
            wg.longest = a;
    return wg;
}

/// Positive roots alpha with w(alpha) negative; these index the root
/// subgroups spanning the integration domain of c_w.
inline std::vector<int> inversion_set(const RootDatum& rd, const WeylGroup& wg, int w) {
    std::vector<int> out;
    for (int idx : rd.positive) {
        const int img = rd.find_root(wg.elements[w] * rd.roots[idx]);
        if (img >= 0 && !rd.is_positive(img))
            out.push_back(idx);
    }
    return out;
}

/// Orbit representative of an imaginary lambda in the closed positive
/// chamber, together with the Weyl element used. On walls the
/// lexicographically smallest coordinate vector wins, then the lowest
/// element index.
inline std::pair<SpectralParam, int> dominant_representative(const SpectralParam& lambda,
                                                             const WeylGroup& wg,
                                                             const RootDatum& rd,
                                                             double tol = 1e-12) {
    if (!lambda.is_imaginary())
        throw ParameterError("dominant_representative: lambda must be purely imaginary");
    std::optional<int> best;
    Vec best_vec;
    const double scale = std::max(1.0, lambda.im.norm());
    for (int w = 0; w < wg.order(); ++w) {
        const Vec img = wg.elements[w] * lambda.im;
        bool dominant = true;
        for (int s : rd.simple)
            if (rd.inner(img, rd.roots[s]) < -tol * scale)
                dominant = false;
        if (!dominant)
            continue;
        if (!best) {
            best = w;
            best_vec = img;
            continue;
        }
        const Vec diff = img - best_vec;
        for (int i = 0; i < diff.size(); ++i) {
            if (std::abs(diff[i]) <= tol * scale)
                continue;
            if (diff[i] < 0.0) {
                best = w;
                best_vec = img;
            }
            break;
        }
    }
    return {SpectralParam::imaginary(best_vec), *best};
}

inline void to_json(nlohmann::json& j, const RootDatum& rd) {
    j = nlohmann::json{{"family", to_string(rd.family)},
                       {"multiplicity", rd.family_multiplicity},
                       {"root_length", rd.root_length}};
}

inline RootDatum root_datum_from_json(const nlohmann::json& j) {
    const std::string fam = j.at("family").get<std::string>();
    const int mult = j.value("multiplicity", 1);
    const double len = j.value("root_length", 1.0);
    if (fam == "A1")
        return build_root_datum(RootFamily::A1, mult, len);
    if (fam == "A2")
        return build_root_datum(RootFamily::A2, mult, len);
    if (fam == "rank_one")
        return build_root_datum(RootFamily::RankOne, mult, len);
    throw ParameterError("unknown root family '" + fam + "'");
}

} // namespace plancherel
