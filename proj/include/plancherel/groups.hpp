#pragma once

// Concrete matrix models of G with G = K A Nbar, Cartan radial parts and
// the Haar-measure normalizations
//   int_N a(n)^{2 rho} dn = 1,
//   int_G f = int_K int_A int_Nbar f(k a nbar) a^{-2 rho} dnbar da dk.
//
// Every model carries an orthogonal "adapted" basis in which A is diagonal,
// N is upper and Nbar is lower unitriangular. Iwasawa factors are then a QL
// factorization in that basis, obtained from a Householder QR of the
// index-reversed matrix.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "plancherel/error.hpp"
#include "plancherel/quadrature.hpp"
#include "plancherel/rootdata.hpp"

namespace plancherel {

/// Group matrices are at most 4x4; fixed capacity avoids heap traffic in
/// quadrature loops.
using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 4, 4>;
using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 4, 1>;

enum class ModelTag { SL2R, SO0_1n, SL3R };

inline std::string to_string(ModelTag t) {
    switch (t) {
    case ModelTag::SL2R: return "sl2r";
    case ModelTag::SO0_1n: return "so1n";
    case ModelTag::SL3R: return "sl3r";
    }
    return "?";
}

/// Which part of K a quadrature covers.
enum class KGridKind {
    Full,   // all of K
    ModM,   // K/M, for right-M-invariant integrands
    Radial  // M\K/M-reduced, valid for x -> a(exp(H) k) type integrands only
};

/// Nodes and weights on K (weights sum to 1).
struct KQuadrature {
    std::vector<SmallMat> nodes;
    std::vector<double> weights;
    int resolution = 0;
    KGridKind kind = KGridKind::Full;

    std::size_t size() const noexcept { return nodes.size(); }
};

namespace detail {

inline SmallMat nilpotent_exp(const SmallMat& x) {
    const int n = static_cast<int>(x.rows());
    SmallMat out = SmallMat::Identity(n, n);
    SmallMat term = SmallMat::Identity(n, n);
    for (int k = 1; k < n; ++k) {
        term = (term * x) / static_cast<double>(k);
        out += term;
    }
    return out;
}

inline SmallMat rotation(int size, int i, int j, double angle) {
    SmallMat r = SmallMat::Identity(size, size);
    const double c = std::cos(angle), s = std::sin(angle);
    r(i, i) = c;
    r(j, j) = c;
    r(j, i) = s;
    r(i, j) = -s;
    return r;
}

} // namespace detail

/// A concrete linear group together with its restricted root data.
class GroupModel {
public:
    static std::shared_ptr<const GroupModel> sl2r() { return std::make_shared<const GroupModel>(ModelTag::SL2R, 2); }
    static std::shared_ptr<const GroupModel> sl3r() { return std::make_shared<const GroupModel>(ModelTag::SL3R, 3); }
    static std::shared_ptr<const GroupModel> so1n(int n) { return std::make_shared<const GroupModel>(ModelTag::SO0_1n, n); }

    static std::shared_ptr<const GroupModel> from_name(const std::string& name, int n = 3) {
        if (name == "sl2r" || name == "SL2R")
            return sl2r();
        if (name == "sl3r" || name == "SL3R")
            return sl3r();
        if (name == "so1n" || name == "SO0_1n")
            return so1n(n);
        if (name == "so13")
            return so1n(3);
        if (name == "so12")
            return so1n(2);
        throw ParameterError("unknown group model '" + name + "'");
    }

    GroupModel(ModelTag tag, int param) : tag_(tag), param_(param) {
        switch (tag) {
        case ModelTag::SL2R:
        case ModelTag::SL3R: build_sl(tag == ModelTag::SL2R ? 2 : 3); break;
        case ModelTag::SO0_1n: build_so(param); break;
        }
    }

    ModelTag tag() const { return tag_; }
    /// n for SO0(1,n), matrix size for SL(n).
    int param() const { return param_; }
    std::string name() const {
        return tag_ == ModelTag::SO0_1n ? "so1" + std::to_string(param_) : to_string(tag_);
    }
    int matrix_size() const { return size_; }
    int rank() const { return roots_.rank; }
    int dim_n() const { return static_cast<int>(n_basis_.size()); }
    const RootDatum& root_datum() const { return roots_; }
    /// Killing form on this model is killing_scale() * tr(XY).
    double killing_scale() const { return killing_scale_; }
    const SmallMat& adapted_basis() const { return adapt_; }
    /// B-orthonormal root vectors of n (original basis) and their roots.
    const std::vector<SmallMat>& n_basis() const { return n_basis_; }
    const std::vector<int>& n_roots() const { return n_root_; }
    /// theta of the n basis: B-orthonormal root vectors of nbar.
    const std::vector<SmallMat>& nbar_basis() const { return nbar_basis_; }

    /// exp(H) for H in a (orthonormal coordinates).
    SmallMat exp_a(const Vec& h) const {
        SmallVec d = SmallVec::Zero(size_);
        for (int j = 0; j < rank(); ++j)
            d += h[j] * a_diag_.row(j).transpose();
        SmallMat diag = SmallMat::Zero(size_, size_);
        for (int i = 0; i < size_; ++i)
            diag(i, i) = std::exp(d[i]);
        return adapt_ * diag * adapt_.transpose();
    }

    /// a-coordinates of an adapted-basis diagonal of logarithms.
    Vec h_from_log_diag(const SmallVec& logd) const {
        Vec h(rank());
        for (int j = 0; j < rank(); ++j)
            h[j] = killing_scale_ * a_diag_.row(j).dot(logd);
        return h;
    }

    /// exp(sum y_i X_i) over the n root vectors selected by `which`
    /// (all of them when empty).
    SmallMat exp_n(const std::vector<double>& y, const std::vector<int>& which = {}) const {
        return exp_from_basis(n_basis_, y, which);
    }
    SmallMat exp_nbar(const std::vector<double>& y, const std::vector<int>& which = {}) const {
        return exp_from_basis(nbar_basis_, y, which);
    }

    /// Iwasawa projection H(g) = log a(g) for g = k a(g) nbar.
    Vec iwasawa_h(const SmallMat& g) const { return h_from_log_diag(iwasawa_log_diag(g)); }

    /// log of the adapted diagonal of a(g).
    ///
    /// With g' = P^T g P = Q L (L lower triangular), L_nn is the norm of the
    /// last column of g' and 1 / L_11 the norm of the first row of g'^{-1}.
    /// Both avoid the cancellation a Householder pivot suffers for large
    /// unipotent entries; the middle entry (SL(3)) follows from det = 1 and
    /// is 0 for SO0(1,n), whose A acts trivially on the middle block.
    /// Assumes g is a valid element of the model.
    SmallVec iwasawa_log_diag(const SmallMat& g) const {
        SmallVec out = SmallVec::Zero(size_);
        if (tag_ == ModelTag::SL2R) {
            // first row of g^{-1} is (g11, -g01)
            out[1] = 0.5 * std::log(g(0, 1) * g(0, 1) + g(1, 1) * g(1, 1));
            out[0] = -0.5 * std::log(g(1, 1) * g(1, 1) + g(0, 1) * g(0, 1));
            return out;
        }
        if (tag_ == ModelTag::SL3R) {
            // first row of g^{-1} is (col1 x col2)^T / det g with det g = 1
            const double r0 = g(1, 1) * g(2, 2) - g(2, 1) * g(1, 2);
            const double r1 = g(2, 1) * g(0, 2) - g(0, 1) * g(2, 2);
            const double r2 = g(0, 1) * g(1, 2) - g(1, 1) * g(0, 2);
            out[2] = 0.5 * std::log(g(0, 2) * g(0, 2) + g(1, 2) * g(1, 2) + g(2, 2) * g(2, 2));
            out[0] = -0.5 * std::log(r0 * r0 + r1 * r1 + r2 * r2);
            out[1] = -out[0] - out[2];
            return out;
        }
        // SO0(1,n): g^{-1} = J g^T J gives d_first = 1 / d_last, and
        // d_last = |g (e0 - e1)| / sqrt 2
        double last = 0.0;
        for (int i = 0; i < size_; ++i) {
            const double col = g(i, 0) - g(i, 1);
            last += col * col;
        }
        out[size_ - 1] = 0.5 * std::log(0.5 * last);
        out[0] = -out[size_ - 1];
        return out;
    }

    /// Defining relations within tol (det 1; Lorentz form and g00 > 0).
    bool is_valid(const SmallMat& g, double tol = 1e-10) const {
        if (g.rows() != size_ || g.cols() != size_ || !g.allFinite())
            return false;
        const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
        if (std::abs(g.determinant() - 1.0) > tol * std::pow(scale, size_))
            return false;
        if (tag_ == ModelTag::SO0_1n) {
            SmallMat j = SmallMat::Identity(size_, size_);
            for (int i = 1; i < size_; ++i)
                j(i, i) = -1.0;
            if ((g.transpose() * j * g - j).cwiseAbs().maxCoeff() > tol * scale * scale)
                return false;
            if (g(0, 0) <= 0.0)
                return false;
        }
        return true;
    }

    /// Haar-random element of K.
    template <class Rng>
    SmallMat random_k(Rng& rng) const {
        std::normal_distribution<double> nd;
        const int kdim = tag_ == ModelTag::SO0_1n ? param_ : size_;
        Mat x(kdim, kdim);
        for (int i = 0; i < kdim; ++i)
            for (int j = 0; j < kdim; ++j)
                x(i, j) = nd(rng);
        Eigen::HouseholderQR<Mat> qr(x);
        Mat q = qr.householderQ();
        const Mat r = qr.matrixQR();
        for (int i = 0; i < kdim; ++i)
            if (r(i, i) < 0)
                q.col(i) *= -1.0;
        if (q.determinant() < 0)
            q.col(0) *= -1.0;
        SmallMat k = SmallMat::Identity(size_, size_);
        const int off = size_ - kdim;
        k.block(off, off, kdim, kdim) = q;
        return k;
    }

    /// Random element k1 exp(H) k2 nbar with |H| <= spread and nbar
    /// coordinates of size ~ spread.
    template <class Rng>
    SmallMat random_element(Rng& rng, double spread = 1.0) const {
        std::uniform_real_distribution<double> ud(-spread, spread);
        Vec h(rank());
        for (int j = 0; j < rank(); ++j)
            h[j] = ud(rng);
        std::vector<double> y(dim_n());
        for (auto& v : y)
            v = ud(rng);
        return random_k(rng) * exp_a(h) * random_k(rng) * exp_nbar(y);
    }

    /// Uniform cone parametrisation of the closed negative chamber:
    /// H = sum_i u_i * generator_i with u_i >= 0.
    const std::vector<Vec>& negative_chamber_generators() const { return chamber_gens_; }

    /// Quadrature on K with a resolution parameter (doubling refines).
    /// Number of nodes of the K-grid at this resolution.
    std::size_t k_grid_size(int resolution, KGridKind kind = KGridKind::ModM) const {
        std::size_t n = 0;
        for_each_k(resolution, kind, [&](const SmallMat&, double) { ++n; }, true);
        return n;
    }

    KQuadrature k_quadrature(int resolution, KGridKind kind = KGridKind::ModM) const {
        KQuadrature q;
        q.resolution = resolution;
        q.kind = kind;
        for_each_k(resolution, kind, [&](const SmallMat& k, double w) {
            q.nodes.push_back(k);
            q.weights.push_back(w);
        });
        return q;
    }

    /// Calls visit(k, weight) for every node of the K-grid without storing
    /// it. With count_only the matrices passed are left unset.
    template <class F>
    void for_each_k(int resolution, KGridKind kind, F&& visit, bool count_only = false) const {
        if (resolution < 2)
            throw ParameterError("k_quadrature: resolution must be >= 2");
        const int kdim = tag_ == ModelTag::SO0_1n ? param_ : size_;
        const int off = size_ - kdim;
        SmallMat k = SmallMat::Identity(size_, size_);
        auto emit = [&](const auto& make_r, double w) {
            if (!count_only)
                k.block(off, off, kdim, kdim) = make_r();
            visit(static_cast<const SmallMat&>(k), w);
        };
        if (kdim == 2) {
            // SO(2); M-invariant integrands have period pi for SL(2,R)
            const bool half = tag_ == ModelTag::SL2R && kind != KGridKind::Full;
            const int n = resolution;
            for (int i = 0; i < n; ++i) {
                const double th = (half ? std::numbers::pi : 2.0 * std::numbers::pi) * i / n;
                emit([&] { return detail::rotation(2, 0, 1, th); }, 1.0 / n);
            }
            return;
        }
        if (kdim != 3)
            throw ParameterError("k_quadrature: only K = SO(2), SO(3) are supported");
        const bool sphere = tag_ == ModelTag::SO0_1n && kind != KGridKind::Full;
        if (sphere) {
            // K/M = S^2 via k e1 = (cos b, sin b cos a, sin b sin a)
            const quad::Rule gl = quad::gauss_legendre(resolution, -1.0, 1.0);
            const int na = kind == KGridKind::Radial ? 1 : 2 * resolution;
            for (std::size_t ib = 0; ib < gl.size(); ++ib) {
                const double b = std::acos(gl.nodes[ib]);
                for (int ia = 0; ia < na; ++ia) {
                    const double a = 2.0 * std::numbers::pi * ia / na;
                    emit([&] { return SmallMat(detail::rotation(3, 1, 2, a) * detail::rotation(3, 0, 1, b)); },
                         0.5 * gl.weights[ib] / na);
                }
            }
            return;
        }
        // SO(3) with ZYZ Euler angles, Haar density sin(b) / (8 pi^2)
        const quad::Rule gl = quad::gauss_legendre(std::max(2, resolution / 2 + 1), -1.0, 1.0);
        const int na = resolution;
        std::vector<SmallMat> rc(count_only ? 0 : na);
        for (int ic = 0; ic < static_cast<int>(rc.size()); ++ic)
            rc[ic] = detail::rotation(3, 0, 1, 2.0 * std::numbers::pi * ic / na);
        for (int ia = 0; ia < na; ++ia) {
            const double a = 2.0 * std::numbers::pi * (ia + 0.5) / na;
            const SmallMat ra = count_only ? SmallMat() : SmallMat(detail::rotation(3, 0, 1, a));
            for (std::size_t ib = 0; ib < gl.size(); ++ib) {
                const double b = std::acos(gl.nodes[ib]);
                const SmallMat rab = count_only ? SmallMat() : SmallMat(ra * detail::rotation(3, 2, 0, b));
                const double w = 0.5 * gl.weights[ib] / (double(na) * na);
                for (int ic = 0; ic < na; ++ic)
                    emit([&] { return SmallMat(rab * rc[ic]); }, w);
            }
        }
    }

private:
    SmallMat exp_from_basis(const std::vector<SmallMat>& basis, const std::vector<double>& y,
                            const std::vector<int>& which) const {
        SmallMat x = SmallMat::Zero(size_, size_);
        if (which.empty()) {
            if (y.size() != basis.size())
                throw ParameterError("exp_n: coordinate count mismatch");
            for (std::size_t i = 0; i < basis.size(); ++i)
                x += y[i] * basis[i];
        } else {
            if (y.size() != which.size())
                throw ParameterError("exp_n: coordinate count mismatch");
            for (std::size_t i = 0; i < which.size(); ++i)
                x += y[i] * basis[which[i]];
        }
        return detail::nilpotent_exp(x);
    }

    void finish_roots() {
        for (const auto& y : n_basis_)
            nbar_basis_.push_back(-y.transpose());
        // negative chamber generators: v_i with <alpha_j, v_i> = -delta_ij
        const int r = roots_.rank;
        Mat s(r, r);
        for (int i = 0; i < r; ++i)
            s.row(i) = roots_.roots[roots_.simple[i]].transpose();
        const Mat inv = s.inverse();
        for (int i = 0; i < r; ++i)
            chamber_gens_.push_back(-inv.col(i));
    }

    void build_sl(int n) {
        size_ = n;
        killing_scale_ = 2.0 * n;
        adapt_ = SmallMat::Identity(n, n);
        const double c = killing_scale_;
        a_diag_ = Mat::Zero(n - 1, n);
        if (n == 2) {
            a_diag_ << 1.0, -1.0;
            a_diag_ /= std::sqrt(2.0 * c);
            roots_ = build_root_datum(RootFamily::A1, 1, 2.0 / std::sqrt(2.0 * c));
        } else {
            a_diag_.row(0) << 1.0, -1.0, 0.0;
            a_diag_.row(0) /= std::sqrt(2.0 * c);
            a_diag_.row(1) << 1.0, 1.0, -2.0;
            a_diag_.row(1) /= std::sqrt(6.0 * c);
            roots_ = build_root_datum(RootFamily::A2, 1, std::sqrt(2.0 / c));
        }
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                Vec coords(n - 1);
                for (int k = 0; k < n - 1; ++k)
                    coords[k] = a_diag_(k, i) - a_diag_(k, j);
                const int idx = roots_.find_root(coords);
                if (idx < 0 || !roots_.is_positive(idx))
                    throw StateError("SL model: root bookkeeping mismatch");
                SmallMat e = SmallMat::Zero(n, n);
                e(i, j) = 1.0 / std::sqrt(c);
                n_basis_.push_back(e);
                n_root_.push_back(idx);
            }
        }
        finish_roots();
    }

    void build_so(int n) {
        if (n < 2 || n > 3)
            throw ParameterError("SO0(1,n) model supports n = 2, 3");
        size_ = n + 1;
        killing_scale_ = n - 1.0;
        const double c = killing_scale_;
        adapt_ = SmallMat::Zero(size_, size_);
        const double s = 1.0 / std::sqrt(2.0);
        adapt_(0, 0) = s;
        adapt_(1, 0) = s;
        for (int j = 2; j <= n; ++j)
            adapt_(j, j - 1) = 1.0;
        adapt_(0, n) = s;
        adapt_(1, n) = -s;
        a_diag_ = Mat::Zero(1, size_);
        a_diag_(0, 0) = 1.0 / std::sqrt(2.0 * c);
        a_diag_(0, n) = -1.0 / std::sqrt(2.0 * c);
        roots_ = build_root_datum(RootFamily::RankOne, n - 1, 1.0 / std::sqrt(2.0 * c));
        for (int j = 2; j <= n; ++j) {
            SmallMat y = SmallMat::Zero(size_, size_);
            y(0, j) = 1.0;
            y(j, 0) = 1.0;
            y(1, j) = 1.0;
            y(j, 1) = -1.0;
            y /= 2.0 * std::sqrt(c);
            n_basis_.push_back(y);
            n_root_.push_back(0);
        }
        finish_roots();
    }

    ModelTag tag_;
    int param_ = 0;
    int size_ = 0;
    double killing_scale_ = 1.0;
    SmallMat adapt_;
    Mat a_diag_;
    RootDatum roots_;
    std::vector<SmallMat> n_basis_;
    std::vector<int> n_root_;
    std::vector<SmallMat> nbar_basis_;
    std::vector<Vec> chamber_gens_;
};

using ModelPtr = std::shared_ptr<const GroupModel>;

/// A matrix bound to its model.
struct GroupElement {
    ModelPtr model;
    SmallMat matrix;

    static GroupElement identity(const ModelPtr& m) {
        return {m, SmallMat::Identity(m->matrix_size(), m->matrix_size())};
    }
    GroupElement operator*(const GroupElement& o) const { return {model, matrix * o.matrix}; }
    GroupElement inverse() const { return {model, matrix.inverse()}; }
    bool valid(double tol = 1e-10) const { return model->is_valid(matrix, tol); }
};

struct IwasawaFactors {
    SmallMat k;
    Vec h;       // a = exp(H)
    SmallMat nbar;
};

/// Full Iwasawa factorization g = k exp(H) nbar.
inline IwasawaFactors iwasawa(const GroupModel& model, const SmallMat& g, double tol = 1e-10) {
    if (!model.is_valid(g, tol))
        throw InvalidElementError("iwasawa: matrix violates the model relations");
    const int n = model.matrix_size();
    const SmallMat& p = model.adapted_basis();
    const SmallMat gp = p.transpose() * g * p;
    const SmallMat rev = gp.reverse();
    Eigen::HouseholderQR<SmallMat> qr(rev);
    SmallMat q = qr.householderQ();
    SmallMat r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < n; ++i) {
        if (r(i, i) < 0.0) {
            q.col(i) *= -1.0;
            r.row(i) *= -1.0;
        }
    }
    // g' = rev(q) rev(r) with rev(r) lower triangular
    const SmallMat kp = q.reverse();
    const SmallMat low = r.reverse();
    SmallMat dinv = SmallMat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        dinv(i, i) = 1.0 / low(i, i);
    }
    IwasawaFactors f;
    f.k = p * kp * p.transpose();
    f.h = model.iwasawa_h(g);
    f.nbar = p * (dinv * low) * p.transpose();
    return f;
}

inline IwasawaFactors iwasawa(const GroupElement& g) { return iwasawa(*g.model, g.matrix); }

/// Radial part: the unique H in the closed negative chamber with
/// g in K exp(H) K, from the singular values of g. Rank-one models use
/// exact formulas for the largest singular value e^s:
///   SL(2,R):  sinh s = |(a - d, b + c)| / 2,
///   SO0(1,n): sinh s = |(g_10, ..., g_n0)|.
inline Vec cartan_radial(const GroupModel& model, const SmallMat& g) {
    const int n = model.matrix_size();
    SmallVec logs = SmallVec::Zero(n);
    if (model.tag() == ModelTag::SL2R) {
        const double s = std::asinh(0.5 * std::hypot(g(0, 0) - g(1, 1), g(0, 1) + g(1, 0)));
        logs[0] = -s;
        logs[1] = s;
        return model.h_from_log_diag(logs);
    }
    if (model.tag() == ModelTag::SO0_1n) {
        double q = 0.0;
        for (int i = 1; i < n; ++i)
            q += g(i, 0) * g(i, 0);
        const double s = std::asinh(std::sqrt(q));
        logs[0] = -s;
        logs[n - 1] = s;
        return model.h_from_log_diag(logs);
    }
    Eigen::JacobiSVD<SmallMat> svd(g);
    const SmallVec sv = svd.singularValues();
    for (int i = 0; i < n; ++i)
        logs[i] = std::log(sv[i]);
    std::sort(logs.data(), logs.data() + n);
    return model.h_from_log_diag(logs);
}

inline Vec cartan_radial(const GroupElement& g) { return cartan_radial(*g.model, g.matrix); }

/// Proxy volume weight exp(-2 rho(H)) and radial weight 1 + |H|.
struct VolumeWeights {
    double v;
    double w;
};

inline VolumeWeights volume_weights(const GroupModel& model, const Vec& h) {
    return {std::exp(-2.0 * model.root_datum().rho.dot(h)), 1.0 + h.norm()};
}

/// Product J(H) = prod_{alpha > 0} |sinh alpha(H)|^{m_alpha}.
inline double cartan_jacobian(const RootDatum& rd, const Vec& h) {
    double j = 1.0;
    for (int idx : rd.positive)
        j *= std::pow(std::abs(std::sinh(rd.roots[idx].dot(h))), rd.multiplicities[idx]);
    return j;
}

// ---------------------------------------------------------------------------
// Haar normalization

/// Resolution of the double-exponential rules used on N and Nbar.
struct QuadratureSpec {
    double step = 0.1;          // DE step h of the coarse pass; the fine pass uses h/2
    double tail_tol = 1e-13;    // relative tail mass beyond the cutoff
    double resolution_tol = 1e-6;
    double truncation_tol = 1e-8;
    bool check_truncation = true;
};

inline void to_json(nlohmann::json& j, const QuadratureSpec& q) {
    j = nlohmann::json{{"step", q.step},
                       {"tail_tol", q.tail_tol},
                       {"resolution_tol", q.resolution_tol},
                       {"truncation_tol", q.truncation_tol},
                       {"check_truncation", q.check_truncation}};
}
inline void from_json(const nlohmann::json& j, QuadratureSpec& q) {
    const QuadratureSpec d;
    q.step = j.value("step", d.step);
    q.tail_tol = j.value("tail_tol", d.tail_tol);
    q.resolution_tol = j.value("resolution_tol", d.resolution_tol);
    q.truncation_tol = j.value("truncation_tol", d.truncation_tol);
    q.check_truncation = j.value("check_truncation", d.check_truncation);
    if (!(q.step > 0.0) || !(q.tail_tol > 0.0) || !(q.resolution_tol > 0.0) || !(q.truncation_tol > 0.0))
        throw ParameterError("quadrature spec: step and tolerances must be positive");
}

/// Natural width of the root coordinate y_i: 1 / max |entry of X_i|.
inline double n_coordinate_scale(const GroupModel& model, int i) {
    return 1.0 / model.n_basis()[i].cwiseAbs().maxCoeff();
}

/// Integral over the subgroup exp(span of the selected n root vectors) of
/// f(n) against Lebesgue measure in B-orthonormal exp-coordinates, using
/// sinh-sinh rules of step h and range t_max.
///
/// The full N of SL(3,R) is integrated in matrix-entry coordinates
/// (dY = c^{3/2} dx) with x12 innermost: every a-power is a function of
/// |last column|^2 = 1 + x13^2 + x23^2 and of the quadratic
/// (1 + x23^2) x12^2 - 2 x13 x23 x12 + 1 + x13^2, so each inner line is a
/// single bump whose centre and width are known.
template <class R, class F>
R integrate_over_n(const GroupModel& model, const std::vector<int>& which, double h, double t_max,
                   F&& f) {
    const int dim = static_cast<int>(which.size());
    const int size = model.matrix_size();
    if (dim == 0)
        return f(SmallMat::Identity(size, size));
    const quad::Rule base = quad::sinh_sinh(h, t_max);
    const std::size_t m = base.size();
    if (model.tag() == ModelTag::SL3R && dim == 3) {
        const double c = model.killing_scale();
        R total{};
        SmallMat n = SmallMat::Identity(3, 3);
        for (std::size_t i13 = 0; i13 < m; ++i13) {
            const double x13 = base.nodes[i13];
            for (std::size_t i23 = 0; i23 < m; ++i23) {
                const double x23 = base.nodes[i23];
                const double q = 1.0 + x23 * x23;
                const double centre = x13 * x23 / q;
                const double width = std::sqrt(1.0 + x13 * x13 + x23 * x23) / q;
                R line{};
                for (std::size_t i12 = 0; i12 < m; ++i12) {
                    n(0, 1) = centre + width * base.nodes[i12];
                    n(0, 2) = x13;
                    n(1, 2) = x23;
                    line += base.weights[i12] * f(n);
                }
                total += (base.weights[i13] * base.weights[i23] * width) * line;
            }
        }
        return total * std::pow(c, 1.5);
    }
    std::vector<double> scale(dim);
    for (int d = 0; d < dim; ++d)
        scale[d] = n_coordinate_scale(model, which[d]);
    std::vector<std::size_t> idx(dim, 0);
    std::vector<double> y(dim);
    R total{};
    while (true) {
        double w = 1.0;
        for (int d = 0; d < dim; ++d) {
            y[d] = scale[d] * base.nodes[idx[d]];
            w *= scale[d] * base.weights[idx[d]];
        }
        total += w * f(model.exp_n(y, which));
        int d = 0;
        while (d < dim && ++idx[d] == m) {
            idx[d] = 0;
            ++d;
        }
        if (d == dim)
            break;
    }
    return total;
}

inline std::vector<int> all_n_indices(const GroupModel& model) {
    std::vector<int> v(model.dim_n());
    for (int i = 0; i < model.dim_n(); ++i)
        v[i] = i;
    return v;
}

/// Decay exponent of a(n)^{rho - lambda} along each root direction:
/// min over the roots in use of Re(-<lambda, alpha>) / <alpha, alpha>.
inline double n_integrand_decay(const GroupModel& model, const std::vector<int>& which,
                                const SpectralParam& lambda) {
    const RootDatum& rd = model.root_datum();
    double d = std::numeric_limits<double>::infinity();
    for (int i : which)
        d = std::min(d, -rd.coroot_ratio(lambda, model.n_roots()[i]).real());
    return d;
}

struct HaarNormalization {
    double z_n = 0.0;          // int_n a(exp Y)^{2 rho} dY at step h/2
    double z_n_coarse = 0.0;   // same at step h
    double z_n_wide = 0.0;     // step h/2, cutoff for a 1000x smaller tail
    double cartan_const = 0.0; // 0 until calibrated
    QuadratureSpec spec;

    /// dn = dY / z_n
    double normalize(double lebesgue_integral) const { return lebesgue_integral / z_n; }
};

/// z_n = int_n a(exp Y)^{2 rho} dY, checked across two step sizes and two
/// truncation radii.
inline HaarNormalization compute_haar_normalization(const GroupModel& model,
                                                    const QuadratureSpec& spec = {}) {
    if (model.dim_n() > 3)
        throw ParameterError("compute_haar_normalization: dim n must be <= 3");
    const RootDatum& rd = model.root_datum();
    const Vec two_rho = 2.0 * rd.rho;
    const auto which = all_n_indices(model);
    const double decay = n_integrand_decay(model, which, SpectralParam::real(-rd.rho));
    auto run = [&](double h, double tail) {
        const double t_max = quad::sinh_sinh_range_for_decay(decay, tail);
        return integrate_over_n<double>(model, which, h, t_max, [&](const SmallMat& n) {
            return std::exp(two_rho.dot(model.iwasawa_h(n)));
        });
    };
    HaarNormalization out;
    out.spec = spec;
    out.z_n_coarse = run(spec.step, spec.tail_tol);
    out.z_n = run(0.5 * spec.step, spec.tail_tol);
    if (!(std::abs(out.z_n - out.z_n_coarse) <= spec.resolution_tol * std::abs(out.z_n)))
        throw QuadratureError("compute_haar_normalization: resolutions disagree");
    if (spec.check_truncation) {
        out.z_n_wide = run(0.5 * spec.step, spec.tail_tol * 1e-3);
        if (!(std::abs(out.z_n - out.z_n_wide) <= spec.truncation_tol * std::abs(out.z_n)))
            throw QuadratureError("compute_haar_normalization: truncation radii disagree");
    } else {
        out.z_n_wide = out.z_n;
    }
    return out;
}

/// Rank-one models with abelian N: the same integral in polar coordinates,
/// vol(S^{m-1}) int_0^inf r^{m-1} a(exp(r Y_1))^{2 rho} dr.
inline double haar_normalization_polar(const GroupModel& model, double h = 1.0 / 32.0) {
    if (model.tag() != ModelTag::SO0_1n)
        throw ParameterError("haar_normalization_polar: needs an SO0(1,n) model");
    const int m = model.dim_n();
    const double sphere = m == 1 ? 2.0 : (m == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi);
    const Vec two_rho = 2.0 * model.root_datum().rho;
    const quad::Rule rule = quad::exp_sinh(h, 4.5, n_coordinate_scale(model, 0));
    double total = 0.0;
    std::vector<double> y(m, 0.0);
    for (std::size_t i = 0; i < rule.size(); ++i) {
        y[0] = rule.nodes[i];
        const double v = std::exp(two_rho.dot(model.iwasawa_h(model.exp_n(y))));
        total += rule.weights[i] * std::pow(rule.nodes[i], m - 1) * v;
    }
    return sphere * total;
}

// ---------------------------------------------------------------------------
// Cartan-coordinate density calibration

/// Test function on G; `left_k_invariant` lets the Iwasawa side drop the
/// K-integral, `biinvariant` lets the Cartan side drop K x K. `gauss_rate`
/// is a rate s with |f(g)| <~ exp(-s |g|_F^2), used to size grids.
struct TestFunction {
    std::string name;
    std::function<double(const SmallMat&)> f;
    bool left_k_invariant = true;
    bool biinvariant = true;
    double gauss_rate = 1.0;
};

/// Frobenius-Gaussian family exp(-s |g|_F^2), K-biinvariant.
inline TestFunction frobenius_gaussian(double s) {
    std::ostringstream name;
    name << "gauss(s=" << s << ")";
    return {name.str(), [s](const SmallMat& g) { return std::exp(-s * g.squaredNorm()); }, true, true, s};
}

/// (|g|_F^2 - size)^2 e^{-s |g|_F^2}: biinvariant, vanishes exactly on K.
inline TestFunction frobenius_poly_gaussian(double s, int size) {
    std::ostringstream name;
    name << "polygauss(s=" << s << ")";
    return {name.str(),
            [s, size](const SmallMat& g) {
                const double q = g.squaredNorm();
                return (q - size) * (q - size) * std::exp(-s * q);
            },
            true, true, s};
}

struct CartanIntegralSpec {
    int panels = 8;
    int order = 12;
    int k_resolution = 32;   // only for non-biinvariant functions
};

/// int_{a^-} J(H) (int_{KxK} F(k1 exp(H) k2)) dH, without the constant.
inline double cartan_side_integral(const GroupModel& model, const TestFunction& tf,
                                   const CartanIntegralSpec& spec = {}) {
    const RootDatum& rd = model.root_datum();
    const auto& gens = model.negative_chamber_generators();
    const int r = model.rank();
    Mat gm(r, r);
    for (int i = 0; i < r; ++i)
        gm.col(i) = gens[i];
    const double jac = std::abs(gm.determinant());
    KQuadrature kq;
    if (!tf.biinvariant)
        kq = model.k_quadrature(spec.k_resolution, KGridKind::Full);
    auto radial = [&](const Vec& h) {
        const SmallMat a = model.exp_a(h);
        if (tf.biinvariant)
            return tf.f(a);
        double s = 0.0;
        for (std::size_t i = 0; i < kq.size(); ++i)
            for (std::size_t j = 0; j < kq.size(); ++j)
                s += kq.weights[i] * kq.weights[j] * tf.f(kq.nodes[i] * a * kq.nodes[j]);
        return s;
    };
    // truncation: extend until the integrand is negligible along every generator
    double u_max = 1.0;
    double peak = 0.0;
    for (double u = 0.05; u < 40.0; u += 0.05) {
        double worst = 0.0;
        for (int i = 0; i < r; ++i)
            worst = std::max(worst, std::abs(cartan_jacobian(rd, u * gens[i]) * radial(u * gens[i])));
        if (r == 2) {
            const Vec d = u * (gens[0] + gens[1]) * 0.5;
            worst = std::max(worst, std::abs(cartan_jacobian(rd, d) * radial(d)));
        }
        peak = std::max(peak, worst);
        u_max = u;
        if (u > 1.0 && worst < 1e-17 * peak)
            break;
    }
    const quad::Rule rule = quad::composite_gauss_legendre(spec.panels, spec.order, 0.0, u_max);
    double total = 0.0;
    if (r == 1) {
        for (std::size_t i = 0; i < rule.size(); ++i) {
            const Vec h = rule.nodes[i] * gens[0];
            total += rule.weights[i] * cartan_jacobian(rd, h) * radial(h);
        }
    } else {
        for (std::size_t i = 0; i < rule.size(); ++i)
            for (std::size_t j = 0; j < rule.size(); ++j) {
                const Vec h = rule.nodes[i] * gens[0] + rule.nodes[j] * gens[1];
                total += rule.weights[i] * rule.weights[j] * cartan_jacobian(rd, h) * radial(h);
            }
    }
    return total * jac;
}

struct IwasawaIntegralSpec {
    int a_panels = 4;          // composite Gauss-Legendre per a-coordinate
    int a_order = 12;
    double a_scan_radius = 16.0;  // the a-support is located by a scan of this box
    double a_scan_step = 0.5;
    double nbar_step = 0.7;    // SL: trapezoid step in units of the Gaussian width
    double nbar_span = 8.5;    // SL: half-range in units of the Gaussian width
    double nbar_de_step = 1.0 / 16.0;  // SO0(1,n): DE step in exp-coordinates
    double nbar_de_tmax = 3.0;
    int k_resolution = 32;     // only for non-left-K-invariant functions
};

/// int_K int_A int_Nbar F(k a nbar) a^{-2 rho} dnbar da dk with
/// dnbar = dY / z_n.
///
/// For SL(n) the Nbar integral runs over the entries l_ij (i > j) of the
/// lower triangular matrix a nbar, where dY = c^{dim/2} prod_{i>j} dl_ij / a_i;
/// the Frobenius-type test functions are then Gaussian-like in l and the
/// trapezoid rule converges spectrally. SO0(1,n) uses sinh-sinh rules in
/// exp-coordinates. The A-integral is restricted to the box where a coarse
/// scan of the A-integrand exceeds 1e-15 of its peak.
inline double iwasawa_side_integral(const GroupModel& model, const TestFunction& tf, double z_n,
                                    const IwasawaIntegralSpec& spec = {}) {
    const RootDatum& rd = model.root_datum();
    const int r = model.rank();
    const int dn = model.dim_n();
    const int size = model.matrix_size();
    const bool sl = model.tag() != ModelTag::SO0_1n;
    auto make_base = [&](double refine) {
        quad::Rule base;
        if (sl) {
            const double sigma = 1.0 / std::sqrt(2.0 * tf.gauss_rate);
            const double step = spec.nbar_step * refine;
            const int half = static_cast<int>(std::ceil(spec.nbar_span / step));
            for (int i = -half; i <= half; ++i) {
                base.nodes.push_back(i * step * sigma);
                base.weights.push_back(step * sigma);
            }
        } else {
            base = quad::sinh_sinh(spec.nbar_de_step * refine, spec.nbar_de_tmax);
        }
        return base;
    };
    const quad::Rule fine = make_base(1.0);
    const quad::Rule coarse = make_base(sl ? 2.5 : 4.0);
    KQuadrature kq;
    if (!tf.left_k_invariant)
        kq = model.k_quadrature(spec.k_resolution, KGridKind::Full);
    const auto& nb = model.nbar_basis();
    std::vector<std::pair<int, int>> lower;
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < i; ++j)
            lower.emplace_back(i, j);
    auto eval = [&](const SmallMat& g) {
        if (tf.left_k_invariant)
            return tf.f(g);
        double v = 0.0;
        for (std::size_t i = 0; i < kq.size(); ++i)
            v += kq.weights[i] * tf.f(kq.nodes[i] * g);
        return v;
    };
    // a^{-2 rho} times the Nbar integral at a = exp(h)
    auto a_integrand = [&](const Vec& h, const quad::Rule& base) {
        const SmallMat a = model.exp_a(h);
        double weight_a = std::exp(-2.0 * rd.rho.dot(h));
        std::vector<double> scale(dn, 1.0);
        if (sl) {
            for (const auto& [i, j] : lower)
                weight_a /= a(i, i);
            weight_a *= std::pow(model.killing_scale(), 0.5 * dn);
        } else {
            for (int d = 0; d < dn; ++d)
                scale[d] = 1.0 / (a * nb[d]).cwiseAbs().maxCoeff();
        }
        std::vector<std::size_t> idx(dn, 0);
        std::vector<double> y(dn);
        double inner = 0.0;
        const std::size_t m = base.size();
        SmallMat g = a;
        while (true) {
            double w = 1.0;
            if (sl) {
                for (int d = 0; d < dn; ++d) {
                    g(lower[d].first, lower[d].second) = base.nodes[idx[d]];
                    w *= base.weights[idx[d]];
                }
            } else {
                for (int d = 0; d < dn; ++d) {
                    y[d] = scale[d] * base.nodes[idx[d]];
                    w *= scale[d] * base.weights[idx[d]];
                }
                g = a * model.exp_nbar(y);
            }
            inner += w * eval(g);
            int d = 0;
            while (d < dn && ++idx[d] == m) {
                idx[d] = 0;
                ++d;
            }
            if (d == dn)
                break;
        }
        return weight_a * inner;
    };
    // locate the support box in a
    const int ns = 2 * static_cast<int>(std::ceil(spec.a_scan_radius / spec.a_scan_step)) + 1;
    auto scan_node = [&](int i) { return -spec.a_scan_radius + i * spec.a_scan_step; };
    std::vector<double> lo(r, spec.a_scan_radius), hi(r, -spec.a_scan_radius);
    {
        std::vector<int> idx(r, 0);
        std::vector<std::pair<Vec, double>> samples;
        double peak = 0.0;
        while (true) {
            Vec h(r);
            for (int j = 0; j < r; ++j)
                h[j] = scan_node(idx[j]);
            const double v = std::abs(a_integrand(h, coarse));
            peak = std::max(peak, v);
            samples.emplace_back(h, v);
            int j = 0;
            while (j < r && ++idx[j] == ns) {
                idx[j] = 0;
                ++j;
            }
            if (j == r)
                break;
        }
        for (const auto& [h, v] : samples) {
            if (v < 1e-15 * peak)
                continue;
            for (int j = 0; j < r; ++j) {
                lo[j] = std::min(lo[j], h[j] - spec.a_scan_step);
                hi[j] = std::max(hi[j], h[j] + spec.a_scan_step);
            }
        }
        for (int j = 0; j < r; ++j)
            if (lo[j] <= -spec.a_scan_radius || hi[j] >= spec.a_scan_radius)
                throw QuadratureError("iwasawa_side_integral: A-support exceeds the scan box");
    }
    std::vector<quad::Rule> arules;
    for (int j = 0; j < r; ++j)
        arules.push_back(quad::composite_gauss_legendre(spec.a_panels, spec.a_order, lo[j], hi[j]));
    std::vector<std::size_t> aidx(r, 0);
    double total = 0.0;
    while (true) {
        Vec h(r);
        double wa = 1.0;
        for (int j = 0; j < r; ++j) {
            h[j] = arules[j].nodes[aidx[j]];
            wa *= arules[j].weights[aidx[j]];
        }
        total += wa * a_integrand(h, fine);
        int j = 0;
        while (j < r && ++aidx[j] == arules[j].size()) {
            aidx[j] = 0;
            ++j;
        }
        if (j == r)
            break;
    }
    return total / z_n;
}

struct CartanCalibration {
    double constant = 0.0;
    std::vector<std::string> names;
    std::vector<double> ratios;   // Iwasawa side / Cartan side per function
    double max_rel_spread = 0.0;
};

inline std::vector<TestFunction> default_calibration_functions(const GroupModel& model) {
    std::vector<TestFunction> fs = {frobenius_gaussian(1.0), frobenius_gaussian(0.5),
                                    frobenius_poly_gaussian(0.5, model.matrix_size())};
    if (model.tag() == ModelTag::SL2R) {
        fs.push_back({"skewed",
                      [](const SmallMat& g) {
                          return std::exp(-g.squaredNorm()) * (1.0 + 0.5 * std::tanh(g(0, 1)) + 0.25 * g(0, 0) * g(0, 0));
                      },
                      false, false, 0.9});
    }
    return fs;
}

/// Constant c_G with int_G F = c_G int_{a^-} J(H) int_{KxK} F(k1 e^H k2) dH,
/// fixed by matching the Iwasawa-side integral on several test functions.
inline CartanCalibration calibrate_cartan_density(const GroupModel& model, double z_n,
                                                  const std::vector<TestFunction>& fs,
                                                  double spread_tol = 1e-5,
                                                  const CartanIntegralSpec& cspec = {},
                                                  const IwasawaIntegralSpec& ispec = {}) {
    if (fs.empty())
        throw ParameterError("calibrate_cartan_density: need test functions");
    CartanCalibration out;
    for (const auto& tf : fs) {
        const double lhs = iwasawa_side_integral(model, tf, z_n, ispec);
        const double rhs = cartan_side_integral(model, tf, cspec);
        out.names.push_back(tf.name);
        out.ratios.push_back(lhs / rhs);
    }
    double mean = 0.0;
    for (double r : out.ratios)
        mean += r;
    mean /= out.ratios.size();
    for (double r : out.ratios)
        out.max_rel_spread = std::max(out.max_rel_spread, std::abs(r - mean) / std::abs(mean));
    out.constant = mean;
    if (!(out.max_rel_spread <= spread_tol))
        throw CalibrationError("calibrate_cartan_density: test functions disagree (spread " +
                               std::to_string(out.max_rel_spread) + ")");
    return out;
}

inline CartanCalibration calibrate_cartan_density(const GroupModel& model, double z_n) {
    return calibrate_cartan_density(model, z_n, default_calibration_functions(model));
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json element_to_json(const GroupModel& model, const SmallMat& g) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < g.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < g.cols(); ++j)
            row.push_back(g(i, j));
        rows.push_back(row);
    }
    return {{"model", to_string(model.tag())}, {"param", model.param()}, {"matrix", rows}};
}

inline GroupElement element_from_json(const nlohmann::json& j) {
    auto model = GroupModel::from_name(j.at("model").get<std::string>(), j.value("param", 3));
    const auto& rows = j.at("matrix");
    const int n = model->matrix_size();
    if (static_cast<int>(rows.size()) != n)
        throw ParameterError("element_from_json: wrong matrix size");
    SmallMat g(n, n);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(rows[i].size()) != n)
            throw ParameterError("element_from_json: wrong matrix size");
        for (int k = 0; k < n; ++k)
            g(i, k) = rows[i][k].get<double>();
    }
    if (!model->is_valid(g))
        throw InvalidElementError("element_from_json: matrix violates the model relations");
    return {model, g};
}

} // namespace plancherel
