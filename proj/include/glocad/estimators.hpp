#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "glocad/errors.hpp"
#include "glocad/kernel.hpp"

namespace glocad {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// J trainable witness points (rows) plus a same-shape gradient buffer.
struct WitnessSet {
    Eigen::MatrixXd points;
    Eigen::MatrixXd grad;

    WitnessSet() = default;
    explicit WitnessSet(Eigen::MatrixXd p) : points(std::move(p)), grad(Eigen::MatrixXd::Zero(points.rows(), points.cols())) {
        validate();
    }

    Eigen::Index count() const { return points.rows(); }
    Eigen::Index dim() const { return points.cols(); }

    void validate() const {
        detail::require(points.rows() >= 1, "witness set needs at least one point");
        detail::require(points.allFinite(), "witness coordinates must be finite");
    }
};

/// Value plus gradients of a discrepancy estimate with respect to every input.
template <typename Scalar>
struct DiscrepancyGrad {
    Scalar value = Scalar(0);
    MatrixX<Scalar> dX;
    MatrixX<Scalar> dY;
    MatrixX<Scalar> dV;  // empty for MMD
    Scalar d_bandwidth_sq = Scalar(0);
};

enum class MmdVariant { biased, unbiased };

namespace detail {

template <typename Derived>
void require_samples(const Eigen::MatrixBase<Derived>& X, Eigen::Index min_rows, const char* name) {
    require(X.rows() >= min_rows, std::string(name) + ": need at least " + std::to_string(min_rows) +
                                      " sample(s), got " + std::to_string(X.rows()));
}

template <typename DA, typename DB>
void require_same_dim(const Eigen::MatrixBase<DA>& X, const Eigen::MatrixBase<DB>& Y) {
    require(X.cols() == Y.cols(), "sample sets differ in dimension (" + std::to_string(X.cols()) + " vs " +
                                      std::to_string(Y.cols()) + ")");
}

/// Rows sorted lexicographically. Reductions run over this order so that the
/// result does not depend on how the caller ordered its samples.
template <typename Derived>
MatrixX<typename Derived::Scalar> canonical_rows(const Eigen::MatrixBase<Derived>& X) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(X.rows()));
    std::iota(idx.begin(), idx.end(), Eigen::Index(0));
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
        for (Eigen::Index c = 0; c < X.cols(); ++c) {
            if (X(a, c) < X(b, c)) return true;
            if (X(b, c) < X(a, c)) return false;
        }
        return false;
    });
    MatrixX<typename Derived::Scalar> out(X.rows(), X.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out.row(i) = X.row(idx[static_cast<std::size_t>(i)]);
    return out;
}

/// sum_j k(t, Y_j), accumulated in row order.
template <typename Scalar, typename DT, typename DY>
Scalar kernel_row_sum(const KernelSpec<Scalar>& k, const Eigen::MatrixBase<DT>& t, const Eigen::MatrixBase<DY>& Y) {
    Scalar s(0);
    for (Eigen::Index j = 0; j < Y.rows(); ++j) s += kernel_eval(k, t, Y.row(j));
    return s;
}

/// sum_{i,j} k(X_i, Y_j), row-major accumulation.
template <typename Scalar, typename DA, typename DB>
Scalar kernel_double_sum(const KernelSpec<Scalar>& k, const Eigen::MatrixBase<DA>& X, const Eigen::MatrixBase<DB>& Y) {
    Scalar s(0);
    for (Eigen::Index i = 0; i < X.rows(); ++i) s += kernel_row_sum(k, X.row(i), Y);
    return s;
}

}  // namespace detail

/// Truncated Taylor feature map of the 1D Gaussian kernel.
///
/// With u = (x - c)/sigma,  k(x, y) = sum_k phi_k(u_x) phi_k(u_y)  where
/// phi_k(u) = exp(-u^2/2) u^k / sqrt(k!). Every phi_k is bounded by 1, so the
/// alternating sums stay well conditioned; the order is chosen so the
/// discarded tail is below 1e-17 for all |u| <= radius.
template <typename Scalar>
struct GaussianTaylorFeatures1d {
    Scalar center = Scalar(0);
    Scalar inv_sigma = Scalar(1);
    int order = 1;

    static constexpr double kMaxRadius = 12.0;

    /// Feature map covering every value of `values` for the given kernel.
    template <typename Derived>
    static GaussianTaylorFeatures1d fit(const KernelSpec<Scalar>& k, const Eigen::MatrixBase<Derived>& values) {
        using std::sqrt;
        GaussianTaylorFeatures1d f;
        const Scalar lo = values.minCoeff();
        const Scalar hi = values.maxCoeff();
        f.center = (lo + hi) / Scalar(2);
        f.inv_sigma = Scalar(1) / sqrt(k.bandwidth_sq);
        const double radius = static_cast<double>((hi - lo) / Scalar(2) * f.inv_sigma);
        f.order = order_for_radius(radius);
        return f;
    }

    static int order_for_radius(double radius) {
        // log of radius^k exp(-radius^2/2) / sqrt(k!); decreasing once k > radius^2.
        const double r = std::max(radius, 1e-3);
        double log_term = -0.5 * r * r;
        int k = 0;
        while (true) {
            ++k;
            log_term += std::log(r) - 0.5 * std::log(static_cast<double>(k));
            if (k > r * r + 1 && log_term < std::log(1e-17)) return k + 1;
        }
    }

    /// Column means of the feature matrix, accumulated in the given row order.
    template <typename Derived>
    VectorX<Scalar> mean_features(const Eigen::MatrixBase<Derived>& x) const {
        using std::exp;
        using std::sqrt;
        const Eigen::Index n = x.size();
        VectorX<Scalar> u(n), t(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            u(i) = (x(i) - center) * inv_sigma;
            t(i) = exp(-u(i) * u(i) / Scalar(2));
        }
        VectorX<Scalar> means(order);
        for (int kk = 0; kk < order; ++kk) {
            if (kk > 0) {
                const Scalar s = Scalar(1) / sqrt(Scalar(kk));
                for (Eigen::Index i = 0; i < n; ++i) t(i) *= u(i) * s;
            }
            Scalar acc(0);
            for (Eigen::Index i = 0; i < n; ++i) acc += t(i);
            means(kk) = acc / Scalar(n);
        }
        return means;
    }

    /// Full n x order feature matrix.
    template <typename Derived>
    MatrixX<Scalar> features(const Eigen::MatrixBase<Derived>& x) const {
        using std::exp;
        using std::sqrt;
        MatrixX<Scalar> F(x.size(), order);
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const Scalar u = (x(i) - center) * inv_sigma;
            Scalar t = exp(-u * u / Scalar(2));
            F(i, 0) = t;
            for (int kk = 1; kk < order; ++kk) {
                t *= u / sqrt(Scalar(kk));
                F(i, kk) = t;
            }
        }
        return F;
    }
};

namespace detail {

// The factorised path only pays off for large 1D problems.
inline constexpr double kTaylorPathMinPairs = 1 << 20;

template <typename Scalar, typename DA, typename DB>
bool taylor_path_applies(const KernelSpec<Scalar>& k, const Eigen::MatrixBase<DA>& X, const Eigen::MatrixBase<DB>& Y) {
    if (k.family != KernelFamily::gaussian || X.cols() != 1) return false;
    if (static_cast<double>(X.rows()) * static_cast<double>(Y.rows()) < kTaylorPathMinPairs) return false;
    using std::sqrt;
    const Scalar lo = std::min(X.minCoeff(), Y.minCoeff());
    const Scalar hi = std::max(X.maxCoeff(), Y.maxCoeff());
    return static_cast<double>((hi - lo) / (Scalar(2) * sqrt(k.bandwidth_sq))) <=
           GaussianTaylorFeatures1d<Scalar>::kMaxRadius;
}

template <typename Scalar>
Scalar mmd2_biased_taylor(const KernelSpec<Scalar>& k, const MatrixX<Scalar>& Xs, const MatrixX<Scalar>& Ys) {
    MatrixX<Scalar> both(Xs.rows() + Ys.rows(), 1);
    both << Xs, Ys;
    const auto fmap = GaussianTaylorFeatures1d<Scalar>::fit(k, both);
    const VectorX<Scalar> diff = fmap.mean_features(Xs.col(0)) - fmap.mean_features(Ys.col(0));
    Scalar acc(0);
    for (Eigen::Index i = 0; i < diff.size(); ++i) acc += diff(i) * diff(i);
    return acc;
}

template <typename Scalar, typename DA, typename DB>
Scalar mmd2_biased_direct(const KernelSpec<Scalar>& k, const Eigen::MatrixBase<DA>& Xs, const Eigen::MatrixBase<DB>& Ys) {
    const Scalar n = Scalar(Xs.rows());
    const Scalar m = Scalar(Ys.rows());
    const Scalar sxx = kernel_double_sum(k, Xs, Xs) / (n * n);
    const Scalar syy = kernel_double_sum(k, Ys, Ys) / (m * m);
    const Scalar sxy = kernel_double_sum(k, Xs, Ys) / (n * m);
    return sxx + syy - Scalar(2) * sxy;
}

}  // namespace detail

/// Biased (V-statistic) estimate of MMD^2 between the rows of X and Y.
template <typename Scalar, typename DA, typename DB>
Scalar mmd2_biased(const Eigen::MatrixBase<DA>& X, const Eigen::MatrixBase<DB>& Y, const KernelSpec<Scalar>& k) {
    detail::require_samples(X, 1, "mmd2_biased");
    detail::require_samples(Y, 1, "mmd2_biased");
    detail::require_same_dim(X, Y);
    const MatrixX<Scalar> Xs = detail::canonical_rows(X);
    const MatrixX<Scalar> Ys = detail::canonical_rows(Y);
    if (detail::taylor_path_applies(k, Xs, Ys)) return detail::mmd2_biased_taylor(k, Xs, Ys);
    return detail::mmd2_biased_direct(k, Xs, Ys);
}

/// Unbiased (U-statistic) estimate; diagonal terms excluded, may be negative.
template <typename Scalar, typename DA, typename DB>
Scalar mmd2_unbiased(const Eigen::MatrixBase<DA>& X, const Eigen::MatrixBase<DB>& Y, const KernelSpec<Scalar>& k) {
    detail::require_samples(X, 2, "mmd2_unbiased");
    detail::require_samples(Y, 2, "mmd2_unbiased");
    detail::require_same_dim(X, Y);
    const MatrixX<Scalar> Xs = detail::canonical_rows(X);
    const MatrixX<Scalar> Ys = detail::canonical_rows(Y);
    const Scalar n = Scalar(Xs.rows());
    const Scalar m = Scalar(Ys.rows());
    const Scalar diag = k.diagonal();
    const Scalar sxx = (detail::kernel_double_sum(k, Xs, Xs) - n * diag) / (n * (n - Scalar(1)));
    const Scalar syy = (detail::kernel_double_sum(k, Ys, Ys) - m * diag) / (m * (m - Scalar(1)));
    const Scalar sxy = detail::kernel_double_sum(k, Xs, Ys) / (n * m);
    return sxx + syy - Scalar(2) * sxy;
}

template <typename Scalar, typename DA, typename DB>
Scalar mmd2(MmdVariant variant, const Eigen::MatrixBase<DA>& X, const Eigen::MatrixBase<DB>& Y,
            const KernelSpec<Scalar>& k) {
    return variant == MmdVariant::biased ? mmd2_biased(X, Y, k) : mmd2_unbiased(X, Y, k);
}

/// Empirical witness function mu_X(t) - mu_Y(t).
template <typename Scalar, typename DA, typename DB, typename DT>
Scalar witness_fn_eval(const Eigen::MatrixBase<DA>& X, const Eigen::MatrixBase<DB>& Y, const KernelSpec<Scalar>& k,
                       const Eigen::MatrixBase<DT>& t) {
    detail::require_samples(X, 1, "witness_fn_eval");
    detail::require_samples(Y, 1, "witness_fn_eval");
    detail::require_same_dim(X, Y);
    detail::require(t.size() == X.cols(), "witness_fn_eval: evaluation point has wrong dimension");
    const MatrixX<Scalar> Xs = detail::canonical_rows(X);
    const MatrixX<Scalar> Ys = detail::canonical_rows(Y);
    return detail::kernel_row_sum(k, t, Xs) / Scalar(Xs.rows()) - detail::kernel_row_sum(k, t, Ys) / Scalar(Ys.rows());
}

namespace detail {

template <typename Scalar, typename DV>
VectorX<Scalar> witness_values_sorted(const MatrixX<Scalar>& Xs, const MatrixX<Scalar>& Ys,
                                      const Eigen::MatrixBase<DV>& V, const KernelSpec<Scalar>& k) {
    VectorX<Scalar> w(V.rows());
    for (Eigen::Index j = 0; j < V.rows(); ++j)
        w(j) = kernel_row_sum(k, V.row(j), Xs) / Scalar(Xs.rows()) -
               kernel_row_sum(k, V.row(j), Ys) / Scalar(Ys.rows());
    return w;
}

}  // namespace detail

/// UME^2 = (1/J) sum_j (mu_X(v_j) - mu_Y(v_j))^2 over the witness rows of V.
template <typename Scalar, typename DA, typename DB, typename DV>
Scalar ume2_hat(const Eigen::MatrixBase<DA>& X, const Eigen::MatrixBase<DB>& Y, const Eigen::MatrixBase<DV>& V,
                const KernelSpec<Scalar>& k) {
    detail::require_samples(X, 1, "ume2_hat");
    detail::require_samples(Y, 1, "ume2_hat");
    detail::require_samples(V, 1, "ume2_hat (witnesses)");
    detail::require_same_dim(X, Y);
    detail::require_same_dim(X, V);
    const MatrixX<Scalar> Xs = detail::canonical_rows(X);
    const MatrixX<Scalar> Ys = detail::canonical_rows(Y);
    const VectorX<Scalar> w = detail::witness_values_sorted(Xs, Ys, V, k);
    Scalar acc(0);
    for (Eigen::Index j = 0; j < w.size(); ++j) acc += w(j) * w(j);
    return acc / Scalar(w.size());
}

template <typename Scalar, typename DA, typename DB>
Scalar ume2_hat(const Eigen::MatrixBase<DA>& X, const Eigen::MatrixBase<DB>& Y, const WitnessSet& V,
                const KernelSpec<Scalar>& k) {
    return ume2_hat(X, Y, V.points, k);
}

namespace detail {

/// Pairwise kernel terms between rows of A and B, visited without allocation.
/// f(i, j, psi, two_dpsi, dpsi_bw, diff) with diff = A_i - B_j.
template <typename Scalar, typename DA, typename DB, typename F>
void for_each_pair(const KernelSpec<Scalar>& k, const Eigen::MatrixBase<DA>& A, const Eigen::MatrixBase<DB>& B,
                   bool want_bw, F&& f) {
    const Eigen::Index d = A.cols();
    Scalar diff[16];
    std::vector<Scalar> heap;
    Scalar* buf = diff;
    if (d > 16) {
        heap.resize(static_cast<std::size_t>(d));
        buf = heap.data();
    }
    const bool gauss = k.family == KernelFamily::gaussian;
    const Scalar inv2s = gauss ? Scalar(1) / (Scalar(2) * k.bandwidth_sq) : Scalar(0);
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        for (Eigen::Index j = 0; j < B.rows(); ++j) {
            Scalar r2(0);
            for (Eigen::Index c = 0; c < d; ++c) {
                buf[c] = A(i, c) - B(j, c);
                r2 += buf[c] * buf[c];
            }
            Scalar psi, dpsi, dbw(0);
            if (gauss) {
                using std::exp;
                psi = exp(-r2 * inv2s);
                dpsi = -psi * inv2s;
                if (want_bw) dbw = psi * r2 * inv2s / k.bandwidth_sq;
            } else {
                psi = k.profile(r2);
                dpsi = k.profile_derivative(r2);
            }
            f(i, j, psi, Scalar(2) * dpsi, dbw, static_cast<const Scalar*>(buf));
        }
    }
}

}  // namespace detail

/// Gradient of ume2_hat with respect to each witness point (J x d).
template <typename Scalar, typename DA, typename DB, typename DV>
MatrixX<Scalar> grad_ume2_wrt_witness(const Eigen::MatrixBase<DA>& X, const Eigen::MatrixBase<DB>& Y,
                                      const Eigen::MatrixBase<DV>& V, const KernelSpec<Scalar>& k) {
    detail::require_samples(X, 1, "grad_ume2_wrt_witness");
    detail::require_samples(Y, 1, "grad_ume2_wrt_witness");
    detail::require_samples(V, 1, "grad_ume2_wrt_witness (witnesses)");
    detail::require_same_dim(X, Y);
    detail::require_same_dim(X, V);
    const Eigen::Index d = V.cols();
    const Scalar n = Scalar(X.rows());
    const Scalar m = Scalar(Y.rows());
    // X and Y sums stay separate so that X = Y cancels exactly.
    VectorX<Scalar> wx = VectorX<Scalar>::Zero(V.rows()), wy = VectorX<Scalar>::Zero(V.rows());
    MatrixX<Scalar> gx = MatrixX<Scalar>::Zero(V.rows(), d), gy = MatrixX<Scalar>::Zero(V.rows(), d);
    // diff = v_j - x_i, so grad_v k(v, x) = two_dpsi * diff.
    detail::for_each_pair(k, V, X, false, [&](Eigen::Index j, Eigen::Index, Scalar psi, Scalar t, Scalar, const Scalar* diff) {
        wx(j) += psi;
        for (Eigen::Index q = 0; q < d; ++q) gx(j, q) += t * diff[q];
    });
    detail::for_each_pair(k, V, Y, false, [&](Eigen::Index j, Eigen::Index, Scalar psi, Scalar t, Scalar, const Scalar* diff) {
        wy(j) += psi;
        for (Eigen::Index q = 0; q < d; ++q) gy(j, q) += t * diff[q];
    });
    const VectorX<Scalar> w = wx / n - wy / m;
    const MatrixX<Scalar> dmu = gx / n - gy / m;
    return (Scalar(2) / Scalar(V.rows()) * w).asDiagonal() * dmu;
}

template <typename Scalar, typename DA, typename DB>
MatrixX<Scalar> grad_ume2_wrt_witness(const Eigen::MatrixBase<DA>& X, const Eigen::MatrixBase<DB>& Y,
                                      const WitnessSet& V, const KernelSpec<Scalar>& k) {
    return grad_ume2_wrt_witness(X, Y, V.points, k);
}


/// UME^2 with gradients in X, Y, V and (gaussian only) the bandwidth.
template <typename Scalar, typename DA, typename DB, typename DV>
DiscrepancyGrad<Scalar> ume2_with_grad(const Eigen::MatrixBase<DA>& X, const Eigen::MatrixBase<DB>& Y,
                                       const Eigen::MatrixBase<DV>& V, const KernelSpec<Scalar>& k) {
    detail::require_samples(X, 1, "ume2_with_grad");
    detail::require_samples(Y, 1, "ume2_with_grad");
    detail::require_samples(V, 1, "ume2_with_grad (witnesses)");
    detail::require_same_dim(X, Y);
    detail::require_same_dim(X, V);
    const bool bw = k.family == KernelFamily::gaussian;
    const Eigen::Index d = X.cols();
    const Scalar n = Scalar(X.rows());
    const Scalar m = Scalar(Y.rows());
    const Scalar J = Scalar(V.rows());
    DiscrepancyGrad<Scalar> out;
    out.dX = MatrixX<Scalar>::Zero(X.rows(), d);
    out.dY = MatrixX<Scalar>::Zero(Y.rows(), d);
    out.dV = MatrixX<Scalar>::Zero(V.rows(), d);

    // Witness values and their bandwidth derivatives.
    VectorX<Scalar> wx = VectorX<Scalar>::Zero(V.rows()), wy = VectorX<Scalar>::Zero(V.rows());
    VectorX<Scalar> bx = VectorX<Scalar>::Zero(V.rows()), by = VectorX<Scalar>::Zero(V.rows());
    detail::for_each_pair(k, V, X, bw, [&](Eigen::Index j, Eigen::Index, Scalar psi, Scalar, Scalar dbw, const Scalar*) {
        wx(j) += psi;
        bx(j) += dbw;
    });
    detail::for_each_pair(k, V, Y, bw, [&](Eigen::Index j, Eigen::Index, Scalar psi, Scalar, Scalar dbw, const Scalar*) {
        wy(j) += psi;
        by(j) += dbw;
    });
    const VectorX<Scalar> w = wx / n - wy / m, w_bw = bx / n - by / m;
    const VectorX<Scalar> c = Scalar(2) / J * w;
    // diff = v_j - x_i; grad_x k = -two_dpsi * diff, grad_v k = two_dpsi * diff.
    detail::for_each_pair(k, V, X, false, [&](Eigen::Index j, Eigen::Index i, Scalar, Scalar t, Scalar, const Scalar* diff) {
        const Scalar s = c(j) / n * t;
        for (Eigen::Index q = 0; q < d; ++q) {
            out.dX(i, q) -= s * diff[q];
            out.dV(j, q) += s * diff[q];
        }
    });
    detail::for_each_pair(k, V, Y, false, [&](Eigen::Index j, Eigen::Index l, Scalar, Scalar t, Scalar, const Scalar* diff) {
        const Scalar s = c(j) / m * t;
        for (Eigen::Index q = 0; q < d; ++q) {
            out.dY(l, q) += s * diff[q];
            out.dV(j, q) -= s * diff[q];
        }
    });
    for (Eigen::Index j = 0; j < V.rows(); ++j) {
        out.value += w(j) * w(j);
        out.d_bandwidth_sq += c(j) * w_bw(j);
    }
    out.value /= J;
    return out;
}

/// MMD^2 (either variant) with gradients in X, Y and (gaussian only) the bandwidth.
template <typename Scalar, typename DA, typename DB>
DiscrepancyGrad<Scalar> mmd2_with_grad(MmdVariant variant, const Eigen::MatrixBase<DA>& X,
                                       const Eigen::MatrixBase<DB>& Y, const KernelSpec<Scalar>& k) {
    const Eigen::Index min_rows = variant == MmdVariant::biased ? 1 : 2;
    detail::require_samples(X, min_rows, "mmd2_with_grad");
    detail::require_samples(Y, min_rows, "mmd2_with_grad");
    detail::require_same_dim(X, Y);
    const bool bw = k.family == KernelFamily::gaussian;
    const Eigen::Index d = X.cols();
    const Scalar n = Scalar(X.rows());
    const Scalar m = Scalar(Y.rows());
    const bool ub = variant == MmdVariant::unbiased;
    const Scalar cxx = ub ? Scalar(1) / (n * (n - Scalar(1))) : Scalar(1) / (n * n);
    const Scalar cyy = ub ? Scalar(1) / (m * (m - Scalar(1))) : Scalar(1) / (m * m);
    const Scalar cxy = Scalar(2) / (n * m);

    DiscrepancyGrad<Scalar> out;
    out.dX = MatrixX<Scalar>::Zero(X.rows(), d);
    out.dY = MatrixX<Scalar>::Zero(Y.rows(), d);
    // Within-set terms: each point sits in both slots, hence the factor 2 on the gradient.
    auto within = [&](const auto& A, Scalar coef, MatrixX<Scalar>& dA) {
        Scalar val(0), dbw_sum(0);
        detail::for_each_pair(k, A, A, bw, [&](Eigen::Index i, Eigen::Index j, Scalar psi, Scalar t, Scalar dbw, const Scalar* diff) {
            if (i == j) {
                if (!ub) {
                    val += psi;
                    dbw_sum += dbw;
                }
                return;
            }
            val += psi;
            dbw_sum += dbw;
            const Scalar s = Scalar(2) * coef * t;
            for (Eigen::Index q = 0; q < d; ++q) dA(i, q) += s * diff[q];
        });
        out.value += coef * val;
        out.d_bandwidth_sq += coef * dbw_sum;
    };
    within(X, cxx, out.dX);
    within(Y, cyy, out.dY);
    Scalar val(0), dbw_sum(0);
    detail::for_each_pair(k, X, Y, bw, [&](Eigen::Index i, Eigen::Index l, Scalar psi, Scalar t, Scalar dbw, const Scalar* diff) {
        val += psi;
        dbw_sum += dbw;
        const Scalar s = cxy * t;
        for (Eigen::Index q = 0; q < d; ++q) {
            out.dX(i, q) -= s * diff[q];
            out.dY(l, q) += s * diff[q];
        }
    });
    out.value -= cxy * val;
    out.d_bandwidth_sq -= cxy * dbw_sum;
    return out;
}

}  // namespace glocad
