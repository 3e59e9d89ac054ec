#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "glocad/errors.hpp"

namespace glocad {

enum class KernelFamily { gaussian, imq };

/// Radial positive-definite kernel k(x, y) = psi(||x - y||^2).
///
/// gaussian: psi(r2) = exp(-r2 / (2 sigma^2)), parameterised by sigma^2 (bandwidth_sq).
/// imq:      psi(r2) = (c^2 + r2)^b with c > 0, b < 0.
template <typename Scalar>
struct KernelSpec {
    KernelFamily family = KernelFamily::gaussian;
    Scalar bandwidth_sq = Scalar(1);
    Scalar imq_c = Scalar(1);
    Scalar imq_b = Scalar(-0.5);

    static KernelSpec gaussian(Scalar sigma_sq) {
        KernelSpec k;
        k.family = KernelFamily::gaussian;
        k.bandwidth_sq = sigma_sq;
        k.validate();
        return k;
    }

    static KernelSpec imq(Scalar c, Scalar b) {
        KernelSpec k;
        k.family = KernelFamily::imq;
        k.imq_c = c;
        k.imq_b = b;
        k.validate();
        return k;
    }

    void validate() const {
        using std::isfinite;
        if (family == KernelFamily::gaussian) {
            detail::require(isfinite(bandwidth_sq) && bandwidth_sq > Scalar(0),
                            "gaussian kernel requires bandwidth_sq > 0");
        } else {
            detail::require(isfinite(imq_c) && imq_c > Scalar(0), "imq kernel requires c > 0");
            detail::require(isfinite(imq_b) && imq_b < Scalar(0), "imq kernel requires b < 0");
        }
    }

    /// psi(r2)
    Scalar profile(Scalar r2) const {
        using std::exp;
        using std::pow;
        if (family == KernelFamily::gaussian) return exp(-r2 / (Scalar(2) * bandwidth_sq));
        return pow(imq_c * imq_c + r2, imq_b);
    }

    /// d psi / d r2
    Scalar profile_derivative(Scalar r2) const {
        using std::pow;
        if (family == KernelFamily::gaussian) return -profile(r2) / (Scalar(2) * bandwidth_sq);
        return imq_b * pow(imq_c * imq_c + r2, imq_b - Scalar(1));
    }

    /// d psi / d sigma^2 (gaussian only).
    Scalar profile_bandwidth_derivative(Scalar r2) const {
        if (family != KernelFamily::gaussian)
            throw UnsupportedError("bandwidth derivative is only defined for the gaussian kernel");
        return profile(r2) * r2 / (Scalar(2) * bandwidth_sq * bandwidth_sq);
    }

    /// psi(0): value on the diagonal.
    Scalar diagonal() const { return profile(Scalar(0)); }
};

using Kernel = KernelSpec<double>;

inline std::string to_string(KernelFamily f) {
    return f == KernelFamily::gaussian ? "gaussian" : "imq";
}

namespace detail {

template <typename DA, typename DB>
typename DA::Scalar squared_distance(const Eigen::MatrixBase<DA>& x, const Eigen::MatrixBase<DB>& y) {
    require(x.size() == y.size(), "kernel inputs differ in dimension (" + std::to_string(x.size()) +
                                      " vs " + std::to_string(y.size()) + ")");
    typename DA::Scalar r2(0);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const auto d = x(i) - y(i);
        r2 += d * d;
    }
    return r2;
}

}  // namespace detail

template <typename Scalar, typename DA, typename DB>
Scalar kernel_eval(const KernelSpec<Scalar>& k, const Eigen::MatrixBase<DA>& x,
                   const Eigen::MatrixBase<DB>& y) {
    return k.profile(detail::squared_distance(x, y));
}

/// Gradient of k(x, y) with respect to x, returned as a column vector.
template <typename Scalar, typename DA, typename DB>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> kernel_grad_x(const KernelSpec<Scalar>& k,
                                                        const Eigen::MatrixBase<DA>& x,
                                                        const Eigen::MatrixBase<DB>& y) {
    const Scalar r2 = detail::squared_distance(x, y);
    const Scalar s = Scalar(2) * k.profile_derivative(r2);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) g(i) = s * (x(i) - y(i));
    return g;
}

template <typename Scalar, typename DA, typename DB>
Scalar kernel_grad_bandwidth(const KernelSpec<Scalar>& k, const Eigen::MatrixBase<DA>& x,
                             const Eigen::MatrixBase<DB>& y) {
    return k.profile_bandwidth_derivative(detail::squared_distance(x, y));
}

/// Gram matrix K_ij = k(x_i, y_j) over the rows of X and Y.
template <typename Scalar, typename DA, typename DB>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> gram(const KernelSpec<Scalar>& k,
                                                           const Eigen::MatrixBase<DA>& X,
                                                           const Eigen::MatrixBase<DB>& Y) {
    detail::require(X.cols() == Y.cols(), "gram: sample dimensions differ");
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> K(X.rows(), Y.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < Y.rows(); ++j) K(i, j) = kernel_eval(k, X.row(i), Y.row(j));
    return K;
}

}  // namespace glocad
