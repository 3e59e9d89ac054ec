#include "glocad/analytic.hpp"

#include <cmath>
#include <limits>

#include "glocad/errors.hpp"

namespace glocad {

namespace {

void require_positive(double x, const char* what) {
    detail::require(std::isfinite(x) && x > 0, std::string(what) + " must be positive");
}

double c_of(double z, double sigma_sq) { return std::sqrt(sigma_sq / (sigma_sq + z)); }

double c_prime(double z, double sigma_sq) { return -c_of(z, sigma_sq) / (2 * (sigma_sq + z)); }

// c(z) exp(-v^2 / (2(sigma^2 + z))): embedding of N(0, z) at v.
double g_of(double z, double v, double sigma_sq) {
    return c_of(z, sigma_sq) * std::exp(-v * v / (2 * (sigma_sq + z)));
}

double g_prime(double z, double v, double sigma_sq) {
    const double s = sigma_sq + z;
    return g_of(z, v, sigma_sq) * (-1 / (2 * s) + v * v / (2 * s * s));
}

// Central difference refined by one Richardson step.
template <typename F>
double richardson_derivative(F&& f, double x, double h) {
    const double d1 = (f(x + h) - f(x - h)) / (2 * h);
    const double h2 = h / 2;
    const double d2 = (f(x + h2) - f(x - h2)) / (2 * h2);
    return (4 * d2 - d1) / 3;
}

}  // namespace

double gauss_integral(double a, double b, double c, double d) {
    require_positive(b, "gauss_integral: b");
    require_positive(d, "gauss_integral: d");
    return std::sqrt(b * d / (2 * (b + d))) * std::exp(-(a - c) * (a - c) / (b + d));
}

double mean_embedding_gauss(double v, double m_p, double sigma_p_sq, double sigma_sq) {
    require_positive(sigma_p_sq, "mean_embedding_gauss: sigma_p_sq");
    require_positive(sigma_sq, "mean_embedding_gauss: sigma_sq");
    const double s = sigma_sq + sigma_p_sq;
    return std::sqrt(sigma_sq / s) * std::exp(-(v - m_p) * (v - m_p) / (2 * s));
}

double mean_embedding_mixture(double v, const GaussianMixture& m, double sigma_sq) {
    detail::require(m.dim() == 1, "mean_embedding_mixture: mixture must be 1D");
    double acc = 0.0;
    for (int j = 0; j < m.components(); ++j)
        acc += m.weights(j) * mean_embedding_gauss(v, m.means(j, 0), m.variances(j), sigma_sq);
    return acc;
}

double ume2_two_gaussians(double v, double m_p, double sigma_p_sq, double m_q, double sigma_q_sq, double sigma_sq) {
    require_positive(sigma_p_sq, "ume2_two_gaussians: sigma_p_sq");
    require_positive(sigma_q_sq, "ume2_two_gaussians: sigma_q_sq");
    require_positive(sigma_sq, "ume2_two_gaussians: sigma_sq");
    const double sp = sigma_sq + sigma_p_sq;
    const double sq = sigma_sq + sigma_q_sq;
    const double dp = (v - m_p) * (v - m_p);
    const double dq = (v - m_q) * (v - m_q);
    return sigma_sq / sp * std::exp(-dp / sp) + sigma_sq / sq * std::exp(-dq / sq) -
           2 * sigma_sq / std::sqrt(sp * sq) * std::exp(-dp / (2 * sp) - dq / (2 * sq));
}

double gauss_cross_expectation(double a, double va, double b, double vb, double sigma_sq) {
    require_positive(sigma_sq, "gauss_cross_expectation: sigma_sq");
    detail::require(va >= 0 && vb >= 0, "gauss_cross_expectation: variances must be non-negative");
    const double s = sigma_sq + va + vb;
    return std::sqrt(sigma_sq / s) * std::exp(-(a - b) * (a - b) / (2 * s));
}

double mmd2_mixtures(const GaussianMixture& p, const GaussianMixture& q, double sigma_sq) {
    detail::require(p.dim() == 1 && q.dim() == 1, "mmd2_mixtures: mixtures must be 1D");
    auto cross = [&](const GaussianMixture& a, const GaussianMixture& b) {
        double acc = 0.0;
        for (int i = 0; i < a.components(); ++i)
            for (int j = 0; j < b.components(); ++j)
                acc += a.weights(i) * b.weights(j) *
                       gauss_cross_expectation(a.means(i, 0), a.variances(i), b.means(j, 0), b.variances(j), sigma_sq);
        return acc;
    };
    return cross(p, p) + cross(q, q) - 2 * cross(p, q);
}

void SpikySpec::validate() const {
    detail::require(w >= 0 && w <= 1, "spiky: w must lie in [0, 1]");
    require_positive(sigma_q_sq, "spiky: sigma_q_sq");
    require_positive(sigma_sq, "spiky: sigma_sq");
}

double mmd2_spiky(const SpikySpec& s) {
    s.validate();
    const double a = (1 - s.w) * (1 - s.w);
    return a * (c_of(2, s.sigma_sq) + c_of(2 * s.sigma_q_sq, s.sigma_sq) - 2 * c_of(1 + s.sigma_q_sq, s.sigma_sq));
}

double ume2_spiky(const SpikySpec& s, double v) {
    s.validate();
    const double d = g_of(1, v, s.sigma_sq) - g_of(s.sigma_q_sq, v, s.sigma_sq);
    return (1 - s.w) * (1 - s.w) * d * d;
}

double sens_mmd(const SpikySpec& s) {
    s.validate();
    const double sq = std::sqrt(s.sigma_q_sq);
    const double a = (1 - s.w) * (1 - s.w);
    return a * 4 * sq * (c_prime(2 * s.sigma_q_sq, s.sigma_sq) - c_prime(1 + s.sigma_q_sq, s.sigma_sq));
}

double sens_ume(const SpikySpec& s, double v) {
    s.validate();
    const double sq = std::sqrt(s.sigma_q_sq);
    const double d = g_of(1, v, s.sigma_sq) - g_of(s.sigma_q_sq, v, s.sigma_sq);
    return -(1 - s.w) * (1 - s.w) * 4 * sq * d * g_prime(s.sigma_q_sq, v, s.sigma_sq);
}

double ume_grad_mq(double m_p, double m_q, double sigma_sq, double omega) {
    require_positive(sigma_sq, "ume_grad_mq: sigma_sq");
    detail::require(omega >= 0 && omega <= 1, "ume_grad_mq: omega must lie in [0, 1]");
    const double s = sigma_sq + 1;
    const double d = m_p - m_q;
    const double e = std::exp(-d * d / (2 * s));
    return 2 * sigma_sq / s * omega * omega * (1 - e) * e * d / s;
}

void DynState1G::validate() const {
    require_positive(sigma_sq, "single-gaussian dynamics: sigma_sq");
    detail::require(ume_only || (std::isfinite(lambda) && lambda >= 0),
                    "single-gaussian dynamics: lambda must be non-negative");
    detail::require(std::isfinite(m_q) && std::isfinite(v), "single-gaussian dynamics: state must be finite");
}

double mmd2_single_gaussian(double m_q, double sigma_sq) {
    require_positive(sigma_sq, "mmd2_single_gaussian: sigma_sq");
    const double r = sigma_sq + 2;
    return 2 * c_of(2, sigma_sq) * (1 - std::exp(-m_q * m_q / (2 * r)));
}

Rates1G dyn_single_gaussian(const DynState1G& st) {
    st.validate();
    const double m = st.m_q, v = st.v;
    const double s = st.sigma_sq + 1;
    const double a = 2 * st.sigma_sq / (s * s);
    const double e0 = std::exp(-v * v / s);
    const double e1 = std::exp(-(v - m) * (v - m) / s);
    const double e2 = std::exp(-(v * v + (v - m) * (v - m)) / (2 * s));

    Rates1G r;
    r.dv = -a * v * e0 - a * (v - m) * e1 + a * (2 * v - m) * e2;
    const double dm_ume = -a * (v - m) * (e1 - e2);
    if (st.ume_only) {
        r.dm_q = dm_ume;
    } else {
        const double q = st.sigma_sq + 2;
        const double dm_mmd = -2 * c_of(2, st.sigma_sq) * std::exp(-m * m / (2 * q)) * m / q;
        r.dm_q = dm_mmd + st.lambda * dm_ume;
    }
    return r;
}

double mog1d_loss(double m1, double m2, double v, const MoG1dParams& p, const GaussianMixture& target) {
    detail::require(target.dim() == 1, "mog1d: target must be 1D");
    const auto model = GaussianMixture::mixture_1d({0.5, 0.5}, {m1, m2}, {1.0, 1.0});
    const double diff = mean_embedding_mixture(v, target, p.sigma_sq) - mean_embedding_mixture(v, model, p.sigma_sq);
    const double ume2 = diff * diff;
    if (p.ume_only) return ume2;
    return mmd2_mixtures(target, model, p.sigma_sq) + p.lambda * ume2;
}

std::array<double, 3> dyn_mog1d(double m1, double m2, double v, const MoG1dParams& p, const GaussianMixture& target) {
    require_positive(p.sigma_sq, "mog1d: sigma_sq");
    detail::require(p.ume_only || (std::isfinite(p.lambda) && p.lambda >= 0), "mog1d: lambda must be non-negative");
    constexpr double h = 1e-6;
    const double g1 = richardson_derivative([&](double x) { return mog1d_loss(x, m2, v, p, target); }, m1, h);
    const double g2 = richardson_derivative([&](double x) { return mog1d_loss(m1, x, v, p, target); }, m2, h);
    MoG1dParams witness_only = p;
    witness_only.ume_only = true;
    const double gv =
        richardson_derivative([&](double x) { return mog1d_loss(m1, m2, x, witness_only, target); }, v, h);
    return {-g1, -g2, gv};
}

GaussianMixture default_mog1d_target() { return GaussianMixture::mixture_1d({0.5, 0.5}, {-2.0, 2.0}, {1.0, 1.0}); }

}  // namespace glocad
