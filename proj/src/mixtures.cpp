#include "glocad/mixtures.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "glocad/errors.hpp"

namespace glocad {

GaussianMixture::GaussianMixture(Eigen::VectorXd w, Eigen::MatrixXd mu, Eigen::VectorXd var)
    : weights(std::move(w)), means(std::move(mu)), variances(std::move(var)) {
    validate();
}

GaussianMixture GaussianMixture::gaussian(const Eigen::VectorXd& mean, double variance) {
    return GaussianMixture(Eigen::VectorXd::Ones(1), mean.transpose(), Eigen::VectorXd::Constant(1, variance));
}

GaussianMixture GaussianMixture::mixture_1d(const std::vector<double>& weights, const std::vector<double>& means,
                                            const std::vector<double>& variances) {
    detail::require(weights.size() == means.size() && means.size() == variances.size(),
                    "mixture: weights, means and variances must have equal counts");
    const auto k = static_cast<Eigen::Index>(weights.size());
    return GaussianMixture(Eigen::Map<const Eigen::VectorXd>(weights.data(), k),
                           Eigen::Map<const Eigen::MatrixXd>(means.data(), k, 1),
                           Eigen::Map<const Eigen::VectorXd>(variances.data(), k));
}

void GaussianMixture::validate() const {
    detail::require(weights.size() >= 1, "mixture: at least one component required");
    detail::require(weights.size() == means.rows() && weights.size() == variances.size(),
                    "mixture: weights, means and variances must have equal counts");
    detail::require(means.cols() == 1 || means.cols() == 2, "mixture: dimension must be 1 or 2");
    detail::require(means.allFinite(), "mixture: means must be finite");
    detail::require((weights.array() >= 0.0).all() && weights.allFinite(), "mixture: weights must be non-negative");
    detail::require(std::abs(weights.sum() - 1.0) < 1e-12, "mixture: weights must sum to 1");
    detail::require((variances.array() > 0.0).all() && variances.allFinite(), "mixture: variances must be positive");
}

void RingMoGMMSpec::validate() const {
    detail::require(outer_count >= 1 && inner_count >= 1, "ring: counts must be at least 1");
    detail::require(outer_radius > 0 && inner_radius > 0, "ring: radii must be positive");
    detail::require(inner_radius < outer_radius, "ring: inner radius must be below outer radius");
    detail::require(component_variance > 0, "ring: component variance must be positive");
}

double density(const GaussianMixture& m, const Eigen::Ref<const Eigen::VectorXd>& x) {
    detail::require(x.size() == m.dim(), "density: point dimension does not match mixture");
    const double d = m.dim();
    double p = 0.0;
    for (int j = 0; j < m.components(); ++j) {
        const double var = m.variances(j);
        const double r2 = (x - m.means.row(j).transpose()).squaredNorm();
        p += m.weights(j) * std::exp(-r2 / (2 * var)) / std::pow(2 * std::numbers::pi * var, d / 2);
    }
    return p;
}

MixtureSample sample(const GaussianMixture& m, int n, Rng& rng) {
    detail::require(n >= 1, "sample: n must be at least 1");
    m.validate();
    std::discrete_distribution<int> pick(m.weights.data(), m.weights.data() + m.weights.size());
    std::normal_distribution<double> normal(0.0, 1.0);
    MixtureSample s{Eigen::MatrixXd(n, m.dim()), Eigen::VectorXi(n)};
    for (int i = 0; i < n; ++i) {
        const int j = pick(rng);
        s.component(i) = j;
        const double sd = std::sqrt(m.variances(j));
        for (int c = 0; c < m.dim(); ++c) s.points(i, c) = m.means(j, c) + sd * normal(rng);
    }
    return s;
}

GaussianMixture build_ring_mogmm(const RingMoGMMSpec& spec) {
    spec.validate();
    const int K = spec.outer_count * spec.inner_count;
    Eigen::MatrixXd means(K, 2);
    const double two_pi = 2 * std::numbers::pi;
    for (int o = 0; o < spec.outer_count; ++o) {
        const double a = two_pi * o / spec.outer_count;
        const double cx = spec.outer_radius * std::cos(a);
        const double cy = spec.outer_radius * std::sin(a);
        for (int i = 0; i < spec.inner_count; ++i) {
            const double b = two_pi * i / spec.inner_count;
            means(o * spec.inner_count + i, 0) = cx + spec.inner_radius * std::cos(b);
            means(o * spec.inner_count + i, 1) = cy + spec.inner_radius * std::sin(b);
        }
    }
    Eigen::VectorXd w = Eigen::VectorXd::Constant(K, 1.0 / K);
    w(K - 1) = 1.0 - w.head(K - 1).sum();
    return GaussianMixture(w, means, Eigen::VectorXd::Constant(K, spec.component_variance));
}

GaussianMixture mixture_union(const GaussianMixture& a, const GaussianMixture& b, double share) {
    detail::require(a.dim() == b.dim(), "mixture_union: dimensions differ");
    detail::require(share > 0 && share < 1, "mixture_union: share must lie in (0, 1)");
    const int ka = a.components(), kb = b.components();
    Eigen::VectorXd w(ka + kb), var(ka + kb);
    Eigen::MatrixXd mu(ka + kb, a.dim());
    w << share * a.weights, (1 - share) * b.weights;
    w /= w.sum();
    var << a.variances, b.variances;
    mu << a.means, b.means;
    return GaussianMixture(w, mu, var);
}

std::string samples_to_csv(const MixtureSample& s) {
    std::ostringstream os;
    os.precision(17);
    for (Eigen::Index c = 0; c < s.points.cols(); ++c) os << 'x' << c << ',';
    os << "component_index\n";
    for (Eigen::Index i = 0; i < s.points.rows(); ++i) {
        for (Eigen::Index c = 0; c < s.points.cols(); ++c) os << s.points(i, c) << ',';
        os << s.component(i) << '\n';
    }
    return os.str();
}

}  // namespace glocad
