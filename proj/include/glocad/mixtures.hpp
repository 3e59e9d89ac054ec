#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace glocad {

using Rng = std::mt19937_64;

/// Isotropic Gaussian mixture in 1 or 2 dimensions. Means are stored one per row.
struct GaussianMixture {
    Eigen::VectorXd weights;
    Eigen::MatrixXd means;
    Eigen::VectorXd variances;

    GaussianMixture() = default;
    GaussianMixture(Eigen::VectorXd w, Eigen::MatrixXd mu, Eigen::VectorXd var);

    /// Single isotropic component.
    static GaussianMixture gaussian(const Eigen::VectorXd& mean, double variance);
    /// 1D mixture from scalar lists.
    static GaussianMixture mixture_1d(const std::vector<double>& weights, const std::vector<double>& means,
                                      const std::vector<double>& variances);

    int dim() const { return static_cast<int>(means.cols()); }
    int components() const { return static_cast<int>(weights.size()); }
    void validate() const;
};

struct MixtureSample {
    Eigen::MatrixXd points;
    Eigen::VectorXi component;
};

struct RingMoGMMSpec {
    int outer_count = 5;
    int inner_count = 3;
    double outer_radius = 4.0;
    double inner_radius = 1.0;
    double component_variance = 0.05 * 0.05;

    void validate() const;
};

double density(const GaussianMixture& m, const Eigen::Ref<const Eigen::VectorXd>& x);

MixtureSample sample(const GaussianMixture& m, int n, Rng& rng);

GaussianMixture build_ring_mogmm(const RingMoGMMSpec& spec = {});

/// Union weighted by `share` for the first mixture and 1 - share for the second.
GaussianMixture mixture_union(const GaussianMixture& a, const GaussianMixture& b, double share = 0.5);

/// CSV with header x0[,x1],component_index.
std::string samples_to_csv(const MixtureSample& s);

}  // namespace glocad
