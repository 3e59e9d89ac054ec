#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "glocad/mixtures.hpp"

namespace glocad::verify {

// Quadrature reimplementations of the closed forms.
double quad_gauss_integral(double a, double b, double c, double d);
double quad_mean_embedding(double v, const GaussianMixture& p, double sigma_sq);
/// MMD^2 between two 1D mixtures by nested quadrature of k against p - q.
double quad_mmd2(const GaussianMixture& p, const GaussianMixture& q, double sigma_sq);
/// (mu_P(v) - mu_Q(v))^2 with both embeddings by quadrature.
double quad_ume2(double v, const GaussianMixture& p, const GaussianMixture& q, double sigma_sq);

/// Central difference of a scalar function.
double central_difference(const std::function<double(double)>& f, double x, double h = 1e-6);

/// |a - b| / max(|a|, |b|, floor)
double relative_error(double a, double b, double floor = 1e-8);

/// Bootstrap standard error of a statistic computed from resampling weights:
/// stat(wx, wy) receives multinomial counts over the rows of the two samples.
double bootstrap_se(Eigen::Index n, Eigen::Index m,
                    const std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>& stat,
                    int replicates, Rng& rng);

struct CheckResult {
    std::string name;
    bool passed = false;
    double value = 0;      // observed error or statistic
    double tolerance = 0;  // pinned bound
    std::string detail;
};

struct BatteryOptions {
    bool fast = false;  // reduced sample sizes
    std::uint64_t seed = 0;
};

// One function per pinned criterion; each returns a single aggregated result.
CheckResult check_closed_forms();
CheckResult check_derivatives(const BatteryOptions& opt);
CheckResult check_estimator_consistency(const BatteryOptions& opt);
CheckResult check_single_gaussian_dynamics();
CheckResult check_stability();
CheckResult check_ume_gradient_curve();
CheckResult check_lambda_zero_reduction(const BatteryOptions& opt);

/// All of the above in order.
std::vector<CheckResult> run_oracle_battery(const BatteryOptions& opt);

/// Pass/fail JSON report.
std::string report_json(const std::vector<CheckResult>& results);

}  // namespace glocad::verify
