#pragma once

#include <array>

#include "glocad/mixtures.hpp"

namespace glocad {

/// sqrt(bd / (2(b+d))) exp(-(a-c)^2 / (b+d)), the normalised integral of
/// exp(-(x-a)^2/b - (x-c)^2/d) over the real line.
double gauss_integral(double a, double b, double c, double d);

/// E_{x ~ N(m_p, sigma_p_sq)} k(x, v) for the gaussian kernel with bandwidth sigma_sq.
double mean_embedding_gauss(double v, double m_p, double sigma_p_sq, double sigma_sq);

/// Mean embedding of a 1D mixture at v.
double mean_embedding_mixture(double v, const GaussianMixture& m, double sigma_sq);

/// (mu_P(v) - mu_Q(v))^2 for two 1D Gaussians.
double ume2_two_gaussians(double v, double m_p, double sigma_p_sq, double m_q, double sigma_q_sq, double sigma_sq);

/// E k(x, y) for independent x ~ N(a, va), y ~ N(b, vb) in 1D.
double gauss_cross_expectation(double a, double va, double b, double vb, double sigma_sq);

/// Population MMD^2 between two 1D mixtures.
double mmd2_mixtures(const GaussianMixture& p, const GaussianMixture& q, double sigma_sq);

/// P = w N(0,1) + (1-w) N(0, sigma_q_sq) against Q = N(0,1).
struct SpikySpec {
    double w = 0.5;
    double sigma_q_sq = 0.25;
    double sigma_sq = 1.0;

    void validate() const;
};

double mmd2_spiky(const SpikySpec& s);
double ume2_spiky(const SpikySpec& s, double v);
/// d MMD^2 / d sigma_q
double sens_mmd(const SpikySpec& s);
/// d UME^2 / d sigma_q at witness v
double sens_ume(const SpikySpec& s, double v);

/// -d/dm_q of UME^2 with the witness at v = m_p, for P = w N(m_p,1) + (1-w) N(0,1)
/// and Q = w N(m_q,1) + (1-w) N(0,1).
double ume_grad_mq(double m_p, double m_q, double sigma_sq, double omega);

/// Single-Gaussian training dynamics: target N(0,1), model N(m_q,1), one witness v.
struct DynState1G {
    double m_q = 0.0;
    double v = 0.0;
    double lambda = 0.0;
    bool ume_only = false;
    double sigma_sq = 1.0;

    void validate() const;
};

struct Rates1G {
    double dm_q = 0.0;
    double dv = 0.0;
};

Rates1G dyn_single_gaussian(const DynState1G& s);

/// Population MMD^2 between N(0,1) and N(m_q,1).
double mmd2_single_gaussian(double m_q, double sigma_sq);

/// Model 0.5 N(m1,1) + 0.5 N(m2,1) against a 1D target with one witness v.
struct MoG1dParams {
    double lambda = 5.0;
    bool ume_only = false;
    double sigma_sq = 2.0;
};

/// Loss MMD^2 + lambda UME^2 (or UME^2 alone when ume_only) at (m1, m2, v).
double mog1d_loss(double m1, double m2, double v, const MoG1dParams& p, const GaussianMixture& target);

/// (dm1/dt, dm2/dt, dv/dt): descent in the means, ascent of UME^2 in v.
std::array<double, 3> dyn_mog1d(double m1, double m2, double v, const MoG1dParams& p, const GaussianMixture& target);

/// 0.5 N(-2,1) + 0.5 N(2,1)
GaussianMixture default_mog1d_target();

}  // namespace glocad
