#include "doctest.h"

#include <cmath>

#include "glocad/analytic.hpp"
#include "glocad/estimators.hpp"
#include "glocad/verify.hpp"

using namespace glocad;

namespace {

double fd(const std::function<double(double)>& f, double x, double h = 1e-6) {
    return (f(x + h) - f(x - h)) / (2 * h);
}

double rel(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// UME-only rates for target N(0,1), model N(m,1), witness v, written out by hand.
Rates1G ume_only_rates(double m, double v, double sigma_sq) {
    const double s = sigma_sq + 1.0;
    const double c = std::sqrt(sigma_sq / s);
    const double a = std::exp(-v * v / (2 * s));
    const double b = std::exp(-(v - m) * (v - m) / (2 * s));
    const double D = c * (a - b);
    return {2 * D * c * b * (v - m) / s, 2 * D * c * (b * (v - m) - a * v) / s};
}

}  // namespace

TEST_CASE("gauss integral values") {
    CHECK(std::abs(gauss_integral(0, 2, 0, 2) - 0.707107) < 1e-6);
    for (double b : {0.3, 1.0, 4.0})
        for (double d : {0.5, 2.0}) CHECK(std::abs(gauss_integral(1.3, b, 1.3, d) - std::sqrt(b * d / (2 * (b + d)))) < 1e-15);
    CHECK(std::abs(gauss_integral(0, 1, 1, 1) - 0.303265) < 1e-6);
    CHECK(std::abs(gauss_integral(0, 2, 0, 2) - verify::quad_gauss_integral(0, 2, 0, 2)) < 1e-10);
}

TEST_CASE("mean embedding values") {
    for (double sp : {0.5, 1.0, 3.0})
        CHECK(std::abs(mean_embedding_gauss(0.4, 0.4, sp, 1.5) - std::sqrt(1.5 / (1.5 + sp))) < 1e-15);
    CHECK(std::abs(mean_embedding_gauss(0, 0, 1, 1) - 0.707107) < 1e-6);
    CHECK(std::abs(mean_embedding_gauss(2, 0, 1, 1) - 0.260130) < 1e-6);

    const auto single = GaussianMixture::mixture_1d({1.0}, {0.7}, {1.3});
    CHECK(std::abs(mean_embedding_mixture(0.2, single, 2.0) - mean_embedding_gauss(0.2, 0.7, 1.3, 2.0)) < 1e-15);
    const auto twin = GaussianMixture::mixture_1d({0.5, 0.5}, {0.7, 0.7}, {1.3, 1.3});
    CHECK(std::abs(mean_embedding_mixture(0.2, twin, 2.0) - mean_embedding_gauss(0.2, 0.7, 1.3, 2.0)) < 1e-15);
    const auto sym = GaussianMixture::mixture_1d({0.5, 0.5}, {-1, 1}, {1, 1});
    CHECK(std::abs(mean_embedding_mixture(0, sym, 1.0) - std::sqrt(0.5) * std::exp(-0.25)) < 1e-15);
    CHECK(std::abs(mean_embedding_mixture(0, sym, 1.0) - verify::quad_mean_embedding(0, sym, 1.0)) < 1e-10);
}

TEST_CASE("two-gaussian UME") {
    for (double v : {-2.0, 0.0, 1.5}) CHECK(ume2_two_gaussians(v, 0.3, 1.2, 0.3, 1.2, 1.0) == 0.0);
    const double expect = std::pow(0.707107 - 0.707107 * std::exp(-0.25), 2);
    CHECK(std::abs(ume2_two_gaussians(0, 0, 1, 1, 1, 1) - expect) < 1e-6);
    for (double v : {-1.0, 0.2, 2.5}) {
        const double d = mean_embedding_gauss(v, 0.1, 0.8, 1.7) - mean_embedding_gauss(v, -0.6, 1.4, 1.7);
        CHECK(std::abs(ume2_two_gaussians(v, 0.1, 0.8, -0.6, 1.4, 1.7) - d * d) < 1e-14);
    }
}

TEST_CASE("spiky discrepancies") {
    for (double sq : {0.01, 0.25, 4.0}) CHECK(std::abs(mmd2_spiky({1.0, sq, 1.0})) < 1e-15);
    for (double w : {0.0, 0.3, 0.9}) {
        CHECK(std::abs(mmd2_spiky({w, 1.0, 1.0})) < 1e-15);
        CHECK(std::abs(ume2_spiky({w, 1.0, 1.0}, 0.5)) < 1e-15);
    }
    for (double w : {0.0, 0.3, 0.6, 0.9})
        for (double sq : {0.01, 0.25, 1.0, 4.0})
            for (double s2 : {0.5, 2.0}) {
                CHECK(mmd2_spiky({w, sq, s2}) >= 0.0);
                for (double v : {0.0, 1.0}) CHECK(ume2_spiky({w, sq, s2}, v) >= 0.0);
                CHECK(ume2_two_gaussians(0.5, w, sq, 1.0 - w, 1.0, s2) >= 0.0);
            }
}

TEST_CASE("spiky MMD against a large-sample estimate") {
    const SpikySpec s{0.9, 0.01, 1.0};
    const auto P = GaussianMixture::mixture_1d({0.9, 0.1}, {0, 0}, {1.0, 0.01});
    const auto Q = GaussianMixture::mixture_1d({1.0}, {0}, {1.0});
    Rng rng(2024);
    const Kernel k = Kernel::gaussian(1.0);
    const int batches = 10, n = 100000;
    std::vector<double> est;
    Eigen::MatrixXd X(batches * n, 1), Y(batches * n, 1);
    for (int b = 0; b < batches; ++b) {
        const Eigen::MatrixXd x = sample(P, n, rng).points, y = sample(Q, n, rng).points;
        X.middleRows(b * n, n) = x;
        Y.middleRows(b * n, n) = y;
        est.push_back(mmd2_biased(x, y, k));
    }
    double mean = 0, var = 0;
    for (double e : est) mean += e / batches;
    for (double e : est) var += (e - mean) * (e - mean) / (batches - 1);
    const double se_full = std::sqrt(var) / std::sqrt(double(batches));
    const double full = mmd2_biased(X, Y, k);
    CHECK(mmd2_spiky(s) > 0);
    CHECK(std::abs(full - mmd2_spiky(s)) < 3 * se_full);
}

TEST_CASE("spiky sensitivities") {
    for (double w : {0.0, 0.4, 0.8})
        for (double v : {0.0, 0.7}) CHECK(std::abs(sens_ume({w, 1.0, 1.3}, v)) < 1e-15);
    const SpikySpec s{0.5, 0.3, 1.0};
    CHECK(sens_mmd(s) == sens_mmd(SpikySpec{s}));
    for (double w : {0.1, 0.5, 0.8})
        for (double sq : {0.05, 0.4, 2.5})
            for (double s2 : {0.5, 2.0}) {
                const SpikySpec base{w, sq, s2};
                auto f_mmd = [&](double sig) { return mmd2_spiky({w, sig * sig, s2}); };
                CHECK(rel(sens_mmd(base), fd(f_mmd, std::sqrt(sq))) < 1e-4);
                for (double v : {0.0, 0.8, 2.0}) {
                    auto f_ume = [&](double sig) { return ume2_spiky({w, sig * sig, s2}, v); };
                    CHECK(rel(sens_ume(base, v), fd(f_ume, std::sqrt(sq))) < 1e-4);
                }
            }
}

TEST_CASE("UME gradient in the model mean") {
    CHECK(std::abs(ume_grad_mq(1, 1, 1, 0.5)) < 1e-12);
    CHECK(ume_grad_mq(1, 0, 1, 0.5) > 0);
    CHECK(ume_grad_mq(1, 2, 1, 0.5) < 0);
    auto ume = [](double mq) {
        const auto P = GaussianMixture::mixture_1d({0.5, 0.5}, {1, 0}, {1, 1});
        const auto Q = GaussianMixture::mixture_1d({0.5, 0.5}, {mq, 0}, {1, 1});
        const double d = mean_embedding_mixture(1.0, P, 1.0) - mean_embedding_mixture(1.0, Q, 1.0);
        return d * d;
    };
    CHECK(rel(ume_grad_mq(1, 2, 1, 0.5), -fd(ume, 2.0)) < 1e-6);
    for (double d : {0.1, 0.5, 1.3, 2.7})
        for (double s2 : {1.0, 4.0}) CHECK(std::abs(ume_grad_mq(1, 1 + d, s2, 0.5) + ume_grad_mq(1, 1 - d, s2, 0.5)) < 1e-10);
}

TEST_CASE("single-gaussian dynamics") {
    for (double v : {-2.0, 0.0, 0.7, 3.0})
        for (double lam : {0.0, 5.0}) {
            const auto r = dyn_single_gaussian({0.0, v, lam, false, 1.3});
            CHECK(r.dm_q == 0.0);
            CHECK(r.dv == 0.0);
        }
    // witness on the model mean: the UME pull on m_q vanishes, MMD still acts
    const auto u = dyn_single_gaussian({0.8, 0.8, 0.0, true, 1.0});
    CHECK(std::abs(u.dm_q) < 1e-15);
    const auto with = dyn_single_gaussian({0.8, 0.8, 5.0, false, 1.0});
    const auto without = dyn_single_gaussian({0.8, 0.8, 0.0, false, 1.0});
    CHECK(std::abs(with.dm_q - without.dm_q) < 1e-15);
    CHECK(without.dm_q < 0);

    auto mmd = [](double m) {
        return verify::quad_mmd2(GaussianMixture::mixture_1d({1.0}, {0}, {1}), GaussianMixture::mixture_1d({1.0}, {m}, {1}), 1.0);
    };
    CHECK(std::abs(dyn_single_gaussian({1.0, 0.3, 0.0, false, 1.0}).dm_q + fd(mmd, 1.0, 1e-4)) < 1e-6);
    CHECK(std::abs(mmd2_single_gaussian(1.0, 1.0) - mmd(1.0)) < 1e-10);

    for (double m : {-1.5, -0.2, 0.6, 2.0})
        for (double v : {-1.0, 0.3, 1.7})
            for (double s2 : {0.5, 2.0}) {
                const auto got = dyn_single_gaussian({m, v, 0.0, true, s2});
                const auto want = ume_only_rates(m, v, s2);
                CHECK(std::abs(got.dm_q - want.dm_q) < 1e-12);
                CHECK(std::abs(got.dv - want.dv) < 1e-12);
            }
}

TEST_CASE("two-mean dynamics") {
    const auto target = default_mog1d_target();
    for (double v : {-1.0, 0.0, 2.5}) {
        const auto r = dyn_mog1d(-2, 2, v, {5.0, false, 2.0}, target);
        for (double x : r) CHECK(std::abs(x) < 1e-8);
    }
    // without the UME weight the means follow the plain MMD flow, whatever v is
    const MoG1dParams plain{0.0, false, 2.0};
    auto mmd = [&](double m1, double m2) {
        return mmd2_mixtures(target, GaussianMixture::mixture_1d({0.5, 0.5}, {m1, m2}, {1, 1}), 2.0);
    };
    for (double v : {-0.5, 1.2}) {
        const auto r = dyn_mog1d(-0.7, 1.1, v, plain, target);
        CHECK(rel(r[0], -fd([&](double a) { return mmd(a, 1.1); }, -0.7, 1e-5)) < 1e-6);
        CHECK(rel(r[1], -fd([&](double b) { return mmd(-0.7, b); }, 1.1, 1e-5)) < 1e-6);
    }
    const auto a = dyn_mog1d(-0.6, 0.6, 0.0, {5.0, false, 2.0}, target);
    CHECK(std::abs(a[0] + a[1]) < 1e-8);
}

TEST_CASE("mixture MMD matches quadrature") {
    const auto p = default_mog1d_target();
    const auto q = GaussianMixture::mixture_1d({0.3, 0.7}, {-0.5, 1.0}, {0.6, 1.5});
    CHECK(std::abs(mmd2_mixtures(p, q, 2.0) - verify::quad_mmd2(p, q, 2.0)) < 1e-8);
    CHECK(std::abs(mmd2_mixtures(p, p, 1.0)) < 1e-14);
}

TEST_CASE("analytic input validation") {
    CHECK_THROWS_AS(mean_embedding_gauss(0, 0, -1, 1), InputError);
    CHECK_THROWS_AS(mmd2_spiky({1.5, 0.2, 1.0}), InputError);
    CHECK_THROWS_AS(dyn_single_gaussian({0, 0, -1, false, 1}), InputError);
}
