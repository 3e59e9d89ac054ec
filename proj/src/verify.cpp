#include "glocad/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <json.hpp>

#include "glocad/analytic.hpp"
#include "glocad/errors.hpp"
#include "glocad/estimators.hpp"
#include "glocad/glocad.hpp"
#include "glocad/kernel.hpp"
#include "glocad/nn.hpp"
#include "glocad/odesim.hpp"

namespace glocad::verify {

namespace {

using boost::math::quadrature::gauss_kronrod;

constexpr double kQuadTol = 1e-12;
constexpr unsigned kQuadDepth = 3;

template <typename F>
double integrate(F&& f, double lo, double hi) {
    return gauss_kronrod<double, 61>::integrate(f, lo, hi, kQuadDepth, kQuadTol);
}

// Integral of f against the density of m, component by component over +-12 sd.
template <typename F>
double integrate_against(const GaussianMixture& m, F&& f) {
    detail::require(m.dim() == 1, "quadrature oracles are 1D only");
    double total = 0;
    for (int j = 0; j < m.components(); ++j) {
        if (m.weights(j) == 0.0) continue;
        const double mu = m.means(j, 0);
        const double var = m.variances(j);
        const double sd = std::sqrt(var);
        auto g = [&](double x) {
            return std::exp(-(x - mu) * (x - mu) / (2 * var)) / std::sqrt(2 * std::numbers::pi * var) * f(x);
        };
        double part = 0;
        for (int s = -4; s < 4; ++s) part += integrate(g, mu + 3 * s * sd, mu + 3 * (s + 1) * sd);
        total += m.weights(j) * part;
    }
    return total;
}

double gauss_kernel(double x, double y, double sigma_sq) { return std::exp(-(x - y) * (x - y) / (2 * sigma_sq)); }

CheckResult finish(CheckResult r) {
    r.passed = r.value <= r.tolerance && std::isfinite(r.value);
    return r;
}

}  // namespace

double quad_gauss_integral(double a, double b, double c, double d) {
    detail::require(b > 0 && d > 0, "quad_gauss_integral: b and d must be positive");
    auto f = [&](double x) {
        return std::exp(-(x - a) * (x - a) / b - (x - c) * (x - c) / d) / std::sqrt(2 * std::numbers::pi);
    };
    const double center = (a * d + c * b) / (b + d);
    const double sd = std::sqrt(b * d / (2 * (b + d)));
    double total = 0;
    for (int s = -4; s < 4; ++s) total += integrate(f, center + 3 * s * sd, center + 3 * (s + 1) * sd);
    return total;
}

double quad_mean_embedding(double v, const GaussianMixture& p, double sigma_sq) {
    return integrate_against(p, [&](double x) { return gauss_kernel(x, v, sigma_sq); });
}

double quad_mmd2(const GaussianMixture& p, const GaussianMixture& q, double sigma_sq) {
    auto h = [&](double x) { return quad_mean_embedding(x, p, sigma_sq) - quad_mean_embedding(x, q, sigma_sq); };
    return integrate_against(p, h) - integrate_against(q, h);
}

double quad_ume2(double v, const GaussianMixture& p, const GaussianMixture& q, double sigma_sq) {
    const double d = quad_mean_embedding(v, p, sigma_sq) - quad_mean_embedding(v, q, sigma_sq);
    return d * d;
}

double central_difference(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2 * h);
}

double relative_error(double a, double b, double floor) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

double bootstrap_se(Eigen::Index n, Eigen::Index m,
                    const std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>& stat,
                    int replicates, Rng& rng) {
    detail::require(replicates >= 2, "bootstrap_se: need at least two replicates");
    std::uniform_int_distribution<Eigen::Index> pick_x(0, n - 1), pick_y(0, m - 1);
    Eigen::VectorXd vals(replicates);
    for (int r = 0; r < replicates; ++r) {
        Eigen::VectorXd wx = Eigen::VectorXd::Zero(n), wy = Eigen::VectorXd::Zero(m);
        for (Eigen::Index i = 0; i < n; ++i) wx(pick_x(rng)) += 1;
        for (Eigen::Index i = 0; i < m; ++i) wy(pick_y(rng)) += 1;
        vals(r) = stat(wx, wy);
    }
    const double mean = vals.mean();
    return std::sqrt((vals.array() - mean).square().sum() / (replicates - 1));
}

CheckResult check_closed_forms() {
    CheckResult r{"closed_form_oracles", false, 0, 1e-8, ""};
    double worst = 0;
    int points = 0;
    auto track = [&](double closed, double oracle) {
        worst = std::max(worst, std::abs(closed - oracle));
        ++points;
    };
    for (int i = 0; i < 24; ++i) {
        const double a = -2 + 0.17 * i, b = 0.3 + 0.2 * (i % 5), c = 1 - 0.11 * i, d = 0.5 + 0.3 * (i % 4);
        track(gauss_integral(a, b, c, d), quad_gauss_integral(a, b, c, d));
    }
    for (int i = 0; i < 24; ++i) {
        const double v = -3 + 0.25 * i, mp = 0.4 * (i % 3) - 0.4, sp = 0.2 + 0.35 * (i % 4), s2 = 0.5 + 0.5 * (i % 3);
        track(mean_embedding_gauss(v, mp, sp, s2), quad_mean_embedding(v, GaussianMixture::mixture_1d({1}, {mp}, {sp}), s2));
    }
    const auto mix = GaussianMixture::mixture_1d({0.2, 0.5, 0.3}, {-1.5, 0.2, 2.0}, {0.3, 1.0, 0.05});
    for (int i = 0; i < 24; ++i) {
        const double v = -3 + 0.26 * i, s2 = i % 2 ? 0.5 : 2.0;
        track(mean_embedding_mixture(v, mix, s2), quad_mean_embedding(v, mix, s2));
    }
    for (int i = 0; i < 24; ++i) {
        const double v = -2 + 0.2 * i, mp = 0.3 * (i % 4) - 0.5, sp = 0.4 + 0.3 * (i % 3);
        const double mq = 1 - 0.15 * (i % 5), sq = 0.2 + 0.5 * (i % 2), s2 = 0.5 + 0.75 * (i % 3);
        track(ume2_two_gaussians(v, mp, sp, mq, sq, s2),
              quad_ume2(v, GaussianMixture::mixture_1d({1}, {mp}, {sp}), GaussianMixture::mixture_1d({1}, {mq}, {sq}), s2));
    }
    const auto Q = GaussianMixture::mixture_1d({1}, {0}, {1});
    for (double w : {0.0, 0.3, 0.6, 0.9}) {
        for (double sq : {0.01, 0.25, 1.0, 4.0}) {
            for (double s2 : {0.5, 2.0}) {
                const SpikySpec s{w, sq, s2};
                const auto P = GaussianMixture::mixture_1d({w, 1 - w}, {0, 0}, {1, sq});
                track(mmd2_spiky(s), quad_mmd2(P, Q, s2));
                const double v = 0.15 + 0.4 * sq;
                track(ume2_spiky(s, v), quad_ume2(v, P, Q, s2));
            }
        }
    }
    for (int i = 0; i < 20; ++i) {
        const double m = -2 + 0.21 * i, s2 = 0.5 + 0.5 * (i % 4);
        track(mmd2_single_gaussian(m, s2), quad_mmd2(Q, GaussianMixture::mixture_1d({1}, {m}, {1}), s2));
    }
    for (int i = 0; i < 20; ++i) {
        const double m1 = -2 + 0.2 * i, m2 = 1.5 - 0.13 * i;
        const auto model = GaussianMixture::mixture_1d({0.5, 0.5}, {m1, m2}, {1, 1});
        track(mmd2_mixtures(default_mog1d_target(), model, 2.0), quad_mmd2(default_mog1d_target(), model, 2.0));
    }
    r.value = worst;
    std::ostringstream os;
    os << points << " grid points, max abs error " << worst;
    r.detail = os.str();
    return finish(r);
}

CheckResult check_derivatives(const BatteryOptions& opt) {
    CheckResult r{"derivatives_vs_finite_differences", false, 0, 1.0, ""};
    Rng rng = stream_rng(opt.seed, 1001);
    std::uniform_real_distribution<double> U(0, 1);
    auto uni = [&](double a, double b) { return a + (b - a) * U(rng); };
    constexpr int kInstances = 100;
    constexpr double kFloor = 1e-5;

    double sens = 0, ume_grad = 0, kern = 0, wit = 0, mmdg = 0, nn = 0;
    for (int t = 0; t < kInstances; ++t) {
        const SpikySpec s{uni(0, 0.95), uni(0.05, 3), uni(0.3, 3)};
        const double sq = std::sqrt(s.sigma_q_sq);
        const double v = uni(-2, 2);
        const double fd_mmd = central_difference([&](double x) { return mmd2_spiky({s.w, x * x, s.sigma_sq}); }, sq);
        const double fd_ume = central_difference([&](double x) { return ume2_spiky({s.w, x * x, s.sigma_sq}, v); }, sq);
        sens = std::max({sens, relative_error(sens_mmd(s), fd_mmd, kFloor), relative_error(sens_ume(s, v), fd_ume, kFloor)});
    }
    for (int t = 0; t < kInstances; ++t) {
        const double mp = uni(-2, 2), mq = uni(-3, 3), s2 = uni(0.3, 4), om = uni(0.1, 1);
        auto ume2 = [&](double m) {
            const auto P = GaussianMixture::mixture_1d({om, 1 - om}, {mp, 0}, {1, 1});
            const auto Q = GaussianMixture::mixture_1d({om, 1 - om}, {m, 0}, {1, 1});
            const double d = mean_embedding_mixture(mp, P, s2) - mean_embedding_mixture(mp, Q, s2);
            return d * d;
        };
        ume_grad = std::max(ume_grad, relative_error(ume_grad_mq(mp, mq, s2, om), -central_difference(ume2, mq), kFloor));
    }
    for (int t = 0; t < kInstances; ++t) {
        const int d = 1 + t % 3;
        const Kernel k = t % 2 ? Kernel::gaussian(uni(0.2, 3)) : Kernel::imq(uni(0.5, 2), uni(-1.5, -0.2));
        Eigen::VectorXd x(d), y(d);
        for (int c = 0; c < d; ++c) {
            x(c) = uni(-2, 2);
            y(c) = uni(-2, 2);
        }
        const Eigen::VectorXd g = kernel_grad_x(k, x, y);
        for (int c = 0; c < d; ++c) {
            const double fd = central_difference(
                [&](double h) {
                    Eigen::VectorXd xx = x;
                    xx(c) = h;
                    return kernel_eval(k, xx, y);
                },
                x(c));
            kern = std::max(kern, relative_error(g(c), fd, kFloor));
        }
        if (k.family == KernelFamily::gaussian) {
            const double fd = central_difference(
                [&](double s2) { return kernel_eval(Kernel::gaussian(s2), x, y); }, k.bandwidth_sq);
            kern = std::max(kern, relative_error(kernel_grad_bandwidth(k, x, y), fd, kFloor));
        }
    }
    for (int t = 0; t < kInstances; ++t) {
        const Kernel k = Kernel::gaussian(uni(0.3, 2));
        Eigen::MatrixXd X(5, 2), Y(4, 2), V(3, 2);
        for (auto* M : {&X, &Y, &V})
            for (Eigen::Index i = 0; i < M->size(); ++i) M->data()[i] = uni(-1.5, 1.5);
        const Eigen::MatrixXd G = grad_ume2_wrt_witness(X, Y, V, k);
        const auto mg = mmd2_with_grad(t % 2 ? MmdVariant::biased : MmdVariant::unbiased, X, Y, k);
        for (Eigen::Index i = 0; i < V.size(); ++i) {
            const double fd = central_difference(
                [&](double h) {
                    Eigen::MatrixXd VV = V;
                    VV.data()[i] = h;
                    return ume2_hat(X, Y, VV, k);
                },
                V.data()[i]);
            wit = std::max(wit, relative_error(G.data()[i], fd, kFloor));
        }
        for (Eigen::Index i = 0; i < Y.size(); ++i) {
            const double fd = central_difference(
                [&](double h) {
                    Eigen::MatrixXd YY = Y;
                    YY.data()[i] = h;
                    return t % 2 ? mmd2_biased(X, YY, k) : mmd2_unbiased(X, YY, k);
                },
                Y.data()[i]);
            mmdg = std::max(mmdg, relative_error(mg.dY.data()[i], fd, kFloor));
        }
    }
    for (int t = 0; t < kInstances; ++t) {
        Rng net_rng = stream_rng(opt.seed + static_cast<std::uint64_t>(t), 1002);
        const Mlp net = Mlp::glorot({3, 6, 5, 2}, {Activation::tanh, Activation::tanh, Activation::identity}, net_rng);
        Eigen::MatrixXd Z(7, 3), T(7, 2);
        for (Eigen::Index i = 0; i < Z.size(); ++i) Z.data()[i] = uni(-1, 1);
        for (Eigen::Index i = 0; i < T.size(); ++i) T.data()[i] = uni(-1, 1);
        nn = std::max(nn, grad_check(net, [&](const Mlp& p) {
            const auto c = p.forward(Z);
            const Eigen::MatrixXd res = c.result() - T;
            return LossAndGrad{0.5 * res.squaredNorm(), p.backward(c, res)};
        }));
    }
    // The sensitivity pair is held to 1e-4, everything else to 1e-5.
    const double scaled = std::max({sens / 1e-4, ume_grad / 1e-5, kern / 1e-5, wit / 1e-5, mmdg / 1e-5, nn / 1e-5});
    r.value = scaled;
    std::ostringstream os;
    os << "max relative errors: sens " << sens << ", ume_grad_mq " << ume_grad << ", kernel " << kern << ", witness "
       << wit << ", mmd " << mmdg << ", nn " << nn << " (" << kInstances << " instances each)";
    r.detail = os.str();
    r.passed = scaled < 1.0;
    return r;
}

CheckResult check_estimator_consistency(const BatteryOptions& opt) {
    CheckResult r{"estimator_consistency", false, 0, 3.0, ""};
    const Eigen::Index n = opt.fast ? 10000 : 100000;
    const int replicates = opt.fast ? 50 : 200;
    const double s2 = 1.0;
    const Kernel k = Kernel::gaussian(s2);
    const double pop_mmd = mmd2_single_gaussian(1.0, s2);
    double worst = 0;
    std::ostringstream os;
    for (int seed = 0; seed < 5; ++seed) {
        Rng rng = stream_rng(opt.seed + static_cast<std::uint64_t>(seed), 1003);
        const Eigen::MatrixXd X = sample(GaussianMixture::mixture_1d({1}, {0}, {1}), static_cast<int>(n), rng).points;
        const Eigen::MatrixXd Y = sample(GaussianMixture::mixture_1d({1}, {1}, {1}), static_cast<int>(n), rng).points;

        const double est_mmd = mmd2_biased(X, Y, k);
        Eigen::MatrixXd both(2 * n, 1);
        both << X, Y;
        const auto fmap = GaussianTaylorFeatures1d<double>::fit(k, both);
        const Eigen::MatrixXd Fx = fmap.features(X.col(0));
        const Eigen::MatrixXd Fy = fmap.features(Y.col(0));
        const double se_mmd = bootstrap_se(
            n, n,
            [&](const Eigen::VectorXd& wx, const Eigen::VectorXd& wy) {
                return (Fx.transpose() * wx / double(n) - Fy.transpose() * wy / double(n)).squaredNorm();
            },
            replicates, rng);
        const double z_mmd = std::abs(est_mmd - pop_mmd) / se_mmd;
        worst = std::max(worst, z_mmd);
        os << "seed " << seed << ": mmd z=" << z_mmd;

        for (double v : {0.5, 0.0}) {
            Eigen::MatrixXd V(1, 1);
            V(0, 0) = v;
            const double est = ume2_hat(X, Y, V, k);
            const double pop = ume2_two_gaussians(v, 0, 1, 1, 1, s2);
            Eigen::VectorXd kx(n), ky(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                kx(i) = std::exp(-(X(i, 0) - v) * (X(i, 0) - v) / (2 * s2));
                ky(i) = std::exp(-(Y(i, 0) - v) * (Y(i, 0) - v) / (2 * s2));
            }
            const double se = bootstrap_se(
                n, n,
                [&](const Eigen::VectorXd& wx, const Eigen::VectorXd& wy) {
                    const double d = wx.dot(kx) / double(n) - wy.dot(ky) / double(n);
                    return d * d;
                },
                replicates, rng);
            const double z = std::abs(est - pop) / se;
            worst = std::max(worst, z);
            os << ", ume(v=" << v << ") z=" << z;
        }
        os << "; ";
    }
    r.value = worst;
    r.detail = os.str() + "n = m = " + std::to_string(n);
    r.passed = worst <= r.tolerance;
    return r;
}

CheckResult check_single_gaussian_dynamics() {
    CheckResult r{"single_gaussian_dynamics", false, 0, 1e-3, ""};
    double worst_m = 0, worst_eq = 0;
    struct Mode {
        double lambda;
        bool ume_only;
    };
    for (const Mode mode : {Mode{0, false}, Mode{5, false}, Mode{0, true}}) {
        for (double s2 : {0.5, 2.0}) {
            for (double v0 : {0.4, 2.0}) {
                VectorField f = [&](const Eigen::VectorXd& x) {
                    const auto rates = dyn_single_gaussian({x(0), x(1), mode.lambda, mode.ume_only, s2});
                    return Eigen::Vector2d(rates.dm_q, rates.dv).eval();
                };
                const auto traj = rk4_integrate(f, Eigen::Vector2d(-1.0, v0), 1e-2, 200.0);
                worst_m = std::max(worst_m, std::abs(traj.final_state()(0)));
            }
            for (int i = 0; i < 20; ++i) {
                const double v = -3 + 6.0 * i / 19;
                const auto rates = dyn_single_gaussian({0.0, v, mode.lambda, mode.ume_only, s2});
                worst_eq = std::max(worst_eq, std::hypot(rates.dm_q, rates.dv));
            }
        }
    }
    r.value = worst_m;
    std::ostringstream os;
    os << "max |m_q(200)| " << worst_m << " from m_q(0) = -1; max field norm on m_q = 0: " << worst_eq;
    r.detail = os.str();
    r.passed = worst_m < 1e-3 && worst_eq < 1e-12;
    return r;
}

CheckResult check_stability() {
    CheckResult r{"proposition1_stability", false, 0, 1e-6, ""};
    Rng rng = stream_rng(7, 1004);
    std::normal_distribution<double> N(0, 1);
    Eigen::MatrixXd base(40, 2);
    for (Eigen::Index i = 0; i < base.size(); ++i) base.data()[i] = N(rng);
    const Eigen::Vector2d theta_star(0.5, -0.3);
    const int J = 3;
    const auto field = location_family_field(base, theta_star, J, Kernel::gaussian(1.0), 0.1);
    Eigen::VectorXd x(2 + 2 * J);
    x.head(2) = theta_star;
    for (int i = 2; i < x.size(); ++i) x(i) = N(rng);
    const auto rep = stability_check(field, x, {0, 1});
    r.value = rep.max_gg_eig;
    std::ostringstream os;
    os << "max sym J_GG eigenvalue " << rep.max_gg_eig << ", equilibrium residual " << rep.equilibrium_residual;
    r.detail = os.str();
    r.passed = rep.max_gg_eig <= 1e-6 && rep.equilibrium_residual <= 1e-8;
    return r;
}

CheckResult check_ume_gradient_curve() {
    CheckResult r{"ume_gradient_curve", false, 0, 1e-12, ""};
    const double mp = 1.0, om = 0.5;
    const double at_mp = std::abs(ume_grad_mq(mp, 1.0, 1.0, om));
    bool signs = true;
    double peak1 = 0, peak4 = 0;
    for (int i = 1; i < 400; ++i) {
        const double mq = 2.0 * i / 400;
        if (i == 200) continue;
        for (double s2 : {1.0, 4.0}) {
            const double g = ume_grad_mq(mp, mq, s2, om);
            if (mq < 1 && !(g > 0)) signs = false;
            if (mq > 1 && !(g < 0)) signs = false;
        }
        peak1 = std::max(peak1, std::abs(ume_grad_mq(mp, mq, 1.0, om)));
        peak4 = std::max(peak4, std::abs(ume_grad_mq(mp, mq, 4.0, om)));
    }
    r.value = at_mp;
    std::ostringstream os;
    os << "|g(m_q = m_p)| = " << at_mp << ", signs " << (signs ? "ok" : "wrong") << ", peak on [0,2]: sigma^2=1 "
       << peak1 << ", sigma^2=4 " << peak4;
    r.detail = os.str();
    r.passed = at_mp < 1e-12 && signs && peak4 < peak1;
    return r;
}

CheckResult check_lambda_zero_reduction(const BatteryOptions& opt) {
    CheckResult r{"lambda_zero_reduction", false, 0, 0, ""};
    const auto target = mixture_sampler(build_ring_mogmm());
    TrainConfig cfg;
    cfg.lambda = 0;
    cfg.seed = opt.seed;
    cfg.dataset_size = cfg.B * 100;
    cfg.max_epochs = 1;
    Rng init = stream_rng(cfg.seed, kStreamInit);
    const MlpGenerator start = MlpGenerator::make_default(init);
    const WitnessSet V0 = init_witnesses(target, start, cfg, init);

    std::vector<Eigen::VectorXd> a, b;
    auto recorder = [](std::vector<Eigen::VectorXd>& out) {
        TrainHooks h;
        h.on_iteration = [&out](long, const Generator& g, const WitnessSet&, const Kernel&) {
            out.push_back(g.params());
            return false;
        };
        return h;
    };
    MlpGenerator ga = start, gb = start;
    WitnessSet V = V0;
    Kernel ka = Kernel::gaussian(1.0), kb = Kernel::gaussian(1.0);
    glocad_train(target, ga, V, ka, cfg, recorder(a));
    train_mmd_only(target, gb, kb, cfg, recorder(b));
    long mismatches = 0;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
        if (std::memcmp(a[i].data(), b[i].data(), sizeof(double) * static_cast<std::size_t>(a[i].size())) != 0)
            ++mismatches;
    r.value = static_cast<double>(mismatches);
    r.detail = std::to_string(a.size()) + " iterations compared, " + std::to_string(mismatches) + " differ";
    r.passed = a.size() == 100 && b.size() == 100 && mismatches == 0;
    return r;
}

std::vector<CheckResult> run_oracle_battery(const BatteryOptions& opt) {
    std::vector<CheckResult> out;
    out.push_back(check_closed_forms());
    out.push_back(check_derivatives(opt));
    out.push_back(check_estimator_consistency(opt));
    out.push_back(check_single_gaussian_dynamics());
    out.push_back(check_stability());
    out.push_back(check_ume_gradient_curve());
    out.push_back(check_lambda_zero_reduction(opt));
    return out;
}

std::string report_json(const std::vector<CheckResult>& results) {
    nlohmann::json j;
    j["checks"] = nlohmann::json::array();
    bool all = true;
    for (const auto& c : results) {
        j["checks"].push_back(
            {{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"tolerance", c.tolerance}, {"detail", c.detail}});
        all = all && c.passed;
    }
    j["all_passed"] = all;
    return j.dump(2);
}

}  // namespace glocad::verify
