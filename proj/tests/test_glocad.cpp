#include "doctest.h"

#include <cstring>
#include <limits>

#include "glocad/experiments.hpp"
#include "glocad/glocad.hpp"

using namespace glocad;

namespace {

// Ignores the noise: always emits base + theta, so every minibatch is the full batch.
class FixedLocation final : public Generator {
public:
    FixedLocation(Eigen::MatrixXd base, Eigen::VectorXd theta) : base_(std::move(base)), theta_(std::move(theta)) {}
    int noise_dim() const override { return static_cast<int>(theta_.size()); }
    int output_dim() const override { return static_cast<int>(theta_.size()); }
    const Eigen::VectorXd& params() const override { return theta_; }
    void set_params(const Eigen::VectorXd& p) override { theta_ = p; }
    Eigen::MatrixXd generate(const Eigen::MatrixXd&) const override {
        Eigen::MatrixXd Y = base_;
        Y.rowwise() += theta_.transpose();
        return Y;
    }
    Eigen::VectorXd vjp(const Eigen::MatrixXd&, const Eigen::MatrixXd& dY) const override {
        return dY.colwise().sum().transpose();
    }
    std::unique_ptr<Generator> clone() const override { return std::make_unique<FixedLocation>(*this); }

private:
    Eigen::MatrixXd base_;
    Eigen::VectorXd theta_;
};

Sampler fixed_sampler(Eigen::MatrixXd X) {
    return [X = std::move(X)](int, Rng&) { return X; };
}

Eigen::MatrixXd randn(Eigen::Index n, Eigen::Index d, Rng& rng) {
    std::normal_distribution<double> N;
    Eigen::MatrixXd m(n, d);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = N(rng);
    return m;
}

TrainConfig small_config(std::uint64_t seed) {
    TrainConfig c;
    c.seed = seed;
    c.J = 5;
    c.B = 16;
    c.dataset_size = 16 * 100;
    c.max_epochs = 1;
    c.gamma = 1e-2;
    return c;
}

GaussianMixture two_blobs() {
    Eigen::MatrixXd m(2, 2);
    m << -1, 0, 1, 0;
    return GaussianMixture(Eigen::Vector2d(0.5, 0.5), m, Eigen::Vector2d(0.01, 0.01));
}

MlpGenerator small_generator(std::uint64_t seed) {
    Rng r = stream_rng(seed, kStreamInit);
    return MlpGenerator::make_default(r, {4, 16, 2});
}

}  // namespace

TEST_CASE("zero lambda reproduces the MMD-only run bit for bit") {
    const Sampler target = mixture_sampler(two_blobs());
    TrainConfig cfg = small_config(3);
    cfg.lambda = 0.0;
    std::vector<Eigen::VectorXd> a, b;
    TrainHooks ha, hb;
    ha.on_iteration = [&](long, const Generator& g, const WitnessSet&, const Kernel&) { a.push_back(g.params()); return false; };
    hb.on_iteration = [&](long, const Generator& g, const WitnessSet&, const Kernel&) { b.push_back(g.params()); return false; };

    MlpGenerator g1 = small_generator(3), g2 = small_generator(3);
    Rng r = stream_rng(3, kStreamInit);
    WitnessSet V = init_witnesses(target, g1, cfg, r);
    Kernel k1 = Kernel::gaussian(1.0), k2 = Kernel::gaussian(1.0);
    glocad_train(target, g1, V, k1, cfg, ha);
    train_mmd_only(target, g2, k2, cfg, hb);
    REQUIRE(a.size() == 100);
    REQUIRE(b.size() == 100);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(std::memcmp(a[i].data(), b[i].data(), sizeof(double) * static_cast<std::size_t>(a[i].size())) == 0);
}

TEST_CASE("one outer iteration replays by hand") {
    const Sampler target = mixture_sampler(two_blobs());
    TrainConfig cfg = small_config(5);
    cfg.lambda = 0.7;
    MlpGenerator gen = small_generator(5);
    const MlpGenerator gen0 = gen;
    Rng r = stream_rng(5, kStreamInit);
    WitnessSet V = init_witnesses(target, gen, cfg, r);
    const Eigen::MatrixXd V0 = V.points;
    Kernel k = Kernel::gaussian(0.8);
    TrainHooks once;
    once.on_iteration = [](long, const Generator&, const WitnessSet&, const Kernel&) { return true; };
    const TrainLog log = glocad_train(target, gen, V, k, cfg, once);

    Rng wr = stream_rng(5, kStreamWitness);
    const Eigen::MatrixXd Xw = target(cfg.B, wr);
    const Eigen::MatrixXd Yw = gen0.generate(gen0.sample_noise(cfg.B, wr));
    const Eigen::MatrixXd V1 = V0 + cfg.gamma * cfg.lambda * grad_ume2_wrt_witness(Xw, Yw, V0, k);
    CHECK((V.points - V1).cwiseAbs().maxCoeff() < 1e-15);

    Rng gr = stream_rng(5, kStreamGenerator);
    const Eigen::MatrixXd Xg = target(cfg.B, gr);
    const Eigen::MatrixXd Z = gen0.sample_noise(cfg.B, gr);
    const Eigen::MatrixXd Yg = gen0.generate(Z);
    const auto m = mmd2_with_grad(MmdVariant::biased, Xg, Yg, k);
    const auto u = ume2_with_grad(Xg, Yg, V1, k);
    const Eigen::VectorXd theta1 = gen0.params() - cfg.gamma * gen0.vjp(Z, m.dY + cfg.lambda * u.dY);
    CHECK((gen.params() - theta1).cwiseAbs().maxCoeff() < 1e-15);

    REQUIRE(log.rows.size() == 1);
    CHECK(std::abs(log.rows[0].loss_mmd - mmd2_biased(Xg, Yg, k)) < 1e-12);
    CHECK(std::abs(log.rows[0].loss_ume - ume2_hat(Xg, Yg, V1, k)) < 1e-12);
}

TEST_CASE("logged total is the weighted sum of its terms") {
    const Sampler target = mixture_sampler(two_blobs());
    for (bool ume_only : {false, true}) {
        TrainConfig cfg = small_config(7);
        cfg.lambda = 0.3;
        cfg.ume_only = ume_only;
        MlpGenerator gen = small_generator(7);
        Rng r = stream_rng(7, kStreamInit);
        WitnessSet V = init_witnesses(target, gen, cfg, r);
        Kernel k = Kernel::gaussian(1.0);
        const TrainLog log = glocad_train(target, gen, V, k, cfg);
        for (const auto& row : log.rows) {
            const double expect = ume_only ? row.loss_ume : row.loss_mmd + 0.3 * row.loss_ume;
            CHECK(std::abs(row.loss_total - expect) < 1e-12);
        }
    }

    TrainConfig cfg = small_config(8);
    cfg.J = 2;
    MlpGenerator gen = small_generator(8);
    Rng r(8);
    AutoModels ae{Mlp::glorot({2, 3, 2}, {Activation::tanh, Activation::identity}, r),
                  Mlp::glorot({2, 3, 2}, {Activation::tanh, Activation::identity}, r)};
    WitnessSet V(randn(2, 2, r));
    Kernel k = Kernel::gaussian(1.0);
    cfg.lambda2 = 0.5;
    const TrainLog log = autoglocad_train(mixture_sampler(two_blobs()), gen, ae, V, k, cfg);
    for (const auto& row : log.rows) CHECK(std::abs(row.loss_total - (row.loss_mmd + cfg.lambda * row.loss_ume + 0.5 * row.loss_rec)) < 1e-12);
    CHECK(log.to_csv().rfind("iter,loss_total,loss_mmd,loss_ume,loss_rec,witness_grad_maxnorm\n", 0) == 0);
}

TEST_CASE("witness ascent does not decrease UME on a frozen generator") {
    Rng rng(11);
    const Eigen::MatrixXd X = randn(64, 2, rng);
    Eigen::MatrixXd base = randn(64, 2, rng);
    const FixedLocation gen(base, Eigen::Vector2d(0.8, -0.4));
    const Sampler target = fixed_sampler(X);
    TrainConfig cfg = small_config(0);
    cfg.gamma = 1e-3;
    cfg.lambda = 1.0;
    cfg.B = 64;
    WitnessSet V(randn(6, 2, rng));
    Kernel k = Kernel::gaussian(1.0);
    Optimizer ov{OptimizerKind::sgd, {}}, ob{OptimizerKind::sgd, {}};
    const Eigen::MatrixXd Y = gen.generate(Eigen::MatrixXd());
    double prev = ume2_hat(X, Y, V.points, k);
    Rng wr(0);
    for (int t = 0; t < 50; ++t) {
        witness_ascent_step(target, gen, V, k, cfg, ov, ob, wr);
        const double now = ume2_hat(X, Y, V.points, k);
        CHECK(now >= prev);
        prev = now;
    }
}

TEST_CASE("realizable optimum is a fixed point") {
    Rng rng(12);
    const Eigen::MatrixXd base = randn(32, 2, rng);
    const Eigen::Vector2d theta_star(0.5, -0.3);
    Eigen::MatrixXd X = base;
    X.rowwise() += theta_star.transpose();
    FixedLocation gen(base, theta_star);
    TrainConfig cfg = small_config(0);
    cfg.B = 32;
    cfg.dataset_size = 3200;
    cfg.lambda = 0.1;
    WitnessSet V(randn(3, 2, rng));
    Kernel k = Kernel::gaussian(1.0);
    const TrainLog log = glocad_train(fixed_sampler(X), gen, V, k, cfg);
    CHECK(log.iterations == 100);
    CHECK((gen.params() - Eigen::VectorXd(theta_star)).cwiseAbs().maxCoeff() < 1e-6);
    // a zero witness gradient satisfies the stopping rule at the first epoch boundary
    CHECK(log.converged);
}

TEST_CASE("convergence rule waits for an epoch boundary") {
    Rng rng(13);
    const Eigen::MatrixXd base = randn(8, 1, rng);
    FixedLocation gen(base, Eigen::VectorXd::Zero(1));
    TrainConfig cfg = small_config(0);
    cfg.B = 8;
    cfg.dataset_size = 80;
    cfg.max_epochs = 5;
    WitnessSet V(randn(2, 1, rng));
    Kernel k = Kernel::gaussian(1.0);
    const TrainLog log = glocad_train(fixed_sampler(base), gen, V, k, cfg);
    CHECK(log.converged);
    CHECK(log.iterations == 10);
}

TEST_CASE("training is deterministic per seed") {
    const Sampler target = mixture_sampler(two_blobs());
    auto run = [&](std::uint64_t seed) {
        TrainConfig cfg = small_config(seed);
        cfg.optimizer = OptimizerKind::adam;
        cfg.train_bandwidth = true;
        MlpGenerator gen = small_generator(seed);
        Rng r = stream_rng(seed, kStreamInit);
        WitnessSet V = init_witnesses(target, gen, cfg, r);
        Kernel k = Kernel::gaussian(1.0);
        return glocad_train(target, gen, V, k, cfg).to_csv();
    };
    CHECK(run(21) == run(21));
    CHECK(run(21) != run(22));
}

TEST_CASE("identity autoencoder matches plain training at zero lambda") {
    const Sampler target = mixture_sampler(two_blobs());
    TrainConfig cfg = small_config(9);
    cfg.lambda = 0.0;
    cfg.freeze_autoencoder = true;
    MlpGenerator g1 = small_generator(9), g2 = small_generator(9);
    Rng r = stream_rng(9, kStreamInit);
    WitnessSet V1 = init_witnesses(target, g1, cfg, r);
    WitnessSet V2 = V1;
    Kernel k1 = Kernel::gaussian(1.0), k2 = Kernel::gaussian(1.0);
    std::vector<Eigen::VectorXd> a, b;
    TrainHooks ha, hb;
    ha.on_iteration = [&](long, const Generator& g, const WitnessSet&, const Kernel&) { a.push_back(g.params()); return false; };
    hb.on_iteration = [&](long, const Generator& g, const WitnessSet&, const Kernel&) { b.push_back(g.params()); return false; };
    AutoModels ae{Mlp::identity(2), Mlp::identity(2)};
    glocad_train(target, g1, V1, k1, cfg, ha);
    autoglocad_train(target, g2, ae, V2, k2, cfg, hb);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    CHECK(reconstruction_loss(ae, randn(5, 2, r), randn(5, 2, r)) == 0.0);
}

TEST_CASE("latent witness gradient through the encoder") {
    Rng r(14);
    const Mlp enc = Mlp::glorot({2, 5, 3}, {Activation::tanh, Activation::identity}, r);
    const Eigen::MatrixXd X = randn(12, 2, r), Y = randn(10, 2, r);
    const Eigen::MatrixXd V = randn(4, 3, r);
    const Kernel k = Kernel::gaussian(1.3);
    const Eigen::MatrixXd Hx = enc.predict(X), Hy = enc.predict(Y);
    const Eigen::MatrixXd G = grad_ume2_wrt_witness(Hx, Hy, V, k);
    for (Eigen::Index j = 0; j < V.rows(); ++j)
        for (Eigen::Index c = 0; c < V.cols(); ++c) {
            Eigen::MatrixXd Vp = V, Vm = V;
            Vp(j, c) += 1e-6;
            Vm(j, c) -= 1e-6;
            const double num = (ume2_hat(enc.predict(X), enc.predict(Y), Vp, k) - ume2_hat(enc.predict(X), enc.predict(Y), Vm, k)) / 2e-6;
            CHECK(std::abs(G(j, c) - num) / std::max({std::abs(num), std::abs(G(j, c)), 1e-8}) < 1e-5);
        }
}

TEST_CASE("mode coverage") {
    const GaussianMixture ring = build_ring_mogmm();
    Eigen::MatrixXd at_means(150, 2);
    for (int i = 0; i < 150; ++i) at_means.row(i) = ring.means.row(i % 15);
    const auto all = mode_coverage(at_means, ring, 0.15);
    CHECK(all.covered == 15);
    Eigen::MatrixXd one(100, 2);
    one.rowwise() = ring.means.row(4);
    const auto single = mode_coverage(one, ring, 0.15);
    CHECK(single.covered == 1);
    CHECK(single.hit_fraction(4) == 1.0);

    Rng rng(15);
    const auto s = sample(ring, 10000, rng);
    CHECK(mode_coverage(s.points, ring, 3 * 0.05).covered >= 14);
    CHECK_THROWS_AS(mode_coverage(s.points, ring, -1.0), InputError);
}

TEST_CASE("continual scenario with nothing new captures immediately") {
    ContinualConfig c;
    c.d1 = GaussianMixture(Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Zero(1, 2), Eigen::VectorXd::Ones(1));
    c.d2 = c.d1;
    c.train = small_config(2);
    c.train.J = 3;
    c.radius = 0.5;
    c.eval_samples = 5000;
    c.phase2_max_iters = 20;
    c.lambda_b = 1.0;
    LocationGenerator gen(Eigen::Vector2d::Zero());
    const auto rep = continual_scenario(c, PhaseSchedule::fork_at(10), gen);
    REQUIRE(rep.mmd_only.capture_iter.has_value());
    REQUIRE(rep.witness.capture_iter.has_value());
    CHECK(*rep.mmd_only.capture_iter == 0);
    CHECK(*rep.witness.capture_iter == 0);
}

TEST_CASE("witnesses at the new mode pull generated mass toward it") {
    const GaussianMixture d1 = two_blobs();
    Eigen::MatrixXd m2(1, 2);
    m2 << 0, 2;
    const GaussianMixture d2(Eigen::VectorXd::Ones(1), m2, Eigen::VectorXd::Constant(1, 0.01));
    Rng rng(16);
    const Eigen::MatrixXd X = sample(mixture_union(d1, d2), 256, rng).points;
    const Eigen::MatrixXd Y = sample(d1, 256, rng).points;  // generator that learned D1 only
    const auto u = ume2_with_grad(X, Y, m2, Kernel::gaussian(1.0));
    double inner = 0;
    for (Eigen::Index i = 0; i < Y.rows(); ++i) inner += (-u.dY.row(i)).dot(m2.row(0) - Y.row(i));
    CHECK(inner > 0);
}

TEST_CASE("configuration validation") {
    TrainConfig c;
    c.J = 0;
    CHECK_THROWS_AS(c.validate(), InputError);
    c = TrainConfig{};
    c.gamma = -1;
    CHECK_THROWS_AS(c.validate(), InputError);
    c = TrainConfig{};
    c.bandwidth_gamma = -1;
    CHECK_THROWS_AS(c.validate(), InputError);
    c = TrainConfig{};
    c.dataset_size = 0;
    CHECK_THROWS_AS(c.validate(), InputError);
    CHECK_THROWS_AS(PhaseSchedule::fork_at(0).validate(), InputError);
}
