#include "glocad/glocad.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <sstream>

#include "glocad/errors.hpp"

namespace glocad {

std::string to_string(OptimizerKind o) { return o == OptimizerKind::sgd ? "sgd" : "adam"; }
std::string to_string(WitnessInit w) { return w == WitnessInit::data ? "data" : "half"; }
std::string to_string(MmdVariant v) { return v == MmdVariant::biased ? "biased" : "unbiased"; }

void TrainConfig::validate() const {
    detail::require(J >= 1, "config: J must be at least 1");
    detail::require(std::isfinite(gamma) && gamma > 0, "config: gamma must be positive");
    detail::require(B >= 2, "config: B must be at least 2");
    detail::require(n_g >= 1 && n_v >= 1 && n_e >= 1 && n_d >= 1, "config: inner iteration counts must be >= 1");
    detail::require(grad_threshold > 0, "config: grad_threshold must be positive");
    detail::require(ume_only || (std::isfinite(lambda) && lambda >= 0), "config: lambda must be non-negative");
    detail::require(std::isfinite(lambda2) && lambda2 >= 0, "config: lambda2 must be non-negative");
    detail::require(max_epochs >= 1, "config: max_epochs must be at least 1");
    detail::require(dataset_size >= 1, "config: dataset_size must be positive");
    detail::require(std::isfinite(bandwidth_gamma) && bandwidth_gamma >= 0, "config: bandwidth_gamma must be non-negative");
}

long TrainConfig::iterations_per_epoch() const { return std::max<long>(1, dataset_size / B); }

Sampler mixture_sampler(GaussianMixture m) {
    m.validate();
    return [m = std::move(m)](int n, Rng& rng) { return sample(m, n, rng).points; };
}

Eigen::MatrixXd Generator::sample_noise(int n, Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd Z(n, noise_dim());
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < noise_dim(); ++c) Z(i, c) = normal(rng);
    return Z;
}

MlpGenerator MlpGenerator::make_default(Rng& rng, const std::vector<int>& widths) {
    detail::require(widths.size() >= 2, "generator: need at least input and output widths");
    std::vector<Activation> acts(widths.size() - 1, Activation::tanh);
    acts.back() = Activation::identity;
    return MlpGenerator(Mlp::glorot(widths, acts, rng));
}

Eigen::MatrixXd MlpGenerator::generate(const Eigen::MatrixXd& Z) const {
    last_ = net_.forward(Z);
    last_z_ = Z;
    return last_.result();
}

Eigen::VectorXd MlpGenerator::vjp(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& dY) const {
    const bool hit = last_.owner == &net_ && last_.version == net_.version() && last_z_.rows() == Z.rows() &&
                     last_z_.cols() == Z.cols() && last_z_ == Z;
    if (!hit) return net_.backward(net_.forward(Z), dY);
    return net_.backward(last_, dY);
}

void LocationGenerator::set_params(const Eigen::VectorXd& p) {
    detail::require(p.size() == theta_.size(), "location generator: wrong parameter length");
    detail::require(p.allFinite(), "location generator: parameters must be finite");
    theta_ = p;
}

Eigen::MatrixXd LocationGenerator::generate(const Eigen::MatrixXd& Z) const {
    detail::require(Z.cols() == theta_.size(), "location generator: noise has wrong dimension");
    Eigen::MatrixXd Y = Z;
    Y.rowwise() += theta_.transpose();
    return Y;
}

Eigen::VectorXd LocationGenerator::vjp(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& dY) const {
    detail::require(dY.rows() == Z.rows() && dY.cols() == theta_.size(), "location generator: gradient shape");
    return dY.colwise().sum().transpose();
}

void Optimizer::descend(Eigen::Ref<Eigen::VectorXd> x, const Eigen::VectorXd& grad, double lr) {
    detail::require(grad.size() == x.size(), "optimizer: gradient length does not match parameters");
    if (!grad.allFinite()) throw NumericalError("optimizer: non-finite gradient; update rejected");
    if (kind == OptimizerKind::sgd) {
        x -= lr * grad;
    } else {
        adam_update(x, grad, adam, lr);
    }
}

std::string TrainLog::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "iter,loss_total,loss_mmd,loss_ume" << (with_reconstruction ? ",loss_rec" : "") << ",witness_grad_maxnorm\n";
    for (const auto& r : rows) {
        os << r.iter << ',' << r.loss_total << ',' << r.loss_mmd << ',' << r.loss_ume;
        if (with_reconstruction) os << ',' << r.loss_rec;
        os << ',' << r.witness_grad_maxnorm << '\n';
    }
    return os.str();
}

Rng stream_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

WitnessSet init_witnesses(const Sampler& target, const Generator& gen, const TrainConfig& cfg, Rng& rng) {
    cfg.validate();
    if (cfg.witness_init == WitnessInit::data) return WitnessSet(target(cfg.J, rng));
    const int from_data = (cfg.J + 1) / 2;
    Eigen::MatrixXd V(cfg.J, gen.output_dim());
    V.topRows(from_data) = target(from_data, rng);
    if (cfg.J > from_data) V.bottomRows(cfg.J - from_data) = gen.sample(cfg.J - from_data, rng);
    return WitnessSet(V);
}

namespace {

Eigen::Map<Eigen::VectorXd> flat(Eigen::MatrixXd& M) { return {M.data(), M.size()}; }

// Witness-gradient stopping rule, read once per epoch on the epoch mean of the
// per-iteration max-norms so that a single quiet minibatch cannot end training.
class ConvergenceMonitor {
public:
    ConvergenceMonitor(const TrainConfig& cfg, bool active)
        : active_(active), threshold_(cfg.grad_threshold), epoch_(cfg.iterations_per_epoch()) {}

    bool update(long it, double maxnorm) {
        if (!active_) return false;
        sum_ += maxnorm;
        if (it % epoch_ != 0) return false;
        const double mean = sum_ / static_cast<double>(epoch_);
        sum_ = 0;
        return mean < threshold_;
    }

private:
    bool active_;
    double threshold_;
    long epoch_;
    double sum_ = 0;
};

void check_finite(double v, const char* what, long iter) {
    if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "training produced a non-finite " << what << " at iteration " << iter;
        throw NumericalError(os.str());
    }
}

void ascend_bandwidth(Kernel& k, double dL_dsigma_sq, Optimizer& opt, double lr) {
    // Parameterised by log sigma^2 to stay positive.
    Eigen::VectorXd s(1);
    s(0) = std::log(k.bandwidth_sq);
    Eigen::VectorXd g(1);
    g(0) = -k.bandwidth_sq * dL_dsigma_sq;
    opt.descend(s, g, lr);
    k.bandwidth_sq = std::exp(s(0));
    if (!(std::isfinite(k.bandwidth_sq) && k.bandwidth_sq > 0))
        throw NumericalError("bandwidth training left the representable range (sigma^2 = " +
                             std::to_string(k.bandwidth_sq) + ")");
}

struct GeneratorStepResult {
    double mmd = 0;
    double ume = 0;
};

GeneratorStepResult generator_descent_step(const Sampler& target, Generator& gen, const WitnessSet* V,
                                           const Kernel& k, const TrainConfig& cfg, Optimizer& opt, Rng& rng) {
    const Eigen::MatrixXd X = target(cfg.B, rng);
    const Eigen::MatrixXd Z = gen.sample_noise(cfg.B, rng);
    const Eigen::MatrixXd Y = gen.generate(Z);
    GeneratorStepResult r;
    Eigen::MatrixXd dY = Eigen::MatrixXd::Zero(Y.rows(), Y.cols());
    if (cfg.uses_mmd()) {
        auto m = mmd2_with_grad(cfg.mmd_variant, X, Y, k);
        r.mmd = m.value;
        dY = std::move(m.dY);
    }
    const double w = cfg.ume_weight();
    if (V != nullptr && w > 0) {
        const auto u = ume2_with_grad(X, Y, V->points, k);
        r.ume = u.value;
        if (cfg.uses_mmd())
            dY += w * u.dY;
        else
            dY = w * u.dY;
    } else if (V != nullptr) {
        r.ume = ume2_hat(X, Y, V->points, k);
    }
    Eigen::VectorXd theta = gen.params();
    opt.descend(theta, gen.vjp(Z, dY), cfg.gamma);
    gen.set_params(theta);
    return r;
}

TrainLog run_glocad_loop(const Sampler& target, Generator& gen, WitnessSet* V, Kernel& k, const TrainConfig& cfg,
                         const TrainHooks& hooks) {
    cfg.validate();
    k.validate();
    if (V != nullptr) {
        V->validate();
        detail::require(V->dim() == gen.output_dim(), "glocad: witness dimension does not match generator output");
    }
    detail::require(!cfg.train_bandwidth || k.family == KernelFamily::gaussian,
                    "glocad: bandwidth training requires the gaussian kernel");
    {
        Rng probe = stream_rng(cfg.seed, kStreamInit);
        detail::require(target(1, probe).cols() == gen.output_dim(),
                        "glocad: sampler and generator dimensions disagree");
    }

    Rng gen_rng = stream_rng(cfg.seed, kStreamGenerator);
    Rng wit_rng = stream_rng(cfg.seed, kStreamWitness);
    Optimizer opt_g{cfg.optimizer, {}}, opt_v{cfg.optimizer, {}}, opt_bw{cfg.optimizer, {}};
    const bool witness_active = V != nullptr && cfg.ume_weight() > 0;

    TrainLog log;
    ConvergenceMonitor monitor(cfg, witness_active);
    const long max_it = cfg.max_iterations();
    for (long it = 1; it <= max_it; ++it) {
        double maxnorm = 0;
        if (V != nullptr)
            for (int t = 0; t < cfg.n_v; ++t) maxnorm = witness_ascent_step(target, gen, *V, k, cfg, opt_v, opt_bw, wit_rng);
        GeneratorStepResult g;
        for (int t = 0; t < cfg.n_g; ++t) g = generator_descent_step(target, gen, V, k, cfg, opt_g, gen_rng);

        LogRow row;
        row.iter = it;
        row.loss_mmd = g.mmd;
        row.loss_ume = g.ume;
        row.loss_total = (cfg.uses_mmd() ? g.mmd : 0.0) + cfg.ume_weight() * g.ume;
        row.witness_grad_maxnorm = maxnorm;
        check_finite(row.loss_total, "loss", it);
        log.rows.push_back(row);
        log.iterations = it;

        if (hooks.on_iteration && hooks.on_iteration(it, gen, V != nullptr ? *V : WitnessSet(), k)) {
            log.stop_reason = "hook";
            return log;
        }
        if (monitor.update(it, maxnorm)) {
            log.converged = true;
            log.stop_reason = "witness gradient below threshold";
            return log;
        }
    }
    log.stop_reason = "epoch budget exhausted";
    return log;
}

}  // namespace

double witness_ascent_step(const Sampler& target, const Generator& gen, WitnessSet& V, Kernel& k,
                           const TrainConfig& cfg, Optimizer& opt_v, Optimizer& opt_bw, Rng& rng) {
    const Eigen::MatrixXd X = target(cfg.B, rng);
    const Eigen::MatrixXd Y = gen.generate(gen.sample_noise(cfg.B, rng));
    const double w = cfg.ume_weight();
    V.grad = w > 0 ? Eigen::MatrixXd(w * grad_ume2_wrt_witness(X, Y, V.points, k))
                   : Eigen::MatrixXd::Zero(V.points.rows(), V.points.cols());
    if (cfg.train_bandwidth) {
        double d = w > 0 ? w * ume2_with_grad(X, Y, V.points, k).d_bandwidth_sq : 0.0;
        if (cfg.uses_mmd()) d += mmd2_with_grad(cfg.mmd_variant, X, Y, k).d_bandwidth_sq;
        ascend_bandwidth(k, d, opt_bw, cfg.bandwidth_gamma > 0 ? cfg.bandwidth_gamma : cfg.gamma);
    }
    if (w > 0) {
        Eigen::MatrixXd neg = -V.grad;
        opt_v.descend(flat(V.points), flat(neg), cfg.gamma);
    }
    return V.grad.size() > 0 ? V.grad.cwiseAbs().maxCoeff() : 0.0;
}

TrainLog glocad_train(const Sampler& target, Generator& gen, WitnessSet& V, Kernel& k, const TrainConfig& cfg,
                      const TrainHooks& hooks) {
    return run_glocad_loop(target, gen, &V, k, cfg, hooks);
}

TrainLog train_mmd_only(const Sampler& target, Generator& gen, Kernel& k, const TrainConfig& cfg,
                        const TrainHooks& hooks) {
    detail::require(!cfg.ume_only, "train_mmd_only: UME-only mode has no MMD term");
    return run_glocad_loop(target, gen, nullptr, k, cfg, hooks);
}

namespace {

struct RecPass {
    double loss = 0;
    Eigen::VectorXd enc_grad;
    Eigen::VectorXd dec_grad;
};

// (1/B) sum ||r - D(E(r))||^2 and its gradient in encoder and decoder parameters.
RecPass reconstruction_pass(const AutoModels& ae, const Eigen::MatrixXd& R, double scale) {
    const auto ce = ae.encoder.forward(R);
    const auto cd = ae.decoder.forward(ce.result());
    const Eigen::MatrixXd diff = cd.result() - R;
    const double B = static_cast<double>(R.rows());
    RecPass p;
    p.loss = diff.squaredNorm() / B;
    const auto bd = ae.decoder.backward_full(cd, scale * 2.0 / B * diff);
    p.dec_grad = bd.param_grad;
    p.enc_grad = ae.encoder.backward(ce, bd.input_grad);
    return p;
}

struct LatentLoss {
    double mmd = 0;
    double ume = 0;
    Eigen::MatrixXd dHx, dHy;
};

LatentLoss latent_loss(const Eigen::MatrixXd& Hx, const Eigen::MatrixXd& Hy, const WitnessSet& V, const Kernel& k,
                       const TrainConfig& cfg) {
    LatentLoss L;
    L.dHx = Eigen::MatrixXd::Zero(Hx.rows(), Hx.cols());
    L.dHy = Eigen::MatrixXd::Zero(Hy.rows(), Hy.cols());
    if (cfg.uses_mmd()) {
        auto m = mmd2_with_grad(cfg.mmd_variant, Hx, Hy, k);
        L.mmd = m.value;
        L.dHx = std::move(m.dX);
        L.dHy = std::move(m.dY);
    }
    const double w = cfg.ume_weight();
    if (w > 0) {
        const auto u = ume2_with_grad(Hx, Hy, V.points, k);
        L.ume = u.value;
        if (cfg.uses_mmd()) {
            L.dHx += w * u.dX;
            L.dHy += w * u.dY;
        } else {
            L.dHx = w * u.dX;
            L.dHy = w * u.dY;
        }
    } else {
        L.ume = ume2_hat(Hx, Hy, V.points, k);
    }
    return L;
}

}  // namespace

double reconstruction_loss(const AutoModels& ae, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
    return reconstruction_pass(ae, X, 1.0).loss + reconstruction_pass(ae, Y, 1.0).loss;
}

TrainLog autoglocad_train(const Sampler& target, Generator& gen, AutoModels& ae, WitnessSet& V, Kernel& k,
                          const TrainConfig& cfg, const TrainHooks& hooks) {
    cfg.validate();
    k.validate();
    V.validate();
    detail::require(!cfg.train_bandwidth, "autoglocad: bandwidth training is not supported");
    detail::require(ae.encoder.input_dim() == gen.output_dim(), "autoglocad: encoder input must match data dimension");
    detail::require(ae.decoder.input_dim() == ae.encoder.output_dim() && ae.decoder.output_dim() == gen.output_dim(),
                    "autoglocad: decoder shape does not match encoder and data");
    detail::require(V.dim() == ae.encoder.output_dim(), "autoglocad: witness dimension must equal latent dimension");

    Rng gen_rng = stream_rng(cfg.seed, kStreamGenerator);
    Rng wit_rng = stream_rng(cfg.seed, kStreamWitness);
    Rng ae_rng = stream_rng(cfg.seed, kStreamAutoencoder);
    Optimizer opt_g{cfg.optimizer, {}}, opt_v{cfg.optimizer, {}}, opt_e{cfg.optimizer, {}}, opt_d{cfg.optimizer, {}};
    const double w = cfg.ume_weight();

    TrainLog log;
    log.with_reconstruction = true;
    ConvergenceMonitor monitor(cfg, w > 0);
    const long max_it = cfg.max_iterations();
    for (long it = 1; it <= max_it; ++it) {
        if (!cfg.freeze_autoencoder) {
            for (int t = 0; t < cfg.n_d; ++t) {
                const Eigen::MatrixXd X = target(cfg.B, ae_rng);
                const Eigen::MatrixXd Y = gen.sample(cfg.B, ae_rng);
                const auto rx = reconstruction_pass(ae, X, cfg.lambda2);
                const auto ry = reconstruction_pass(ae, Y, cfg.lambda2);
                opt_e.descend(ae.encoder.params_mut(), rx.enc_grad + ry.enc_grad, cfg.gamma);
                opt_d.descend(ae.decoder.params_mut(), rx.dec_grad + ry.dec_grad, cfg.gamma);
            }
            for (int t = 0; t < cfg.n_e; ++t) {
                const Eigen::MatrixXd X = target(cfg.B, ae_rng);
                const Eigen::MatrixXd Y = gen.sample(cfg.B, ae_rng);
                const auto cx = ae.encoder.forward(X);
                const auto cy = ae.encoder.forward(Y);
                const auto L = latent_loss(cx.result(), cy.result(), V, k, cfg);
                const Eigen::VectorXd g = ae.encoder.backward(cx, L.dHx) + ae.encoder.backward(cy, L.dHy);
                opt_e.descend(ae.encoder.params_mut(), -g, cfg.gamma);
            }
        }

        double mmd = 0, ume = 0, rec = 0;
        for (int t = 0; t < cfg.n_g; ++t) {
            const Eigen::MatrixXd X = target(cfg.B, gen_rng);
            const Eigen::MatrixXd Z = gen.sample_noise(cfg.B, gen_rng);
            const Eigen::MatrixXd Y = gen.generate(Z);
            const auto cx = ae.encoder.forward(X);
            const auto cy = ae.encoder.forward(Y);
            const auto L = latent_loss(cx.result(), cy.result(), V, k, cfg);
            const Eigen::MatrixXd dY = ae.encoder.backward_full(cy, L.dHy).input_grad;
            Eigen::VectorXd theta = gen.params();
            opt_g.descend(theta, gen.vjp(Z, dY), cfg.gamma);
            gen.set_params(theta);
            mmd = L.mmd;
            ume = L.ume;
            rec = reconstruction_loss(ae, X, Y);
        }

        double maxnorm = 0;
        for (int t = 0; t < cfg.n_v; ++t) {
            const Eigen::MatrixXd X = target(cfg.B, wit_rng);
            const Eigen::MatrixXd Y = gen.sample(cfg.B, wit_rng);
            const Eigen::MatrixXd Hx = ae.encoder.predict(X);
            const Eigen::MatrixXd Hy = ae.encoder.predict(Y);
            V.grad = w > 0 ? Eigen::MatrixXd(w * grad_ume2_wrt_witness(Hx, Hy, V.points, k))
                           : Eigen::MatrixXd::Zero(V.points.rows(), V.points.cols());
            if (w > 0) {
                Eigen::MatrixXd neg = -V.grad;
                opt_v.descend(flat(V.points), flat(neg), cfg.gamma);
            }
            maxnorm = V.grad.cwiseAbs().maxCoeff();
        }

        LogRow row;
        row.iter = it;
        row.loss_mmd = mmd;
        row.loss_ume = ume;
        row.loss_rec = rec;
        row.loss_total = (cfg.uses_mmd() ? mmd : 0.0) + w * ume + cfg.lambda2 * rec;
        row.witness_grad_maxnorm = maxnorm;
        check_finite(row.loss_total, "loss", it);
        log.rows.push_back(row);
        log.iterations = it;

        if (hooks.on_iteration && hooks.on_iteration(it, gen, V, k)) {
            log.stop_reason = "hook";
            return log;
        }
        if (monitor.update(it, maxnorm)) {
            log.converged = true;
            log.stop_reason = "witness gradient below threshold";
            return log;
        }
    }
    log.stop_reason = "epoch budget exhausted";
    return log;
}

CoverageReport mode_coverage(const Eigen::MatrixXd& samples, const GaussianMixture& target, double radius,
                             std::optional<double> coverage_min) {
    detail::require(radius > 0, "mode_coverage: radius must be positive");
    detail::require(samples.cols() == target.dim(), "mode_coverage: sample dimension does not match target");
    detail::require(samples.rows() >= 1, "mode_coverage: no samples");
    const int K = target.components();
    CoverageReport r;
    r.coverage_min = coverage_min.value_or(1.0 / (3.0 * K));
    Eigen::VectorXd hits = Eigen::VectorXd::Zero(K);
    const double r2 = radius * radius;
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int j = 0; j < K; ++j) {
            const double d = (samples.row(i) - target.means.row(j)).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        if (best_d <= r2) hits(best) += 1;
    }
    r.hit_fraction = hits / static_cast<double>(samples.rows());
    r.covered = static_cast<int>((r.hit_fraction.array() >= r.coverage_min).count());
    return r;
}

void PhaseSchedule::validate() const {
    detail::require(!phases.empty(), "schedule: no phases");
    detail::require(phases.front().start_iteration == 0, "schedule: first phase must start at iteration 0");
    for (std::size_t i = 1; i < phases.size(); ++i)
        detail::require(phases[i].start_iteration > phases[i - 1].start_iteration,
                        "schedule: start iterations must be strictly increasing");
}

PhaseSchedule PhaseSchedule::fork_at(long fork) {
    return PhaseSchedule{{{0, 0, WitnessSeeding::keep}, {1, fork, WitnessSeeding::reseed_from_new_data}}};
}

double hit_fraction_any(const Eigen::MatrixXd& samples, const GaussianMixture& m, double radius) {
    detail::require(samples.cols() == m.dim(), "hit_fraction_any: dimension mismatch");
    const double r2 = radius * radius;
    long hits = 0;
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
        for (int j = 0; j < m.components(); ++j) {
            if ((samples.row(i) - m.means.row(j)).squaredNorm() <= r2) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(samples.rows());
}

namespace {

BranchResult run_branch(const ContinualConfig& cfg, const Sampler& data, std::unique_ptr<Generator> gen, WitnessSet V,
                        Kernel k, TrainConfig tc) {
    BranchResult out;
    const std::uint64_t eval_seed = tc.seed;
    Rng eval_rng = stream_rng(eval_seed, kStreamEval);
    auto d2_fraction = [&](const Generator& g) {
        return hit_fraction_any(g.sample(cfg.eval_samples, eval_rng), cfg.d2, cfg.radius);
    };
    out.final_d2_fraction = d2_fraction(*gen);
    if (out.final_d2_fraction >= cfg.capture_threshold) {
        out.capture_iter = 0;
        return out;
    }
    tc.max_epochs = static_cast<int>(cfg.phase2_max_iters / tc.iterations_per_epoch()) + 1;
    TrainHooks hooks;
    hooks.on_iteration = [&](long it, const Generator& g, const WitnessSet&, const Kernel&) {
        if (it % cfg.check_every == 0) {
            out.final_d2_fraction = d2_fraction(g);
            if (out.final_d2_fraction >= cfg.capture_threshold) {
                out.capture_iter = it;
                return true;
            }
        }
        return it >= cfg.phase2_max_iters;
    };
    out.log = glocad_train(data, *gen, V, k, tc, hooks);
    return out;
}

}  // namespace

ContinualReport continual_scenario(const ContinualConfig& cfg, const PhaseSchedule& schedule, Generator& gen) {
    schedule.validate();
    detail::require(schedule.phases.size() == 2, "continual: schedule must have exactly two phases");
    detail::require(schedule.phases[0].source == 0 && schedule.phases[1].source == 1,
                    "continual: phases must train on D1 and then on D1 with D2");
    cfg.train.validate();
    detail::require(cfg.d1.dim() == gen.output_dim() && cfg.d2.dim() == gen.output_dim(),
                    "continual: mixture and generator dimensions differ");
    detail::require(cfg.check_every >= 1 && cfg.eval_samples >= 1 && cfg.phase2_max_iters >= 1,
                    "continual: check_every, eval_samples and phase2_max_iters must be positive");
    const long fork = schedule.phases[1].start_iteration;

    ContinualReport report;
    const Sampler d1 = mixture_sampler(cfg.d1);
    Kernel k = cfg.kernel;
    Rng init_rng = stream_rng(cfg.train.seed, kStreamInit);
    WitnessSet V = init_witnesses(d1, gen, cfg.train, init_rng);

    TrainConfig p1 = cfg.train;
    p1.max_epochs = static_cast<int>(fork / p1.iterations_per_epoch()) + 1;
    TrainHooks stop_at_fork;
    stop_at_fork.on_iteration = [fork](long it, const Generator&, const WitnessSet&, const Kernel&) {
        return it >= fork;
    };
    report.phase1 = glocad_train(d1, gen, V, k, p1, stop_at_fork);

    const Sampler both = mixture_sampler(mixture_union(cfg.d1, cfg.d2));
    TrainConfig ta = cfg.train;
    ta.seed = cfg.train.seed ^ 0x5bd1e995ULL;
    ta.lambda = 0.0;
    ta.ume_only = false;
    TrainConfig tb = ta;
    tb.lambda = cfg.lambda_b;
    // The branches are compared over a fixed horizon.
    ta.grad_threshold = tb.grad_threshold = std::numeric_limits<double>::min();

    WitnessSet Vb = V;
    switch (schedule.phases[1].seeding) {
        case WitnessSeeding::keep:
            break;
        case WitnessSeeding::reseed_from_new_data: {
            const Eigen::Index r = std::min<Eigen::Index>(Vb.count(), cfg.d2.components());
            Vb.points.topRows(r) = cfg.d2.means.topRows(r);
            break;
        }
        case WitnessSeeding::random: {
            Rng r = stream_rng(ta.seed, kStreamInit);
            Vb.points = both(static_cast<int>(Vb.count()), r);
            break;
        }
    }

    auto fa = std::async(std::launch::async, run_branch, std::cref(cfg), both, gen.clone(), V, k, ta);
    auto fb = std::async(std::launch::async, run_branch, std::cref(cfg), both, gen.clone(), Vb, k, tb);
    report.mmd_only = fa.get();
    report.witness = fb.get();
    return report;
}

VectorField location_family_field(Eigen::MatrixXd base, Eigen::VectorXd theta_star, int J, Kernel k, double lambda,
                                  MmdVariant variant) {
    detail::require(base.cols() == theta_star.size(), "location field: base samples and theta differ in dimension");
    detail::require(J >= 1, "location field: J must be at least 1");
    k.validate();
    const Eigen::Index d = theta_star.size();
    return [base = std::move(base), theta_star = std::move(theta_star), J, k, lambda, variant,
            d](const Eigen::VectorXd& state) -> Eigen::VectorXd {
        detail::require(state.size() == d * (1 + J), "location field: state has wrong length");
        Eigen::MatrixXd X = base;
        X.rowwise() += theta_star.transpose();
        Eigen::MatrixXd Y = base;
        Y.rowwise() += state.head(d).transpose();
        Eigen::MatrixXd V(J, d);
        for (int j = 0; j < J; ++j) V.row(j) = state.segment(d * (1 + j), d).transpose();
        const auto m = mmd2_with_grad(variant, X, Y, k);
        const auto u = ume2_with_grad(X, Y, V, k);
        Eigen::VectorXd out(state.size());
        out.head(d) = -(m.dY + lambda * u.dY).colwise().sum().transpose();
        for (int j = 0; j < J; ++j) out.segment(d * (1 + j), d) = lambda * u.dV.row(j).transpose();
        return out;
    };
}

}  // namespace glocad
