#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "glocad/estimators.hpp"
#include "glocad/kernel.hpp"
#include "glocad/mixtures.hpp"
#include "glocad/nn.hpp"
#include "glocad/odesim.hpp"

namespace glocad {

enum class OptimizerKind { sgd, adam };
enum class WitnessInit { data, half_data_half_generated };

std::string to_string(OptimizerKind o);
std::string to_string(WitnessInit w);
std::string to_string(MmdVariant v);

struct TrainConfig {
    int J = 20;
    double lambda = 0.1;
    bool ume_only = false;
    double lambda2 = 1.0;
    double gamma = 1e-3;
    int B = 64;
    int n_g = 1, n_v = 1, n_e = 1, n_d = 1;
    double grad_threshold = 1e-5;
    int max_epochs = 20;
    int dataset_size = 6400;  // one epoch = dataset_size / B outer iterations
    std::uint64_t seed = 0;
    MmdVariant mmd_variant = MmdVariant::biased;
    OptimizerKind optimizer = OptimizerKind::sgd;
    WitnessInit witness_init = WitnessInit::data;
    bool train_bandwidth = false;
    double bandwidth_gamma = 0;  // step on log sigma^2; 0 means gamma
    bool freeze_autoencoder = false;

    void validate() const;
    long iterations_per_epoch() const;
    long max_iterations() const { return iterations_per_epoch() * max_epochs; }
    /// Weight on UME^2 in the generator objective (1 in UME-only mode).
    double ume_weight() const { return ume_only ? 1.0 : lambda; }
    bool uses_mmd() const { return !ume_only; }
};

/// Draws n target samples.
using Sampler = std::function<Eigen::MatrixXd(int n, Rng& rng)>;
Sampler mixture_sampler(GaussianMixture m);

/// Differentiable map from standard-normal noise to samples.
class Generator {
public:
    virtual ~Generator() = default;
    virtual int noise_dim() const = 0;
    virtual int output_dim() const = 0;
    virtual const Eigen::VectorXd& params() const = 0;
    virtual void set_params(const Eigen::VectorXd& p) = 0;
    virtual Eigen::MatrixXd generate(const Eigen::MatrixXd& Z) const = 0;
    /// Gradient in the parameters of sum(dY .* generate(Z)).
    virtual Eigen::VectorXd vjp(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& dY) const = 0;
    virtual std::unique_ptr<Generator> clone() const = 0;

    Eigen::MatrixXd sample_noise(int n, Rng& rng) const;
    Eigen::MatrixXd sample(int n, Rng& rng) const { return generate(sample_noise(n, rng)); }
};

class MlpGenerator final : public Generator {
public:
    explicit MlpGenerator(Mlp net) : net_(std::move(net)) {}
    /// 10 -> 64 tanh -> 64 tanh -> 2 identity unless widths are given.
    static MlpGenerator make_default(Rng& rng, const std::vector<int>& widths = {10, 64, 64, 2});

    int noise_dim() const override { return net_.input_dim(); }
    int output_dim() const override { return net_.output_dim(); }
    const Eigen::VectorXd& params() const override { return net_.params(); }
    void set_params(const Eigen::VectorXd& p) override { net_.set_params(p); }
    /// Keeps the activations of the last call so a vjp on the same Z skips the
    /// forward pass. Not safe for concurrent calls on one instance.
    Eigen::MatrixXd generate(const Eigen::MatrixXd& Z) const override;
    Eigen::VectorXd vjp(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& dY) const override;
    std::unique_ptr<Generator> clone() const override { return std::make_unique<MlpGenerator>(*this); }

    const Mlp& net() const { return net_; }
    Mlp& net() { return net_; }

private:
    Mlp net_;
    mutable ForwardCache last_;
    mutable Eigen::MatrixXd last_z_;
};

/// y = z + theta.
class LocationGenerator final : public Generator {
public:
    explicit LocationGenerator(Eigen::VectorXd theta) : theta_(std::move(theta)) {}

    int noise_dim() const override { return static_cast<int>(theta_.size()); }
    int output_dim() const override { return static_cast<int>(theta_.size()); }
    const Eigen::VectorXd& params() const override { return theta_; }
    void set_params(const Eigen::VectorXd& p) override;
    Eigen::MatrixXd generate(const Eigen::MatrixXd& Z) const override;
    Eigen::VectorXd vjp(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& dY) const override;
    std::unique_ptr<Generator> clone() const override { return std::make_unique<LocationGenerator>(*this); }

private:
    Eigen::VectorXd theta_;
};

/// Plain gradient step or Adam on a parameter vector.
struct Optimizer {
    OptimizerKind kind = OptimizerKind::sgd;
    AdamState adam;

    /// x <- x - lr * grad (or the Adam equivalent).
    void descend(Eigen::Ref<Eigen::VectorXd> x, const Eigen::VectorXd& grad, double lr);
};

struct LogRow {
    long iter = 0;
    double loss_total = 0;
    double loss_mmd = 0;
    double loss_ume = 0;
    double loss_rec = 0;
    double witness_grad_maxnorm = 0;
};

struct TrainLog {
    std::vector<LogRow> rows;
    bool with_reconstruction = false;
    long iterations = 0;
    bool converged = false;
    std::string stop_reason;

    /// iter,loss_total,loss_mmd,loss_ume[,loss_rec],witness_grad_maxnorm
    std::string to_csv() const;
};

/// Called after every outer iteration (1-based count); returning true stops training.
using IterationHook = std::function<bool(long iter, const Generator& gen, const WitnessSet& V, const Kernel& k)>;

struct TrainHooks {
    IterationHook on_iteration;
};

/// Independent generator per (seed, stream) pair.
Rng stream_rng(std::uint64_t seed, std::uint64_t stream);

enum RngStream : std::uint64_t {
    kStreamInit = 0,
    kStreamGenerator = 1,
    kStreamWitness = 2,
    kStreamAutoencoder = 3,
    kStreamEval = 4,
};

/// J witness points drawn per cfg.witness_init from target and generator samples.
WitnessSet init_witnesses(const Sampler& target, const Generator& gen, const TrainConfig& cfg, Rng& rng);

/// One witness-ascent update: V <- V + gamma * grad_V L on fresh minibatches.
/// Returns the max-norm of the gradient used.
double witness_ascent_step(const Sampler& target, const Generator& gen, WitnessSet& V, Kernel& k,
                           const TrainConfig& cfg, Optimizer& opt_v, Optimizer& opt_bw, Rng& rng);

/// Algorithm 1.
TrainLog glocad_train(const Sampler& target, Generator& gen, WitnessSet& V, Kernel& k, const TrainConfig& cfg,
                      const TrainHooks& hooks = {});

/// The same generator updates with the witness term removed.
TrainLog train_mmd_only(const Sampler& target, Generator& gen, Kernel& k, const TrainConfig& cfg,
                        const TrainHooks& hooks = {});

/// Algorithm 2 with a small MLP autoencoder; witnesses live in the latent space.
struct AutoModels {
    Mlp encoder;
    Mlp decoder;
};

/// Mean squared reconstruction error over real and generated rows.
double reconstruction_loss(const AutoModels& ae, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y);

TrainLog autoglocad_train(const Sampler& target, Generator& gen, AutoModels& ae, WitnessSet& V, Kernel& k,
                          const TrainConfig& cfg, const TrainHooks& hooks = {});

struct CoverageReport {
    Eigen::VectorXd hit_fraction;
    int covered = 0;
    double coverage_min = 0;
};

/// Nearest-mean assignment (ties to the lowest index) restricted to `radius`.
CoverageReport mode_coverage(const Eigen::MatrixXd& samples, const GaussianMixture& target, double radius,
                             std::optional<double> coverage_min = std::nullopt);

enum class WitnessSeeding { keep, reseed_from_new_data, random };

struct Phase {
    int source = 0;  // 0: D1, 1: D1 and D2
    long start_iteration = 0;
    WitnessSeeding seeding = WitnessSeeding::keep;
};

struct PhaseSchedule {
    std::vector<Phase> phases;

    void validate() const;
    /// D1 from 0, then D1 and D2 from `fork` with witnesses reseeded at the D2 means.
    static PhaseSchedule fork_at(long fork);
};

struct ContinualConfig {
    GaussianMixture d1;
    GaussianMixture d2;
    TrainConfig train;
    Kernel kernel = Kernel::gaussian(1.0);
    double lambda_b = 0.1;       // UME weight of the witness-guided branch
    long phase2_max_iters = 4000;
    int check_every = 10;
    int eval_samples = 1000;
    double radius = 0.15;
    double capture_threshold = 0.1;
};

struct BranchResult {
    std::optional<long> capture_iter;  // iterations after the fork
    double final_d2_fraction = 0;
    TrainLog log;
};

struct ContinualReport {
    BranchResult mmd_only;
    BranchResult witness;
    TrainLog phase1;
};

/// Fraction of samples within `radius` of some component mean of `m`.
double hit_fraction_any(const Eigen::MatrixXd& samples, const GaussianMixture& m, double radius);

ContinualReport continual_scenario(const ContinualConfig& cfg, const PhaseSchedule& schedule, Generator& gen);

/// Full-batch GLOCAD field for the location family y = z + theta on fixed base
/// samples, targeting x = z + theta_star. State: [theta, V row-major].
/// Generator block: the first dim(theta) coordinates.
VectorField location_family_field(Eigen::MatrixXd base, Eigen::VectorXd theta_star, int J, Kernel k, double lambda,
                                  MmdVariant variant = MmdVariant::biased);

}  // namespace glocad
