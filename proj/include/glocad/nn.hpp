#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "glocad/mixtures.hpp"

namespace glocad {

enum class Activation { tanh, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct LayerShape {
    int in = 0;
    int out = 0;
    Activation act = Activation::tanh;
};

/// Activations recorded by Mlp::forward. Rows are samples.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> inputs;   // input of each layer
    std::vector<Eigen::MatrixXd> outputs;  // post-activation output of each layer
    std::uint64_t version = 0;
    const void* owner = nullptr;

    const Eigen::MatrixXd& result() const { return outputs.back(); }
};

struct BackwardResult {
    Eigen::VectorXd param_grad;
    Eigen::MatrixXd input_grad;
};

/// Feedforward network y = act(x W^T + b) per layer; every weight and bias lives
/// in one contiguous parameter vector (per layer: W column-major, then b).
class Mlp {
public:
    Mlp() = default;
    explicit Mlp(std::vector<LayerShape> layers);

    /// Layers widths[0] -> widths[1] -> ... with one activation per layer.
    static Mlp make(const std::vector<int>& widths, const std::vector<Activation>& acts);
    /// Same, with uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)) weights and zero biases.
    static Mlp glorot(const std::vector<int>& widths, const std::vector<Activation>& acts, Rng& rng);
    /// Single identity layer with W = I, b = 0.
    static Mlp identity(int dim);

    const std::vector<LayerShape>& layers() const { return layers_; }
    int input_dim() const { return layers_.front().in; }
    int output_dim() const { return layers_.back().out; }
    Eigen::Index param_count() const { return params_.size(); }

    const Eigen::VectorXd& params() const { return params_; }
    /// Mutable access; invalidates outstanding forward caches.
    Eigen::VectorXd& params_mut() {
        version_ = next_version();
        return params_;
    }
    void set_params(const Eigen::VectorXd& p);
    std::uint64_t version() const { return version_; }

    Eigen::Map<const Eigen::MatrixXd> weight(int l) const;
    Eigen::Map<const Eigen::VectorXd> bias(int l) const;
    Eigen::Map<Eigen::MatrixXd> weight_mut(int l);
    Eigen::Map<Eigen::VectorXd> bias_mut(int l);

    ForwardCache forward(const Eigen::MatrixXd& Z) const;
    Eigen::MatrixXd predict(const Eigen::MatrixXd& Z) const { return forward(Z).result(); }

    /// Gradient of sum(output_grad .* output) with respect to the parameters.
    Eigen::VectorXd backward(const ForwardCache& cache, const Eigen::MatrixXd& output_grad) const;
    /// Same, also returning the gradient with respect to the network input.
    BackwardResult backward_full(const ForwardCache& cache, const Eigen::MatrixXd& output_grad) const;

    /// Binary parameter dump plus a text shape manifest (<path>.shape).
    void save(const std::string& path) const;
    static Mlp load(const std::string& path);

private:
    std::vector<LayerShape> layers_;
    std::vector<Eigen::Index> offsets_;
    Eigen::VectorXd params_;
    std::uint64_t version_ = next_version();

    // Unique across all networks, so equal versions imply equal parameters.
    static std::uint64_t next_version();
};

void sgd_step(Mlp& p, const Eigen::VectorXd& grad, double lr);

struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    explicit AdamState(Eigen::Index n) : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

/// One bias-corrected Adam update applied to `x`.
void adam_update(Eigen::Ref<Eigen::VectorXd> x, const Eigen::VectorXd& grad, AdamState& s, double lr);
void adam_step(Mlp& p, const Eigen::VectorXd& grad, AdamState& s, double lr);

/// Loss as a function of the parameter vector, with its analytic gradient.
struct LossAndGrad {
    double loss;
    Eigen::VectorXd grad;
};
using LossClosure = std::function<LossAndGrad(const Mlp&)>;

/// Maximum relative error between the analytic gradient and central differences,
/// over all coordinates or `max_coords` randomly chosen ones.
double grad_check(const Mlp& p, const LossClosure& f, double h = 1e-5, int max_coords = 200,
                  std::uint64_t seed = 0);

}  // namespace glocad
