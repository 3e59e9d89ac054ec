#include "glocad/nn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "glocad/errors.hpp"

namespace glocad {

std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "identity"; }

Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::tanh;
    if (s == "identity") return Activation::identity;
    throw InputError("unknown activation '" + s + "'");
}

Mlp::Mlp(std::vector<LayerShape> layers) : layers_(std::move(layers)) {
    detail::require(!layers_.empty(), "mlp: at least one layer required");
    Eigen::Index off = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& s = layers_[l];
        detail::require(s.in >= 1 && s.out >= 1, "mlp: layer widths must be positive");
        if (l > 0) detail::require(s.in == layers_[l - 1].out, "mlp: consecutive layer widths do not match");
        offsets_.push_back(off);
        off += static_cast<Eigen::Index>(s.out) * (s.in + 1);
    }
    params_ = Eigen::VectorXd::Zero(off);
}

Mlp Mlp::make(const std::vector<int>& widths, const std::vector<Activation>& acts) {
    detail::require(widths.size() >= 2 && acts.size() == widths.size() - 1,
                    "mlp: need one activation per layer and at least two widths");
    std::vector<LayerShape> layers;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) layers.push_back({widths[l], widths[l + 1], acts[l]});
    return Mlp(std::move(layers));
}

Mlp Mlp::glorot(const std::vector<int>& widths, const std::vector<Activation>& acts, Rng& rng) {
    Mlp m = make(widths, acts);
    for (int l = 0; l < static_cast<int>(m.layers_.size()); ++l) {
        const auto& s = m.layers_[static_cast<std::size_t>(l)];
        const double a = std::sqrt(6.0 / (s.in + s.out));
        std::uniform_real_distribution<double> u(-a, a);
        auto W = m.weight_mut(l);
        for (Eigen::Index j = 0; j < W.cols(); ++j)
            for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = u(rng);
    }
    return m;
}

Mlp Mlp::identity(int dim) {
    Mlp m = make({dim, dim}, {Activation::identity});
    m.weight_mut(0).setIdentity();
    return m;
}

std::uint64_t Mlp::next_version() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
}

void Mlp::set_params(const Eigen::VectorXd& p) {
    detail::require(p.size() == params_.size(), "mlp: parameter vector has wrong length");
    detail::require(p.allFinite(), "mlp: parameters must be finite");
    params_ = p;
    version_ = next_version();
}

Eigen::Map<const Eigen::MatrixXd> Mlp::weight(int l) const {
    const auto& s = layers_.at(static_cast<std::size_t>(l));
    return {params_.data() + offsets_[static_cast<std::size_t>(l)], s.out, s.in};
}

Eigen::Map<const Eigen::VectorXd> Mlp::bias(int l) const {
    const auto& s = layers_.at(static_cast<std::size_t>(l));
    return {params_.data() + offsets_[static_cast<std::size_t>(l)] + static_cast<Eigen::Index>(s.out) * s.in, s.out};
}

Eigen::Map<Eigen::MatrixXd> Mlp::weight_mut(int l) {
    const auto& s = layers_.at(static_cast<std::size_t>(l));
    version_ = next_version();
    return {params_.data() + offsets_[static_cast<std::size_t>(l)], s.out, s.in};
}

Eigen::Map<Eigen::VectorXd> Mlp::bias_mut(int l) {
    const auto& s = layers_.at(static_cast<std::size_t>(l));
    version_ = next_version();
    return {params_.data() + offsets_[static_cast<std::size_t>(l)] + static_cast<Eigen::Index>(s.out) * s.in, s.out};
}

ForwardCache Mlp::forward(const Eigen::MatrixXd& Z) const {
    detail::require(!layers_.empty(), "mlp: network has no layers");
    detail::require(Z.cols() == input_dim(), "mlp: input width " + std::to_string(Z.cols()) +
                                                 " does not match first layer (" + std::to_string(input_dim()) + ")");
    ForwardCache c;
    c.version = version_;
    c.owner = this;
    Eigen::MatrixXd h = Z;
    for (int l = 0; l < static_cast<int>(layers_.size()); ++l) {
        c.inputs.push_back(h);
        Eigen::MatrixXd a = h * weight(l).transpose();
        a.rowwise() += bias(l).transpose();
        // exp vectorizes for doubles where tanh does not
        if (layers_[static_cast<std::size_t>(l)].act == Activation::tanh)
            a = (1.0 - 2.0 / ((2.0 * a.array()).exp() + 1.0)).matrix();
        c.outputs.push_back(a);
        h = std::move(a);
    }
    return c;
}

BackwardResult Mlp::backward_full(const ForwardCache& cache, const Eigen::MatrixXd& output_grad) const {
    detail::require(cache.owner == this && cache.version == version_,
                    "mlp: stale forward cache (parameters changed since forward)");
    detail::require(cache.outputs.size() == layers_.size(), "mlp: cache does not match network");
    detail::require(output_grad.rows() == cache.result().rows() && output_grad.cols() == cache.result().cols(),
                    "mlp: output gradient shape does not match forward output");
    BackwardResult r;
    r.param_grad = Eigen::VectorXd::Zero(params_.size());
    Eigen::MatrixXd g = output_grad;
    for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
        const auto& s = layers_[static_cast<std::size_t>(l)];
        const auto& out = cache.outputs[static_cast<std::size_t>(l)];
        if (s.act == Activation::tanh) g = (g.array() * (1.0 - out.array().square())).matrix();
        const Eigen::Index off = offsets_[static_cast<std::size_t>(l)];
        Eigen::Map<Eigen::MatrixXd>(r.param_grad.data() + off, s.out, s.in) =
            g.transpose() * cache.inputs[static_cast<std::size_t>(l)];
        Eigen::Map<Eigen::VectorXd>(r.param_grad.data() + off + static_cast<Eigen::Index>(s.out) * s.in, s.out) =
            g.colwise().sum().transpose();
        g = g * weight(l);
    }
    r.input_grad = std::move(g);
    return r;
}

Eigen::VectorXd Mlp::backward(const ForwardCache& cache, const Eigen::MatrixXd& output_grad) const {
    return backward_full(cache, output_grad).param_grad;
}

void Mlp::save(const std::string& path) const {
    namespace fs = std::filesystem;
    const std::string tmp_bin = path + ".tmp", tmp_shape = path + ".shape.tmp";
    {
        std::ofstream b(tmp_bin, std::ios::binary);
        if (!b) throw InputError("mlp: cannot write checkpoint " + path);
        b.write(reinterpret_cast<const char*>(params_.data()),
                static_cast<std::streamsize>(params_.size() * static_cast<Eigen::Index>(sizeof(double))));
    }
    {
        std::ofstream s(tmp_shape);
        s << "layers " << layers_.size() << '\n';
        for (const auto& l : layers_) s << l.in << ' ' << l.out << ' ' << to_string(l.act) << '\n';
        s << "params " << params_.size() << '\n';
    }
    fs::rename(tmp_bin, path);
    fs::rename(tmp_shape, path + ".shape");
}

Mlp Mlp::load(const std::string& path) {
    std::ifstream s(path + ".shape");
    if (!s) throw InputError("mlp: missing shape manifest " + path + ".shape");
    std::string tag;
    std::size_t n = 0;
    s >> tag >> n;
    detail::require(tag == "layers" && n >= 1, "mlp: malformed shape manifest");
    std::vector<LayerShape> layers(n);
    for (auto& l : layers) {
        std::string act;
        s >> l.in >> l.out >> act;
        l.act = activation_from_string(act);
    }
    Eigen::Index count = 0;
    s >> tag >> count;
    detail::require(tag == "params" && s, "mlp: malformed shape manifest");
    Mlp m(std::move(layers));
    detail::require(count == m.param_count(), "mlp: manifest parameter count does not match layers");
    std::ifstream b(path, std::ios::binary);
    if (!b) throw InputError("mlp: cannot read checkpoint " + path);
    Eigen::VectorXd p(count);
    b.read(reinterpret_cast<char*>(p.data()), static_cast<std::streamsize>(count * static_cast<Eigen::Index>(sizeof(double))));
    detail::require(b.gcount() == static_cast<std::streamsize>(count * static_cast<Eigen::Index>(sizeof(double))),
                    "mlp: checkpoint truncated");
    m.set_params(p);
    return m;
}

namespace {

void require_finite_grad(const Eigen::VectorXd& grad, Eigen::Index n) {
    detail::require(grad.size() == n, "optimizer: gradient length does not match parameters");
    if (!grad.allFinite()) {
        Eigen::Index bad = 0;
        while (bad < grad.size() && std::isfinite(grad(bad))) ++bad;
        throw NumericalError("optimizer: non-finite gradient at coordinate " + std::to_string(bad) +
                             "; update rejected");
    }
}

}  // namespace

void sgd_step(Mlp& p, const Eigen::VectorXd& grad, double lr) {
    require_finite_grad(grad, p.param_count());
    p.params_mut() -= lr * grad;
}

void adam_update(Eigen::Ref<Eigen::VectorXd> x, const Eigen::VectorXd& grad, AdamState& s, double lr) {
    require_finite_grad(grad, x.size());
    if (s.m.size() != x.size()) {
        detail::require(s.step == 0, "adam: state has wrong length");
        s.m = Eigen::VectorXd::Zero(x.size());
        s.v = Eigen::VectorXd::Zero(x.size());
    }
    ++s.step;
    s.m = s.beta1 * s.m + (1 - s.beta1) * grad;
    s.v = s.beta2 * s.v + (1 - s.beta2) * grad.cwiseAbs2();
    const double c1 = 1 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1 - std::pow(s.beta2, static_cast<double>(s.step));
    x.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

void adam_step(Mlp& p, const Eigen::VectorXd& grad, AdamState& s, double lr) {
    require_finite_grad(grad, p.param_count());
    adam_update(p.params_mut(), grad, s, lr);
}

double grad_check(const Mlp& p, const LossClosure& f, double h, int max_coords, std::uint64_t seed) {
    const Eigen::VectorXd analytic = f(p).grad;
    detail::require(analytic.size() == p.param_count(), "grad_check: gradient length does not match parameters");
    std::vector<Eigen::Index> coords(static_cast<std::size_t>(p.param_count()));
    std::iota(coords.begin(), coords.end(), Eigen::Index(0));
    if (static_cast<Eigen::Index>(coords.size()) > max_coords) {
        Rng rng(seed);
        std::shuffle(coords.begin(), coords.end(), rng);
        coords.resize(static_cast<std::size_t>(max_coords));
    }
    Mlp probe = p;
    double worst = 0;
    for (Eigen::Index i : coords) {
        const double x0 = p.params()(i);
        probe.params_mut()(i) = x0 + h;
        const double lp = f(probe).loss;
        probe.params_mut()(i) = x0 - h;
        const double lm = f(probe).loss;
        probe.params_mut()(i) = x0;
        const double fd = (lp - lm) / (2 * h);
        const double denom = std::max({std::abs(analytic(i)), std::abs(fd), 1e-5});
        worst = std::max(worst, std::abs(analytic(i) - fd) / denom);
    }
    return worst;
}

}  // namespace glocad
