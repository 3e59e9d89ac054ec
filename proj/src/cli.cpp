#include "glocad/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "glocad/analytic.hpp"
#include "glocad/errors.hpp"
#include "glocad/experiments.hpp"
#include "glocad/glocad.hpp"
#include "glocad/odesim.hpp"
#include "glocad/svg.hpp"
#include "glocad/verify.hpp"

namespace glocad::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path);
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw NumericalError("sha256: init failed");
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    std::string hex;
    char byte[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(byte, sizeof byte, "%02x", md[i]);
        hex += byte;
    }
    return hex;
}

void write_atomic(const std::string& path, const std::string& contents) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    const std::string tmp = path + ".tmp";
    {
        std::ofstream o(tmp, std::ios::binary);
        if (!o) throw InputError("cannot write " + path);
        o << contents;
        if (!o) throw InputError("write failed for " + path);
    }
    fs::rename(tmp, p);
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct LambdaValue {
    double value = 0;
    bool ume_only = false;
};

LambdaValue parse_lambda(const std::string& s) {
    std::string low = s;
    std::transform(low.begin(), low.end(), low.begin(), [](unsigned char c) { return std::tolower(c); });
    if (low == "inf" || low == "infinity") return {0.0, true};
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw InputError("lambda must be a non-negative number or 'inf', got '" + s + "'");
    }
    detail::require(used == s.size() && std::isfinite(v) && v >= 0,
                    "lambda must be a non-negative number or 'inf', got '" + s + "'");
    return {v, false};
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep))
        if (!cur.empty()) out.push_back(cur);
    return out;
}

double to_double(const std::string& s, const std::string& what) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    detail::require(used == s.size() && std::isfinite(v), what + ": '" + s + "' is not a number");
    return v;
}

std::vector<double> parse_doubles(const std::string& s, const std::string& what) {
    std::vector<double> out;
    for (const auto& t : split(s, ',')) out.push_back(to_double(t, what));
    detail::require(!out.empty(), what + ": empty list");
    return out;
}

std::vector<long> parse_longs(const std::string& s, const std::string& what) {
    std::vector<long> out;
    for (double d : parse_doubles(s, what)) {
        detail::require(d == std::floor(d) && d >= 0, what + ": entries must be non-negative integers");
        out.push_back(static_cast<long>(d));
    }
    return out;
}

/// "x,y;x,y" -> rows
Eigen::MatrixXd parse_points(const std::string& s, const std::string& what) {
    const auto rows = split(s, ';');
    detail::require(!rows.empty(), what + ": no points");
    Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), 2);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto c = parse_doubles(rows[i], what);
        detail::require(c.size() == 2, what + ": each point needs two coordinates");
        M(static_cast<Eigen::Index>(i), 0) = c[0];
        M(static_cast<Eigen::Index>(i), 1) = c[1];
    }
    return M;
}

OptimizerKind parse_optimizer(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw InputError("optimizer must be sgd or adam, got '" + s + "'");
}

MmdVariant parse_variant(const std::string& s) {
    if (s == "biased") return MmdVariant::biased;
    if (s == "unbiased") return MmdVariant::unbiased;
    throw InputError("mmd_variant must be biased or unbiased, got '" + s + "'");
}

WitnessInit parse_witness_init(const std::string& s) {
    if (s == "data") return WitnessInit::data;
    if (s == "half_data_half_generated") return WitnessInit::half_data_half_generated;
    throw InputError("witness_init must be data or half_data_half_generated, got '" + s + "'");
}

struct KernelOpts {
    std::string family = "gaussian";
    double bandwidth_sq = 1.0;
    double imq_c = 1.0;
    double imq_b = -0.5;

    Kernel build() const {
        if (family == "gaussian") return Kernel::gaussian(bandwidth_sq);
        if (family == "imq") return Kernel::imq(imq_c, imq_b);
        throw InputError("kernel must be gaussian or imq, got '" + family + "'");
    }
};

void add_kernel(CLI::App* s, KernelOpts& k) {
    s->add_option("--kernel", k.family, "gaussian or imq");
    s->add_option("--bandwidth_sq", k.bandwidth_sq, "gaussian sigma^2");
    s->add_option("--imq_c", k.imq_c);
    s->add_option("--imq_b", k.imq_b);
}

struct TrainOpts {
    int J = 20;
    std::string lambda = "0.1";
    double gamma = 1e-3;
    int B = 64;
    int n_g = 1, n_v = 1;
    double grad_threshold = 1e-5;
    int max_epochs = 20;
    int dataset_size = 64000;
    std::string optimizer = "adam";
    std::string mmd_variant = "biased";
    std::string witness_init = "data";
    bool train_bandwidth = true;
    double bandwidth_gamma = 0;

    TrainConfig build(std::uint64_t seed) const {
        TrainConfig c;
        c.J = J;
        const auto l = parse_lambda(lambda);
        c.lambda = l.value;
        c.ume_only = l.ume_only;
        c.gamma = gamma;
        c.B = B;
        c.n_g = n_g;
        c.n_v = n_v;
        c.grad_threshold = grad_threshold;
        c.max_epochs = max_epochs;
        c.dataset_size = dataset_size;
        c.seed = seed;
        c.optimizer = parse_optimizer(optimizer);
        c.mmd_variant = parse_variant(mmd_variant);
        c.witness_init = parse_witness_init(witness_init);
        c.train_bandwidth = train_bandwidth;
        c.bandwidth_gamma = bandwidth_gamma;
        c.validate();
        return c;
    }
};

void add_train(CLI::App* s, TrainOpts& t) {
    s->add_option("--J", t.J, "witness count");
    s->add_option("--lambda", t.lambda, "UME weight or 'inf'");
    s->add_option("--gamma", t.gamma, "learning rate");
    s->add_option("--B", t.B, "batch size");
    s->add_option("--n_g", t.n_g);
    s->add_option("--n_v", t.n_v);
    s->add_option("--grad_threshold", t.grad_threshold);
    s->add_option("--max_epochs", t.max_epochs);
    s->add_option("--dataset_size", t.dataset_size, "samples per epoch; an epoch is dataset_size/B iterations");
    s->add_option("--optimizer", t.optimizer, "sgd or adam");
    s->add_option("--mmd_variant", t.mmd_variant, "biased or unbiased");
    s->add_option("--witness_init", t.witness_init, "data or half_data_half_generated");
    s->add_option("--train_bandwidth", t.train_bandwidth, "ascend log sigma^2 with the witnesses");
    s->add_option("--bandwidth_gamma", t.bandwidth_gamma, "bandwidth step; 0 uses gamma");
}

// Per-run output directory, file inventory and manifest.
class RunContext {
public:
    RunContext(std::string sub, fs::path dir, std::string config, std::uint64_t seed, bool plots)
        : sub_(std::move(sub)), dir_(std::move(dir)), config_(std::move(config)), seed_(seed), plots_(plots),
          started_(utc_now()) {
        fs::create_directories(dir_);
    }

    void write(const std::string& name, const std::string& contents) {
        write_atomic((dir_ / name).string(), contents);
        if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
    }
    void plot(const std::string& name, const std::string& svg_text) {
        if (plots_) write(name, svg_text);
    }
    void track(const std::string& name) {
        if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
    }
    const fs::path& dir() const { return dir_; }
    bool plots() const { return plots_; }

    json summary = json::object();

    void finish(const std::string& status, const std::string& message = "") {
        json m;
        m["subcommand"] = sub_;
        m["seed"] = seed_;
        m["config"] = config_;
        m["started"] = started_;
        m["finished"] = utc_now();
        m["status"] = status;
        if (!message.empty()) m["message"] = message;
        m["summary"] = summary;
        json outs = json::array();
        for (const auto& f : files_) {
            const auto p = dir_ / f;
            if (!fs::exists(p)) continue;
            outs.push_back({{"file", f}, {"sha256", sha256_file(p.string())}, {"bytes", fs::file_size(p)}});
        }
        m["outputs"] = outs;
        write_atomic((dir_ / "manifest.json").string(), m.dump(2) + "\n");
    }

private:
    std::string sub_;
    fs::path dir_;
    std::string config_;
    std::uint64_t seed_;
    bool plots_;
    std::string started_;
    std::vector<std::string> files_;
};

struct VerificationFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- subcommands

struct SingleGaussianOpts {
    std::string lambda = "5";
    double sigma_sq = 2.0;
    double v0 = 0.4;
    double m_q0 = -1.0;
    double dt = 1e-2;
    double t_end = 200.0;
};

void cmd_single_gaussian(const SingleGaussianOpts& o, RunContext& ctx) {
    const auto l = parse_lambda(o.lambda);
    DynState1G probe{o.m_q0, o.v0, l.value, l.ume_only, o.sigma_sq};
    probe.validate();
    VectorField f = [&](const Eigen::VectorXd& x) {
        const auto r = dyn_single_gaussian({x(0), x(1), l.value, l.ume_only, o.sigma_sq});
        return Eigen::Vector2d(r.dm_q, r.dv).eval();
    };
    Trajectory traj;
    traj.meta.field_name = "single_gaussian";
    try {
        rk4_integrate(f, Eigen::Vector2d(o.m_q0, o.v0), o.dt, o.t_end, traj);
    } catch (const DivergenceError&) {
        ctx.write("trajectory.csv", traj.to_csv());
        throw;
    }
    ctx.write("trajectory.csv", traj.to_csv());
    ctx.summary["final_m_q"] = traj.final_state()(0);
    ctx.summary["final_v"] = traj.final_state()(1);
    if (ctx.plots()) {
        svg::Series m{"m_q", {}, {}}, v{"v", {}, {}};
        for (std::size_t i = 0; i < traj.size(); ++i) {
            m.x.push_back(traj.times[i]);
            m.y.push_back(traj.states[i](0));
            v.x.push_back(traj.times[i]);
            v.y.push_back(traj.states[i](1));
        }
        ctx.plot("trajectory.svg", svg::line_plot({m, v}, "single Gaussian, lambda = " + o.lambda, "t", "value"));
    }
}

struct PortraitOpts {
    std::string lambda = "5";
    double sigma_sq = 1.0;
    double mq_min = -3, mq_max = 3, v_min = -3, v_max = 3;
    int nx = 21, ny = 21;
};

void cmd_phase_portrait(const PortraitOpts& o, RunContext& ctx) {
    const auto l = parse_lambda(o.lambda);
    DynState1G{0, 0, l.value, l.ume_only, o.sigma_sq}.validate();
    VectorField f = [&](const Eigen::VectorXd& x) {
        const auto r = dyn_single_gaussian({x(0), x(1), l.value, l.ume_only, o.sigma_sq});
        return Eigen::Vector2d(r.dm_q, r.dv).eval();
    };
    const auto nodes = phase_portrait(f, GridSpec{o.mq_min, o.mq_max, o.v_min, o.v_max, o.nx, o.ny});
    ctx.write("portrait.csv", portrait_to_csv(nodes));
    double on_line = 0;
    bool has_line = false;
    for (const auto& n : nodes)
        if (n.x == 0.0) {
            has_line = true;
            on_line = std::max(on_line, std::hypot(n.dx, n.dy));
        }
    if (has_line) ctx.summary["max_rate_on_m_q_zero"] = on_line;
    ctx.plot("portrait.svg", svg::quiver_plot(nodes, "phase portrait, sigma^2 = " + fmt(o.sigma_sq)));
}

struct Mog1dOpts {
    std::string lambda = "5";
    double sigma_sq = 2.0;
    double v0 = 0.4;
    double m1_0 = -0.5, m2_0 = 0.5;
    double dt = 1e-2;
    double t_end = 100.0;
    double tol = 1e-3;
};

void cmd_mog1d(const Mog1dOpts& o, RunContext& ctx) {
    const auto l = parse_lambda(o.lambda);
    detail::require(o.sigma_sq > 0 && std::isfinite(o.sigma_sq), "mog1d: sigma_sq must be positive");
    const MoG1dParams p{l.value, l.ume_only, o.sigma_sq};
    const GaussianMixture target = default_mog1d_target();
    VectorField f = [&](const Eigen::VectorXd& x) {
        const auto r = dyn_mog1d(x(0), x(1), x(2), p, target);
        return Eigen::Vector3d(r[0], r[1], r[2]).eval();
    };
    Trajectory traj;
    traj.meta.field_name = "mog1d";
    try {
        rk4_integrate(f, Eigen::Vector3d(o.m1_0, o.m2_0, o.v0), o.dt, o.t_end, traj);
    } catch (const DivergenceError&) {
        ctx.write("trajectory.csv", traj.to_csv());
        throw;
    }
    ctx.write("trajectory.csv", traj.to_csv());
    // First step after which both means stay within tol of the target means.
    const double lo = std::min(target.means(0, 0), target.means(1, 0)), hi = std::max(target.means(0, 0), target.means(1, 0));
    long settled = -1;
    for (long i = static_cast<long>(traj.size()) - 1; i >= 0; --i) {
        const auto& s = traj.states[static_cast<std::size_t>(i)];
        const double err = std::max(std::abs(std::min(s(0), s(1)) - lo), std::abs(std::max(s(0), s(1)) - hi));
        if (err >= o.tol) break;
        settled = i;
    }
    ctx.summary["steps_to_converge"] = settled;
    ctx.summary["final_m1"] = traj.final_state()(0);
    ctx.summary["final_m2"] = traj.final_state()(1);
    ctx.summary["final_v"] = traj.final_state()(2);
    if (ctx.plots()) {
        svg::Series a{"m1", {}, {}}, b{"m2", {}, {}}, v{"v", {}, {}};
        for (std::size_t i = 0; i < traj.size(); ++i) {
            a.x.push_back(traj.times[i]);
            a.y.push_back(traj.states[i](0));
            b.x.push_back(traj.times[i]);
            b.y.push_back(traj.states[i](1));
            v.x.push_back(traj.times[i]);
            v.y.push_back(traj.states[i](2));
        }
        ctx.plot("trajectory.svg", svg::line_plot({a, b, v}, "mixture means, lambda = " + o.lambda, "t", "value"));
    }
}

struct SpikyOpts {
    double w = 0.5;
    double sigma_sq = 1.0;
    std::string vs = "0,0.5,1,2";
    double sq_min = 0.1, sq_max = 3.0;
    int n = 300;
};

void cmd_spiky(const SpikyOpts& o, RunContext& ctx) {
    const auto vs = parse_doubles(o.vs, "vs");
    detail::require(o.n >= 2 && o.sq_min > 0 && o.sq_max > o.sq_min, "spiky: need n >= 2 and 0 < sq_min < sq_max");
    std::ostringstream csv;
    csv << "sigma_q,v,sens_mmd,sens_ume\n";
    json peaks = json::array();
    std::vector<svg::Series> series;
    svg::Series mmd{"MMD", {}, {}};
    for (double v : vs) {
        svg::Series s{"UME v=" + fmt(v), {}, {}};
        double best = -1, arg = 0;
        for (int i = 0; i < o.n; ++i) {
            const double sq = o.sq_min + (o.sq_max - o.sq_min) * i / (o.n - 1);
            const SpikySpec spec{o.w, sq * sq, o.sigma_sq};
            spec.validate();
            const double a = sens_mmd(spec), b = sens_ume(spec, v);
            csv << fmt(sq) << ',' << fmt(v) << ',' << fmt(a) << ',' << fmt(b) << '\n';
            if (std::abs(b) > best) best = std::abs(b), arg = sq;
            s.x.push_back(sq);
            s.y.push_back(b);
            if (v == vs.front()) {
                mmd.x.push_back(sq);
                mmd.y.push_back(a);
            }
        }
        peaks.push_back({{"v", v}, {"peak_sigma_q", arg}, {"peak_abs_sens_ume", best}});
        series.push_back(std::move(s));
    }
    series.insert(series.begin(), mmd);
    ctx.write("sensitivity.csv", csv.str());
    ctx.summary["ume_peaks"] = peaks;
    ctx.plot("sensitivity.svg", svg::line_plot(series, "sensitivity, w = " + fmt(o.w), "sigma_q", "d/d sigma_q"));
}

struct UmeGradOpts {
    double m_p = 1.0;
    double omega = 0.5;
    std::string sigma_sqs = "1,4";
    double mq_min = -1.0, mq_max = 3.0;
    int n = 401;
};

void cmd_ume_gradient(const UmeGradOpts& o, RunContext& ctx) {
    const auto s2s = parse_doubles(o.sigma_sqs, "sigma_sqs");
    detail::require(o.n >= 2 && o.mq_max > o.mq_min, "ume-gradient: need n >= 2 and mq_min < mq_max");
    std::ostringstream csv;
    csv << "sigma_sq,m_q,grad\n";
    std::vector<svg::Series> series;
    json peaks = json::array();
    for (double s2 : s2s) {
        svg::Series s{"sigma^2=" + fmt(s2), {}, {}};
        double peak = 0;
        for (int i = 0; i < o.n; ++i) {
            const double mq = o.mq_min + (o.mq_max - o.mq_min) * i / (o.n - 1);
            const double g = ume_grad_mq(o.m_p, mq, s2, o.omega);
            csv << fmt(s2) << ',' << fmt(mq) << ',' << fmt(g) << '\n';
            peak = std::max(peak, std::abs(g));
            s.x.push_back(mq);
            s.y.push_back(g);
        }
        peaks.push_back({{"sigma_sq", s2}, {"max_abs_grad", peak}});
        series.push_back(std::move(s));
    }
    ctx.write("ume_gradient.csv", csv.str());
    ctx.summary["peaks"] = peaks;
    ctx.plot("ume_gradient.svg", svg::line_plot(series, "-grad UME^2 in m_q, m_p = " + fmt(o.m_p), "m_q", "gradient"));
}

std::string generated_csv(const Eigen::MatrixXd& Y) {
    MixtureSample s{Y, Eigen::VectorXi::Constant(Y.rows(), -1)};
    return samples_to_csv(s);
}

std::string witness_rows(long iter, const Eigen::MatrixXd& V) {
    std::ostringstream os;
    for (Eigen::Index j = 0; j < V.rows(); ++j) {
        os << iter << ',' << j;
        for (Eigen::Index c = 0; c < V.cols(); ++c) os << ',' << fmt(V(j, c));
        os << '\n';
    }
    return os.str();
}

std::string witness_header(Eigen::Index dim) {
    std::string h = "iter,j";
    for (Eigen::Index c = 0; c < dim; ++c) h += ",coord_" + std::to_string(c);
    return h + "\n";
}

struct Glocad2dOpts {
    TrainOpts train;
    KernelOpts kernel;
    int outer_count = 5, inner_count = 3;
    double outer_radius = 4.0, inner_radius = 1.0, component_sd = 0.05;
    int eval_samples = 10000;
    double radius = 0.15;
    std::string snapshot_iters = "10,200,400,1000";
    int snapshot_samples = 1000;
    long snapshot_every = 0;
};

void cmd_glocad2d(const Glocad2dOpts& o, const std::string& resume, std::uint64_t seed, RunContext& ctx) {
    RingExperiment e;
    e.train = o.train.build(seed);
    e.kernel = o.kernel.build();
    e.ring = RingMoGMMSpec{o.outer_count, o.inner_count, o.outer_radius, o.inner_radius, o.component_sd * o.component_sd};
    e.ring.validate();
    e.eval_samples = o.eval_samples;
    e.radius = o.radius;
    e.snapshot_iters = parse_longs(o.snapshot_iters, "snapshot_iters");
    e.snapshot_samples = o.snapshot_samples;
    detail::require(o.snapshot_every >= 0, "snapshot_every must be non-negative");
    if (!resume.empty()) e.initial_params = Mlp::load(resume).params();

    const fs::path snapdir = ctx.dir() / "snapshots";
    IterationHook checkpoint;
    if (o.snapshot_every > 0) {
        checkpoint = [&](long it, const Generator& g, const WitnessSet&, const Kernel&) {
            if (it % o.snapshot_every == 0) {
                fs::create_directories(snapdir);
                const std::string name = "snapshots/generator_" + std::to_string(it) + ".bin";
                dynamic_cast<const MlpGenerator&>(g).net().save((ctx.dir() / name).string());
                ctx.track(name);
                ctx.track(name + ".shape");
            }
            return false;
        };
    }
    const RingResult r = run_ring_experiment(e, checkpoint);

    ctx.write("train_log.csv", r.log.to_csv());
    std::string trace = witness_header(2);
    for (const auto& s : r.snapshots) {
        trace += witness_rows(s.iter, s.witnesses);
        ctx.write("samples_iter_" + std::to_string(s.iter) + ".csv", generated_csv(s.samples));
    }
    trace += witness_rows(r.log.iterations, r.witnesses.points);
    ctx.write("witness_trace.csv", trace);

    const GaussianMixture ring = build_ring_mogmm(e.ring);
    std::ostringstream cov;
    cov << "component,mean_x0,mean_x1,hit_fraction,covered\n";
    for (int j = 0; j < ring.components(); ++j)
        cov << j << ',' << fmt(ring.means(j, 0)) << ',' << fmt(ring.means(j, 1)) << ',' << fmt(r.coverage.hit_fraction(j))
            << ',' << (r.coverage.hit_fraction(j) >= r.coverage.coverage_min ? 1 : 0) << '\n';
    ctx.write("coverage.csv", cov.str());
    MlpGenerator final_gen = [&] {
        Rng init = stream_rng(seed, kStreamInit);
        MlpGenerator g = MlpGenerator::make_default(init);
        g.set_params(r.generator_params);
        return g;
    }();
    final_gen.net().save((ctx.dir() / "generator_final.bin").string());
    ctx.track("generator_final.bin");
    ctx.track("generator_final.bin.shape");

    ctx.summary["covered"] = r.coverage.covered;
    ctx.summary["components"] = ring.components();
    ctx.summary["iterations"] = r.log.iterations;
    ctx.summary["stop_reason"] = r.log.stop_reason;
    ctx.summary["final_bandwidth_sq"] = r.kernel.bandwidth_sq;

    if (ctx.plots()) {
        Rng tr = stream_rng(seed, kStreamEval);
        const Eigen::MatrixXd real = sample(ring, 1000, tr).points;
        for (const auto& s : r.snapshots)
            ctx.plot("frame_iter_" + std::to_string(s.iter) + ".svg",
                     svg::scatter_plot({{"data", real, 1.0}, {"generated", s.samples, 1.2}, {"witnesses", s.witnesses, 3.5}},
                                       "iteration " + std::to_string(s.iter)));
        svg::Series total{"loss_total", {}, {}};
        for (const auto& row : r.log.rows) {
            total.x.push_back(static_cast<double>(row.iter));
            total.y.push_back(row.loss_total);
        }
        ctx.plot("loss.svg", svg::line_plot({total}, "training loss", "iteration", "loss"));
    }
}

struct Continual2dOpts {
    TrainOpts train;
    KernelOpts kernel;
    std::string d1_means = "-1,0;1,0";
    std::string d2_means = "0,2";
    double component_sd = 0.05;
    long fork = 3000;
    double lambda_b = 10;
    long phase2_max_iters = 3000;
    int check_every = 10;
    int eval_samples = 1000;
    double radius = 0.15;
    double capture_threshold = 0.1;
};

GaussianMixture equal_mixture(const Eigen::MatrixXd& means, double var) {
    const Eigen::Index k = means.rows();
    return GaussianMixture(Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k)), means,
                           Eigen::VectorXd::Constant(k, var));
}

void cmd_continual2d(const Continual2dOpts& o, std::uint64_t seed, RunContext& ctx) {
    ContinualExperiment e;
    e.scenario.train = o.train.build(seed);
    e.scenario.kernel = o.kernel.build();
    detail::require(o.component_sd > 0, "component_sd must be positive");
    const double var = o.component_sd * o.component_sd;
    e.scenario.d1 = equal_mixture(parse_points(o.d1_means, "d1_means"), var);
    e.scenario.d2 = equal_mixture(parse_points(o.d2_means, "d2_means"), var);
    e.scenario.lambda_b = o.lambda_b;
    e.scenario.phase2_max_iters = o.phase2_max_iters;
    e.scenario.check_every = o.check_every;
    e.scenario.eval_samples = o.eval_samples;
    e.scenario.radius = o.radius;
    e.scenario.capture_threshold = o.capture_threshold;
    detail::require(o.fork >= 1, "fork must be at least 1");
    detail::require(o.lambda_b >= 0 && std::isfinite(o.lambda_b), "lambda_b must be non-negative");
    e.fork = o.fork;
    const ContinualReport rep = run_continual_experiment(e);

    auto cap = [](const BranchResult& b) { return b.capture_iter ? std::to_string(*b.capture_iter) : std::string("-1"); };
    std::ostringstream csv;
    csv << "branch,capture_iter,final_d2_fraction\n"
        << "mmd_only," << cap(rep.mmd_only) << ',' << fmt(rep.mmd_only.final_d2_fraction) << '\n'
        << "witness," << cap(rep.witness) << ',' << fmt(rep.witness.final_d2_fraction) << '\n';
    ctx.write("continual_report.csv", csv.str());
    ctx.write("phase1_log.csv", rep.phase1.to_csv());
    ctx.write("mmd_only_log.csv", rep.mmd_only.log.to_csv());
    ctx.write("witness_log.csv", rep.witness.log.to_csv());
    ctx.summary["capture_iter_mmd_only"] = rep.mmd_only.capture_iter ? json(*rep.mmd_only.capture_iter) : json(nullptr);
    ctx.summary["capture_iter_witness"] = rep.witness.capture_iter ? json(*rep.witness.capture_iter) : json(nullptr);
    if (ctx.plots()) {
        svg::Series a{"mmd_only", {}, {}}, b{"witness", {}, {}};
        for (const auto& r : rep.mmd_only.log.rows) a.x.push_back(double(r.iter)), a.y.push_back(r.loss_mmd);
        for (const auto& r : rep.witness.log.rows) b.x.push_back(double(r.iter)), b.y.push_back(r.loss_mmd);
        ctx.plot("branches.svg", svg::line_plot({a, b}, "MMD after the fork", "iteration", "MMD^2"));
    }
}

void cmd_verify(bool fast, std::uint64_t seed, RunContext& ctx, std::ostream& out) {
    const auto results = verify::run_oracle_battery({fast, seed});
    ctx.write("verify_report.json", verify::report_json(results) + "\n");
    bool all = true;
    for (const auto& r : results) {
        out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
        all = all && r.passed;
    }
    ctx.summary["all_passed"] = all;
    if (!all) throw VerificationFailed("oracle battery reported failures");
}

// Full option state of the selected subcommand as INI text.
std::string resolved_config(const CLI::App& app, const CLI::App& sub, std::uint64_t seed, bool plots,
                            const std::string& resume) {
    std::ostringstream os;
    os << "seed = " << seed << "\n";
    os << "plots = " << (plots ? "true" : "false") << "\n";
    if (!resume.empty()) os << "resume = \"" << resume << "\"\n";
    (void)app;
    os << "\n[" << sub.get_name() << "]\n";
    for (const CLI::Option* opt : sub.get_options()) {
        const std::string name = opt->get_single_name();
        if (name == "help" || name == "h" || opt->get_lnames().empty()) continue;
        std::string value;
        if (opt->count() > 0) {
            const auto& res = opt->results();
            for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
        } else {
            value = opt->get_default_str();
        }
        os << name << " = \"" << value << "\"\n";
    }
    return os.str();
}

int replay(const std::string& manifest_path, const std::string& out_dir, std::ostream& out, std::ostream& err) {
    std::ifstream in(manifest_path);
    if (!in) throw InputError("cannot read manifest " + manifest_path);
    json m;
    try {
        in >> m;
    } catch (const json::exception& ex) {
        throw InputError(std::string("malformed manifest: ") + ex.what());
    }
    for (const char* key : {"subcommand", "config", "outputs"})
        detail::require(m.contains(key), std::string("manifest lacks '") + key + "'");
    const fs::path dir = out_dir.empty() ? fs::path(manifest_path).parent_path() / "replay" : fs::path(out_dir);
    fs::create_directories(dir);
    const std::string cfg = (dir / "replay_config.ini").string();
    write_atomic(cfg, m["config"].get<std::string>());
    const std::string sub = m["subcommand"].get<std::string>();
    const int code = run({sub, "--config", cfg, "--out", dir.string()}, out, err);
    if (code != kOk && code != kVerificationFailed) return code;

    int mismatches = 0, compared = 0;
    for (const auto& o : m["outputs"]) {
        const std::string f = o["file"].get<std::string>();
        if (f.size() < 4 || f.substr(f.size() - 4) != ".csv") continue;
        ++compared;
        const fs::path p = dir / f;
        if (!fs::exists(p) || sha256_file(p.string()) != o["sha256"].get<std::string>()) {
            err << "replay: " << f << " differs\n";
            ++mismatches;
        }
    }
    out << "replay: " << compared - mismatches << "/" << compared << " CSV outputs identical\n";
    return mismatches == 0 ? kOk : kVerificationFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Witness-guided moment matching experiments", "glocad"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "INI file; command-line flags override its keys");

    std::optional<std::uint64_t> seed;
    bool plots = false;
    std::string out_dir = "out";
    std::string resume;
    app.add_option("--seed", seed, "RNG seed (required here or in the config file)");
    app.add_flag("--plots", plots, "also write SVG plots");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--resume", resume, "generator checkpoint to start glocad2d from");

    SingleGaussianOpts sg;
    auto* c_sg = app.add_subcommand("single-gaussian", "mean/witness dynamics for one Gaussian");
    c_sg->add_option("--lambda", sg.lambda, "UME weight or 'inf'");
    c_sg->add_option("--sigma_sq", sg.sigma_sq);
    c_sg->add_option("--v0", sg.v0);
    c_sg->add_option("--m_q0", sg.m_q0);
    c_sg->add_option("--dt", sg.dt);
    c_sg->add_option("--t_end", sg.t_end);

    PortraitOpts pp;
    auto* c_pp = app.add_subcommand("phase-portrait", "vector field of the single-Gaussian dynamics");
    c_pp->add_option("--lambda", pp.lambda, "UME weight or 'inf'");
    c_pp->add_option("--sigma_sq", pp.sigma_sq);
    c_pp->add_option("--mq_min", pp.mq_min);
    c_pp->add_option("--mq_max", pp.mq_max);
    c_pp->add_option("--v_min", pp.v_min);
    c_pp->add_option("--v_max", pp.v_max);
    c_pp->add_option("--nx", pp.nx);
    c_pp->add_option("--ny", pp.ny);

    Mog1dOpts mg;
    auto* c_mg = app.add_subcommand("mog1d", "two mixture means with one witness");
    c_mg->add_option("--lambda", mg.lambda, "UME weight or 'inf'");
    c_mg->add_option("--sigma_sq", mg.sigma_sq);
    c_mg->add_option("--v0", mg.v0);
    c_mg->add_option("--m1_0", mg.m1_0);
    c_mg->add_option("--m2_0", mg.m2_0);
    c_mg->add_option("--dt", mg.dt);
    c_mg->add_option("--t_end", mg.t_end);
    c_mg->add_option("--tol", mg.tol, "settling tolerance for steps_to_converge");

    SpikyOpts sp;
    auto* c_sp = app.add_subcommand("spiky-sensitivity", "sensitivity of MMD and UME to a spike width");
    c_sp->add_option("--w", sp.w);
    c_sp->add_option("--sigma_sq", sp.sigma_sq);
    c_sp->add_option("--vs", sp.vs, "comma-separated witness locations");
    c_sp->add_option("--sq_min", sp.sq_min, "smallest sigma_q");
    c_sp->add_option("--sq_max", sp.sq_max, "largest sigma_q");
    c_sp->add_option("--n", sp.n);

    UmeGradOpts ug;
    auto* c_ug = app.add_subcommand("ume-gradient", "UME gradient guide in m_q");
    c_ug->add_option("--m_p", ug.m_p);
    c_ug->add_option("--omega", ug.omega);
    c_ug->add_option("--sigma_sqs", ug.sigma_sqs, "comma-separated bandwidths");
    c_ug->add_option("--mq_min", ug.mq_min);
    c_ug->add_option("--mq_max", ug.mq_max);
    c_ug->add_option("--n", ug.n);

    Glocad2dOpts g2;
    g2.train.dataset_size = 128000;
    auto* c_g2 = app.add_subcommand("glocad2d", "generator training on the 15-mode ring");
    add_train(c_g2, g2.train);
    add_kernel(c_g2, g2.kernel);
    c_g2->add_option("--outer_count", g2.outer_count);
    c_g2->add_option("--inner_count", g2.inner_count);
    c_g2->add_option("--outer_radius", g2.outer_radius);
    c_g2->add_option("--inner_radius", g2.inner_radius);
    c_g2->add_option("--component_sd", g2.component_sd);
    c_g2->add_option("--eval_samples", g2.eval_samples);
    c_g2->add_option("--radius", g2.radius, "mode hit radius");
    c_g2->add_option("--snapshot_iters", g2.snapshot_iters, "comma-separated iterations");
    c_g2->add_option("--snapshot_samples", g2.snapshot_samples);
    c_g2->add_option("--snapshot_every", g2.snapshot_every, "checkpoint period; 0 disables");

    Continual2dOpts ct;
    ct.train.optimizer = "sgd";
    ct.train.gamma = 0.05;
    ct.train.train_bandwidth = false;
    auto* c_ct = app.add_subcommand("continual2d", "fork into MMD-only and witness-seeded branches");
    add_train(c_ct, ct.train);
    add_kernel(c_ct, ct.kernel);
    c_ct->add_option("--d1_means", ct.d1_means, "x,y;x,y");
    c_ct->add_option("--d2_means", ct.d2_means, "x,y;x,y");
    c_ct->add_option("--component_sd", ct.component_sd);
    c_ct->add_option("--fork", ct.fork);
    c_ct->add_option("--lambda_b", ct.lambda_b, "UME weight of the witness branch");
    c_ct->add_option("--phase2_max_iters", ct.phase2_max_iters);
    c_ct->add_option("--check_every", ct.check_every);
    c_ct->add_option("--eval_samples", ct.eval_samples);
    c_ct->add_option("--radius", ct.radius);
    c_ct->add_option("--capture_threshold", ct.capture_threshold);

    bool fast = false;
    auto* c_vf = app.add_subcommand("verify", "oracle battery");
    c_vf->add_flag("--fast", fast, "reduced sample sizes");

    std::string manifest;
    auto* c_rp = app.add_subcommand("replay", "rerun a manifest and compare CSV hashes");
    c_rp->add_option("--manifest", manifest, "manifest.json of an earlier run")->required();

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }

    std::optional<RunContext> ctx;
    try {
        if (c_rp->parsed()) return replay(manifest, app.count("--out") ? out_dir : "", out, err);
        if (!seed) {
            err << "error: --seed is required (flag or config key)\n";
            return kConfigError;
        }
        const CLI::App* sub = app.get_subcommands().front();
        ctx.emplace(sub->get_name(), fs::path(out_dir), resolved_config(app, *sub, *seed, plots, resume), *seed, plots);
        if (c_sg->parsed()) cmd_single_gaussian(sg, *ctx);
        else if (c_pp->parsed()) cmd_phase_portrait(pp, *ctx);
        else if (c_mg->parsed()) cmd_mog1d(mg, *ctx);
        else if (c_sp->parsed()) cmd_spiky(sp, *ctx);
        else if (c_ug->parsed()) cmd_ume_gradient(ug, *ctx);
        else if (c_g2->parsed()) cmd_glocad2d(g2, resume, *seed, *ctx);
        else if (c_ct->parsed()) cmd_continual2d(ct, *seed, *ctx);
        else if (c_vf->parsed()) cmd_verify(fast, *seed, *ctx, out);
        ctx->finish("ok");
        out << "wrote " << (ctx->dir() / "manifest.json").string() << '\n';
        return kOk;
    } catch (const VerificationFailed& e) {
        if (ctx) ctx->finish("verification_failed", e.what());
        err << "error: " << e.what() << '\n';
        return kVerificationFailed;
    } catch (const NumericalError& e) {
        if (ctx) ctx->finish("diverged", e.what());
        err << "error: " << e.what() << '\n';
        return kDivergence;
    } catch (const std::logic_error& e) {
        if (ctx) ctx->finish("config_error", e.what());
        err << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

int run(const std::vector<std::string>& args) { return run(args, std::cout, std::cerr); }

}  // namespace glocad::cli
