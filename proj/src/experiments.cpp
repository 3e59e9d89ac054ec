#include "glocad/experiments.hpp"

#include <algorithm>

#include "glocad/errors.hpp"

namespace glocad {

RingExperiment RingExperiment::defaults(std::uint64_t seed) {
    RingExperiment e;
    e.train.seed = seed;
    e.train.optimizer = OptimizerKind::adam;
    e.train.train_bandwidth = true;
    e.train.dataset_size = 128000;
    return e;
}

RingResult run_ring_experiment(const RingExperiment& e, const IterationHook& extra) {
    e.train.validate();
    detail::require(e.eval_samples >= 1 && e.snapshot_samples >= 1, "ring: sample counts must be positive");
    detail::require(e.radius > 0, "ring: radius must be positive");
    const GaussianMixture ring = build_ring_mogmm(e.ring);
    const Sampler target = mixture_sampler(ring);

    Rng init = stream_rng(e.train.seed, kStreamInit);
    MlpGenerator gen = MlpGenerator::make_default(init);
    if (e.initial_params) {
        detail::require(e.initial_params->size() == gen.params().size(), "ring: checkpoint has the wrong parameter count");
        gen.set_params(*e.initial_params);
    }

    RingResult out;
    out.kernel = e.kernel;
    out.witnesses = init_witnesses(target, gen, e.train, init);

    auto snap = [&](long it, const Generator& g, const WitnessSet& V, const Kernel& k) {
        Rng r = stream_rng(e.train.seed, kStreamEval);
        out.snapshots.push_back({it, g.sample(e.snapshot_samples, r), V.points, k.bandwidth_sq});
    };
    TrainHooks hooks;
    hooks.on_iteration = [&](long it, const Generator& g, const WitnessSet& V, const Kernel& k) {
        if (std::find(e.snapshot_iters.begin(), e.snapshot_iters.end(), it) != e.snapshot_iters.end()) snap(it, g, V, k);
        return extra ? extra(it, g, V, k) : false;
    };
    out.log = glocad_train(target, gen, out.witnesses, out.kernel, e.train, hooks);

    Rng eval = stream_rng(e.train.seed, kStreamEval);
    out.coverage = mode_coverage(gen.sample(e.eval_samples, eval), ring, e.radius);
    out.generator_params = gen.params();
    return out;
}

ContinualExperiment ContinualExperiment::defaults(std::uint64_t seed) {
    ContinualExperiment e;
    const double var = 0.05 * 0.05;
    Eigen::MatrixXd m1(2, 2);
    m1 << -1, 0, 1, 0;
    e.scenario.d1 = GaussianMixture(Eigen::Vector2d(0.5, 0.5), m1, Eigen::Vector2d(var, var));
    Eigen::MatrixXd m2(1, 2);
    m2 << 0, 2;
    e.scenario.d2 = GaussianMixture(Eigen::VectorXd::Ones(1), m2, Eigen::VectorXd::Constant(1, var));
    e.scenario.train.seed = seed;
    e.scenario.train.optimizer = OptimizerKind::sgd;
    e.scenario.train.gamma = 0.05;
    e.scenario.train.train_bandwidth = false;
    e.scenario.train.dataset_size = 64000;
    e.scenario.kernel = Kernel::gaussian(1.0);
    e.scenario.lambda_b = 10.0;
    e.scenario.phase2_max_iters = 3000;
    return e;
}

ContinualReport run_continual_experiment(const ContinualExperiment& e) {
    Rng init = stream_rng(e.scenario.train.seed, kStreamInit);
    MlpGenerator gen = MlpGenerator::make_default(init);
    return continual_scenario(e.scenario, PhaseSchedule::fork_at(e.fork), gen);
}

}  // namespace glocad
