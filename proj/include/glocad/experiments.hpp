#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "glocad/glocad.hpp"

namespace glocad {

/// The 2D ring-of-rings run.
struct RingExperiment {
    RingMoGMMSpec ring;
    TrainConfig train;
    Kernel kernel = Kernel::gaussian(1.0);
    int eval_samples = 10000;
    double radius = 0.15;
    std::vector<long> snapshot_iters{10, 200, 400, 1000};
    int snapshot_samples = 1000;
    std::optional<Eigen::VectorXd> initial_params;  // resume from a checkpoint

    static RingExperiment defaults(std::uint64_t seed);
};

struct Snapshot {
    long iter = 0;
    Eigen::MatrixXd samples;
    Eigen::MatrixXd witnesses;
    double bandwidth_sq = 0;
};

struct RingResult {
    TrainLog log;
    CoverageReport coverage;
    std::vector<Snapshot> snapshots;
    WitnessSet witnesses;
    Kernel kernel;
    Eigen::VectorXd generator_params;
};

/// `extra` runs after the snapshot logic on every iteration; returning true stops.
RingResult run_ring_experiment(const RingExperiment& e, const IterationHook& extra = {});

/// Two-phase fork scenario on 2D mixtures.
struct ContinualExperiment {
    ContinualConfig scenario;
    long fork = 3000;

    static ContinualExperiment defaults(std::uint64_t seed);
};

ContinualReport run_continual_experiment(const ContinualExperiment& e);

}  // namespace glocad
