// Runs the ten acceptance criteria and prints one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "glocad/cli.hpp"
#include "glocad/experiments.hpp"
#include "glocad/verify.hpp"

using namespace glocad;
namespace fs = std::filesystem;

namespace {

// Wall-clock limits in seconds.
constexpr double kLimitClosedForms = 10;
constexpr double kLimitDerivatives = 30;
constexpr double kLimitConsistency = 120;
constexpr double kLimitDynamics = 10;
constexpr double kLimitStability = 5;
constexpr double kLimitGradientCurve = 1;
constexpr double kLimitRing = 15 * 60;
constexpr double kLimitContinual = 20 * 60;
constexpr double kLimitLambdaZero = 30;

constexpr int kRingSeeds = 10;
constexpr int kRingMinCovered = 14;
constexpr int kRingMinSeeds = 8;
constexpr int kContinualSeeds = 10;

struct Outcome {
    bool passed;
    std::string detail;
};

Outcome from_check(const verify::CheckResult& r) {
    std::ostringstream os;
    os << r.name << " value " << r.value << " tol " << r.tolerance << "; " << r.detail;
    return {r.passed, os.str()};
}

Outcome ring_coverage() {
    int good = 0;
    std::ostringstream os;
    os << "covered per seed:";
    for (int s = 0; s < kRingSeeds; ++s) {
        const RingResult r = run_ring_experiment(RingExperiment::defaults(static_cast<std::uint64_t>(s)));
        os << ' ' << r.coverage.covered;
        std::cout << "    seed " << s << ": " << r.coverage.covered << "/15 after " << r.log.iterations << " iterations"
                  << std::endl;
        if (r.coverage.covered >= kRingMinCovered) ++good;
    }
    os << "; " << good << "/" << kRingSeeds << " seeds with >= " << kRingMinCovered << "/15 (need " << kRingMinSeeds << ")";
    return {good >= kRingMinSeeds, os.str()};
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome continual_ordering() {
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> a, b;
    for (int s = 0; s < kContinualSeeds; ++s) {
        const ContinualReport r = run_continual_experiment(ContinualExperiment::defaults(static_cast<std::uint64_t>(s)));
        a.push_back(r.mmd_only.capture_iter ? double(*r.mmd_only.capture_iter) : inf);
        b.push_back(r.witness.capture_iter ? double(*r.witness.capture_iter) : inf);
        std::cout << "    seed " << s << ": mmd-only " << a.back() << ", witness " << b.back() << std::endl;
    }
    const double ma = median(a), mb = median(b);
    std::ostringstream os;
    os << "median capture iteration: mmd-only " << ma << ", witness-seeded " << mb << " (no capture counts as inf)";
    return {mb < ma, os.str()};
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "glocad_acceptance_replay";
    fs::remove_all(root);
    const std::vector<std::vector<std::string>> runs{
        {"single-gaussian"},
        {"phase-portrait"},
        {"mog1d"},
        {"spiky-sensitivity"},
        {"ume-gradient"},
        {"glocad2d", "--dataset_size", "6400", "--max_epochs", "2"},
        {"continual2d", "--fork", "300", "--phase2_max_iters", "300"},
        {"verify", "--fast"},
    };
    int ok = 0, i = 0;
    std::ostringstream os;
    for (auto args : runs) {
        const fs::path dir = root / ("run" + std::to_string(i++));
        const std::string name = args.front();
        args.insert(args.end(), {"--seed", "11", "--out", dir.string()});
        std::ostringstream out, err;
        const int first = cli::run(args, out, err);
        const int again = first == 0 ? cli::run({"replay", "--manifest", (dir / "manifest.json").string(), "--out",
                                                 (dir / "replay").string()},
                                                out, err)
                                     : -1;
        const bool same = first == 0 && again == 0;
        ok += same;
        os << name << (same ? " identical" : " DIFFERS") << "; ";
    }
    fs::remove_all(root);
    os << ok << "/" << runs.size() << " subcommands";
    return {ok == static_cast<int>(runs.size()), os.str()};
}

struct Criterion {
    int id;
    const char* name;
    double limit;  // seconds; 0 means per-command
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));
    const verify::BatteryOptions full{false, 0};

    const std::vector<Criterion> criteria{
        {1, "closed-form oracle equivalence", kLimitClosedForms, [] { return from_check(verify::check_closed_forms()); }},
        {2, "derivative correctness", kLimitDerivatives, [&] { return from_check(verify::check_derivatives(full)); }},
        {3, "estimator consistency", kLimitConsistency, [&] { return from_check(verify::check_estimator_consistency(full)); }},
        {4, "single-gaussian dynamics", kLimitDynamics, [] { return from_check(verify::check_single_gaussian_dynamics()); }},
        {5, "equilibrium stability", kLimitStability, [] { return from_check(verify::check_stability()); }},
        {6, "UME gradient curve", kLimitGradientCurve, [] { return from_check(verify::check_ume_gradient_curve()); }},
        {7, "ring mode coverage", kLimitRing, ring_coverage},
        {8, "continual capture ordering", kLimitContinual, continual_ordering},
        {9, "zero-lambda reduction", kLimitLambdaZero, [&] { return from_check(verify::check_lambda_zero_reduction(full)); }},
        {10, "manifest determinism", 0, determinism},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = c.limit == 0 || secs <= c.limit;
        const bool pass = o.passed && in_time;
        failed += !pass;
        std::printf("%s %2d %s: %s [%.1f s", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
        if (c.limit > 0) std::printf(" / limit %.0f s%s", c.limit, in_time ? "" : ", TOO SLOW");
        std::printf("]\n");
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
