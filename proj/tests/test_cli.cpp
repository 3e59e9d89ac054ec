#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "glocad/cli.hpp"

namespace fs = std::filesystem;
using glocad::cli::run;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("glocad_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& s) const { return (path / s).string(); }
};

int quiet(const std::vector<std::string>& args, std::string* err_text = nullptr) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    if (err_text) *err_text = err.str();
    return code;
}

std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json manifest(const std::string& dir) { return nlohmann::json::parse(slurp(dir + "/manifest.json")); }

}  // namespace

TEST_CASE("a seed is required") {
    TempDir t("seed");
    std::string err;
    CHECK(quiet({"single-gaussian", "--out", t / "a", "--t_end", "1"}, &err) == glocad::cli::kConfigError);
    CHECK(err.find("--seed") != std::string::npos);
    CHECK(quiet({"single-gaussian", "--seed", "1", "--out", t / "a", "--t_end", "1"}) == 0);
}

TEST_CASE("flags override config keys") {
    TempDir t("config");
    {
        std::ofstream cfg(t / "run.ini");
        cfg << "seed = 5\n\n[single-gaussian]\nt_end = 2\nsigma_sq = 0.5\n";
    }
    CHECK(quiet({"single-gaussian", "--config", t / "run.ini", "--out", t / "a"}) == 0);
    auto m = manifest(t / "a");
    CHECK(m["seed"] == 5);
    CHECK(m["config"].get<std::string>().find("sigma_sq = \"0.5\"") != std::string::npos);

    CHECK(quiet({"single-gaussian", "--config", t / "run.ini", "--seed", "9", "--sigma_sq", "3", "--out", t / "b"}) == 0);
    m = manifest(t / "b");
    CHECK(m["seed"] == 9);
    CHECK(m["config"].get<std::string>().find("sigma_sq = \"3\"") != std::string::npos);
    CHECK(m["config"].get<std::string>().find("t_end = \"2\"") != std::string::npos);
}

TEST_CASE("bad arguments are configuration errors") {
    TempDir t("bad");
    CHECK(quiet({"single-gaussian", "--seed", "1", "--bogus", "3", "--out", t / "a"}) == glocad::cli::kConfigError);
    CHECK(quiet({"single-gaussian", "--seed", "1", "--sigma_sq", "-1", "--out", t / "a"}) == glocad::cli::kConfigError);
    CHECK(quiet({"--seed", "1"}) == glocad::cli::kConfigError);
    CHECK(quiet({"ume-gradient", "--seed", "1", "--sigma_sqs", "1,x", "--out", t / "b"}) == glocad::cli::kConfigError);
    CHECK(quiet({"--help"}) == 0);
    const auto m = manifest(t / "a");
    CHECK(m["status"] == "config_error");
}

TEST_CASE("divergence exits with its own code") {
    TempDir t("div");
    CHECK(quiet({"glocad2d", "--seed", "1", "--optimizer", "sgd", "--gamma", "1e12", "--dataset_size", "640",
                 "--max_epochs", "1", "--J", "4", "--out", t / "a"}) == glocad::cli::kDivergence);
    CHECK(manifest(t / "a")["status"] == "diverged");
}

TEST_CASE("reruns from the manifest are byte identical") {
    TempDir t("replay");
    const std::vector<std::vector<std::string>> runs{
        {"single-gaussian", "--t_end", "3"},
        {"phase-portrait", "--nx", "5", "--ny", "4"},
        {"mog1d", "--t_end", "2"},
        {"spiky-sensitivity", "--n", "20"},
        {"ume-gradient", "--n", "21"},
        {"glocad2d", "--J", "4", "--dataset_size", "640", "--max_epochs", "2", "--snapshot_iters", "3,7",
         "--eval_samples", "300", "--snapshot_samples", "50", "--snapshot_every", "10"},
        {"continual2d", "--J", "4", "--fork", "20", "--phase2_max_iters", "30", "--eval_samples", "100",
         "--dataset_size", "640"},
    };
    int i = 0;
    for (auto args : runs) {
        const std::string dir = t / ("r" + std::to_string(i++));
        args.insert(args.end(), {"--seed", "4", "--out", dir});
        INFO(args.front());
        REQUIRE(quiet(args) == 0);
        const auto m = manifest(dir);
        CHECK(m["status"] == "ok");
        CHECK(!m["outputs"].empty());
        std::ostringstream out, err;
        CHECK(run({"replay", "--manifest", dir + "/manifest.json", "--out", dir + "_again"}, out, err) == 0);
        CHECK(out.str().find("CSV outputs identical") != std::string::npos);
    }
}

TEST_CASE("tampered outputs fail the replay") {
    TempDir t("tamper");
    REQUIRE(quiet({"ume-gradient", "--seed", "2", "--n", "11", "--out", t / "a"}) == 0);
    auto m = manifest(t / "a");
    m["outputs"][0]["sha256"] = std::string(64, '0');
    std::ofstream(t / "a/manifest.json") << m.dump(2);
    CHECK(quiet({"replay", "--manifest", t / "a/manifest.json", "--out", t / "b"}) == glocad::cli::kVerificationFailed);
}

TEST_CASE("plots are optional") {
    TempDir t("plots");
    REQUIRE(quiet({"ume-gradient", "--seed", "2", "--n", "11", "--out", t / "a"}) == 0);
    REQUIRE(quiet({"ume-gradient", "--seed", "2", "--n", "11", "--plots", "--out", t / "b"}) == 0);
    bool svg_a = false, svg_b = false;
    for (const auto& e : fs::directory_iterator(t / "a")) svg_a = svg_a || e.path().extension() == ".svg";
    for (const auto& e : fs::directory_iterator(t / "b")) svg_b = svg_b || e.path().extension() == ".svg";
    CHECK_FALSE(svg_a);
    CHECK(svg_b);
    CHECK(slurp(t / "a/ume_gradient.csv") == slurp(t / "b/ume_gradient.csv"));
}

TEST_CASE("example outputs") {
    TempDir t("examples");
    REQUIRE(quiet({"single-gaussian", "--seed", "1", "--lambda", "0", "--m_q0", "0", "--t_end", "2", "--out", t / "flat"}) == 0);
    std::istringstream csv(slurp(t / "flat/trajectory.csv"));
    std::string line;
    std::getline(csv, line);
    std::string first;
    std::getline(csv, first);
    const std::string tail0 = first.substr(first.find(','));
    while (std::getline(csv, line)) CHECK(line.substr(line.find(',')) == tail0);

    REQUIRE(quiet({"spiky-sensitivity", "--seed", "1", "--w", "1", "--n", "10", "--out", t / "w1"}) == 0);
    std::istringstream sp(slurp(t / "w1/sensitivity.csv"));
    std::getline(sp, line);
    CHECK(line == "sigma_q,v,sens_mmd,sens_ume");
    while (std::getline(sp, line)) {
        double sq, v, a, b;
        char c;
        std::istringstream row(line);
        row >> sq >> c >> v >> c >> a >> c >> b;
        CHECK(a == 0.0);
        CHECK(b == 0.0);
    }
    const auto m = manifest(t / "w1");
    CHECK(m["outputs"][0]["sha256"].get<std::string>() == glocad::cli::sha256_file(t / "w1/sensitivity.csv"));
}
