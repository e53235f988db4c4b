#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cardylab/harness.hpp"

using namespace cardylab;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config(const std::string& out) {
    ExperimentConfig c;
    c.n_ladder = {8, 16};
    c.samples = 3000;
    c.out_dir = out;
    c.harris.samples_per_decision = 800;
    return c;
}

// every output file except the wall-clock record, keyed by path relative to root
std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file() || e.path().filename() == "timing.txt") continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        out[fs::relative(e.path(), root).string()] = ss.str();
    }
    return out;
}

fs::path fresh_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("cardylab-test-" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

// the arc query used for C_n hits exactly the separating event S_D(A) on shared colorings
TEST(Harness, CrossingAtAMatchesSeparatingEvent) {
    for (const char* name : {"square", "rectangle", "fjord"}) {
        ExperimentConfig c;
        c.domain = {name, {}};
        if (std::string(name) == "rectangle") c.domain.params = {{"aspect", 2.0}};
        if (std::string(name) == "fjord") c.domain.params = {{"w", 0.2}, {"d", 0.6}, {"m", 0.5}};
        auto d = discretize(c, 16);
        int a = d.find_vertex(d.marked[0]);
        auto via_arc = crossing_at_A(d, 4000, 99);
        auto f = estimate_ccs(d, {a}, 4000, 99);
        EXPECT_EQ(via_arc.c_n.hits, f.sD[0].hits) << name;
    }
}

TEST(Harness, ConfigRoundTripAndHash) {
    ExperimentConfig c;
    c.domain = {"rectangle", {{"aspect", 2.0}}};
    c.n_ladder = {8, 32};
    c.samples_per_n[32] = 77;
    c.marks = std::array<Point, 4>{Point{0.5, 0}, Point{1, 0}, Point{1, 1}, Point{0, 1}};
    auto back = config_from_json(to_json(c));
    EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
    EXPECT_EQ(config_hash(back), config_hash(c));
    EXPECT_EQ(back.samples_at(32), 77u);
    EXPECT_EQ(back.samples_at(8), c.samples);
    auto other = c;
    other.seed += 1;
    EXPECT_NE(config_hash(other), config_hash(c));
    // out_dir does not change the experiment
    other = c;
    other.out_dir = "elsewhere";
    EXPECT_EQ(config_hash(other), config_hash(c));
}

TEST(Harness, BadConfigThrows) {
    auto code = [](const json& j) {
        try {
            config_from_json(j);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::IO_ERROR;
    };
    EXPECT_EQ(code({{"n_ladder", {16, 8}}}), ErrorCode::BAD_CONFIG);
    EXPECT_EQ(code({{"n_ladder", json::array()}}), ErrorCode::BAD_CONFIG);
    EXPECT_EQ(code({{"samples", 0}}), ErrorCode::BAD_CONFIG);
    EXPECT_EQ(code({{"exponents", {{"a5", 1.5}}}}), ErrorCode::BAD_CONFIG);
    EXPECT_EQ(code({{"harris", {{"theta", 0.6}}}}), ErrorCode::BAD_CONFIG);
    EXPECT_EQ(code({{"samples", "many"}}), ErrorCode::BAD_CONFIG);
    EXPECT_THROW(load_config("/nonexistent/config.json"), Error);
}

TEST(Harness, StreamsAreDistinct) {
    EXPECT_NE(derive_stream(1, "field", 8), derive_stream(1, "field", 16));
    EXPECT_NE(derive_stream(1, "field", 8), derive_stream(1, "harris", 8));
    EXPECT_NE(derive_stream(1, "field", 8), derive_stream(2, "field", 8));
    EXPECT_EQ(derive_stream(1, "field", 8), derive_stream(1, "field", 8));
}

TEST(Harness, TrianglePointsInsideShrunkenTriangle) {
    auto pts = triangle_points(0.1, 25);
    ASSERT_EQ(pts.size(), 25u);
    const cplx v[3] = {0.9, 0.9 * kTau, 0.9 * kTau2};
    for (auto p : pts)
        for (int k = 0; k < 3; ++k) {
            cplx a = v[k], b = v[(k + 1) % 3];
            EXPECT_GT((std::conj(b - a) * (p - a)).imag(), 0) << "point outside edge " << k;
        }
}

TEST(Harness, OutputsIndependentOfWorkerCount) {
    std::map<std::string, std::string> runs[2];
    const char* workers[2] = {"1", "3"};
    for (int i = 0; i < 2; ++i) {
        setenv("CARDY_LAB_THREADS", workers[i], 1);
        auto dir = fresh_dir(std::string("det") + workers[i]);
        auto c = small_config(dir.string());
        cmd_estimate(c);
        cmd_sigma_holo(c);
        auto h = c;
        h.domain = {"fjord", {{"w", 0.2}, {"d", 0.6}, {"m", 0.5}}};
        h.n_ladder = {16, 32};
        cmd_harris(h);
        runs[i] = snapshot(dir);
        fs::remove_all(dir);
    }
    unsetenv("CARDY_LAB_THREADS");
    ASSERT_FALSE(runs[0].empty());
    EXPECT_EQ(runs[0].size(), runs[1].size());
    for (auto& [k, v] : runs[0]) EXPECT_EQ(v, runs[1][k]) << k;
}

TEST(Harness, RunDirectoryLayout) {
    auto dir = fresh_dir("layout");
    auto c = small_config(dir.string());
    EXPECT_EQ(cmd_estimate(c), 0);
    auto run = dir / ("estimate-" + config_hash(c));
    EXPECT_TRUE(fs::exists(run / "estimate.csv"));
    EXPECT_TRUE(fs::exists(run / "manifest.json"));
    EXPECT_TRUE(fs::exists(run / "assertions.json"));
    EXPECT_TRUE(fs::exists(run / "timing.txt"));
    std::ifstream in(run / "manifest.json");
    auto m = json::parse(in);
    EXPECT_EQ(m["config_hash"], config_hash(c));
    EXPECT_EQ(m["rng"]["streams"].size(), c.n_ladder.size());
    fs::remove_all(dir);
}
