#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "greenlab/experiment.hpp"
#include "json.hpp"

using namespace greenlab;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
    fs::path p = fs::path(::testing::TempDir()) / ("greenlab_" + name);
    fs::remove_all(p);
    return p;
}

int cli(const std::string& args) {
    std::string cmd = std::string(GREENLAB_CLI) + " " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }
}  // namespace

TEST(Config, RoundTripsThroughIni) {
    ExperimentConfig c;
    c.domain = "ellipsoid";
    c.semi_axes = {1.0, 0.8, 0.6};
    c.points = {13, 25};
    c.seed = 77;
    c.verifiers = {"1.12", "2.8"};
    c.band_depth_y = 0.1 + 0.2;
    ExperimentConfig d = parse_config(to_ini(c));
    EXPECT_TRUE(d == c);
    EXPECT_EQ(d.band_depth_y, c.band_depth_y);
    EXPECT_EQ(config_hash(d), config_hash(c));
}

TEST(Config, HashIgnoresTheOutputDirectory) {
    ExperimentConfig a, b;
    b.output = "elsewhere";
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.seed = 2;
    EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, RejectsBadInput) {
    EXPECT_THROW(parse_config("[grid]\npointz = 9\n"), ConfigError);
    EXPECT_THROW(parse_config("[gird]\npoints = 9\n"), ConfigError);
    EXPECT_THROW(parse_config("[grid]\npoints = nine\n"), ConfigError);
    EXPECT_THROW(parse_config("[grid]\npoints = 3\n"), ConfigError);
    EXPECT_THROW(parse_config("[verify]\nverifiers = 1.12 9.9\n"), ConfigError);
    EXPECT_THROW(parse_config("[grid]\nenforce_resolution = maybe\n"), ConfigError);
    try {
        parse_config("[grid]\npoints = 9\n[run\n");
        FAIL() << "no error";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
    EXPECT_THROW(load_config("/nonexistent/greenlab.ini"), ConfigError);
}

TEST(Config, BuildsEveryPreset) {
    for (std::string d : {"ball", "ellipsoid", "bumped_ball", "half_space", "slab"}) {
        ExperimentConfig c;
        c.domain = d;
        EXPECT_NO_THROW(make_domain<3>(c)) << d;
    }
    for (std::string a : {"identity", "constant_diagonal", "sine", "diag_linear", "rotated"}) {
        ExperimentConfig c;
        c.coefficients = a;
        EXPECT_NO_THROW(make_coefficients<3>(c)) << a;
    }
    ExperimentConfig c;
    c.domain = "torus";
    EXPECT_THROW(make_domain<3>(c), ConfigError);
}

TEST(Cli, SolveWritesItsArtifacts) {
    auto out = scratch("solve");
    ASSERT_EQ(cli("solve --grid 9 --out " + out.string()), 0);
    EXPECT_TRUE(fs::exists(out / "solve.json"));
    EXPECT_TRUE(fs::exists(out / "solution_9.csv"));
    EXPECT_TRUE(fs::exists(out / "solution_9.bin"));
    auto j = nlohmann::json::parse(slurp(out / "solve.json"));
    EXPECT_EQ(j["command"], "solve");
    EXPECT_TRUE(j["pass"].get<bool>());
}

TEST(Cli, BadInputExitsWithTwo) {
    auto dir = scratch("bad");
    fs::create_directories(dir);
    write(dir / "bad.ini", "[grid\npoints = 9\n");
    EXPECT_EQ(cli("solve --config " + (dir / "bad.ini").string()), 2);
    write(dir / "unknown.ini", "[grid]\nsize = 9\n");
    EXPECT_EQ(cli("solve --config " + (dir / "unknown.ini").string()), 2);
    EXPECT_EQ(cli("solve --grid 9 --bogus"), 2);
    EXPECT_EQ(cli("verify --grid 9 --verifiers 7.7"), 2);
    EXPECT_EQ(cli(""), 2);
}

TEST(Cli, VerifySelectsReportsAndIsDeterministic) {
    auto a = scratch("verify_a"), b = scratch("verify_b");
    ASSERT_EQ(cli("verify --grid 9 --verifiers 1.12 --seed 5 --out " + a.string()), 0);
    ASSERT_EQ(cli("verify --grid 9 --verifiers 1.12 --seed 5 --out " + b.string()), 0);
    EXPECT_EQ(slurp(a / "verify.json"), slurp(b / "verify.json"));
    EXPECT_TRUE(fs::exists(a / "verify.csv"));
    auto j = nlohmann::json::parse(slurp(a / "verify.json"));
    ASSERT_TRUE(j["grids"].contains("9"));
    EXPECT_EQ(j["grids"]["9"].size(), 1u);
    EXPECT_TRUE(j["grids"]["9"].contains("1.12"));
    EXPECT_EQ(j["seed"], 5);
}

TEST(Cli, RefusedExtensionExitsWithThree) {
    auto dir = scratch("refuse");
    fs::create_directories(dir);
    write(dir / "strict.ini", "[verify]\nthreshold = 1e-12\n");
    EXPECT_EQ(cli("extend --grid 9 --config " + (dir / "strict.ini").string() + " --out " + (dir / "out").string()), 3);
}
