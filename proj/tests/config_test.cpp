#include <cstdlib>
#include <sstream>

#include <gtest/gtest.h>

#include "vkrom/config.hpp"

using namespace vkrom;

namespace {

RunConfig parse(const std::string& text)
{
    RunConfig cfg;
    std::istringstream in(text);
    parse_config(cfg, in, "test.cfg");
    return cfg;
}

} // namespace

TEST(Config, DefaultsAreValid)
{
    const RunConfig cfg;
    EXPECT_NO_THROW(validate_config(cfg));
    EXPECT_EQ(cfg.resolved_ny(), 20);
    EXPECT_EQ(cfg.resolved_nx(), 20);
    EXPECT_EQ(cfg.seeds.size(), 4u);
}

TEST(Config, SectionsCommentsAndLists)
{
    const RunConfig cfg = parse(R"(
# rectangle
[mesh]
L = 2
ny = 16
[continuation]
seeds = 2:1:+, 3:1:-  4:1:+1
d_lambda = 0.25   # finer
[sweep2d]
psi_grid = 0 1 2
[output]
svg = false
)");
    EXPECT_EQ(cfg.length, 2.0);
    EXPECT_EQ(cfg.resolved_nx(), 32);
    ASSERT_EQ(cfg.seeds.size(), 3u);
    EXPECT_EQ(cfg.seeds[1].m, 3);
    EXPECT_EQ(cfg.seeds[1].sign, -1);
    EXPECT_EQ(cfg.seeds[2].sign, 1);
    EXPECT_EQ(cfg.d_lambda, 0.25);
    EXPECT_EQ(cfg.psi_grid, (std::vector<double>{0, 1, 2}));
    EXPECT_FALSE(cfg.svg);
}

TEST(Config, EmptySeedListIsAllowed)
{
    const RunConfig cfg = parse("[continuation]\nseeds =\n");
    EXPECT_TRUE(cfg.seeds.empty());
    EXPECT_NO_THROW(validate_config(cfg));
}

TEST(Config, MeshSizeSelectsStructuredGrid)
{
    RunConfig cfg = parse("[mesh]\nmesh_size = 0.1\n");
    EXPECT_EQ(cfg.resolved_ny(), 14);
    apply_override(cfg, "mesh.mesh_size=0.025");
    EXPECT_EQ(cfg.resolved_ny(), 57);
}

TEST(Config, UnknownKeysAreRejected)
{
    EXPECT_THROW(parse("[mesh]\nnz = 3\n"), ConfigError);
    EXPECT_THROW(parse("ny = 3\n"), ConfigError);
    RunConfig cfg;
    EXPECT_THROW(apply_override(cfg, "rom.nmax=3"), ConfigError);
    EXPECT_THROW(apply_override(cfg, "no_equals_sign"), ConfigError);
}

TEST(Config, MalformedValuesAreRejected)
{
    EXPECT_THROW(parse("[mesh]\nny = ten\n"), ConfigError);
    EXPECT_THROW(parse("[mesh]\nL = 1.0x\n"), ConfigError);
    EXPECT_THROW(parse("[continuation]\nseeds = 1:1\n"), ConfigError);
    EXPECT_THROW(parse("[continuation]\nseeds = 1:1:0\n"), ConfigError);
    EXPECT_THROW(parse("[mesh\nny = 3\n"), ConfigError);
    EXPECT_THROW(parse("[mesh]\njust text\n"), ConfigError);
}

TEST(Config, ErrorsNameTheLine)
{
    try {
        parse("[mesh]\nny = 4\nbogus = 1\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("test.cfg:3"), std::string::npos) << e.what();
    }
}

TEST(Config, ValidationCatchesBadRanges)
{
    for (const char* bad : {"continuation.lambda_end=30", "continuation.d_lambda=0", "sweep2d.psi_grid=0 2.5",
                            "mesh.degree=4", "rom.n_max=0", "rom.energy_tol=1", "eigs.order_mesh_sizes=0.1 0.2 0.05",
                            "output.dir="}) {
        RunConfig cfg;
        apply_override(cfg, bad);
        EXPECT_THROW(validate_config(cfg), ConfigError) << bad;
    }
}

TEST(Config, OverridesApplyOnTopOfFile)
{
    RunConfig cfg = parse("[mesh]\nny = 10\n");
    apply_override(cfg, "mesh.ny=12");
    EXPECT_EQ(cfg.ny, 12);
}

TEST(Config, EnvironmentOverridesOutputDirectory)
{
    RunConfig cfg = parse("[output]\ndir = from_file\n");
    ::setenv(kOutputDirEnv, "/tmp/from_env", 1);
    apply_environment(cfg);
    ::unsetenv(kOutputDirEnv);
    EXPECT_EQ(cfg.output_dir, "/tmp/from_env");
}

TEST(Config, AmplitudeAppliesToEverySeedList)
{
    const RunConfig cfg = parse("[continuation]\namplitude = 2.5\n");
    for (const auto& s : cfg.seeds) {
        EXPECT_EQ(s.amplitude, 2.5);
    }
    EXPECT_EQ(cfg.train_seeds.front().amplitude, 2.5);
    EXPECT_EQ(cfg.sweep_seed.amplitude, 2.5);
}

TEST(Config, TestSampleIsUniform)
{
    const RunConfig cfg;
    const auto l = rom_test_lambdas(cfg);
    ASSERT_EQ(l.size(), 20u);
    EXPECT_EQ(l.front(), 40.0);
    EXPECT_EQ(l.back(), 65.0);
}

TEST(Config, ContinuationOptionsCarrySettings)
{
    const RunConfig cfg = parse("[continuation]\ndelta = 1e-5\nnewton_tol = 1e-9\n[run]\nrng_seed = 42\n");
    const auto opt = cfg.continuation_options();
    EXPECT_EQ(opt.delta, 1e-5);
    EXPECT_EQ(opt.newton.tol, 1e-9);
    EXPECT_EQ(opt.newton.seed, 42u);
}
