#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "common.hpp"
#include "vkrom/io.hpp"

using namespace vkrom;

namespace {

std::filesystem::path out_dir()
{
    static const auto dir = std::filesystem::temp_directory_path() / "vkrom_io_test";
    return dir;
}

std::vector<std::string> lines(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) {
        out.push_back(l);
    }
    return out;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Branch toy_branch(int sign)
{
    Branch b;
    b.seed = {2, 1, 1.0, sign};
    for (int i = 0; i < 3; ++i) {
        BranchPoint p;
        p.lambda = 60.0 + i;
        p.ordinate = sign * 0.1 * i;
        p.converged = true;
        p.iterations = 3;
        b.points.push_back(p);
    }
    return b;
}

} // namespace

TEST(Csv, EigenvaluesCarryMultiplicity)
{
    const vkrom::testing::Plate plate(1.0, 2);
    std::vector<EigenPair> pairs;
    for (double v : {39.5, 61.7, 61.7, 90.0}) {
        pairs.push_back({v, ScalarField(plate.space)});
    }
    const auto path = out_dir() / "nested" / "eigs.csv";
    write_eigs_csv(path, pairs);
    const auto l = lines(path);
    ASSERT_EQ(l.size(), 5u);
    EXPECT_EQ(l[0], "index,value,multiplicity");
    EXPECT_EQ(l[1], "1,39.5,1");
    EXPECT_EQ(l[2], "2,61.7,2");
    EXPECT_EQ(l[3], "3,61.7,2");
}

TEST(Csv, SpectrumHasOneColumnPerCurve)
{
    SpectrumTrace t;
    t.lambda_grid = {30.0, 30.5};
    t.sigma_curves = {{2.0, 1.0}, {5.0, 4.0}};
    const auto path = out_dir() / "spectrum.csv";
    write_spectrum_csv(path, t);
    const auto l = lines(path);
    ASSERT_EQ(l.size(), 3u);
    EXPECT_EQ(l[0], "lambda,sigma_1,sigma_2");
    EXPECT_EQ(l[2], "30.5,1,4");
}

TEST(Csv, DiagramRowsInBranchOrder)
{
    const auto path = out_dir() / "diagram.csv";
    write_diagram_csv(path, {toy_branch(1), toy_branch(-1)});
    const auto l = lines(path);
    ASSERT_EQ(l.size(), 7u);
    EXPECT_EQ(l[0], "branch_id,seed_m,seed_n,seed_sign,psi,lambda,ordinate,converged,iterations");
    EXPECT_EQ(l[2], "0,2,1,+1,0,61,0.1,1,3");
    EXPECT_EQ(l[6], "1,2,1,-1,0,62,-0.2,1,3");
}

TEST(Csv, Sweep2dLeavesMissingCriticalLoadEmpty)
{
    PsiSweepRow a{0.0, toy_branch(1), 39.5};
    PsiSweepRow b{1.0, toy_branch(1), std::nullopt};
    const auto path = out_dir() / "sweep2d.csv";
    write_sweep2d_csv(path, {a, b});
    const auto l = lines(path);
    ASSERT_EQ(l.size(), 7u);
    EXPECT_EQ(l[0], "psi,lambda,ordinate,critical_load");
    EXPECT_EQ(l[1], "0,60,0,39.5");
    EXPECT_EQ(l[4], "1,60,0,");
}

TEST(Csv, RbErrorColumns)
{
    RbErrorReport r;
    r.N = 3;
    r.error = 1e-4;
    r.mean_online_ms = 0.25;
    r.mean_full_ms = 200;
    const auto path = out_dir() / "rb_error.csv";
    write_rb_error_csv(path, {r});
    const auto l = lines(path);
    ASSERT_EQ(l.size(), 2u);
    EXPECT_EQ(l[0], "N,E_N,t_online_ms,t_full_ms");
    EXPECT_EQ(l[1], "3,0.0001,0.25,200");
}

TEST(Csv, RewritingGivesIdenticalBytes)
{
    const auto a = out_dir() / "d1.csv";
    const auto b = out_dir() / "d2.csv";
    write_diagram_csv(a, {toy_branch(1)});
    write_diagram_csv(b, {toy_branch(1)});
    EXPECT_EQ(slurp(a), slurp(b));
}

TEST(Svg, WritesPolylinePerSeriesAndEscapesText)
{
    const auto path = out_dir() / "plot.svg";
    write_svg_plot(path, {"a < b & c", "x", "y", false}, diagram_series({toy_branch(1), toy_branch(-1)}));
    const std::string s = slurp(path);
    EXPECT_EQ(s.rfind("<svg", 0), 0u);
    EXPECT_NE(s.find("a &lt; b &amp; c"), std::string::npos);
    std::size_t count = 0;
    for (auto pos = s.find("<polyline"); pos != std::string::npos; pos = s.find("<polyline", pos + 1)) {
        ++count;
    }
    EXPECT_EQ(count, 2u);
    EXPECT_NE(s.find("(2,1)-"), std::string::npos);
}

TEST(Svg, LogAxisSkipsNonPositiveValues)
{
    const auto path = out_dir() / "log.svg";
    EXPECT_NO_THROW(write_svg_plot(path, {"E", "N", "E_N", true}, {{"E", {1, 2, 3}, {1.0, 0.0, 1e-3}}}));
    EXPECT_NE(slurp(path).find("1e-"), std::string::npos);
}

TEST(Output, UnwritablePathThrows)
{
    EXPECT_THROW(write_rb_error_csv("/proc/vkrom/forbidden.csv", {}), std::exception);
}
