#include <json.hpp>

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <string>
#include <sys/wait.h>

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result run(const std::string& args) {
    const std::string cmd = std::string(OSNR_CLI_PATH) + " " + args + " 2>/dev/null";
    Result r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string scenario(const std::string& name) { return std::string(OSNR_SCENARIO_DIR) + "/" + name; }

}  // namespace

TEST(Cli, SolveFixtureA) {
    const auto r = run("solve " + scenario("fixture_a.json"));
    ASSERT_EQ(r.code, 0);
    const auto doc = nlohmann::json::parse(r.out);
    EXPECT_EQ(doc["path"], "direct");
    EXPECT_NEAR(doc["solution"]["u_mW"][1].get<double>(), 60.0 / 47.0, 1e-12);
}

TEST(Cli, SolveFixtureBUsesQp) {
    const auto r = run("solve " + scenario("fixture_b.json"));
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(nlohmann::json::parse(r.out)["path"], "qp");
}

TEST(Cli, IterateCsv) {
    const auto r = run("iterate " + scenario("fixture_a.json") + " --format csv --tol 1e-12");
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out.rfind("step,channel,u_mW,osnr_dB,err_inf\n0,1,0.500000000000,16.38", 0), 0u);
}

TEST(Cli, U0Override) {
    const auto r = run("iterate " + scenario("fixture_a.json") + " --format csv --u0 1.5,2.5");
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("0,1,1.500000000000,"), std::string::npos);
    EXPECT_NE(r.out.find("0,2,2.500000000000,"), std::string::npos);
}

TEST(Cli, CheckAndGamma) {
    EXPECT_EQ(run("check " + scenario("fixture_a_prime.json")).code, 0);
    const auto r = run("gamma " + scenario("demo3.json"));
    ASSERT_EQ(r.code, 0);
    const auto doc = nlohmann::json::parse(r.out);
    EXPECT_EQ(doc["gamma"].size(), 3u);
}

TEST(Cli, Demos) {
    const auto a = run("demo3");
    ASSERT_EQ(a.code, 0);
    const auto doc = nlohmann::json::parse(a.out);
    EXPECT_NEAR(doc["solution"]["osnr_dB"][2].get<double>(), 20.0, 0.01);
    EXPECT_EQ(run("demo30 --format csv").code, 0);
    EXPECT_EQ(a.out, run("demo3").out);
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run("solve /nonexistent.json").code, 3);
    EXPECT_EQ(run("bogus").code, 1);
    EXPECT_EQ(run("solve " + scenario("fixture_a.json") + " --tol -1").code, 1);
    EXPECT_EQ(run("solve " + scenario("fixture_a.json") + " --format xml").code, 1);
    EXPECT_EQ(run("iterate " + scenario("fixture_a.json") + " --max-iter 2 --tol 1e-15").code, 2);
    EXPECT_EQ(run("iterate " + scenario("fixture_a.json") + " --u0 50 --strict-nonneg").code, 2);
    EXPECT_EQ(run("solve " + scenario("fixture_a.json") + " --out /nonexistent/dir/x.json").code, 3);
}
