#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "runner.hpp"

using namespace jellium::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code = 0;
    std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
    args.insert(args.begin(), "jellium");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    CliRun r;
    r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("jellium_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

fs::path write_config(const fs::path& dir, const json& j) {
    const fs::path p = dir / "config.json";
    std::ofstream(p) << j.dump();
    return p;
}

}  // namespace

TEST(ResolveConfig, FillsDefaults) {
    const json c = resolve_config(json::object(), "mcmc");
    EXPECT_EQ(c["run"], "mcmc");
    EXPECT_EQ(c["model"]["n_time"], 16);
    EXPECT_EQ(c["mcmc"]["steps"], 2000);
    EXPECT_DOUBLE_EQ(c["mcmc"]["proposal"]["sigma_x"].get<double>(), 0.3);
    EXPECT_FALSE(c.contains("screen"));
}

TEST(ResolveConfig, RejectsUnknownKeysByName) {
    try {
        resolve_config(json{{"mcmc", {{"stepz", 3}}}}, "mcmc");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("mcmc.stepz"), std::string::npos);
    }
    EXPECT_THROW(resolve_config(json{{"sede", 3}}, "sample"), ConfigError);
    EXPECT_THROW(resolve_config(json{{"screen", {{"R", 4}}}}, "sample"), ConfigError);
    EXPECT_THROW(resolve_config(json{{"seed", "x"}}, "sample"), ConfigError);
    EXPECT_THROW(resolve_config(json{{"sample", {{"N", 2.5}}}}, "sample"), ConfigError);
    EXPECT_THROW(resolve_config(json{{"run", "mcmc"}}, "sample"), ConfigError);
}

TEST(ResolveConfig, AcceptsManifest) {
    const json c = resolve_config(json{{"seed", 9}}, "sample");
    const json m = {{"version", "x"}, {"resolved_config", c}, {"wall_time_s", 1.0}};
    EXPECT_EQ(resolve_config(m, "sample"), c);
}

TEST(Cli, MalformedKeyExitsOne) {
    const fs::path dir = scratch("badkey");
    const CliRun r = cli({"sample", "--config", write_config(dir, {{"sample", {{"NN", 3}}}}).string()});
    EXPECT_EQ(r.code, 1);
    const json e = json::parse(r.err);
    EXPECT_EQ(e["error"], "ConfigError");
    EXPECT_NE(e["message"].get<std::string>().find("sample.NN"), std::string::npos);
}

TEST(Cli, MalformedJsonAndUnknownRun) {
    const fs::path dir = scratch("badjson");
    std::ofstream(dir / "c.json") << "{ not json";
    EXPECT_EQ(cli({"sample", "--config", (dir / "c.json").string()}).code, 1);
    EXPECT_EQ(cli({"fly"}).code, 1);
    EXPECT_EQ(cli({"sample", "--config", (dir / "missing.json").string()}).code, 1);
}

TEST(Cli, NumericalFailureExitsTwo) {
    const fs::path dir = scratch("numerical");
    // A Poisson draw with 3 bridges on [0, 2] is not neutral.
    const fs::path cfg =
        write_config(dir, {{"seed", 3}, {"verify_split", {{"reference", "poisson"}}}, {"output_dir", dir.string()}});
    int seen = 0;
    for (int s = 1; s < 40 && !seen; ++s) {
        const CliRun r = cli({"verify-split", "--config", cfg.string(), "--seed", std::to_string(s)});
        if (r.code == 2) {
            EXPECT_EQ(json::parse(r.err)["error"], "NotNeutral");
            ++seen;
        }
    }
    EXPECT_EQ(seen, 1);
}

TEST(Cli, SameSeedIsByteIdentical) {
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    const json base = {{"seed", 17}, {"sample", {{"count", 3}}}};
    ASSERT_EQ(cli({"sample", "--config", write_config(a, base).string(), "--out", a.string()}).code, 0);
    ASSERT_EQ(cli({"sample", "--config", write_config(b, base).string(), "--out", b.string()}).code, 0);
    EXPECT_EQ(slurp(a / "paths.csv"), slurp(b / "paths.csv"));
    EXPECT_EQ(slurp(a / "samples.json"), slurp(b / "samples.json"));
    const CliRun other = cli({"sample", "--config", (a / "config.json").string(), "--out", b.string(), "--seed", "18"});
    ASSERT_EQ(other.code, 0);
    EXPECT_NE(slurp(a / "paths.csv"), slurp(b / "paths.csv"));
}

TEST(Cli, ManifestRerunReproduces) {
    const fs::path a = scratch("man_a"), b = scratch("man_b");
    ASSERT_EQ(cli({"couple", "--config", write_config(a, {{"couple", {{"samples", 100}}}}).string(), "--out",
                   a.string()})
                  .code,
              0);
    const json manifest = json::parse(slurp(a / "manifest.json"));
    EXPECT_EQ(manifest["run"], "couple");
    EXPECT_TRUE(manifest.contains("version"));
    EXPECT_TRUE(manifest.contains("wall_time_s"));
    EXPECT_EQ(manifest["resolved_config"]["couple"]["delta"], 0.4);
    ASSERT_EQ(cli({"couple", "--config", (a / "manifest.json").string(), "--out", b.string()}).code, 0);
    EXPECT_EQ(slurp(a / "coupling.csv"), slurp(b / "coupling.csv"));
    EXPECT_EQ(slurp(a / "summary.json"), slurp(b / "summary.json"));
}

TEST(Cli, VerifySplitDefault) {
    const fs::path dir = scratch("split");
    const CliRun r = cli({"verify-split", "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json rep = json::parse(slurp(dir / "report.json"));
    EXPECT_LE(rep["split_residual"].get<double>(), 1e-3);
}

TEST(Cli, FlagOverridesAndMcmc) {
    const fs::path dir = scratch("mcmc");
    const CliRun r = cli({"mcmc", "--out", dir.string(), "--steps", "200", "--thin", "10", "--burnin", "0"});
    ASSERT_EQ(r.code, 0) << r.err;
    const json m = json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(m["resolved_config"]["mcmc"]["steps"], 200);
    std::istringstream trace(slurp(dir / "trace.csv"));
    int lines = 0;
    for (std::string line; std::getline(trace, line);) ++lines;
    EXPECT_EQ(lines, 21);
    EXPECT_EQ(cli({"sample", "--out", dir.string(), "--steps", "5"}).code, 1);
}

TEST(Cli, EstimateWritesTable) {
    const fs::path dir = scratch("estimate");
    const fs::path cfg = write_config(dir, {{"estimate", {{"min_samples", 10}, {"batches", 2}}}});
    const CliRun r = cli({"estimate", "--config", cfg.string(), "--out", dir.string(), "--steps", "200", "--thin",
                          "20", "--burnin", "0"});
    ASSERT_EQ(r.code, 0) << r.err;
    const json s = json::parse(slurp(dir / "summary.json"));
    EXPECT_EQ(s["windows"], 40);
    EXPECT_TRUE(std::isfinite(s["f_hat"].get<double>()));
    EXPECT_EQ(slurp(dir / "estimate.csv").substr(0, 2), "M,");
}
