#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include "sice/cli.hpp"

using namespace sice;
using namespace sice::cli;
namespace fs = std::filesystem;

namespace {

RunConfig parse(std::vector<std::string> args) {
    args.insert(args.begin(), "sice");
    return parse_config(args);
}

std::string config_error(std::vector<std::string> args) {
    try {
        parse(std::move(args));
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

class ScopedEnv {
public:
    ScopedEnv(const char* name, const char* value) : name_(name) { ::setenv(name, value, 1); }
    ~ScopedEnv() { ::unsetenv(name_); }

private:
    const char* name_;
};

fs::path scratch(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("sice_config_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SICE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST(Config, DefaultsForAnalytic) {
    const auto c = parse({"analytic", "--threshold", "0.6"});
    EXPECT_EQ(c.subcommand, Subcommand::Analytic);
    EXPECT_EQ(c.n_c, 1000u);
    EXPECT_DOUBLE_EQ(c.alpha, 0.05);
    EXPECT_FALSE(c.stochastic());
    EXPECT_EQ(c.rule().threshold, 0.6);
    EXPECT_EQ(c.output_dir, fs::path("sice-out"));
}

TEST(Config, FlagOverridesEnvOverridesFile) {
    const auto dir = scratch("precedence");
    const auto file = dir / "cfg.json";
    std::ofstream(file) << R"({"subcommand": "simulate", "seed": 1, "n_reps": 7, "threads": 2,
                              "output_dir": "from-file", "threshold": 0.5, "rho_t": [0.4]})";
    {
        const auto c = parse({"simulate", "--config", file.string()});
        EXPECT_EQ(*c.seed, 1u);
        EXPECT_EQ(c.n_reps, 7u);
        EXPECT_EQ(c.threads, 2u);
        EXPECT_EQ(c.output_dir, fs::path("from-file"));
        EXPECT_DOUBLE_EQ(c.pop.treatment.rho, 0.4);
    }
    ScopedEnv out("SICE_OUTPUT_DIR", "from-env");
    ScopedEnv threads("SICE_THREADS", "3");
    {
        const auto c = parse({"simulate", "--config", file.string()});
        EXPECT_EQ(c.output_dir, fs::path("from-env"));
        EXPECT_EQ(c.threads, 3u);
    }
    const auto c = parse({"simulate", "--config", file.string(), "--output-dir", "from-flag", "--threads", "4",
                          "--seed", "9", "--rho-t", "0.1"});
    EXPECT_EQ(c.output_dir, fs::path("from-flag"));
    EXPECT_EQ(c.threads, 4u);
    EXPECT_EQ(*c.seed, 9u);
    EXPECT_DOUBLE_EQ(c.pop.treatment.rho, 0.1);
    EXPECT_EQ(c.n_reps, 7u);
    EXPECT_EQ(c.echo["output_dir"], "from-flag");
    fs::remove_all(dir);
}

TEST(Config, UsageErrors) {
    EXPECT_NE(config_error({"analytic", "--family", "t3", "--threshold", "0"}).find("normal family"), std::string::npos);
    EXPECT_NE(config_error({"analytic", "--threshold", "0", "--exclusion", "0.5"}).find("mutually exclusive"),
              std::string::npos);
    EXPECT_NE(config_error({"simulate", "--threshold", "0"}).find("seed"), std::string::npos);
    EXPECT_NE(config_error({"simulate", "--threshold", "0", "--seed", "1", "--rho-t", "0.1,0.2"}).find("scalars"),
              std::string::npos);
    EXPECT_NE(config_error({"simulate", "--threshold", "0", "--seed", "1", "--format", "xml"}).find("unknown format"),
              std::string::npos);
    EXPECT_NE(config_error({"simulate", "--threshold", "0", "--seed", "1", "--mc-draws", "10"}).find("mc_draws"),
              std::string::npos);
    EXPECT_NE(config_error({"sweep", "--thresholds", "1,2", "--seed", "1"}).find("exactly one"), std::string::npos);
    EXPECT_NE(config_error({"analytic", "--seed", "x"}).find("cannot parse"), std::string::npos);
    EXPECT_FALSE(config_error({"nonsense"}).empty());
    EXPECT_FALSE(config_error({"analytic", "--n-reps", "5"}).empty());
    EXPECT_FALSE(config_error({"reproduce", "figure9"}).empty());

    const auto dir = scratch("unknown_key");
    std::ofstream(dir / "cfg.json") << R"({"seed": 1, "bogus": 2})";
    EXPECT_NE(config_error({"simulate", "--config", (dir / "cfg.json").string()}).find("unknown key 'bogus'"),
              std::string::npos);
    fs::remove_all(dir);
}

TEST(Config, HelpAndVersion) {
    EXPECT_THROW(parse({"--help"}), HelpRequested);
    try {
        parse({"simulate", "--help"});
        FAIL();
    } catch (const HelpRequested& h) {
        EXPECT_NE(std::string(h.what()).find("--n-reps"), std::string::npos);
    }
}

TEST(Config, GridListsAndPresets) {
    const auto c = parse({"grid", "--seed", "3", "--sigma-t", "0.5,1", "--rho-t", "0.1,0.2,0.3", "--exclusion",
                          "0.5", "--n", "100", "--estimator", "selected_effect,cohen_ml", "--family", "normal,t8"});
    EXPECT_EQ(c.grid.sigma_t, (std::vector<double>{0.5, 1.0}));
    EXPECT_EQ(c.grid.rho_t.size(), 3u);
    EXPECT_EQ(c.grid.families.size(), 2u);
    EXPECT_EQ(c.grid.size(), 12u);
    EXPECT_EQ(c.estimators.size(), 2u);
    const auto p = parse({"grid", "--seed", "3", "--preset", "table2"});
    EXPECT_EQ(p.grid.size(), presets::table2().size());

    const std::map<std::string, std::uint64_t> seeds{{"intro98", 500},  {"figure1", 101},           {"figure2", 102},
                                                     {"figure3", 103},  {"figure4", 104},           {"figure5", 105},
                                                     {"figure6-synthetic", 106}, {"figure7-synthetic", 106}};
    for (const auto& name : reproduce_presets()) {
        const auto r = parse({"reproduce", name});
        EXPECT_EQ(*r.seed, seeds.at(name)) << name;
        EXPECT_TRUE(r.formats.count(report::Format::Svg)) << name;
    }
    EXPECT_EQ(parse({"reproduce", "figure1"}).n_reps, 200u);
    EXPECT_EQ(parse({"reproduce", "figure1", "--full-scale"}).n_reps, 2000u);
    EXPECT_EQ(*parse({"reproduce", "figure1", "--seed", "8"}).seed, 8u);
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("exit");
    const std::string out = " --output-dir " + (dir / "out").string();
    EXPECT_EQ(run_cli("analytic --threshold 0.6" + out), kExitOk);
    EXPECT_TRUE(fs::exists(dir / "out" / "analytic.csv"));
    EXPECT_TRUE(fs::exists(dir / "out" / "manifest.json"));
    EXPECT_EQ(run_cli("--help"), kExitOk);
    EXPECT_EQ(run_cli("analytic --threshold 0 --exclusion 0.5" + out), kExitUsage);
    EXPECT_EQ(run_cli("simulate --threshold 0" + out), kExitUsage);
    std::ofstream(dir / "bad.csv") << "subject_id,arm,baseline,endpoint\na,placebo,1,2\n";
    EXPECT_EQ(run_cli("sweep --data " + (dir / "bad.csv").string() + " --thresholds 1" + out), kExitUsage);
    EXPECT_EQ(run_cli("sweep --data " + (dir / "missing.csv").string() + " --thresholds 1" + out), kExitIo);
    EXPECT_EQ(run_cli("cohen-ml --synthetic --family t3 --threshold 0 --seed 1" + out), kExitNumerical);
    std::ofstream(dir / "blocker") << "x";
    EXPECT_EQ(run_cli("analytic --threshold 0.6 --output-dir " + (dir / "blocker" / "sub").string()), kExitIo);
    fs::remove_all(dir);
}

TEST(Cli, RepeatedRunsAreByteIdentical) {
    const auto dir = scratch("repeat");
    const std::string args = "simulate --threshold 0.6 --n 60 --n-reps 50 --seed 42 --estimator cohen_ml";
    ASSERT_EQ(run_cli(args + " --threads 1 --output-dir " + (dir / "a").string()), kExitOk);
    ASSERT_EQ(run_cli(args + " --threads 3 --output-dir " + (dir / "b").string()), kExitOk);
    const auto a = read_file(dir / "a" / "simulate.csv");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, read_file(dir / "b" / "simulate.csv"));
    fs::remove_all(dir);
}
