#include "singfbsde/cli/app.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace singfbsde;
using namespace singfbsde::cli;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

std::string preset(const std::string& name) { return std::string(SINGFBSDE_CONFIG_DIR) + "/" + name + ".ini"; }

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("singfbsde_test_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::map<std::string, std::string> csv_hashes(const fs::path& dir) {
    std::map<std::string, std::string> h;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".csv") h[e.path().filename().string()] = sha256_hex(read_file(e.path()));
    return h;
}

json manifest(const fs::path& dir) { return json::parse(read_file(dir / "manifest.json")); }

/// Small stochastic problem with jumps for the determinism checks.
std::vector<std::string> jump_run(const fs::path& out) {
    return {"run", "--config", preset("cross-validation"), "--out", out.string(), "--set", "forward.n_paths=4000",
            "--set", "ipde.nx=101", "--set", "ipde.nt=200", "--set", "verify.points=0:0, 0:0.5",
            "--set", "verify.audit_states=200", "--set", "verify.audit_pairs=500"};
}

}  // namespace

TEST(Config, ParsesSectionsCommentsAndDefaults) {
    Config c;
    std::istringstream is("# top\n[generator]\nq = 3   # trailing\n; other\n[terminal]\nsingular = 1:inf, -inf:-2\n");
    c.read(is);
    EXPECT_EQ(c.num("generator.q"), 3.0);
    EXPECT_EQ(c.str("generator.type"), "power");
    const auto iv = c.pairs("terminal.singular");
    ASSERT_EQ(iv.size(), 2u);
    EXPECT_EQ(iv[0].second, kInf);
    EXPECT_EQ(iv[1].first, -kInf);
}

TEST(Config, RejectsUnknownKeysAndSections) {
    Config c;
    std::istringstream a("[generator]\nqq = 3\n");
    EXPECT_THROW(c.read(a), ConfigError);
    std::istringstream b("[generattor]\nq = 3\n");
    EXPECT_THROW(c.read(b), ConfigError);
    std::istringstream d("q = 3\n");
    EXPECT_THROW(c.read(d), ConfigError);
    EXPECT_THROW(c.apply_override("generattor.q=2"), ConfigError);
    EXPECT_THROW(c.apply_override("q=2"), ConfigError);
}

TEST(Config, ValueErrors) {
    Config c;
    c.set("generator.q", "two");
    EXPECT_THROW(c.num("generator.q"), ConfigError);
    c.set("bsde.schedule", "10, 2.5");
    EXPECT_THROW(c.levels("bsde.schedule"), ConfigError);
    c.set("bsde.clamp", "maybe");
    EXPECT_THROW(c.flag("bsde.clamp"), ConfigError);
}

TEST(Config, ResolvedRoundTrip) {
    Config c;
    c.set("terminal.g", "1 / (1 + x^2)");
    c.set("verify.points", "0:0, 0:1");
    Config d;
    std::istringstream is(c.resolved());
    d.read(is);
    EXPECT_EQ(c.values(), d.values());
}

TEST(Build, SpecFromExpressions) {
    Config c;
    c.set("model.drift", "-x");
    c.set("model.levy", "atoms");
    c.set("model.atoms", "1:0.5, -1:0.5");
    c.set("terminal.g", "abs(x)");
    c.set("terminal.singular", "2:inf");
    const auto spec = build_spec(c);
    EXPECT_EQ(spec.model.drift(Point<1>{3.0})[0], -3.0);
    EXPECT_EQ(spec.terminal(Point<1>{-1.5}), 1.5);
    EXPECT_EQ(spec.terminal(Point<1>{2.0}), kInf);
    EXPECT_DOUBLE_EQ(spec.generator.core(0.0, Point<1>{0.0}, 2.0, Point<1>{}, 0.0), -8.0);
    c.set("generator.type", "custom");
    EXPECT_THROW(build_spec(c), ConfigError);
    c.set("generator.core", "-y^3 + w");
    EXPECT_THROW(build_spec(c), ConfigError);
}

TEST(Cli, OracleValue) {
    const auto r = run({"oracle", "--set", "q=2", "--set", "n=10"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "0.705346\n");
    EXPECT_EQ(run({"oracle", "--set", "qq=2"}).code, 2);
}

TEST(Cli, PowerOracleRunPasses) {
    const auto dir = scratch("power");
    const auto r = run({"run", "--config", preset("power-oracle"), "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.out << r.err;
    const auto m = manifest(dir);
    std::size_t csvs = 0;
    for (const auto& f : m["files"]) csvs += f["path"].get<std::string>().ends_with(".csv");
    EXPECT_GE(csvs, 4u);
    EXPECT_TRUE(m["verification"]["all_pass"].get<bool>());
    EXPECT_EQ(m["verification"]["fail"].get<int>(), 0);
    EXPECT_EQ(m["verification"]["checks"].size(), m["verification"]["pass"].get<std::size_t>() +
                                                      m["verification"]["info"].get<std::size_t>() +
                                                      m["verification"]["vacuous"].get<std::size_t>());
}

TEST(Cli, UnknownKeyIsConfigError) {
    const auto dir = scratch("unknown");
    fs::create_directories(dir);
    {
        std::ofstream os(dir / "bad.ini");
        os << "[generator]\nq = 2\n";
    }
    auto r = run({"run", "--config", (dir / "bad.ini").string(), "--set", "generattor.q=3", "--out", (dir / "o").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("generattor.q"), std::string::npos) << r.err;
    {
        std::ofstream os(dir / "bad2.ini");
        os << "[generattor]\nq = 2\n";
    }
    r = run({"run", "--config", (dir / "bad2.ini").string(), "--out", (dir / "o").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("generattor"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(dir / "o"));
}

TEST(Cli, BadExpressionIsConfigError) {
    const auto r = run({"ipde", "--set", "terminal.g=1 +", "--out", scratch("expr").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("terminal.g"), std::string::npos) << r.err;
}

TEST(Cli, CflViolationIsNumericalFailure) {
    const auto r = run({"ipde", "--set", "model.drift=50", "--set", "ipde.nt=10", "--out", scratch("cfl").string()});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("CFL"), std::string::npos) << r.err;
}

TEST(Cli, AuditShowsD2Witness) {
    const auto r = run({"audit", "--config", preset("d2-violating"), "--out", scratch("audit").string()});
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.out.find("D2 fail"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("x=(1)"), std::string::npos) << r.out;
}

TEST(Cli, ReportNeedsCsvs) {
    const auto empty = scratch("report_empty");
    fs::create_directories(empty);
    EXPECT_EQ(run({"report", "--out", empty.string()}).code, 2);
    EXPECT_EQ(run({"report", "--out", (empty / "missing").string()}).code, 2);

    const auto dir = scratch("report");
    ASSERT_EQ(run({"run", "--config", preset("power-oracle"), "--out", dir.string()}).code, 0);
    const auto before = sha256_hex(read_file(dir / "profile.svg"));
    fs::remove(dir / "profile.svg");
    fs::remove(dir / "ladder.svg");
    EXPECT_EQ(run({"report", "--out", dir.string()}).code, 0);
    EXPECT_EQ(sha256_hex(read_file(dir / "profile.svg")), before);
    EXPECT_TRUE(fs::exists(dir / "ladder.svg"));
}

TEST(Cli, IpdeMatrixLayout) {
    const auto dir = scratch("matrix");
    ASSERT_EQ(run({"ipde", "--config", preset("power-oracle"), "--out", dir.string()}).code, 0);
    const auto t = read_table(dir / "ipde_u.csv");
    ASSERT_TRUE(t);
    EXPECT_EQ(t->header.size(), 22u);  // corner cell plus 21 x nodes
    EXPECT_EQ(std::strtod(t->header[1].c_str(), nullptr), -1.0);
    EXPECT_EQ(t->rows.size(), 1001u);
    EXPECT_EQ(std::strtod(t->rows.back()[0].c_str(), nullptr), 1.0);
    EXPECT_EQ(std::strtod(t->rows.back()[5].c_str(), nullptr), 10.0);
}

TEST(Cli, SameSeedSameHashesAndManifestCoversOutputs) {
    const auto a = scratch("seed_a"), b = scratch("seed_b");
    auto args_a = jump_run(a);
    args_a.insert(args_a.end(), {"--seed", "5"});
    auto args_b = jump_run(b);
    args_b.insert(args_b.end(), {"--seed", "5"});
    const auto ra = run(args_a);
    ASSERT_EQ(ra.code, 0) << ra.out << ra.err;
    ASSERT_EQ(run(args_b).code, 0);
    EXPECT_EQ(csv_hashes(a), csv_hashes(b));

    // Every file in the directory except the manifest is inventoried, with the right hash.
    std::set<std::string> listed;
    const auto m = manifest(a);
    for (const auto& f : m["files"]) {
        listed.insert(f["path"].get<std::string>());
        EXPECT_EQ(f["sha256"].get<std::string>(), sha256_hex(read_file(a / f["path"].get<std::string>())));
    }
    std::set<std::string> present;
    for (const auto& e : fs::directory_iterator(a))
        if (e.path().filename() != "manifest.json") present.insert(e.path().filename().string());
    EXPECT_EQ(listed, present);
    EXPECT_EQ(m["seeds"]["forward"].get<std::string>(), "5");

    const auto c = scratch("seed_c");
    auto args_c = jump_run(c);
    args_c.insert(args_c.end(), {"--seed", "6"});
    ASSERT_EQ(run(args_c).code, 0);
    EXPECT_NE(csv_hashes(a).at("bsde_levels.csv"), csv_hashes(c).at("bsde_levels.csv"));
}

TEST(Cli, ThreadsDoNotChangeOutputs) {
    const auto a = scratch("threads_1"), b = scratch("threads_3");
    auto args_a = jump_run(a);
    args_a.insert(args_a.end(), {"--threads", "1"});
    auto args_b = jump_run(b);
    args_b.insert(args_b.end(), {"--threads", "3"});
    ASSERT_EQ(run(args_a).code, 0);
    ASSERT_EQ(run(args_b).code, 0);
    EXPECT_EQ(csv_hashes(a), csv_hashes(b));
    EXPECT_EQ(manifest(b)["threads"].get<int>(), 3);
}

TEST(Cli, ResolvedConfigReproducesHashes) {
    const auto a = scratch("resolved_a"), b = scratch("resolved_b");
    ASSERT_EQ(run(jump_run(a)).code, 0);
    ASSERT_EQ(run({"run", "--config", (a / "resolved.ini").string(), "--out", b.string()}).code, 0);
    EXPECT_EQ(csv_hashes(a), csv_hashes(b));
}

TEST(Cli, ReplayedPathsGiveTheSameLevels) {
    const auto a = scratch("replay_a"), b = scratch("replay_b");
    ASSERT_EQ(run({"bsde", "--config", preset("cross-validation"), "--set", "forward.n_paths=2000", "--set",
                   "forward.save_paths=true", "--out", a.string()})
                  .code,
              0);
    ASSERT_TRUE(fs::exists(a / "paths.bin"));
    ASSERT_EQ(run({"bsde", "--config", preset("cross-validation"), "--set", "bsde.replay=" + (a / "paths.bin").string(),
                   "--out", b.string()})
                  .code,
              0);
    EXPECT_EQ(sha256_hex(read_file(a / "bsde_levels.csv")), sha256_hex(read_file(b / "bsde_levels.csv")));
    EXPECT_TRUE(manifest(b)["diagnostics"]["forward"]["replayed"].get<bool>());
}

TEST(Cli, TerminalRegularPresetPassesTerminalCheck) {
    const auto dir = scratch("terminal");
    const auto r = run({"run", "--config", preset("terminal-regular"), "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.out << r.err;
    for (const auto& c : manifest(dir)["verification"]["checks"])
        if (c["name"] == "ipde.terminal_limit") EXPECT_EQ(c["status"], "pass");
}
