#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& tag) {
    std::random_device rd;
    const fs::path p = fs::temp_directory_path() / ("mftlab-cli-" + tag + "-" + std::to_string(rd()));
    fs::create_directories(p);
    return p;
}

int run(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(MFTLAB_EXE) + " " + args + " > " + log.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

const char* kConstant = R"(name: flat
market:
  n: 2
  K: 4
  horizon: 1
  coefficients:
    a: {family: constant, value: [0.08, 0.12]}
    v: {family: constant, value: [[0.2, 0], [0, 0.25]]}
    r: {family: constant, value: 0.02}
utility: {family: constant, value: 3}
grid: {x_nodes: 41}
)";

}  // namespace

TEST_CASE("exit codes") {
    const fs::path d = scratch_dir("exit");
    CHECK(run("validate", d / "log") == 2);
    CHECK(run("validate --preset nope --out " + (d / "a").string(), d / "log") != 0);

    write(d / "bad.yaml", "name: x\nmarket:\n  n: 1\n  bogus: 2\n");
    CHECK(run("validate --scenario " + (d / "bad.yaml").string(), d / "log") == 2);
    CHECK(slurp(d / "log").find("bad.yaml:4:3") != std::string::npos);

    std::string singular = kConstant;
    singular.replace(singular.find("[[0.2, 0], [0, 0.25]]"), 21, "[[0.2, 0.2], [0.2, 0.2]]");
    write(d / "singular.yaml", singular);
    CHECK(run("validate --scenario " + (d / "singular.yaml").string() + " --out " + (d / "s").string(),
              d / "log") == 1);
    CHECK(slurp(d / "s" / "validation.txt").find("not invertible") != std::string::npos);

    CHECK(run("validate --preset merton --out " + (d / "ok").string(), d / "log") == 0);
    const auto manifest = nlohmann::json::parse(slurp(d / "ok" / "manifest.json"));
    CHECK(manifest["subcommand"] == "validate");
    CHECK(manifest["exit_status"] == 0);
    CHECK(manifest["spec_hash"].get<std::string>().size() == 16);
    fs::remove_all(d);
}

TEST_CASE("solve is deterministic and constant utility gives a zero policy") {
    const fs::path d = scratch_dir("solve");
    write(d / "flat.yaml", kConstant);
    const std::string base = "solve --scenario " + (d / "flat.yaml").string() + " --out ";
    REQUIRE(run(base + (d / "r1").string(), d / "log") == 0);
    REQUIRE(run(base + (d / "r2").string() + " --threads 2", d / "log") == 0);
    for (const char* f : {"value.csv", "policy.csv", "fund_coefficients.csv", "solve_summary.txt"})
        CHECK(slurp(d / "r1" / f) == slurp(d / "r2" / f));

    std::istringstream policy(slurp(d / "r1" / "policy.csv"));
    std::string line;
    std::getline(policy, line);
    int rows = 0;
    while (std::getline(policy, line)) {
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
        REQUIRE(cols.size() >= 5);
        // slice, t, x, u1, u2, ...
        CHECK(std::stod(cols[3]) == 0.0);
        CHECK(std::stod(cols[4]) == 0.0);
        ++rows;
    }
    CHECK(rows > 0);
    fs::remove_all(d);
}

TEST_CASE("solve on the index preset reports two funds") {
    const fs::path d = scratch_dir("index");
    REQUIRE(run("solve --preset index --grid 41,21,1,0 --format binary --out " + d.string(), d / "log") == 0);
    const std::string summary = slurp(d / "solve_summary.txt");
    CHECK(summary.find("mu = 2") != std::string::npos);
    CHECK(summary.find("span check (residual <= 1e-6): PASS") != std::string::npos);
    CHECK(fs::exists(d / "value.bin"));
    CHECK(fs::exists(d / "policy.bin"));
    fs::remove_all(d);
}

TEST_CASE("simulate and evaluate") {
    const fs::path d = scratch_dir("sim");
    REQUIRE(run("simulate --preset merton --strategy oracle --paths 10 --steps 20 --out " + d.string(),
                d / "log") == 0);
    CHECK(fs::exists(d / "paths.csv"));
    REQUIRE(run("evaluate --preset merton --strategy zero --paths 100 --steps 10 --out " + d.string(),
                d / "log") == 0);
    CHECK(slurp(d / "evaluate.csv").find("zero") != std::string::npos);
    fs::remove_all(d);
}

TEST_CASE("report on Merton with reduced paths") {
    const fs::path d = scratch_dir("report");
    const int rc = run("report --preset merton --paths 20000 --steps 100 --out " + d.string(), d / "log");
    const std::string text = slurp(d / "report.txt");
    CHECK(text.find("oracle gap") != std::string::npos);
    CHECK(fs::exists(d / "convergence.txt"));
    CHECK(fs::exists(d / "report.csv"));
    CHECK(rc == (text.find("overall: PASS") != std::string::npos ? 0 : 1));
    fs::remove_all(d);
}
