// mftlab command-line front end.

#include "mftlab/hjb.hpp"
#include "mftlab/oracle.hpp"
#include "mftlab/policy_eval.hpp"
#include "mftlab/scenario.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#ifndef MFTLAB_VERSION
#define MFTLAB_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace mft;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct Options {
    std::string scenario;
    std::string preset;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> paths;
    std::optional<int> steps;
    std::string grid;
    std::string format;
    std::string strategy = "hjb";
    int samples = 256;
    unsigned threads = 0;
};

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

/// Collects emitted files and writes the run manifest last.
class Run {
public:
    Run(std::string command, fs::path dir) :
        command_(std::move(command)), dir_(std::move(dir)), started_(utc_now()) {
        fs::create_directories(dir_);
    }

    fs::path file(const std::string& name) {
        outputs_.push_back(name);
        return dir_ / name;
    }

    void write_text(const std::string& name, const std::string& text) {
        std::ofstream os(file(name), std::ios::binary);
        os << text;
    }

    void finish(const std::string& spec_hash, int status) {
        nlohmann::json j;
        j["tool"] = "mftlab";
        j["version"] = MFTLAB_VERSION;
        j["subcommand"] = command_;
        j["spec_hash"] = spec_hash;
        j["started"] = started_;
        j["finished"] = utc_now();
        j["exit_status"] = status;
        j["outputs"] = outputs_;
        std::ofstream os(dir_ / "manifest.json", std::ios::binary);
        os << j.dump(2) << '\n';
    }

private:
    std::string command_;
    fs::path dir_;
    std::string started_;
    std::vector<std::string> outputs_;
};

Scenario load(const Options& o) {
    Scenario s = o.preset.empty() ? load_scenario(o.scenario) : preset(o.preset);
    if (o.seed) s.mc.seed = *o.seed;
    if (o.paths) s.mc.paths = *o.paths;
    if (o.steps) s.mc.steps = *o.steps;
    if (!o.format.empty()) s.output.formats = {o.format};
    if (!o.grid.empty()) {
        std::vector<int> v;
        std::stringstream ss(o.grid);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                v.push_back(std::stoi(item));
            } catch (const std::exception&) {
                throw ScenarioError("--grid: expected \"nx,ny,nz,nt\", got '" + o.grid + "'");
            }
        }
        if (v.size() != 4) throw ScenarioError("--grid: expected four values nx,ny,nz,nt");
        s.grid.x_nodes = v[0];
        s.grid.y_nodes = v[1];
        s.grid.z_nodes = v[2];
        s.grid.t_steps = v[3];
    }
    for (const auto& w : scenario_warnings(s)) std::cerr << "warning: " << w << '\n';
    return s;
}

fs::path out_dir(const Options& o, const Scenario& s) {
    return o.out.empty() ? fs::path(s.output.directory) : fs::path(o.out);
}

bool wants(const Scenario& s, const std::string& fmt) {
    for (const auto& f : s.output.formats)
        if (f == fmt) return true;
    return false;
}

/// Validation shared by every subcommand that needs a valid market.
bool validated(const Scenario& s, int samples, std::uint64_t seed, std::string& text) {
    const ValidationReport rep = validate_spec(s.spec, samples, seed);
    text = rep.to_text();
    if (rep.offending_point) {
        std::ostringstream os;
        os.precision(10);
        os << "offending point: y = " << rep.offending_point->y.transpose()
           << ", z = " << rep.offending_point->z.transpose() << ", t = " << rep.offending_point->t
           << '\n';
        text += os.str();
    }
    const std::string membership = s.utility.check_membership(1000, seed);
    if (!membership.empty()) text += "violation: utility " + membership + '\n';
    text += "utility: " + s.utility.describe() + '\n';
    return rep.ok && membership.empty();
}

Grid make_grid(const Scenario& s) {
    return default_grid(s.spec, s.grid.x_nodes, s.grid.y_nodes, s.grid.z_nodes, s.grid.t_steps,
                        s.grid.max_stored_slices);
}

std::shared_ptr<const BellmanSolution> solve(const Scenario& s, const Options& o) {
    const Grid g = make_grid(s);
    std::cerr << "grid: " << g.describe() << '\n';
    return std::make_shared<const BellmanSolution>(
        solve_bellman(s.spec, s.utility, g, SolveOptions{o.threads}));
}

Strategy pick_strategy(const std::string& name, const Scenario& s, const Options& o) {
    if (name == "zero") return zero_strategy();
    if (name == "oracle") return constant_fraction_strategy(merton_oracle(s.spec, s.utility).fraction);
    if (name == "hjb") return fund_rule_strategy(solve(s, o), s.spec);
    if (name == "grid") return grid_policy_strategy(solve(s, o), s.spec);
    throw ScenarioError("--strategy must be zero, oracle, hjb or grid");
}

// ---------------------------------------------------------------- subcommands

int cmd_validate(const Options& o) {
    const Scenario s = load(o);
    Run run("validate", out_dir(o, s));
    std::string text;
    const bool ok = validated(s, o.samples, s.mc.seed, text);
    run.write_text("validation.txt", text);
    std::cout << text;
    const int status = ok ? kOk : kFailure;
    run.finish(s.spec.hash(), status);
    return status;
}

int cmd_solve(const Options& o) {
    const Scenario s = load(o);
    Run run("solve", out_dir(o, s));
    std::string vtext;
    if (!validated(s, o.samples, s.mc.seed, vtext)) {
        std::cerr << vtext;
        run.finish(s.spec.hash(), kFailure);
        return kFailure;
    }
    const auto sol = solve(s, o);
    if (wants(s, "csv")) {
        std::ofstream v(run.file("value.csv"), std::ios::binary);
        write_value_csv(sol->value, v);
        std::ofstream p(run.file("policy.csv"), std::ios::binary);
        write_policy_csv(sol->policy, p);
    }
    if (wants(s, "binary")) {
        std::ofstream v(run.file("value.bin"), std::ios::binary);
        write_value_binary(sol->value, v);
        std::ofstream p(run.file("policy.bin"), std::ios::binary);
        write_policy_binary(sol->policy, p);
    }

    const FundPolicyReport fr = extract_fund_policy(*sol, s.spec);
    std::ostringstream os;
    os.precision(10);
    os << "scenario: " << (s.name.empty() ? "(unnamed)" : s.name) << '\n';
    os << "spec hash: " << s.spec.hash() << '\n';
    os << "grid: " << sol->value.grid.describe() << '\n';
    os << "dt: " << sol->dt << " (stability bound " << sol->dt_max << ")\n";
    os << "funds: mu = " << fr.mu << " ("
       << (fr.basis == FundBasis::factor_funds ? "factor funds" : "standard basis") << ")\n";
    os << "nodes checked: " << fr.nodes_checked << ", degenerate nodes: " << fr.degenerate_nodes
       << '\n';
    os << "max span residual: " << fr.max_relative_residual << '\n';
    os << "max factor-direction residual: " << fr.max_factor_residual << '\n';
    os << "max hbar mismatch: " << fr.max_hbar_mismatch << '\n';

    // Policy at the node of the initial state, t = 0.
    {
        const Grid& g = sol->policy.grid;
        std::vector<int> idx(g.dim());
        auto nearest = [](const Axis& ax, double c) {
            return std::clamp(static_cast<int>(std::lround((c - ax.lo) / ax.step())), 0,
                              ax.nodes - 1);
        };
        idx[0] = nearest(g.x, s.spec.domain == Domain::positive ? std::log(s.spec.x0) : s.spec.x0);
        for (int k = 0; k < s.spec.m; ++k) idx[1 + k] = nearest(g.y[k], s.spec.eta0[k]);
        for (int k = 0; k < s.spec.M; ++k) idx[1 + s.spec.m + k] = nearest(g.z[k], s.spec.zeta0[k]);
        const std::size_t node = g.flatten(idx.data());
        Vec u(s.spec.n);
        for (int i = 0; i < s.spec.n; ++i) u[i] = sol->policy.u[0][node * s.spec.n + i];
        os << "policy at initial state: " << u.transpose() << '\n';
        os << "value at initial state: " << sol->value.J[0][node] << '\n';
        if (merton_oracle_available(s.spec, s.utility)) {
            const MertonOracle mo = merton_oracle(s.spec, s.utility);
            os << "oracle fraction: " << mo.fraction.transpose() << '\n';
            os << "oracle value: " << mo.value_at_wealth(s.spec.x0, 0.0) << '\n';
        }
    }
    const bool ok = fr.max_relative_residual <= 1e-6;
    os << "span check (residual <= 1e-6): " << (ok ? "PASS" : "FAIL") << '\n';

    if (wants(s, "csv")) {
        std::ofstream f(run.file("fund_coefficients.csv"), std::ios::binary);
        f << "slice,t,node";
        for (int k = 0; k < fr.mu; ++k) f << ",nu" << k + 1;
        f << '\n';
        char buf[48];
        for (std::size_t sl = 0; sl < fr.fund_coeffs.size(); ++sl)
            for (std::size_t node = 0; node < sol->value.grid.node_count(); ++node) {
                std::snprintf(buf, sizeof buf, "%zu,%.17g,%zu", sl, sol->policy.times[sl], node);
                f << buf;
                for (int k = 0; k < fr.mu; ++k) {
                    std::snprintf(buf, sizeof buf, ",%.17g", fr.fund_coeffs[sl][node * fr.mu + k]);
                    f << buf;
                }
                f << '\n';
            }
    }
    run.write_text("solve_summary.txt", os.str());
    std::cout << os.str();
    const int status = ok ? kOk : kFailure;
    run.finish(s.spec.hash(), status);
    return status;
}

int cmd_simulate(const Options& o) {
    const Scenario s = load(o);
    Run run("simulate", out_dir(o, s));
    const Strategy strat = pick_strategy(o.strategy, s, o);
    const int paths = o.paths ? *o.paths : std::min(s.mc.paths, 100);
    const PathBundle b = simulate_paths(s.spec, strat, s.mc.steps, paths, s.mc.seed,
                                        SimulationOptions{true, o.threads});
    {
        std::ofstream os(run.file("paths.csv"), std::ios::binary);
        b.write_csv(os);
    }
    std::cout << "simulated " << paths << " paths x " << s.mc.steps << " steps with strategy "
              << strat.name() << "; excluded " << b.excluded_count << '\n';
    run.finish(s.spec.hash(), kOk);
    return kOk;
}

int cmd_evaluate(const Options& o) {
    const Scenario s = load(o);
    Run run("evaluate", out_dir(o, s));
    const Strategy strat = pick_strategy(o.strategy, s, o);
    const EvalResult r =
        evaluate(s.spec, strat, s.utility, s.mc.steps, s.mc.paths, s.mc.seed, {o.threads});
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "strategy,mean_utility,std_error,paths,excluded,seed,flagged,max_control_norm\n"
                  "%s,%.17g,%.17g,%d,%d,%llu,%d,%.17g\n",
                  r.strategy.c_str(), r.mean_utility, r.std_error, r.path_count, r.excluded_paths,
                  static_cast<unsigned long long>(r.seed), r.flagged ? 1 : 0, r.max_control_norm);
    run.write_text("evaluate.csv", std::string("# spec_hash=") + s.spec.hash() + '\n' + buf);
    std::snprintf(buf, sizeof buf, "V(%s) = %.10f +/- %.3e (SE), %d paths, %d excluded%s\n",
                  r.strategy.c_str(), r.mean_utility, r.std_error, r.path_count, r.excluded_paths,
                  r.flagged ? " [flagged]" : "");
    std::cout << buf;
    const int status = r.flagged ? kFailure : kOk;
    run.finish(s.spec.hash(), status);
    return status;
}

int cmd_report(const Options& o) {
    const Scenario s = load(o);
    Run run("report", out_dir(o, s));
    std::string vtext;
    if (!validated(s, o.samples, s.mc.seed, vtext)) {
        std::cerr << vtext;
        run.finish(s.spec.hash(), kFailure);
        return kFailure;
    }
    const auto sol = solve(s, o);

    double c_disc = 0.0;
    std::string conv_text;
    if (merton_oracle_available(s.spec, s.utility)) {
        std::vector<Grid> grids;
        for (int div : {4, 2, 1}) {
            const int nx = std::max(5, (s.grid.x_nodes - 1) / div + 1);
            grids.push_back(default_grid(s.spec, nx, 0, 0, 0, s.grid.max_stored_slices));
        }
        const ConvergenceStudy st = convergence_study(s.spec, s.utility, grids);
        c_disc = st.c_disc;
        conv_text = st.to_text();
        run.write_text("convergence.txt", conv_text);
    }

    ReportOptions ro;
    ro.steps = s.mc.steps;
    ro.paths = s.mc.paths;
    ro.seed = s.mc.seed;
    ro.threads = o.threads;
    const EpsilonReport rep = epsilon_optimality_report(s.spec, s.utility, sol, c_disc, ro);
    {
        std::ofstream os(run.file("report.csv"), std::ios::binary);
        rep.write_csv(os);
    }
    run.write_text("report.txt", rep.to_text());
    std::cout << conv_text << rep.to_text();
    const int status = rep.passed() ? kOk : kFailure;
    run.finish(s.spec.hash(), status);
    return status;
}

int cmd_presets(const Options& o) {
    if (o.out.empty()) {
        for (const auto& n : preset_names()) {
            const Scenario s = preset(n);
            std::cout << n << "  (n=" << s.spec.n << ", m=" << s.spec.m << ", M=" << s.spec.M
                      << ", mu=" << mu_of(s.spec.m, s.spec.n) << ", utility "
                      << s.utility.describe() << ")\n";
        }
        return kOk;
    }
    Run run("presets", o.out);
    for (const auto& n : preset_names()) run.write_text(n + ".yaml", scenario_to_yaml(preset(n)));
    std::cout << "wrote " << preset_names().size() << " presets to " << o.out << '\n';
    run.finish("", kOk);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mftlab: factor-market mutual fund laboratory"};
    app.set_version_flag("--version", MFTLAB_VERSION);
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub, bool needs_scenario) {
        auto* src = sub->add_option("--scenario", o.scenario, "scenario YAML file");
        auto* pre = sub->add_option("--preset", o.preset, "built-in scenario instead of a file");
        src->excludes(pre);
        if (needs_scenario) {
            sub->callback([sub] {
                if (sub->count("--scenario") + sub->count("--preset") == 0)
                    throw CLI::RequiredError("--scenario or --preset");
            });
        }
        sub->add_option("--out", o.out, "output directory (overrides the scenario)");
        sub->add_option("--seed", o.seed, "RNG seed (overrides the scenario)");
        sub->add_option("--paths", o.paths, "Monte Carlo paths")->check(CLI::PositiveNumber);
        sub->add_option("--steps", o.steps, "Monte Carlo time steps")->check(CLI::PositiveNumber);
        sub->add_option("--grid", o.grid, "grid as \"nx,ny,nz,nt\" (nt = 0: stable minimum)");
        sub->add_option("--format", o.format, "output format")->check(CLI::IsMember({"csv", "binary"}));
        sub->add_option("--samples", o.samples, "validation sample count")
            ->check(CLI::PositiveNumber);
        sub->add_option("--threads", o.threads, "worker threads (0: all cores)");
    };

    auto* validate = app.add_subcommand("validate", "check market assumptions");
    auto* solve_cmd = app.add_subcommand("solve", "solve the Bellman equation and extract funds");
    auto* simulate = app.add_subcommand("simulate", "simulate paths under a strategy");
    auto* eval = app.add_subcommand("evaluate", "Monte Carlo value of a strategy");
    auto* report = app.add_subcommand("report", "epsilon-optimality report");
    auto* presets = app.add_subcommand("presets", "list or write the built-in scenarios");
    for (auto* sub : {validate, solve_cmd, simulate, eval, report}) common(sub, true);
    for (auto* sub : {simulate, eval})
        sub->add_option("--strategy", o.strategy, "zero | oracle | hjb | grid")
            ->check(CLI::IsMember({"zero", "oracle", "hjb", "grid"}));
    presets->add_option("--out", o.out, "write each preset as YAML into this directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (validate->parsed()) return cmd_validate(o);
        if (solve_cmd->parsed()) return cmd_solve(o);
        if (simulate->parsed()) return cmd_simulate(o);
        if (eval->parsed()) return cmd_evaluate(o);
        if (report->parsed()) return cmd_report(o);
        if (presets->parsed()) return cmd_presets(o);
    } catch (const ScenarioError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const StabilityError& e) {
        std::cerr << "error: " << e.what() << " (required dt <= " << e.required_dt << ")\n";
        return kFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kUsage;
}
