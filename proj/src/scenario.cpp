#include "mftlab/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mft {

namespace {

class Parser {
public:
    explicit Parser(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(const YAML::Node& node, const std::string& msg) const {
        std::ostringstream os;
        os << source_;
        const YAML::Mark mark = node.Mark();
        if (!mark.is_null()) os << ':' << mark.line + 1 << ':' << mark.column + 1;
        os << ": " << msg;
        throw ScenarioError(os.str());
    }

    void check_keys(const YAML::Node& node, const std::set<std::string>& allowed,
                    const std::string& where) const {
        if (!node.IsMap()) fail(node, where + " must be a mapping");
        for (const auto& kv : node) {
            const std::string key = kv.first.as<std::string>();
            if (!allowed.count(key)) fail(kv.first, "unknown key '" + key + "' in " + where);
        }
    }

    template <class T>
    T scalar(const YAML::Node& node, const std::string& what) const {
        if (!node.IsScalar()) fail(node, what + " must be a scalar");
        try {
            return node.as<T>();
        } catch (const YAML::BadConversion&) {
            fail(node, "cannot read " + what + " from '" + node.Scalar() + "'");
        }
    }

    double number(const YAML::Node& node, const std::string& what) const {
        const double x = scalar<double>(node, what);
        if (!std::isfinite(x)) fail(node, what + " must be finite");
        return x;
    }

    /// Scalar (1 x 1), flat list (column vector, or a single row when rows == 1)
    /// or list of rows.
    Mat matrix(const YAML::Node& node, Eigen::Index rows, Eigen::Index cols,
               const std::string& what) const {
        Mat out(rows, cols);
        auto shape_error = [&] {
            std::ostringstream os;
            os << what << " must have shape " << rows << "x" << cols;
            fail(node, os.str());
        };
        if (node.IsScalar()) {
            if (rows != 1 || cols != 1) shape_error();
            out(0, 0) = number(node, what);
            return out;
        }
        if (!node.IsSequence()) shape_error();
        if (node.size() == 0) {
            if (rows * cols != 0) shape_error();
            return out;
        }
        if (node[0].IsScalar()) {
            if (static_cast<Eigen::Index>(node.size()) != rows * cols || (rows != 1 && cols != 1))
                shape_error();
            for (std::size_t i = 0; i < node.size(); ++i) out.data()[i] = number(node[i], what);
            return out;
        }
        if (static_cast<Eigen::Index>(node.size()) != rows) shape_error();
        for (std::size_t i = 0; i < node.size(); ++i) {
            const YAML::Node row = node[i];
            if (!row.IsSequence() || static_cast<Eigen::Index>(row.size()) != cols) shape_error();
            for (std::size_t j = 0; j < row.size(); ++j) out(i, j) = number(row[j], what);
        }
        return out;
    }

    Vec vector(const YAML::Node& node, Eigen::Index size, const std::string& what) const {
        return matrix(node, size, 1, what);
    }

    CoefficientFunction coefficient(const YAML::Node& node, const std::string& name,
                                    Eigen::Index rows, Eigen::Index cols, int m, int M,
                                    bool mean_reverting_allowed) const {
        if (!node.IsMap()) fail(node, "coefficient '" + name + "' must be a mapping");
        const YAML::Node fam = node["family"];
        if (!fam) fail(node, "coefficient '" + name + "' needs a family");
        const std::string family = scalar<std::string>(fam, "family");
        const std::string where = "coefficient '" + name + "'";
        if (family == "constant") {
            check_keys(node, {"family", "value"}, where);
            return CoefficientFunction::constant(required_matrix(node, "value", rows, cols, name));
        }
        if (family == "affine") {
            check_keys(node, {"family", "value", "dy", "dz"}, where);
            CoefficientFunction::Affine f;
            f.value = required_matrix(node, "value", rows, cols, name);
            f.dy = matrix_list(node["dy"], m, rows, cols, name + ".dy", node);
            f.dz = matrix_list(node["dz"], M, rows, cols, name + ".dz", node);
            return CoefficientFunction(f);
        }
        if (family == "tanh") {
            check_keys(node, {"family", "value", "amplitude", "gain_y", "gain_z"}, where);
            CoefficientFunction::BoundedSmooth f;
            f.value = required_matrix(node, "value", rows, cols, name);
            f.amplitude = required_matrix(node, "amplitude", rows, cols, name);
            f.gain_y = node["gain_y"] ? vector(node["gain_y"], m, name + ".gain_y") : Vec::Zero(m);
            f.gain_z = node["gain_z"] ? vector(node["gain_z"], M, name + ".gain_z") : Vec::Zero(M);
            return CoefficientFunction(f);
        }
        if (family == "ou") {
            if (!mean_reverting_allowed)
                fail(fam, "family 'ou' is only allowed for f_eta and f_zeta");
            check_keys(node, {"family", "rate", "level"}, where);
            CoefficientFunction::MeanReverting f;
            if (!node["rate"] || !node["level"]) fail(node, where + " needs rate and level");
            f.rate = vector(node["rate"], rows, name + ".rate");
            f.level = vector(node["level"], rows, name + ".level");
            return CoefficientFunction(f);
        }
        fail(fam, "unknown family '" + family + "' (expected constant, affine, tanh or ou)");
    }

private:
    Mat required_matrix(const YAML::Node& node, const char* key, Eigen::Index rows,
                        Eigen::Index cols, const std::string& name) const {
        if (!node[key]) {
            if (rows * cols == 0) return Mat(rows, cols);
            fail(node, "coefficient '" + name + "' needs '" + key + "'");
        }
        return matrix(node[key], rows, cols, name + "." + key);
    }

    std::vector<Mat> matrix_list(const YAML::Node& node, int count, Eigen::Index rows,
                                 Eigen::Index cols, const std::string& what,
                                 const YAML::Node& parent) const {
        std::vector<Mat> out;
        if (!node) {
            for (int k = 0; k < count; ++k) out.push_back(Mat::Zero(rows, cols));
            return out;
        }
        if (!node.IsSequence() || static_cast<int>(node.size()) != count)
            fail(node ? node : parent,
                 what + " must list one matrix per factor (" + std::to_string(count) + ")");
        for (std::size_t k = 0; k < node.size(); ++k)
            out.push_back(matrix(node[k], rows, cols, what));
        return out;
    }

    std::string source_;
};

void parse_market(const Parser& p, const YAML::Node& node, Scenario& s) {
    p.check_keys(node, {"n", "m", "M", "N", "K", "horizon", "domain", "initial", "coefficients"},
                 "market");
    auto req = [&](const char* key) {
        if (!node[key]) p.fail(node, std::string("market needs '") + key + "'");
        return node[key];
    };
    const int n = p.scalar<int>(req("n"), "n");
    const int m = node["m"] ? p.scalar<int>(node["m"], "m") : 0;
    const int M = node["M"] ? p.scalar<int>(node["M"], "M") : 0;
    const int N = node["N"] ? p.scalar<int>(node["N"], "N") : 0;
    if (n < 1) p.fail(req("n"), "n must be >= 1");
    if (m < 0 || M < 0 || N < 0) p.fail(node, "m, M and N must be >= 0");

    MarketSpec spec = MarketSpec::zeros(n, m, M, N);
    spec.K = p.number(req("K"), "K");
    spec.T = p.number(req("horizon"), "horizon");
    if (node["domain"]) {
        try {
            spec.domain = domain_from_string(p.scalar<std::string>(node["domain"], "domain"));
        } catch (const InputError& e) {
            p.fail(node["domain"], e.what());
        }
    }
    if (const YAML::Node init = node["initial"]) {
        p.check_keys(init, {"wealth", "eta", "zeta"}, "market.initial");
        if (init["wealth"]) spec.x0 = p.number(init["wealth"], "initial wealth");
        if (init["eta"]) spec.eta0 = p.vector(init["eta"], m, "initial eta");
        if (init["zeta"]) spec.zeta0 = p.vector(init["zeta"], M, "initial zeta");
    }
    if (const YAML::Node coef = node["coefficients"]) {
        p.check_keys(coef,
                     {"a", "v", "r", "f_eta", "beta_eta", "beta_eta_tilde", "f_zeta",
                      "beta_zeta_tilde"},
                     "market.coefficients");
        struct Slot {
            const char* name;
            CoefficientFunction* f;
            Eigen::Index rows, cols;
            bool ou;
        };
        const Slot slots[] = {{"a", &spec.a, n, 1, false},
                              {"v", &spec.v, n, n, false},
                              {"r", &spec.r, 1, 1, false},
                              {"f_eta", &spec.f_eta, m, 1, true},
                              {"beta_eta", &spec.beta_eta, m, n, false},
                              {"beta_eta_tilde", &spec.beta_eta_tilde, m, N, false},
                              {"f_zeta", &spec.f_zeta, M, 1, true},
                              {"beta_zeta_tilde", &spec.beta_zeta_tilde, M, N, false}};
        for (const Slot& slot : slots)
            if (const YAML::Node c = coef[slot.name])
                *slot.f = p.coefficient(c, slot.name, slot.rows, slot.cols, m, M, slot.ou);
    }
    try {
        spec.check();
    } catch (const InputError& e) {
        p.fail(node, e.what());
    }
    s.spec = std::move(spec);
}

void parse_utility(const Parser& p, const YAML::Node& node, Scenario& s) {
    p.check_keys(node, {"family", "delta", "lambda", "cap", "value"}, "utility");
    if (!node["family"]) p.fail(node, "utility needs a family");
    const std::string fam = p.scalar<std::string>(node["family"], "utility family");
    try {
        if (fam == "log") {
            s.utility = Utility::log();
        } else if (fam == "power") {
            if (!node["delta"]) p.fail(node, "power utility needs delta");
            s.utility = Utility::power(p.number(node["delta"], "delta"));
        } else if (fam == "capped_linear_quadratic") {
            if (!node["lambda"] || !node["cap"]) p.fail(node, "capped utility needs lambda and cap");
            s.utility = Utility::capped_linear_quadratic(p.number(node["lambda"], "lambda"),
                                                         p.number(node["cap"], "cap"),
                                                         s.spec.domain);
        } else if (fam == "constant") {
            s.utility = Utility::constant(node["value"] ? p.number(node["value"], "value") : 0.0,
                                          s.spec.domain);
        } else {
            p.fail(node["family"], "unknown utility family '" + fam + "'");
        }
    } catch (const ScenarioError&) {
        throw;
    } catch (const InputError& e) {
        p.fail(node, e.what());
    }
    if (s.utility.domain() != s.spec.domain)
        p.fail(node, "utility '" + fam + "' requires the positive domain");
}

void parse_grid(const Parser& p, const YAML::Node& node, GridSettings& g) {
    p.check_keys(node, {"x_nodes", "y_nodes", "z_nodes", "t_steps", "max_stored_slices"}, "grid");
    auto get = [&](const char* key, int& out, int lo) {
        if (!node[key]) return;
        out = p.scalar<int>(node[key], key);
        if (out < lo) p.fail(node[key], std::string(key) + " must be >= " + std::to_string(lo));
    };
    get("x_nodes", g.x_nodes, 3);
    get("y_nodes", g.y_nodes, 3);
    get("z_nodes", g.z_nodes, 3);
    get("t_steps", g.t_steps, 0);
    get("max_stored_slices", g.max_stored_slices, 2);
}

void parse_mc(const Parser& p, const YAML::Node& node, McSettings& mc) {
    p.check_keys(node, {"steps", "paths", "seed"}, "mc");
    if (node["steps"]) mc.steps = p.scalar<int>(node["steps"], "steps");
    if (node["paths"]) mc.paths = p.scalar<int>(node["paths"], "paths");
    if (node["seed"]) mc.seed = p.scalar<std::uint64_t>(node["seed"], "seed");
    if (mc.steps < 1) p.fail(node["steps"], "steps must be >= 1");
    if (mc.paths < 1) p.fail(node["paths"], "paths must be >= 1");
}

void parse_output(const Parser& p, const YAML::Node& node, OutputSettings& o) {
    p.check_keys(node, {"directory", "formats"}, "output");
    if (node["directory"]) o.directory = p.scalar<std::string>(node["directory"], "directory");
    if (const YAML::Node f = node["formats"]) {
        if (!f.IsSequence()) p.fail(f, "formats must be a list");
        o.formats.clear();
        for (const auto& item : f) {
            const std::string fmt = p.scalar<std::string>(item, "format");
            if (fmt != "csv" && fmt != "binary") p.fail(item, "format must be csv or binary");
            o.formats.push_back(fmt);
        }
    }
}

Scenario parse_root(const YAML::Node& root, const std::string& source) {
    const Parser p(source);
    if (!root || !root.IsMap()) p.fail(root, "scenario must be a mapping");
    p.check_keys(root, {"name", "market", "utility", "grid", "mc", "output"}, "scenario");
    Scenario s;
    if (root["name"]) s.name = p.scalar<std::string>(root["name"], "name");
    if (!root["market"]) p.fail(root, "scenario needs a market section");
    parse_market(p, root["market"], s);
    if (root["utility"]) {
        parse_utility(p, root["utility"], s);
    } else if (s.spec.domain != Domain::positive) {
        p.fail(root, "scenario on the reals needs a utility section");
    }
    if (root["grid"]) parse_grid(p, root["grid"], s.grid);
    if (root["mc"]) parse_mc(p, root["mc"], s.mc);
    if (root["output"]) parse_output(p, root["output"], s.output);
    return s;
}

// ---------------------------------------------------------------- writer

/// Shortest decimal text that reads back to the same double.
std::string num(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

void emit_matrix(YAML::Emitter& e, const Mat& m, bool column) {
    e << YAML::Flow << YAML::BeginSeq;
    if (column || m.rows() == 1) {
        for (Eigen::Index i = 0; i < m.size(); ++i) e << num(m.data()[i]);
    } else {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            e << YAML::Flow << YAML::BeginSeq;
            for (Eigen::Index j = 0; j < m.cols(); ++j) e << num(m(i, j));
            e << YAML::EndSeq;
        }
    }
    e << YAML::EndSeq;
}

void emit_value(YAML::Emitter& e, const Mat& m, bool column) {
    if (m.size() == 1) e << num(m(0, 0));
    else emit_matrix(e, m, column);
}

void emit_coefficient(YAML::Emitter& e, const char* name, const CoefficientFunction& f,
                      bool column) {
    e << YAML::Key << name << YAML::Value << YAML::BeginMap;
    std::visit(
        [&](const auto& form) {
            using F = std::decay_t<decltype(form)>;
            if constexpr (std::is_same_v<F, CoefficientFunction::Constant>) {
                e << YAML::Key << "family" << YAML::Value << "constant";
                e << YAML::Key << "value" << YAML::Value;
                emit_value(e, form.value, column);
            } else if constexpr (std::is_same_v<F, CoefficientFunction::Affine>) {
                e << YAML::Key << "family" << YAML::Value << "affine";
                e << YAML::Key << "value" << YAML::Value;
                emit_value(e, form.value, column);
                for (const auto* list : {&form.dy, &form.dz}) {
                    if (list->empty()) continue;
                    e << YAML::Key << (list == &form.dy ? "dy" : "dz") << YAML::Value
                      << YAML::Flow << YAML::BeginSeq;
                    for (const Mat& d : *list) emit_value(e, d, column);
                    e << YAML::EndSeq;
                }
            } else if constexpr (std::is_same_v<F, CoefficientFunction::BoundedSmooth>) {
                e << YAML::Key << "family" << YAML::Value << "tanh";
                e << YAML::Key << "value" << YAML::Value;
                emit_value(e, form.value, column);
                e << YAML::Key << "amplitude" << YAML::Value;
                emit_value(e, form.amplitude, column);
                if (form.gain_y.size() > 0) {
                    e << YAML::Key << "gain_y" << YAML::Value;
                    emit_matrix(e, form.gain_y, true);
                }
                if (form.gain_z.size() > 0) {
                    e << YAML::Key << "gain_z" << YAML::Value;
                    emit_matrix(e, form.gain_z, true);
                }
            } else {
                e << YAML::Key << "family" << YAML::Value << "ou";
                e << YAML::Key << "rate" << YAML::Value;
                emit_matrix(e, form.rate, true);
                e << YAML::Key << "level" << YAML::Value;
                emit_matrix(e, form.level, true);
            }
        },
        f.form());
    e << YAML::EndMap;
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& source) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& ex) {
        std::ostringstream os;
        os << source << ':' << ex.mark.line + 1 << ':' << ex.mark.column + 1 << ": " << ex.msg;
        throw ScenarioError(os.str());
    }
    return parse_root(root, source);
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError(path + ": cannot open scenario file");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path);
}

std::string scenario_to_yaml(const Scenario& s) {
    YAML::Emitter e;
    e << YAML::BeginMap;
    if (!s.name.empty()) e << YAML::Key << "name" << YAML::Value << s.name;

    const MarketSpec& sp = s.spec;
    e << YAML::Key << "market" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "n" << YAML::Value << sp.n;
    e << YAML::Key << "m" << YAML::Value << sp.m;
    e << YAML::Key << "M" << YAML::Value << sp.M;
    e << YAML::Key << "N" << YAML::Value << sp.N;
    e << YAML::Key << "K" << YAML::Value << num(sp.K);
    e << YAML::Key << "horizon" << YAML::Value << num(sp.T);
    e << YAML::Key << "domain" << YAML::Value << to_string(sp.domain);
    e << YAML::Key << "initial" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "wealth" << YAML::Value << num(sp.x0);
    if (sp.m > 0) {
        e << YAML::Key << "eta" << YAML::Value;
        emit_matrix(e, sp.eta0, true);
    }
    if (sp.M > 0) {
        e << YAML::Key << "zeta" << YAML::Value;
        emit_matrix(e, sp.zeta0, true);
    }
    e << YAML::EndMap;
    e << YAML::Key << "coefficients" << YAML::Value << YAML::BeginMap;
    emit_coefficient(e, "a", sp.a, true);
    emit_coefficient(e, "v", sp.v, false);
    emit_coefficient(e, "r", sp.r, true);
    if (sp.m > 0) {
        emit_coefficient(e, "f_eta", sp.f_eta, true);
        emit_coefficient(e, "beta_eta", sp.beta_eta, false);
        if (sp.N > 0) emit_coefficient(e, "beta_eta_tilde", sp.beta_eta_tilde, false);
    }
    if (sp.M > 0) {
        emit_coefficient(e, "f_zeta", sp.f_zeta, true);
        if (sp.N > 0) emit_coefficient(e, "beta_zeta_tilde", sp.beta_zeta_tilde, false);
    }
    e << YAML::EndMap << YAML::EndMap;

    const Utility& u = s.utility;
    e << YAML::Key << "utility" << YAML::Value << YAML::BeginMap;
    switch (u.family()) {
        case Utility::Family::log: e << YAML::Key << "family" << YAML::Value << "log"; break;
        case Utility::Family::power:
            e << YAML::Key << "family" << YAML::Value << "power";
            e << YAML::Key << "delta" << YAML::Value << num(u.delta());
            break;
        case Utility::Family::capped_linear_quadratic:
            e << YAML::Key << "family" << YAML::Value << "capped_linear_quadratic";
            e << YAML::Key << "lambda" << YAML::Value << num(u.lambda());
            e << YAML::Key << "cap" << YAML::Value << num(u.cap());
            break;
        case Utility::Family::constant:
            e << YAML::Key << "family" << YAML::Value << "constant";
            e << YAML::Key << "value" << YAML::Value << num(u.constant_value());
            break;
    }
    e << YAML::EndMap;

    e << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "x_nodes" << YAML::Value << s.grid.x_nodes;
    if (sp.m > 0) e << YAML::Key << "y_nodes" << YAML::Value << s.grid.y_nodes;
    if (sp.M > 0) e << YAML::Key << "z_nodes" << YAML::Value << s.grid.z_nodes;
    e << YAML::Key << "t_steps" << YAML::Value << s.grid.t_steps;
    e << YAML::Key << "max_stored_slices" << YAML::Value << s.grid.max_stored_slices;
    e << YAML::EndMap;

    e << YAML::Key << "mc" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "steps" << YAML::Value << s.mc.steps;
    e << YAML::Key << "paths" << YAML::Value << s.mc.paths;
    e << YAML::Key << "seed" << YAML::Value << s.mc.seed;
    e << YAML::EndMap;

    e << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "directory" << YAML::Value << s.output.directory;
    e << YAML::Key << "formats" << YAML::Value << YAML::Flow << s.output.formats;
    e << YAML::EndMap;

    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

// ---------------------------------------------------------------- presets

std::vector<std::string> preset_names() { return {"merton", "merton-power", "index", "multi-index"}; }

namespace {

Scenario merton_base() {
    Scenario s;
    s.spec = MarketSpec::zeros(2, 0, 0, 0);
    s.spec.K = 4.0;
    s.spec.T = 1.0;
    s.spec.x0 = 1.0;
    s.spec.a = CoefficientFunction::constant(Vec((Vec(2) << 0.08, 0.12).finished()));
    s.spec.r = CoefficientFunction::constant(Mat::Constant(1, 1, 0.02));
    Mat v = Mat::Zero(2, 2);
    v(0, 0) = 0.2;
    v(1, 1) = 0.25;
    s.spec.v = CoefficientFunction::constant(v);
    s.grid.x_nodes = 161;
    return s;
}

double tidy(double x) { return std::round(x * 1e6) / 1e6; }

/// Synthetic OU index factors driving the appreciation rates through tanh.
Scenario index_market(int n, int m, int N) {
    Scenario s;
    MarketSpec& sp = s.spec;
    sp = MarketSpec::zeros(n, m, 0, N);
    sp.K = 4.0;
    sp.T = 1.0;
    sp.x0 = 1.0;
    sp.r = CoefficientFunction::constant(Mat::Constant(1, 1, 0.02));

    Mat v = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        v(i, i) = tidy(0.2 + 0.025 * i);
        if (i > 0) v(i, i - 1) = 0.05;
    }
    sp.v = CoefficientFunction::constant(v);

    CoefficientFunction::BoundedSmooth a;
    a.value = Mat(n, 1);
    a.amplitude = Mat(n, 1);
    for (int i = 0; i < n; ++i) {
        a.value(i, 0) = tidy(0.05 + 0.01 * i);
        a.amplitude(i, 0) = tidy(0.04 - 0.0075 * i);
    }
    a.gain_y = Vec::Ones(m);
    a.gain_z = Vec();
    sp.a = CoefficientFunction(a);

    CoefficientFunction::MeanReverting f;
    f.rate = Vec::Ones(m);
    f.level = Vec::Zero(m);
    sp.f_eta = CoefficientFunction(f);

    Mat be = Mat::Zero(m, n);
    for (int k = 0; k < m; ++k)
        for (int i = 0; i < n; ++i) be(k, i) = tidy(k == 0 ? 0.2 - 0.04 * i : 0.05 + 0.04 * i);
    sp.beta_eta = CoefficientFunction::constant(be);
    Mat bt = Mat::Zero(m, N);
    for (int k = 0; k < std::min(m, N); ++k) bt(k, k) = 0.1;
    sp.beta_eta_tilde = CoefficientFunction::constant(bt);
    sp.eta0 = Vec::Zero(m);
    s.utility = Utility::power(0.5);
    return s;
}

}  // namespace

Scenario preset(const std::string& name) {
    if (name == "merton") {
        Scenario s = merton_base();
        s.name = "merton";
        s.utility = Utility::log();
        return s;
    }
    if (name == "merton-power") {
        Scenario s = merton_base();
        s.name = "merton-power";
        s.utility = Utility::power(0.5);
        return s;
    }
    if (name == "index") {
        Scenario s = index_market(4, 1, 1);
        s.name = "index";
        s.grid.x_nodes = 81;
        s.grid.y_nodes = 41;
        return s;
    }
    if (name == "multi-index") {
        Scenario s = index_market(5, 2, 2);
        s.name = "multi-index";
        s.grid.x_nodes = 41;
        s.grid.y_nodes = 21;
        s.mc.paths = 20000;
        return s;
    }
    throw InputError("unknown preset '" + name + "'");
}

std::vector<std::string> scenario_warnings(const Scenario& s) {
    std::vector<std::string> w;
    const int d = 1 + s.spec.m + s.spec.M;
    if (d >= 3) {
        std::size_t nodes = s.grid.x_nodes;
        for (int k = 0; k < s.spec.m; ++k) nodes *= s.grid.y_nodes;
        for (int k = 0; k < s.spec.M; ++k) nodes *= s.grid.z_nodes;
        w.push_back("heavy dimension: state dimension " + std::to_string(d) + " with " +
                    std::to_string(nodes) + " nodes per slice; the 1+m+M <= 3 budget binds");
    }
    return w;
}

}  // namespace mft
