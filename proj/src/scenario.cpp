#include "dichotomy/scenario.hpp"

#include "dichotomy/core.hpp"
#include "dichotomy/datko.hpp"
#include "dichotomy/envelope.hpp"
#include "dichotomy/examples.hpp"
#include "dichotomy/lyapunov.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace dichotomy {

using json = nlohmann::json;

namespace {

const std::vector<std::string> known_tasks = {"axioms", "compatibility", "envelope", "uniform-test",
                                              "datko",  "lyapunov",      "polarize", "asymptotics"};

/// Prerequisites that run implicitly when not requested.
const std::map<std::string, std::vector<std::string>> prerequisites = {
    {"envelope", {"compatibility"}},
    {"datko", {"compatibility", "envelope"}},
    {"lyapunov", {"compatibility", "envelope"}},
    {"polarize", {"compatibility", "envelope"}},
};

/// Tasks that must come earlier when both are listed.
const std::map<std::string, std::vector<std::string>> ordering = {
    {"envelope", {"compatibility"}},
    {"datko", {"compatibility", "envelope"}},
    {"lyapunov", {"compatibility", "envelope", "datko"}},
    {"polarize", {"compatibility", "envelope"}},
};

bool is_known_task(const std::string& name) {
    return std::find(known_tasks.begin(), known_tasks.end(), name) != known_tasks.end();
}

// ---------------------------------------------------------------- validation

class Validator {
public:
    std::vector<Diagnostic> out;

    void error(std::string path, std::string message) {
        out.push_back({Diagnostic::Severity::Error, std::move(path), std::move(message)});
    }
    void warn(std::string path, std::string message) {
        out.push_back({Diagnostic::Severity::Warning, std::move(path), std::move(message)});
    }

    /// Checks an optional (or required) numeric field against a predicate.
    void number(const json& obj, const std::string& key, const std::string& path, bool required,
                const std::function<bool(double)>& ok, const char* expectation) {
        if (!obj.contains(key)) {
            if (required) error(path + "/" + key, "missing required number");
            return;
        }
        const auto& v = obj.at(key);
        if (!v.is_number()) {
            error(path + "/" + key, "must be a number");
            return;
        }
        const double d = v.get<double>();
        if (!std::isfinite(d) || !ok(d)) error(path + "/" + key, std::string("must be ") + expectation);
    }

    void integer(const json& obj, const std::string& key, const std::string& path, long long min_value) {
        if (!obj.contains(key)) return;
        const auto& v = obj.at(key);
        if (!v.is_number_integer() || v.get<long long>() < min_value) {
            error(path + "/" + key, "must be an integer >= " + std::to_string(min_value));
        }
    }

    void boolean(const json& obj, const std::string& key, const std::string& path) {
        if (obj.contains(key) && !obj.at(key).is_boolean()) error(path + "/" + key, "must be true or false");
    }

    void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
        for (const auto& [k, v] : obj.items()) {
            if (std::none_of(keys.begin(), keys.end(), [&](const char* x) { return k == x; })) {
                warn(path + "/" + k, "unknown key is ignored");
            }
        }
    }

    /// n x n array of arrays of numbers; n inferred when dim < 0.
    void matrix(const json& obj, const std::string& key, const std::string& path, int& dim, bool required) {
        if (!obj.contains(key)) {
            if (required) error(path + "/" + key, "missing required matrix");
            return;
        }
        const auto& m = obj.at(key);
        if (!m.is_array() || m.empty()) {
            error(path + "/" + key, "must be a non-empty array of rows");
            return;
        }
        const int rows = static_cast<int>(m.size());
        if (dim < 0) dim = rows;
        if (rows != dim) {
            error(path + "/" + key, "must be " + std::to_string(dim) + " x " + std::to_string(dim));
            return;
        }
        for (const auto& row : m) {
            if (!row.is_array() || static_cast<int>(row.size()) != dim ||
                !std::all_of(row.begin(), row.end(), [](const json& x) { return x.is_number(); })) {
                error(path + "/" + key, "rows must be arrays of " + std::to_string(dim) + " numbers");
                return;
            }
        }
    }
};

const auto positive = [](double d) { return d > 0; };
const auto nonnegative = [](double d) { return d >= 0; };
const auto at_least_one = [](double d) { return d >= 1; };

void validate_system(Validator& v, const json& root) {
    if (!root.contains("system")) {
        v.error("/system", "missing system");
        return;
    }
    const auto& sys = root.at("system");
    if (!sys.is_object()) {
        v.error("/system", "must be an object");
        return;
    }
    if (sys.contains("example")) {
        v.only_keys(sys, "/system", {"example", "params"});
        if (!sys.at("example").is_string() || !parse_example_id(sys.at("example").get<std::string>())) {
            v.error("/system/example", "must be one of Ex2_5, Ex2_6, Ex2_8, Ex3_2");
        }
        if (sys.contains("params")) {
            if (!sys.at("params").is_object()) {
                v.error("/system/params", "must be an object");
            } else {
                v.number(sys.at("params"), "a", "/system/params", false, positive, "> 0");
            }
        }
        return;
    }
    v.only_keys(sys, "/system", {"family", "projection"});
    int dim = -1;
    if (!sys.contains("family") || !sys.at("family").is_object()) {
        v.error("/system/family", "need an example id or an inline family object");
    } else {
        const auto& f = sys.at("family");
        const std::string kind = f.value("kind", "");
        if (kind == "cosine_diagonal") {
            v.only_keys(f, "/system/family", {"kind", "components"});
            if (!f.contains("components") || !f.at("components").is_array() || f.at("components").empty()) {
                v.error("/system/family/components", "must be a non-empty array");
            } else {
                dim = static_cast<int>(f.at("components").size());
                for (std::size_t i = 0; i < f.at("components").size(); ++i) {
                    const auto& c = f.at("components")[i];
                    const std::string p = "/system/family/components/" + std::to_string(i);
                    if (!c.is_object()) {
                        v.error(p, "must be an object");
                        continue;
                    }
                    v.number(c, "c", p, true, [](double) { return true; }, "a number");
                    v.number(c, "d", p, true, [](double) { return true; }, "a number");
                    v.boolean(c, "decaying", p);
                }
            }
        } else if (kind == "ode") {
            v.only_keys(f, "/system/family", {"kind", "A0", "A1", "A2", "rel_tol", "abs_tol"});
            v.matrix(f, "A0", "/system/family", dim, true);
            v.matrix(f, "A1", "/system/family", dim, false);
            v.matrix(f, "A2", "/system/family", dim, false);
            v.number(f, "rel_tol", "/system/family", false, positive, "> 0");
            v.number(f, "abs_tol", "/system/family", false, positive, "> 0");
        } else {
            v.error("/system/family/kind", "must be \"cosine_diagonal\" or \"ode\"");
        }
    }
    if (!sys.contains("projection") || !sys.at("projection").is_object()) {
        v.error("/system/projection", "inline systems need a projection object");
        return;
    }
    const auto& p = sys.at("projection");
    const std::string kind = p.value("kind", "");
    if (kind == "constant") {
        v.only_keys(p, "/system/projection", {"kind", "P"});
        v.matrix(p, "P", "/system/projection", dim, true);
    } else if (kind == "affine") {
        v.only_keys(p, "/system/projection", {"kind", "P0", "P1"});
        v.matrix(p, "P0", "/system/projection", dim, true);
        v.matrix(p, "P1", "/system/projection", dim, true);
    } else {
        v.error("/system/projection/kind", "must be \"constant\" or \"affine\"");
    }
}

void validate_grid(Validator& v, const json& root) {
    if (!root.contains("grid")) return;
    const auto& g = root.at("grid");
    if (!g.is_object()) {
        v.error("/grid", "must be an object");
        return;
    }
    v.only_keys(g, "/grid", {"t_max", "time_points", "direction_seed", "extra_directions", "geometric_points", "resonant"});
    v.number(g, "t_max", "/grid", false, positive, "> 0");
    v.integer(g, "time_points", "/grid", 2);
    v.integer(g, "direction_seed", "/grid", 0);
    v.integer(g, "extra_directions", "/grid", 0);
    v.integer(g, "geometric_points", "/grid", 0);
    v.boolean(g, "resonant", "/grid");
}

void validate_tasks(Validator& v, const json& root) {
    if (!root.contains("tasks") || !root.at("tasks").is_array() || root.at("tasks").empty()) {
        v.error("/tasks", "must be a non-empty array of task names");
        return;
    }
    std::vector<std::string> names;
    const auto& tasks = root.at("tasks");
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const std::string p = "/tasks/" + std::to_string(i);
        if (!tasks[i].is_string() || !is_known_task(tasks[i].get<std::string>())) {
            v.error(p, "unknown task");
            continue;
        }
        const auto name = tasks[i].get<std::string>();
        if (std::find(names.begin(), names.end(), name) != names.end()) v.error(p, "task listed twice");
        names.push_back(name);
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto it = ordering.find(names[i]);
        if (it == ordering.end()) continue;
        for (const auto& dep : it->second) {
            const auto pos = std::find(names.begin(), names.end(), dep);
            if (pos != names.end() && static_cast<std::size_t>(pos - names.begin()) > i) {
                v.error("/tasks/" + std::to_string(i), "task '" + names[i] + "' must come after '" + dep + "'");
            }
        }
    }
}

void validate_params(Validator& v, const json& root) {
    if (!root.contains("task_params")) return;
    const auto& tp = root.at("task_params");
    if (!tp.is_object()) {
        v.error("/task_params", "must be an object");
        return;
    }
    for (const auto& [name, params] : tp.items()) {
        const std::string path = "/task_params/" + name;
        if (!is_known_task(name)) {
            v.warn(path, "parameters for an unknown task are ignored");
            continue;
        }
        if (!params.is_object()) {
            v.error(path, "must be an object");
            continue;
        }
        v.number(params, "tol", path, false, positive, "> 0");
        v.number(params, "abs_tol", path, false, positive, "> 0");
        v.number(params, "rel_tol", path, false, positive, "> 0");
        v.number(params, "structural_tol", path, false, positive, "> 0");
        v.number(params, "nu_min", path, false, positive, "> 0");
        v.number(params, "p", path, false, positive, "> 0");
        v.number(params, "gamma", path, name == "datko" || name == "lyapunov" || name == "polarize", positive, "> 0");
        v.number(params, "beta", path, false, nonnegative, ">= 0");
        v.number(params, "K", path, false, at_least_one, ">= 1");
        v.number(params, "tail_T", path, false, positive, "> 0");
        v.number(params, "horizon", path, false, positive, "> 0");
        v.number(params, "t0", path, false, nonnegative, ">= 0");
        v.number(params, "t_max", path, false, positive, "> 0");
        v.integer(params, "triples", path, 1);
        v.integer(params, "held_out", path, 1);
        v.integer(params, "seed", path, 0);
        v.boolean(params, "use_known", path);
        v.boolean(params, "pipeline", path);
        if (params.contains("times")) {
            const auto& t = params.at("times");
            if (!t.is_array() || t.empty() ||
                !std::all_of(t.begin(), t.end(), [](const json& x) { return x.is_number() && x.get<double>() >= 0; })) {
                v.error(path + "/times", "must be a non-empty array of times >= 0");
            }
        }
        if (params.contains("x0")) {
            const auto& x = params.at("x0");
            if (!x.is_array() || x.empty() ||
                !std::all_of(x.begin(), x.end(), [](const json& e) { return e.is_number(); })) {
                v.error(path + "/x0", "must be a non-empty array of numbers");
            }
        }
        if (params.contains("asserted")) {
            const auto& a = params.at("asserted");
            if (!a.is_object()) {
                v.error(path + "/asserted", "must be an object with M, epsilon, omega");
            } else {
                v.number(a, "M", path + "/asserted", true, at_least_one, ">= 1");
                v.number(a, "epsilon", path + "/asserted", true, nonnegative, ">= 0");
                v.number(a, "omega", path + "/asserted", true, positive, "> 0");
            }
        }
    }
    if (tp.contains("datko") && tp.at("datko").is_object()) {
        const auto& d = tp.at("datko");
        if (d.contains("gamma") && d.contains("beta") && d.at("gamma").is_number() && d.at("beta").is_number() &&
            d.at("beta").get<double>() >= d.at("gamma").get<double>()) {
            v.warn("/task_params/datko/beta", "beta >= gamma: certification can only report failed hypotheses");
        }
    }
}

// ------------------------------------------------------------------- system

Matrix matrix_from(const json& m) {
    const auto n = static_cast<Eigen::Index>(m.size());
    Matrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) out(i, j) = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
    return out;
}

json to_json(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

struct System {
    std::optional<PaperExample> example;
    std::optional<EvolutionFamily> family;
    std::optional<ProjectionFamily> projection;
};

System build_system(const json& sys) {
    System out;
    if (sys.contains("example")) {
        ExampleParams params;
        if (sys.contains("params")) params.a = sys.at("params").value("a", 1.0);
        out.example = build(*parse_example_id(sys.at("example").get<std::string>()), params);
        out.family = out.example->family;
        out.projection = out.example->projection;
        return out;
    }
    const auto& f = sys.at("family");
    if (f.at("kind") == "cosine_diagonal") {
        std::vector<CosineComponent> comps;
        for (const auto& c : f.at("components")) {
            comps.push_back({c.at("c").get<double>(), c.at("d").get<double>(), c.value("decaying", true)});
        }
        out.family = generalized_cosine_family(comps);
    } else {
        const Matrix a0 = matrix_from(f.at("A0"));
        const auto n = a0.rows();
        const Matrix a1 = f.contains("A1") ? matrix_from(f.at("A1")) : Matrix::Zero(n, n);
        const Matrix a2 = f.contains("A2") ? matrix_from(f.at("A2")) : Matrix::Zero(n, n);
        OdePolicy policy;
        policy.rel_tol = f.value("rel_tol", policy.rel_tol);
        policy.abs_tol = f.value("abs_tol", policy.abs_tol);
        out.family = EvolutionFamily::ode_propagated(
            static_cast<int>(n),
            [a0, a1, a2](Scalar t) -> Matrix {
                const Scalar c = std::cos(t);
                return a0 + c * c * a1 + t * std::sin(2 * t) * a2;
            },
            policy);
    }
    const auto& p = sys.at("projection");
    if (p.at("kind") == "constant") {
        out.projection = ProjectionFamily::constant(matrix_from(p.at("P")));
    } else {
        const Matrix p0 = matrix_from(p.at("P0"));
        const Matrix p1 = matrix_from(p.at("P1"));
        out.projection = ProjectionFamily(static_cast<int>(p0.rows()), [p0, p1](Scalar t) -> Matrix { return p0 + t * p1; });
    }
    return out;
}

GridSpec grid_from(const json& root, const RunFlags& flags) {
    GridSpec grid;
    if (root.contains("grid")) {
        const auto& g = root.at("grid");
        grid.t_max = g.value("t_max", grid.t_max);
        grid.time_points = g.value("time_points", grid.time_points);
        grid.direction_seed = g.value("direction_seed", grid.direction_seed);
        grid.extra_directions = g.value("extra_directions", grid.extra_directions);
        grid.geometric_points = g.value("geometric_points", grid.geometric_points);
        grid.resonant = g.value("resonant", grid.resonant);
    }
    if (flags.seed_override) grid.direction_seed = *flags.seed_override;
    return grid;
}

// -------------------------------------------------------------------- tasks

struct Curve {
    std::string series;
    std::vector<std::array<Scalar, 3>> rows;
};

struct Context {
    const System& system;
    GridSpec grid;
    std::vector<Vector> dirs;
    Scalar scale;
    json task_params;
    std::optional<CompatibilityEstimate> compatibility;
    std::optional<DichotomyConstants> dichotomy;
    std::vector<Curve> curves;

    [[nodiscard]] const EvolutionFamily& family() const { return *system.family; }
    [[nodiscard]] const ProjectionFamily& projection() const { return *system.projection; }
    [[nodiscard]] json params(const std::string& task) const {
        return task_params.contains(task) ? task_params.at(task) : json::object();
    }
    [[nodiscard]] std::optional<TailEnvelope> tail() const {
        if (!dichotomy || dichotomy->p_empty || !dichotomy->p_fit.feasible) return std::nullopt;
        return tail_envelope(dichotomy->p_fit);
    }
};

struct TaskOutcome {
    json result = json::object();
    bool pass = true;
    bool informational = false;
};

json fit_json(const EnvelopeFit& f) {
    return {{"side", to_string(f.side)},     {"N", f.N},
            {"alpha", f.alpha},              {"nu", f.nu},
            {"rate", f.rate},                {"feasible", f.feasible},
            {"rate_at_floor", f.rate_at_floor}, {"slack", f.slack},
            {"alpha_below_nu", f.alpha_below_nu}, {"samples", f.sample_count},
            {"divergent", f.divergent}, {"target_rate", f.target_rate}};
}

json witness_json(const std::optional<Witness>& w) {
    if (!w) return nullptr;
    json pts = json::array();
    for (const auto& p : w->points) pts.push_back({{"t", p.t}, {"s", p.s}, {"log_lower_bound", p.log_lower_bound}});
    return {{"kind", to_string(w->kind)}, {"mean_log_step", w->mean_log_step}, {"points", pts}};
}

QuadraturePolicy quadrature_from(const json& p, Scalar scale) {
    QuadraturePolicy q;
    q.abs_tol = p.value("abs_tol", q.abs_tol) * scale;
    q.rel_tol = p.value("rel_tol", q.rel_tol) * scale;
    return q;
}

TaskOutcome run_axioms(Context& ctx) {
    const auto p = ctx.params("axioms");
    const Scalar tol = p.value("tol", 1e-8) * ctx.scale;
    const auto axioms = check_axioms(ctx.family(), ctx.grid, tol);
    const auto proj = check_projection(ctx.projection(), ctx.grid, tol);
    TaskOutcome out;
    out.result = {{"identity_residual", axioms.identity_residual},
                  {"cocycle_residual", axioms.cocycle_residual},
                  {"worst_triple", {axioms.worst_triple.t, axioms.worst_triple.s, axioms.worst_triple.t0}},
                  {"continuity_quotient", axioms.continuity_quotient},
                  {"continuity_bound", axioms.continuity_bound},
                  {"tolerance", tol},
                  {"projection_idempotency_residual", proj.idempotency_residual},
                  {"projection_complement_residual", proj.complement_residual},
                  {"family_kind", to_string(ctx.family().kind())}};
    out.pass = axioms.pass && proj.pass;
    Curve curve{"projection_norm", {}};
    for (const auto& pt : projection_norm_curve(ctx.projection(), ctx.grid)) curve.rows.push_back({pt.t, pt.norm, 0});
    ctx.curves.push_back(std::move(curve));
    return out;
}

TaskOutcome run_compatibility(Context& ctx) {
    const auto p = ctx.params("compatibility");
    CompatibilityThresholds th;
    th.structural_tol = p.value("structural_tol", th.structural_tol) * ctx.scale;
    if (p.contains("asserted")) {
        const auto& a = p.at("asserted");
        th.asserted = CompatibilityConstants{a.at("M").get<double>(), a.at("epsilon").get<double>(),
                                             a.at("omega").get<double>()};
    } else if (p.value("use_known", true) && ctx.system.example && ctx.system.example->compatibility) {
        th.asserted = ctx.system.example->compatibility;
    }
    const auto est = check_compatibility(ctx.family(), ctx.projection(), ctx.grid, th);
    ctx.compatibility = est;
    TaskOutcome out;
    out.result = {{"M", est.M},
                  {"epsilon", est.epsilon},
                  {"omega", est.omega},
                  {"source", to_string(est.source)},
                  {"fitted", {{"M", est.fitted.M}, {"epsilon", est.fitted.epsilon}, {"omega", est.fitted.omega}}},
                  {"commutation_residual", est.commutation_residual},
                  {"invertibility_residual", est.invertibility_residual},
                  {"structural_tolerance", th.structural_tol},
                  {"feasible", est.feasible},
                  {"slack", est.slack},
                  {"samples", est.sample_count}};
    out.pass = est.pass;
    return out;
}

TaskOutcome run_envelope(Context& ctx) {
    const auto p = ctx.params("envelope");
    FitBounds bounds;
    bounds.nu_min = p.value("nu_min", bounds.nu_min);
    const auto d = certify_dichotomy(ctx.family(), ctx.projection(), ctx.grid, ctx.dirs, bounds);
    ctx.dichotomy = d;
    TaskOutcome out;
    out.result = {{"p_fit", fit_json(d.p_fit)},
                  {"q_fit", fit_json(d.q_fit)},
                  {"uniform", d.uniform},
                  {"dichotomy", d.dichotomy},
                  {"p_witness", witness_json(d.p_witness)},
                  {"q_witness", witness_json(d.q_witness)},
                  {"p_empty", d.p_empty},
                  {"q_empty", d.q_empty},
                  {"region", {{"t_min", 0.0}, {"t_max", d.t_max}}}};
    if (d.merged) {
        out.result["merged"] = {{"N", d.merged->N}, {"alpha", d.merged->alpha}, {"nu", d.merged->nu}};
    } else {
        out.result["merged"] = nullptr;
    }
    out.pass = d.dichotomy;

    std::vector<TimePair> pairs;
    for (Scalar t : time_points(ctx.grid)) pairs.push_back({t, 0});
    const auto samples = collect_samples(ctx.family(), ctx.projection(), pairs, ctx.dirs);
    for (Side side : {Side::P, Side::Q}) {
        std::map<Scalar, Scalar> best;
        for (const auto& x : samples.side(side)) best[x.t - x.s] = std::max(best[x.t - x.s], x.value);
        Curve c{side == Side::P ? "p_forward_norm" : "q_backward_norm", {}};
        for (const auto& [gap, value] : best) c.rows.push_back({gap, value, 0});
        ctx.curves.push_back(std::move(c));
    }
    return out;
}

TaskOutcome run_uniform(Context& ctx) {
    const auto p = ctx.params("uniform-test");
    const Scalar nu_min = p.value("nu_min", 1e-3);
    auto pairs = time_pairs(ctx.grid);
    const auto extra = witness_catalogue(ctx.grid.t_max);
    pairs.insert(pairs.end(), extra.begin(), extra.end());
    const auto samples = collect_samples(ctx.family(), ctx.projection(), pairs, ctx.dirs);
    TaskOutcome out;
    out.informational = true;
    for (Side side : {Side::P, Side::Q}) {
        const std::string key = side == Side::P ? "p" : "q";
        if (samples.side(side).empty()) {
            out.result[key] = {{"feasible", true}, {"vacuous", true}};
            continue;
        }
        const auto test = certify_uniform(samples.side(side), side, nu_min);
        out.result[key] = {{"feasible", test.feasible}, {"fit", fit_json(test.fit)}, {"witness", witness_json(test.witness)}};
    }
    out.result["uniform"] = out.result["p"]["feasible"].get<bool>() && out.result["q"]["feasible"].get<bool>();
    return out;
}

TaskOutcome run_datko(Context& ctx) {
    const auto p = ctx.params("datko");
    DatkoConfig config;
    config.p = p.value("p", 2.0);
    config.gamma = p.at("gamma").get<double>();
    config.beta = p.value("beta", 0.0);
    if (p.contains("K")) config.K = p.at("K").get<double>();
    if (p.contains("tail_T")) config.tail_T = p.at("tail_T").get<double>();
    config.quadrature = quadrature_from(p, ctx.scale);
    std::vector<Scalar> times;
    if (p.contains("times")) {
        for (const auto& t : p.at("times")) times.push_back(t.get<double>());
    } else {
        times = time_points(ctx.grid);
    }
    const Scalar eps = ctx.compatibility ? ctx.compatibility->epsilon : 0;
    const auto report = datko_certify(ctx.family(), ctx.projection(), times, ctx.dirs, config, ctx.tail(), eps);
    TaskOutcome out;
    out.result = {{"p", config.p},
                  {"gamma", config.gamma},
                  {"beta", config.beta},
                  {"K_claim", config.K ? json(*config.K) : json(nullptr)},
                  {"K_raw", report.K_raw},
                  {"K_est", report.K_est},
                  {"K_error", report.K_error},
                  {"epsilon", eps},
                  {"gamma_exceeds_epsilon", report.gamma_exceeds_epsilon},
                  {"beta_in_range", report.beta_in_range},
                  {"verdict", to_string(report.verdict)},
                  {"points", report.per_point.size()},
                  {"skipped_points", report.skipped_points},
                  {"quadrature", {{"abs_tol", config.quadrature.abs_tol}, {"rel_tol", config.quadrature.rel_tol}}}};
    out.pass = report.verdict == DatkoVerdict::CertifiedDichotomy;
    Curve curve{"datko_functional", {}};
    for (const auto& pt : report.per_point) {
        if (pt.direction == 0) curve.rows.push_back({pt.t, pt.d_p + pt.d_q, pt.error});
    }
    ctx.curves.push_back(std::move(curve));
    return out;
}

LyapunovEvaluator make_evaluator(const Context& ctx, const json& p) {
    LyapunovPolicy policy;
    policy.quadrature = quadrature_from(p, ctx.scale);
    if (p.contains("tail_T")) policy.tail_T = p.at("tail_T").get<double>();
    return LyapunovEvaluator(ctx.family(), ctx.projection(), canonical_H(ctx.projection(), p.at("gamma").get<double>()),
                             ctx.tail(), ctx.grid, policy);
}

std::vector<Scalar> times_from(const json& p, std::vector<Scalar> fallback, Scalar t_max) {
    std::vector<Scalar> out;
    if (p.contains("times")) {
        for (const auto& t : p.at("times")) out.push_back(t.get<double>());
        return out;
    }
    for (Scalar t : fallback) {
        if (t <= t_max) out.push_back(t);
    }
    return out;
}

TaskOutcome run_lyapunov(Context& ctx) {
    const auto p = ctx.params("lyapunov");
    const auto evaluator = make_evaluator(ctx, p);
    const Scalar gamma = p.at("gamma").get<double>();
    const Scalar beta = p.value("beta", 0.0);
    const Scalar t_max = std::min<Scalar>(p.value("t_max", 10.0), ctx.grid.t_max);
    const auto triples = random_triples(p.value("triples", 20), t_max, ctx.family().dim(),
                                        p.value("seed", ctx.grid.direction_seed));
    const auto inequality = check_lyapunov_inequality(evaluator, triples);
    const auto times = times_from(p, {0, 1, 2, 5, 10}, t_max);
    const Scalar K = p.value("K", 1.0);
    const auto l12 = check_L1_L2(evaluator, K, gamma, beta, times, ctx.dirs);

    TaskOutcome out;
    out.result = {{"gamma", gamma},
                  {"beta", beta},
                  {"triples", triples.size()},
                  {"max_residual", inequality.max_residual},
                  {"max_excess_over_tolerance", inequality.max_excess},
                  {"inequality_holds", inequality.pass},
                  {"K", K},
                  {"tightest_K", l12.tightest_K},
                  {"l1_holds", l12.l1_holds},
                  {"l2_holds", l12.l2_holds},
                  {"min_L_on_P", l12.min_L_on_P},
                  {"max_L_on_Q", l12.max_L_on_Q}};
    out.pass = inequality.pass && l12.l1_holds && l12.l2_holds;

    if (p.value("pipeline", false)) {
        if (!ctx.compatibility) throw Error(ErrorCode::HypothesisViolated, "pipeline needs compatibility constants");
        const auto report = theorem_3_4_pipeline(ctx.family(), ctx.projection(), *ctx.compatibility, ctx.tail(), K,
                                                 gamma, beta, ctx.grid, ctx.dirs);
        json links = json::array();
        for (const auto& l : report.links) links.push_back({{"link", l.name}, {"residual", l.residual}, {"holds", l.holds}});
        const auto& c = report.derived;
        out.result["pipeline"] = {
            {"links", links},
            {"chain_holds", report.chain_holds},
            {"datko_verdict", to_string(report.datko.verdict)},
            {"K_est", report.datko.K_est},
            {"derived",
             {{"N1", c.N1}, {"rate1", c.rate1}, {"weight1", c.weight1}, {"N2", c.N2}, {"rate2", c.rate2}, {"weight2", c.weight2}}},
            {"p_violation", report.p_violation},
            {"q_violation", report.q_violation},
            {"dichotomy", report.constants.dichotomy}};
        out.pass = out.pass && report.constants.dichotomy;
    }

    Curve curve{"lyapunov_trajectory", {}};
    const Vector& x0 = ctx.dirs.back();
    for (Scalar t : time_points(ctx.grid)) {
        if (t > t_max) break;
        const auto v = evaluator.evaluate(t, ctx.family()(t, 0) * x0);
        curve.rows.push_back({t, v.L, v.error});
    }
    ctx.curves.push_back(std::move(curve));
    return out;
}

TaskOutcome run_polarize(Context& ctx) {
    const auto p = ctx.params("polarize");
    const auto evaluator = make_evaluator(ctx, p);
    PolarizationOptions options;
    options.held_out = p.value("held_out", options.held_out);
    options.tolerance = p.value("tol", options.tolerance) * ctx.scale;
    options.seed = p.value("seed", ctx.grid.direction_seed);
    TaskOutcome out;
    out.result["forms"] = json::array();
    for (Scalar t : times_from(p, {0, 1, 5}, ctx.grid.t_max)) {
        const auto w = polarize_W(evaluator, t, {}, options);
        out.result["forms"].push_back({{"t", t},
                                       {"W", to_json(w.matrix)},
                                       {"asymmetry", w.asymmetry},
                                       {"consistency", w.consistency},
                                       {"p_range_nonnegative", w.p_range_nonnegative},
                                       {"q_range_nonpositive", w.q_range_nonpositive}});
        out.pass = out.pass && w.p_range_nonnegative && w.q_range_nonpositive;
    }
    out.result["tolerance"] = options.tolerance;
    return out;
}

TaskOutcome run_asymptotics(Context& ctx) {
    const auto p = ctx.params("asymptotics");
    const int n = ctx.family().dim();
    Vector x0 = Vector::Ones(n);
    if (p.contains("x0")) {
        if (static_cast<int>(p.at("x0").size()) != n) throw Error(ErrorCode::InvalidParam, "x0 has the wrong dimension");
        for (int i = 0; i < n; ++i) x0(i) = p.at("x0")[static_cast<std::size_t>(i)].get<double>();
    }
    const Scalar t0 = p.value("t0", 0.0);
    const Scalar horizon = p.value("horizon", std::min<Scalar>(ctx.grid.t_max, 10));
    const auto trend = check_asymptotics(ctx.family(), ctx.projection(), t0, x0, horizon);
    TaskOutcome out;
    out.result = {{"t0", t0},
                  {"horizon", horizon},
                  {"x0", to_json(x0)},
                  {"p_decays", trend.p_decays},
                  {"q_grows", trend.q_grows},
                  {"q_exempt", trend.q_exempt},
                  {"total_decays", trend.total_decays}};
    out.pass = trend.pass;
    Curve cp{"asymptotics_p", {}};
    Curve cq{"asymptotics_q", {}};
    for (const auto& pt : trend.curve) {
        cp.rows.push_back({pt.t, pt.p_norm, 0});
        cq.rows.push_back({pt.t, pt.q_norm, 0});
    }
    ctx.curves.push_back(std::move(cp));
    ctx.curves.push_back(std::move(cq));
    return out;
}

TaskOutcome dispatch(const std::string& name, Context& ctx) {
    if (name == "axioms") return run_axioms(ctx);
    if (name == "compatibility") return run_compatibility(ctx);
    if (name == "envelope") return run_envelope(ctx);
    if (name == "uniform-test") return run_uniform(ctx);
    if (name == "datko") return run_datko(ctx);
    if (name == "lyapunov") return run_lyapunov(ctx);
    if (name == "polarize") return run_polarize(ctx);
    return run_asymptotics(ctx);
}

int exit_code_for(const Error& e) {
    if (e.numerical()) return exit_numerical;
    if (e.code() == ErrorCode::InvalidParam) return exit_input;
    return exit_failed;
}

std::string render(Scalar v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_curve(const std::filesystem::path& dir, const Curve& c) {
    std::ofstream os(dir / (c.series + ".csv"));
    if (!os) throw std::runtime_error("cannot write curve " + c.series);
    os << "series,abscissa,value,error_estimate\n";
    for (const auto& r : c.rows) os << c.series << ',' << render(r[0]) << ',' << render(r[1]) << ',' << render(r[2]) << '\n';
}

}  // namespace

std::string format(const Diagnostic& d) {
    return std::string(d.severity == Diagnostic::Severity::Error ? "error" : "warning") + ": " +
           (d.path.empty() ? "/" : d.path) + ": " + d.message;
}

bool has_errors(const std::vector<Diagnostic>& diagnostics) {
    return std::any_of(diagnostics.begin(), diagnostics.end(),
                       [](const Diagnostic& d) { return d.severity == Diagnostic::Severity::Error; });
}

std::vector<Diagnostic> validate_scenario(const json& root) {
    Validator v;
    if (!root.is_object()) {
        v.error("", "scenario must be an object");
        return v.out;
    }
    v.only_keys(root, "", {"schema_version", "system", "grid", "tasks", "task_params", "description"});
    if (!root.contains("schema_version") || !root.at("schema_version").is_number_integer()) {
        v.error("/schema_version", "missing integer schema_version");
    } else if (root.at("schema_version").get<int>() != scenario_schema_version) {
        v.error("/schema_version", "unsupported schema version (expected " + std::to_string(scenario_schema_version) + ")");
    }
    validate_system(v, root);
    validate_grid(v, root);
    validate_tasks(v, root);
    validate_params(v, root);
    return v.out;
}

std::vector<Diagnostic> validate_scenario_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) return {{Diagnostic::Severity::Error, "", "cannot open " + path.string()}};
    try {
        return validate_scenario(json::parse(is));
    } catch (const json::parse_error& e) {
        return {{Diagnostic::Severity::Error, "", std::string("parse error: ") + e.what()}};
    }
}

RunResult run_scenario(const json& scenario, const RunFlags& flags, std::ostream& err) {
    RunResult result;
    const auto diagnostics = validate_scenario(scenario);
    for (const auto& d : diagnostics) err << format(d) << '\n';
    if (has_errors(diagnostics)) {
        result.exit_code = exit_input;
        return result;
    }
    if (!(flags.tolerance_scale > 0)) {
        err << "error: --tolerance-scale must be positive\n";
        result.exit_code = exit_input;
        return result;
    }
    if (flags.validate_only) return result;

    System system;
    try {
        system = build_system(scenario.at("system"));
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        result.exit_code = exit_input;
        return result;
    }
    const GridSpec grid = grid_from(scenario, flags);
    Context ctx{system, grid, directions(grid, system.family->dim()), flags.tolerance_scale,
                scenario.value("task_params", json::object()), {}, {}, {}};

    std::vector<std::string> requested;
    for (const auto& t : scenario.at("tasks")) requested.push_back(t.get<std::string>());

    json tasks = json::array();
    std::map<std::string, int> finished;  // task -> exit code class of its outcome
    bool any_failed = false;
    bool any_numerical = false;
    bool any_input = false;

    std::function<int(const std::string&, bool)> run_task = [&](const std::string& name, bool implicit) -> int {
        if (auto it = finished.find(name); it != finished.end()) return it->second;
        if (auto it = prerequisites.find(name); it != prerequisites.end()) {
            for (const auto& dep : it->second) {
                if (std::find(requested.begin(), requested.end(), dep) != requested.end() && !finished.count(dep)) continue;
                const int dep_code = run_task(dep, true);
                if (dep_code == exit_numerical || dep_code == exit_input) {
                    finished[name] = dep_code;
                    tasks.push_back({{"name", name},
                                     {"implicit", implicit},
                                     {"status", "error"},
                                     {"error", {{"code", "PrerequisiteFailed"}, {"message", "prerequisite '" + dep + "' failed"}}}});
                    return dep_code;
                }
            }
        }
        json entry = {{"name", name}, {"implicit", implicit}};
        int code = exit_pass;
        try {
            const auto outcome = dispatch(name, ctx);
            entry["result"] = outcome.result;
            entry["status"] = outcome.informational ? "info" : (outcome.pass ? "pass" : "fail");
            if (!outcome.informational && !outcome.pass) code = exit_failed;
        } catch (const Error& e) {
            code = exit_code_for(e);
            entry["status"] = "error";
            entry["error"] = {{"code", to_string(e.code())}, {"message", e.what()}};
            err << "task " << name << ": " << e.what() << '\n';
        }
        finished[name] = code;
        tasks.push_back(entry);
        return code;
    };

    for (const auto& name : requested) {
        const int code = run_task(name, false);
        any_failed = any_failed || code == exit_failed;
        any_numerical = any_numerical || code == exit_numerical;
        any_input = any_input || code == exit_input;
    }
    result.exit_code = any_input ? exit_input : any_numerical ? exit_numerical : any_failed ? exit_failed : exit_pass;

    json curves = json::array();
    for (const auto& c : ctx.curves) curves.push_back({{"series", c.series}, {"file", c.series + ".csv"}, {"rows", c.rows.size()}});
    result.report = {{"schema_version", scenario_schema_version},
                     {"scenario", scenario},
                     {"provenance",
                      {{"toolkit", "dichotomy"},
                       {"version", toolkit_version},
                       {"direction_seed", grid.direction_seed},
                       {"tolerance_scale", flags.tolerance_scale},
                       {"grid",
                        {{"t_max", grid.t_max},
                         {"time_points", grid.time_points},
                         {"geometric_points", grid.geometric_points},
                         {"resonant", grid.resonant},
                         {"extra_directions", grid.extra_directions}}},
                       {"scope", "certifications hold on the sampled region [0, t_max] only"}}},
                     {"tasks", tasks},
                     {"curves", curves},
                     {"exit_code", result.exit_code}};

    std::filesystem::create_directories(flags.out_dir);
    std::ofstream os(flags.out_dir / "report.json");
    os << result.report.dump(2) << '\n';
    for (const auto& c : ctx.curves) write_curve(flags.out_dir, c);
    return result;
}

int run_scenario(const std::filesystem::path& path, const RunFlags& flags, std::ostream& err) {
    std::ifstream is(path);
    if (!is) {
        err << "error: cannot open " << path.string() << '\n';
        return exit_input;
    }
    json scenario;
    try {
        scenario = json::parse(is);
    } catch (const json::parse_error& e) {
        err << "error: parse error: " << e.what() << '\n';
        return exit_input;
    }
    try {
        return run_scenario(scenario, flags, err).exit_code;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_numerical;
    }
}

}  // namespace dichotomy
