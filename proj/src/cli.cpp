/// CLI implementation: JSON config ingestion with unknown-key rejection,
/// subcommand dispatch, and deterministic emission of report.json,
/// solution.dat, trace.csv and study.csv.  All numbers written to disk go
/// through either nlohmann's shortest-round-trip dump or format_double, so
/// two runs with the same config and seed produce byte-identical files.

#include "sumhess/cli.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sumhess/errors.hpp"
#include "sumhess/format.hpp"
#include "sumhess/verify.hpp"

namespace sumhess::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

[[noreturn]] void bad_config(const std::string& what) {
    throw std::invalid_argument("config: " + what);
}

std::string join_key(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

void expect_object(const ordered_json& j, const std::string& where) {
    if (!j.is_object()) bad_config(where + " must be a JSON object");
}

void reject_unknown(const ordered_json& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        const auto hit = std::find_if(allowed.begin(), allowed.end(),
                                      [&](const char* key) { return item.key() == key; });
        if (hit == allowed.end()) bad_config("unknown key '" + join_key(path, item.key()) + "'");
    }
}

const ordered_json* find_key(const ordered_json& obj, const char* key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

const ordered_json& require_key(const ordered_json& obj, const std::string& path,
                                const char* key) {
    const ordered_json* v = find_key(obj, key);
    if (v == nullptr) bad_config("missing required key '" + join_key(path, key) + "'");
    return *v;
}

double as_number(const ordered_json& j, const std::string& where) {
    if (!j.is_number()) bad_config(where + " must be a number");
    return j.get<double>();
}

long long as_integer(const ordered_json& j, const std::string& where) {
    if (!j.is_number_integer()) bad_config(where + " must be an integer");
    return j.get<long long>();
}

bool as_bool(const ordered_json& j, const std::string& where) {
    if (!j.is_boolean()) bad_config(where + " must be a boolean");
    return j.get<bool>();
}

std::string as_string(const ordered_json& j, const std::string& where) {
    if (!j.is_string()) bad_config(where + " must be a string");
    return j.get<std::string>();
}

std::vector<double> as_number_array(const ordered_json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) bad_config(where + " must be a non-empty array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (const ordered_json& v : j) out.push_back(as_number(v, where + " entries"));
    return out;
}

std::vector<int> as_int_array(const ordered_json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) bad_config(where + " must be a non-empty array of integers");
    std::vector<int> out;
    out.reserve(j.size());
    for (const ordered_json& v : j) out.push_back(static_cast<int>(as_integer(v, where + " entries")));
    return out;
}

/// Parses an expression source and returns its canonical printed form, so
/// configs that spell the same formula differently normalize identically.
std::string canon_expr(const std::string& src, const std::string& where) {
    const expr::ParseResult pr = expr::parse(src);
    if (pr.error)
        bad_config(where + ": " + pr.error->message + " at offset " +
                   std::to_string(pr.error->offset));
    return expr::to_string(*pr.ast);
}

Mode mode_of(const std::string& s, const std::string& where) {
    if (s == "general") return Mode::general;
    if (s == "classical") return Mode::classical;
    if (s == "translating") return Mode::translating;
    bad_config(where + " must be one of \"general\", \"classical\", \"translating\"");
}

const char* mode_name(Mode m) {
    switch (m) {
        case Mode::general: return "general";
        case Mode::classical: return "classical";
        case Mode::translating: return "translating";
    }
    throw internal_error("mode_name: unhandled mode");
}

LinearSolverKind linear_solver_of(const std::string& s, const std::string& where) {
    if (s == "automatic") return LinearSolverKind::automatic;
    if (s == "dense") return LinearSolverKind::dense;
    if (s == "sparse") return LinearSolverKind::sparse;
    bad_config(where + " must be one of \"automatic\", \"dense\", \"sparse\"");
}

const char* linear_solver_name(LinearSolverKind k) {
    switch (k) {
        case LinearSolverKind::automatic: return "automatic";
        case LinearSolverKind::dense: return "dense";
        case LinearSolverKind::sparse: return "sparse";
    }
    throw internal_error("linear_solver_name: unhandled kind");
}

Stepping stepping_of(const std::string& s, const std::string& where) {
    if (s == "explicit") return Stepping::explicit_euler;
    if (s == "implicit") return Stepping::implicit_euler;
    bad_config(where + " must be \"explicit\" or \"implicit\"");
}

const char* stepping_name(Stepping s) {
    return s == Stepping::explicit_euler ? "explicit" : "implicit";
}

const char* outcome_name(FlowOutcome o) {
    switch (o) {
        case FlowOutcome::steady: return "steady";
        case FlowOutcome::translating: return "translating";
        case FlowOutcome::t_max_reached: return "t_max_reached";
        case FlowOutcome::blow_up: return "blow_up";
    }
    throw internal_error("outcome_name: unhandled outcome");
}

constexpr std::array<const char*, 4> kFormats = {"report", "solution", "trace", "study"};

/// Samples an already-canonical coordinate expression on the grid.
Field field_of_expr(const Grid& g, const std::string& src) {
    const expr::ParseResult pr = expr::parse(src);
    if (pr.error) throw internal_error("field_of_expr: non-canonical source");
    Field out(g);
    for (int node = 0; node < g.node_count(); ++node) {
        const Eigen::VectorXd x = g.coord(node);
        expr::Env env;
        env.x = x(0);
        if (x.size() > 1) env.y = x(1);
        if (x.size() > 2) env.z = x(2);
        const expr::EvalResult ev = expr::eval(*pr.ast, env);
        if (ev.error)
            throw numerical_error("expression failed to evaluate at a grid node: " +
                                  ev.error->message);
        out[node] = ev.value;
    }
    return out;
}

/// Staged output files: targets are declared and checked against --overwrite
/// before any numerics run, contents are staged during the run, and the
/// directory is created and written in one pass at the end.  Staging a file
/// whose format was not requested is a silent no-op.
class Emission {
public:
    Emission(const RunConfig& rc, bool overwrite,
             std::initializer_list<std::pair<const char*, const char*>> products)
        : dir_(rc.resolved_directory), overwrite_(overwrite) {
        for (const auto& [fmt, name] : products) {
            if (std::find(rc.formats.begin(), rc.formats.end(), fmt) != rc.formats.end())
                names_.emplace_back(name);
        }
    }

    void precheck() const {
        for (const std::string& name : names_) {
            const fs::path p = dir_ / name;
            if (fs::exists(p) && !overwrite_)
                throw std::invalid_argument("output file already exists (pass --overwrite to "
                                            "replace it): " +
                                            p.string());
        }
    }

    void stage(const std::string& name, std::string content) {
        if (std::find(names_.begin(), names_.end(), name) == names_.end()) return;
        staged_.emplace_back(name, std::move(content));
    }

    void commit(std::ostream& err, int verbosity) const {
        if (staged_.empty()) return;
        fs::create_directories(dir_);
        for (const auto& [name, content] : staged_) {
            const fs::path p = dir_ / name;
            std::ofstream out(p, std::ios::binary | std::ios::trunc);
            if (!out) throw internal_error("cannot open output file " + p.string());
            out << content;
            out.flush();
            if (!out.good()) throw internal_error("failed writing " + p.string());
            if (verbosity > 0) err << "wrote " << p.string() << "\n";
        }
    }

private:
    fs::path dir_;
    bool overwrite_;
    std::vector<std::string> names_;
    std::vector<std::pair<std::string, std::string>> staged_;
};

ordered_json json_of(const SolveReport& r) {
    ordered_json j;
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    j["failure"] = r.failure;
    j["residual_history"] = r.residual_history;
    j["damping_history"] = r.damping_history;
    j["cone_margin_history"] = r.cone_margin_history;
    j["sup_u"] = r.sup_u;
    j["sup_du"] = r.sup_du;
    j["sup_d2u"] = r.sup_d2u;
    j["c0_lower"] = r.c0_lower;
    j["c0_upper"] = r.c0_upper;
    j["c0_checked"] = r.c0_checked;
    j["c0_pass"] = r.c0_pass;
    j["contraction_identity_rel_max"] = r.contraction_identity_rel_max;
    j["contraction_bounds_ok"] = r.contraction_bounds_ok;
    j["t_reached"] = r.t_reached;
    j["stage_ts"] = r.stage_ts;
    j["stage_iterations"] = r.stage_iterations;
    return j;
}

ordered_json json_of(const FlowTrace& tr, const ProblemSpec& ps) {
    ordered_json j;
    j["outcome"] = outcome_name(tr.outcome);
    j["steps"] = tr.samples.empty() ? 0 : static_cast<long>(tr.samples.size()) - 1;
    j["steps_rejected"] = tr.steps_rejected;
    j["t_final"] = tr.samples.empty() ? 0.0 : tr.samples.back().t;
    j["ut_max_final"] = tr.samples.empty() ? 0.0 : tr.samples.back().ut_max;
    j["compatibility"] = tr.compatibility;
    j["terminal_residual"] = tr.terminal_residual;
    j["steady_tol"] = tr.steady_tol;
    double margin_min = std::numeric_limits<double>::infinity();
    double du_max = 0.0;
    double d2u_max = 0.0;
    for (const TraceSample& s : tr.samples) {
        margin_min = std::min(margin_min, s.cone_margin);
        du_max = std::max(du_max, s.sup_du);
        d2u_max = std::max(d2u_max, s.sup_d2u);
    }
    j["cone_margin_min"] = tr.samples.empty() ? 0.0 : margin_min;
    j["sup_du_max"] = du_max;
    j["sup_d2u_max"] = d2u_max;
    // The log-linear fit needs three samples with positive u_t; a flow that
    // starts at the steady state has nothing to fit, reported as null.
    const long fit_samples = std::count_if(
        tr.samples.begin(), tr.samples.end(),
        [](const TraceSample& s) { return s.ut_max > 0.0; });
    j["decay_rate"] = fit_samples >= 3 ? ordered_json(decay_rate(tr)) : ordered_json(nullptr);
    j["s_est"] = tr.s_est;
    j["cross_check_spread"] = tr.cross_check_spread;
    j["note"] = tr.note;
    ordered_json viols = ordered_json::array();
    for (const UtViolation& v : ut_monitor(tr, ps)) {
        ordered_json o;
        o["t"] = v.t;
        o["rule"] = v.rule;
        o["amount"] = v.amount;
        viols.push_back(o);
    }
    j["ut_violations"] = viols;
    return j;
}

/// Adds max and scaled l2 norms of u - u_exact when the config names one.
void add_error_norms(ordered_json& j, const RunConfig& rc, const Grid& g, const Field& u) {
    if (!rc.u_exact) return;
    const Field ref = field_of_expr(g, *rc.u_exact);
    Field diff(g);
    diff.values() = u.values() - ref.values();
    const Norms nm = norms(g, diff);
    j["error_max"] = nm.max;
    j["error_l2"] = nm.l2_scaled;
}

std::string report_doc(const std::string& subcommand, const RunConfig& rc, ordered_json result) {
    ordered_json root;
    root["tool"] = "sumhess";
    root["subcommand"] = subcommand;
    root["seed"] = rc.seed;
    root["config"] = ordered_json::parse(normalized_config(rc));
    root["result"] = std::move(result);
    return root.dump(2) + "\n";
}

std::string dump_doc(const Grid& g, const Field& u) {
    std::ostringstream os;
    dump_field(g, u, os);
    return os.str();
}

std::string finite_or_nan(double v) { return std::isfinite(v) ? format_double(v) : "nan"; }

/// Per-subcommand command-line state; option presence is read off the
/// CLI11 option pointers after parsing.
struct SubSpec {
    CLI::App* app = nullptr;
    std::string config;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
    bool overwrite = false;
    bool force = false;
    int verbosity = 0;
};

RunConfig load_config(const SubSpec& sp) {
    std::ifstream in(sp.config, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot read config file " + sp.config);
    std::ostringstream ss;
    ss << in.rdbuf();
    RunConfig rc = parse_config(ss.str(), fs::path(sp.config).parent_path().string());
    if (sp.seed_opt != nullptr && sp.seed_opt->count() > 0) rc.seed = sp.seed;
    rc.flow.force = sp.force;
    return rc;
}

int emit_error(std::ostream& out, std::ostream& err, int code, const char* kind,
               const std::string& message);

void require_mode(const RunConfig& rc, Mode wanted, const std::string& subcommand) {
    if (rc.mode != wanted)
        throw std::invalid_argument(subcommand + " requires problem.mode \"" +
                                    mode_name(wanted) + "\", config says \"" +
                                    mode_name(rc.mode) + "\"");
}

int cmd_solve_elliptic(const RunConfig& rc, const SubSpec& sp, std::ostream& out,
                       std::ostream& err) {
    require_mode(rc, Mode::general, "solve-elliptic");
    const ProblemSpec ps = problem_of(rc);
    Emission em(rc, sp.overwrite, {{"report", "report.json"}, {"solution", "solution.dat"}});
    em.precheck();
    const auto [u, rep] = continuation_solve(ps, rc.solver);
    ordered_json result = json_of(rep);
    add_error_norms(result, rc, ps.grid, u);
    em.stage("report.json", report_doc("solve-elliptic", rc, std::move(result)));
    em.stage("solution.dat", dump_doc(ps.grid, u));
    em.commit(err, sp.verbosity);
    if (rep.converged) {
        out << "solve-elliptic: converged, " << rep.iterations << " iterations, final residual "
            << format_double(rep.residual_history.back()) << "\n";
        return exit_ok;
    }
    return emit_error(out, err, exit_not_converged, "numerical",
                      "solve-elliptic: not converged: " + rep.failure);
}

int cmd_solve_classical(const RunConfig& rc, const SubSpec& sp, std::ostream& out,
                        std::ostream& err) {
    require_mode(rc, Mode::classical, "solve-classical");
    const ProblemSpec ps = problem_of(rc);
    Emission em(rc, sp.overwrite, {{"report", "report.json"}, {"solution", "solution.dat"}});
    em.precheck();
    const ClassicalResult res = classical_neumann(ps, rc.solver);
    ordered_json result;
    result["converged"] = res.converged;
    result["s"] = res.s;
    result["s_seq"] = res.s_seq;
    result["eps_seq"] = rc.solver.eps_seq;
    ordered_json stages = ordered_json::array();
    for (const SolveReport& r : res.reports) stages.push_back(json_of(r));
    result["stages"] = stages;
    add_error_norms(result, rc, ps.grid, res.u);
    em.stage("report.json", report_doc("solve-classical", rc, std::move(result)));
    em.stage("solution.dat", dump_doc(ps.grid, res.u));
    em.commit(err, sp.verbosity);
    if (res.converged) {
        out << "solve-classical: s = " << format_double(res.s) << " after " << res.s_seq.size()
            << " eps stages\n";
        return exit_ok;
    }
    return emit_error(out, err, exit_not_converged, "numerical",
                      "solve-classical: not converged after " +
                          std::to_string(res.s_seq.size()) + " eps stages");
}

int cmd_solve_translating(const RunConfig& rc, const SubSpec& sp, std::ostream& out,
                          std::ostream& err) {
    require_mode(rc, Mode::translating, "solve-translating");
    const ProblemSpec ps = problem_of(rc);
    Emission em(rc, sp.overwrite, {{"report", "report.json"}, {"solution", "solution.dat"}});
    em.precheck();
    const Field u0 = field_of_expr(ps.grid, rc.u0);
    const int y0 = node_nearest_center(ps.grid);
    const TranslatingResult res = translating_constant(ps, u0, y0, rc.solver);
    ordered_json result;
    result["converged"] = res.converged;
    result["s"] = res.s;
    result["s_seq"] = res.s_seq;
    result["eps_seq"] = rc.solver.eps_seq;
    result["pin_node"] = y0;
    ordered_json stages = ordered_json::array();
    for (const SolveReport& r : res.reports) stages.push_back(json_of(r));
    result["stages"] = stages;
    add_error_norms(result, rc, ps.grid, res.u_ell);
    em.stage("report.json", report_doc("solve-translating", rc, std::move(result)));
    em.stage("solution.dat", dump_doc(ps.grid, res.u_ell));
    em.commit(err, sp.verbosity);
    if (res.converged) {
        out << "solve-translating: s = " << format_double(res.s) << " after "
            << res.s_seq.size() << " eps stages\n";
        return exit_ok;
    }
    return emit_error(out, err, exit_not_converged, "numerical",
                      "solve-translating: not converged after " +
                          std::to_string(res.s_seq.size()) + " eps stages");
}

int cmd_flow(const RunConfig& rc, const SubSpec& sp, std::ostream& out, std::ostream& err) {
    require_mode(rc, Mode::general, "flow");
    const ProblemSpec ps = problem_of(rc);
    Emission em(rc, sp.overwrite,
                {{"report", "report.json"}, {"solution", "solution.dat"}, {"trace", "trace.csv"}});
    em.precheck();
    const Field u0 = field_of_expr(ps.grid, rc.u0);
    const auto [u, trace] = flow_run(ps, u0, rc.flow);
    ordered_json result = json_of(trace, ps);
    add_error_norms(result, rc, ps.grid, u);
    em.stage("report.json", report_doc("flow", rc, std::move(result)));
    em.stage("solution.dat", dump_doc(ps.grid, u));
    em.stage("trace.csv", trace_csv(trace));
    em.commit(err, sp.verbosity);
    const double t_final = trace.samples.empty() ? 0.0 : trace.samples.back().t;
    if (trace.outcome == FlowOutcome::steady || trace.outcome == FlowOutcome::translating) {
        out << "flow: " << outcome_name(trace.outcome) << " at t = " << format_double(t_final)
            << ", " << (trace.samples.empty() ? 0 : trace.samples.size() - 1) << " steps\n";
        return exit_ok;
    }
    return emit_error(out, err, exit_not_converged, "numerical",
                      "flow: not converged (" + std::string(outcome_name(trace.outcome)) +
                          ") at t = " + format_double(t_final));
}

int cmd_flow_translating(const RunConfig& rc, const SubSpec& sp, std::ostream& out,
                         std::ostream& err) {
    require_mode(rc, Mode::translating, "flow-translating");
    const ProblemSpec ps = problem_of(rc);
    Emission em(rc, sp.overwrite,
                {{"report", "report.json"}, {"solution", "solution.dat"}, {"trace", "trace.csv"}});
    em.precheck();
    const Field u0 = field_of_expr(ps.grid, rc.u0);
    const TranslatingFlowResult res = translating_flow_run(ps, u0, rc.flow);
    ordered_json result = json_of(res.trace, ps);
    em.stage("report.json", report_doc("flow-translating", rc, std::move(result)));
    em.stage("solution.dat", dump_doc(ps.grid, res.profile));
    em.stage("trace.csv", trace_csv(res.trace));
    em.commit(err, sp.verbosity);
    if (res.trace.outcome == FlowOutcome::steady ||
        res.trace.outcome == FlowOutcome::translating) {
        out << "flow-translating: " << outcome_name(res.trace.outcome) << ", s_est = "
            << format_double(res.s_est) << "\n";
        return exit_ok;
    }
    return emit_error(out, err, exit_not_converged, "numerical",
                      "flow-translating: not converged (" +
                          std::string(outcome_name(res.trace.outcome)) + ")");
}

int cmd_convergence_study(const RunConfig& rc, const SubSpec& sp, std::ostream& out,
                          std::ostream& err) {
    require_mode(rc, Mode::general, "convergence-study");
    (void)problem_of(rc);  // validate before any stage runs
    Emission em(rc, sp.overwrite,
                {{"report", "report.json"}, {"study", "study.csv"}, {"solution", "solution.dat"}});
    em.precheck();

    struct Level {
        std::vector<int> dims;
        double h_max = 0.0;
        double error = std::numeric_limits<double>::quiet_NaN();
        double slope = std::numeric_limits<double>::quiet_NaN();
        Field u;
        SolveReport rep;
        const Grid* grid = nullptr;
    };
    std::vector<Level> levels;
    std::vector<ProblemSpec> specs;  // keeps the grids the level fields bind to
    specs.reserve(3);
    bool all_converged = true;
    for (int lvl = 0; lvl < 3; ++lvl) {
        RunConfig stage = rc;
        stage.dims = rc.dims;
        for (int& d : stage.dims) d = ((d - 1) << lvl) + 1;  // h, h/2, h/4
        specs.push_back(problem_of(stage));
        const ProblemSpec& ps = specs.back();
        if (sp.verbosity > 0) err << "level " << lvl << ": solving " << stage.dims[0] << " grid\n";
        auto [u, rep] = continuation_solve(ps, rc.solver);
        all_converged = all_converged && rep.converged;
        double h_max = 0.0;
        for (int a = 0; a < ps.grid.n(); ++a) h_max = std::max(h_max, ps.grid.spacing(a));
        levels.push_back(Level{stage.dims, h_max, std::numeric_limits<double>::quiet_NaN(),
                               std::numeric_limits<double>::quiet_NaN(), std::move(u),
                               std::move(rep), &ps.grid});
    }

    if (rc.u_exact) {
        for (Level& lv : levels) {
            const Field ref = field_of_expr(*lv.grid, *rc.u_exact);
            Field diff(*lv.grid);
            diff.values() = lv.u.values() - ref.values();
            lv.error = norms(*lv.grid, diff).max;
        }
    } else {
        // No reference: compare each level to the previous one on the shared
        // (coarse) nodes; refinement by 2m-1 keeps them at even indices.
        for (std::size_t l = 1; l < levels.size(); ++l) {
            const Grid& coarse = *levels[l - 1].grid;
            const Grid& fine = *levels[l].grid;
            double worst = 0.0;
            for (int node = 0; node < coarse.node_count(); ++node) {
                MultiIndex mi = coarse.multi(node);
                for (int& c : mi) c *= 2;
                worst = std::max(worst,
                                 std::abs(levels[l].u[fine.index(mi)] - levels[l - 1].u[node]));
            }
            levels[l].error = worst;
        }
    }
    for (std::size_t l = 1; l < levels.size(); ++l) {
        const double prev = levels[l - 1].error;
        const double cur = levels[l].error;
        if (std::isfinite(prev) && std::isfinite(cur) && prev > 0.0 && cur > 0.0)
            levels[l].slope = std::log2(prev / cur);
    }

    std::string csv = "level,h_max,error,slope\n";
    for (std::size_t l = 0; l < levels.size(); ++l) {
        csv += std::to_string(l) + "," + format_double(levels[l].h_max) + "," +
               finite_or_nan(levels[l].error) + "," + finite_or_nan(levels[l].slope) + "\n";
    }

    ordered_json result;
    result["reference"] = rc.u_exact ? "u_exact" : "pairwise";
    ordered_json rows = ordered_json::array();
    for (std::size_t l = 0; l < levels.size(); ++l) {
        ordered_json row;
        row["level"] = l;
        row["dims"] = levels[l].dims;
        row["h_max"] = levels[l].h_max;
        row["error"] = levels[l].error;  // NaN dumps as null
        row["slope"] = levels[l].slope;
        row["converged"] = levels[l].rep.converged;
        row["iterations"] = levels[l].rep.iterations;
        rows.push_back(row);
    }
    result["levels"] = rows;
    em.stage("report.json", report_doc("convergence-study", rc, std::move(result)));
    em.stage("study.csv", csv);
    em.stage("solution.dat", dump_doc(*levels.back().grid, levels.back().u));
    em.commit(err, sp.verbosity);

    out << "convergence-study: finest slope " << finite_or_nan(levels.back().slope) << ", errors";
    for (const Level& lv : levels) out << " " << finite_or_nan(lv.error);
    out << "\n";
    return all_converged ? exit_ok : exit_not_converged;
}

int cmd_verify_lemmas(std::uint64_t seed, const std::string& out_dir, bool overwrite,
                      int verbosity, std::ostream& out, std::ostream& err) {
    if (!out_dir.empty() && !overwrite && fs::exists(fs::path(out_dir) / "report.json"))
        throw std::invalid_argument(
            "output file already exists (pass --overwrite to replace it): " +
            (fs::path(out_dir) / "report.json").string());
    std::vector<LemmaSuiteReport> reports;
    reports.push_back(run_identity_suite(seed));
    reports.push_back(run_cone_suite(seed));
    reports.push_back(run_garding_suite(seed));
    reports.push_back(run_barrier_suite(seed));
    print_suite_table(err, reports);
    bool all = true;
    long failures = 0;
    long samples = 0;
    for (const LemmaSuiteReport& rep : reports) {
        all = all && rep.all_passed();
        for (const LemmaRow& row : rep.rows) {
            failures += row.samples - row.passes;
            samples += row.samples;
        }
    }
    ordered_json root;
    root["seed"] = seed;
    root["all_passed"] = all;
    root["samples"] = samples;
    root["failures"] = failures;
    ordered_json suites = ordered_json::array();
    for (const LemmaSuiteReport& rep : reports)
        suites.push_back(ordered_json::parse(suite_json(rep)));
    root["suites"] = suites;
    const std::string doc = root.dump(2) + "\n";
    out << doc;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        const fs::path p = fs::path(out_dir) / "report.json";
        std::ofstream file(p, std::ios::binary | std::ios::trunc);
        if (!file) throw internal_error("cannot open output file " + p.string());
        file << doc;
        file.flush();
        if (!file.good()) throw internal_error("failed writing " + p.string());
        if (verbosity > 0) err << "wrote " << p.string() << "\n";
    }
    return all ? exit_ok : exit_not_converged;
}

int emit_error(std::ostream& out, std::ostream& err, int code, const char* kind,
               const std::string& message) {
    err << "error: " << message << "\n";
    ordered_json inner;
    inner["kind"] = kind;
    inner["exit_code"] = code;
    inner["message"] = message;
    ordered_json root;
    root["error"] = inner;
    out << root.dump(2) << "\n";
    return code;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& base_dir) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    expect_object(j, "config");
    reject_unknown(j, "", {"problem", "solver", "flow", "output", "seed"});

    RunConfig rc;

    const ordered_json& problem = require_key(j, "", "problem");
    expect_object(problem, "problem");
    reject_unknown(problem, "problem",
                   {"n", "k", "alpha", "domain", "dims", "f", "phi", "u0", "u_exact", "mode",
                    "c_phi", "c_f", "f_min"});
    rc.n = static_cast<int>(as_integer(require_key(problem, "problem", "n"), "problem.n"));
    rc.k = static_cast<int>(as_integer(require_key(problem, "problem", "k"), "problem.k"));
    if (const ordered_json* v = find_key(problem, "alpha"))
        rc.alpha = as_number(*v, "problem.alpha");
    const ordered_json& domain = require_key(problem, "problem", "domain");
    expect_object(domain, "problem.domain");
    reject_unknown(domain, "problem.domain", {"lo", "hi"});
    rc.lo = as_number_array(require_key(domain, "problem.domain", "lo"), "problem.domain.lo");
    rc.hi = as_number_array(require_key(domain, "problem.domain", "hi"), "problem.domain.hi");
    rc.dims = as_int_array(require_key(problem, "problem", "dims"), "problem.dims");
    if (rc.n < 2 || rc.n > 3) bad_config("problem.n must be 2 or 3");
    if (static_cast<int>(rc.lo.size()) != rc.n || static_cast<int>(rc.hi.size()) != rc.n)
        bad_config("problem.domain.lo and .hi must have length problem.n");
    if (static_cast<int>(rc.dims.size()) != rc.n)
        bad_config("problem.dims must have length problem.n");
    rc.f = canon_expr(as_string(require_key(problem, "problem", "f"), "problem.f"), "problem.f");
    rc.phi = canon_expr(as_string(require_key(problem, "problem", "phi"), "problem.phi"),
                        "problem.phi");
    if (const ordered_json* v = find_key(problem, "u0"))
        rc.u0 = canon_expr(as_string(*v, "problem.u0"), "problem.u0");
    if (const ordered_json* v = find_key(problem, "u_exact")) {
        const std::string canon = canon_expr(as_string(*v, "problem.u_exact"), "problem.u_exact");
        const expr::ParseResult pr = expr::parse(canon);
        for (const expr::Var var : {expr::Var::u, expr::Var::t, expr::Var::nx, expr::Var::ny,
                                    expr::Var::nz}) {
            if (expr::uses_var(*pr.ast, var))
                bad_config("problem.u_exact must depend on coordinates only");
        }
        rc.u_exact = canon;
    }
    rc.mode = mode_of(as_string(require_key(problem, "problem", "mode"), "problem.mode"),
                      "problem.mode");
    if (const ordered_json* v = find_key(problem, "c_phi"))
        rc.c_phi = as_number(*v, "problem.c_phi");
    if (const ordered_json* v = find_key(problem, "c_f")) rc.c_f = as_number(*v, "problem.c_f");
    if (const ordered_json* v = find_key(problem, "f_min")) {
        rc.f_min = as_number(*v, "problem.f_min");
        if (!(rc.f_min > 0.0)) bad_config("problem.f_min must be positive");
    }

    if (const ordered_json* s = find_key(j, "solver")) {
        expect_object(*s, "solver");
        reject_unknown(*s, "solver",
                       {"tol", "max_iter", "min_damp", "relative_tol", "eps_seq",
                        "linear_solver"});
        if (const ordered_json* v = find_key(*s, "tol")) {
            rc.solver.tol = as_number(*v, "solver.tol");
            if (!(rc.solver.tol > 0.0)) bad_config("solver.tol must be positive");
        }
        if (const ordered_json* v = find_key(*s, "max_iter")) {
            rc.solver.max_iter = static_cast<int>(as_integer(*v, "solver.max_iter"));
            if (rc.solver.max_iter < 1) bad_config("solver.max_iter must be at least 1");
        }
        if (const ordered_json* v = find_key(*s, "min_damp")) {
            rc.solver.min_damp = as_number(*v, "solver.min_damp");
            if (!(rc.solver.min_damp > 0.0)) bad_config("solver.min_damp must be positive");
        }
        if (const ordered_json* v = find_key(*s, "relative_tol"))
            rc.solver.relative_tol = as_bool(*v, "solver.relative_tol");
        if (const ordered_json* v = find_key(*s, "eps_seq")) {
            rc.solver.eps_seq = as_number_array(*v, "solver.eps_seq");
            for (const double e : rc.solver.eps_seq)
                if (!(e > 0.0)) bad_config("solver.eps_seq entries must be positive");
        }
        if (const ordered_json* v = find_key(*s, "linear_solver"))
            rc.solver.linear_solver =
                linear_solver_of(as_string(*v, "solver.linear_solver"), "solver.linear_solver");
    }

    if (const ordered_json* f = find_key(j, "flow")) {
        expect_object(*f, "flow");
        reject_unknown(*f, "flow",
                       {"stepping", "dt0", "dt_growth", "dt_max", "steady_tol",
                        "translating_tol", "t_max", "compat_tol", "max_steps"});
        if (const ordered_json* v = find_key(*f, "stepping"))
            rc.flow.stepping = stepping_of(as_string(*v, "flow.stepping"), "flow.stepping");
        if (const ordered_json* v = find_key(*f, "dt0")) {
            rc.flow.dt0 = as_number(*v, "flow.dt0");
            if (rc.flow.dt0 < 0.0) bad_config("flow.dt0 must be non-negative");
        }
        if (const ordered_json* v = find_key(*f, "dt_growth")) {
            rc.flow.dt_growth = as_number(*v, "flow.dt_growth");
            if (!(rc.flow.dt_growth >= 1.0)) bad_config("flow.dt_growth must be at least 1");
        }
        if (const ordered_json* v = find_key(*f, "dt_max")) {
            rc.flow.dt_max = as_number(*v, "flow.dt_max");
            if (!(rc.flow.dt_max > 0.0)) bad_config("flow.dt_max must be positive");
        }
        if (const ordered_json* v = find_key(*f, "steady_tol")) {
            rc.flow.steady_tol = as_number(*v, "flow.steady_tol");
            if (!(rc.flow.steady_tol > 0.0)) bad_config("flow.steady_tol must be positive");
        }
        if (const ordered_json* v = find_key(*f, "translating_tol")) {
            rc.flow.translating_tol = as_number(*v, "flow.translating_tol");
            if (!(rc.flow.translating_tol > 0.0))
                bad_config("flow.translating_tol must be positive");
        }
        if (const ordered_json* v = find_key(*f, "t_max")) {
            rc.flow.t_max = as_number(*v, "flow.t_max");
            if (!(rc.flow.t_max > 0.0)) bad_config("flow.t_max must be positive");
        }
        if (const ordered_json* v = find_key(*f, "compat_tol")) {
            rc.flow.compat_tol = as_number(*v, "flow.compat_tol");
            if (!(rc.flow.compat_tol > 0.0)) bad_config("flow.compat_tol must be positive");
        }
        if (const ordered_json* v = find_key(*f, "max_steps")) {
            rc.flow.max_steps = static_cast<long>(as_integer(*v, "flow.max_steps"));
            if (rc.flow.max_steps < 1) bad_config("flow.max_steps must be at least 1");
        }
    }

    if (const ordered_json* o = find_key(j, "output")) {
        expect_object(*o, "output");
        reject_unknown(*o, "output", {"directory", "formats"});
        if (const ordered_json* v = find_key(*o, "directory")) {
            rc.directory = as_string(*v, "output.directory");
            if (rc.directory.empty()) bad_config("output.directory must not be empty");
        }
        if (const ordered_json* v = find_key(*o, "formats")) {
            if (!v->is_array()) bad_config("output.formats must be an array of strings");
            std::vector<std::string> formats;
            for (const ordered_json& e : *v) {
                const std::string fmt = as_string(e, "output.formats entries");
                if (std::find(kFormats.begin(), kFormats.end(), fmt) == kFormats.end())
                    bad_config("output.formats entries must be among \"report\", \"solution\", "
                               "\"trace\", \"study\"");
                if (std::find(formats.begin(), formats.end(), fmt) == formats.end())
                    formats.push_back(fmt);
            }
            rc.formats = std::move(formats);
        }
    }

    if (const ordered_json* v = find_key(j, "seed")) {
        if (v->is_number_unsigned()) {
            rc.seed = v->get<std::uint64_t>();
        } else if (v->is_number_integer() && v->get<long long>() >= 0) {
            rc.seed = static_cast<std::uint64_t>(v->get<long long>());
        } else {
            bad_config("seed must be a non-negative integer");
        }
    }

    rc.flow.newton = rc.solver;
    fs::path dir(rc.directory);
    if (dir.is_relative()) dir = fs::path(base_dir) / dir;
    rc.resolved_directory = dir.lexically_normal().string();
    return rc;
}

std::string normalized_config(const RunConfig& rc) {
    ordered_json problem;
    problem["n"] = rc.n;
    problem["k"] = rc.k;
    problem["alpha"] = rc.alpha;
    ordered_json dom;
    dom["lo"] = rc.lo;
    dom["hi"] = rc.hi;
    problem["domain"] = dom;
    problem["dims"] = rc.dims;
    problem["f"] = rc.f;
    problem["phi"] = rc.phi;
    problem["u0"] = rc.u0;
    if (rc.u_exact) problem["u_exact"] = *rc.u_exact;
    problem["mode"] = mode_name(rc.mode);
    problem["c_phi"] = rc.c_phi;
    if (rc.c_f) problem["c_f"] = *rc.c_f;
    problem["f_min"] = rc.f_min;

    ordered_json solver;
    solver["tol"] = rc.solver.tol;
    solver["max_iter"] = rc.solver.max_iter;
    solver["min_damp"] = rc.solver.min_damp;
    solver["relative_tol"] = rc.solver.relative_tol;
    solver["eps_seq"] = rc.solver.eps_seq;
    solver["linear_solver"] = linear_solver_name(rc.solver.linear_solver);

    ordered_json flow;
    flow["stepping"] = stepping_name(rc.flow.stepping);
    flow["dt0"] = rc.flow.dt0;
    flow["dt_growth"] = rc.flow.dt_growth;
    flow["dt_max"] = rc.flow.dt_max;
    flow["steady_tol"] = rc.flow.steady_tol;
    flow["translating_tol"] = rc.flow.translating_tol;
    flow["t_max"] = rc.flow.t_max;
    flow["compat_tol"] = rc.flow.compat_tol;
    flow["max_steps"] = rc.flow.max_steps;

    ordered_json output;
    output["directory"] = rc.directory;
    output["formats"] = rc.formats;

    ordered_json root;
    root["problem"] = problem;
    root["solver"] = solver;
    root["flow"] = flow;
    root["output"] = output;
    root["seed"] = rc.seed;
    return root.dump(2) + "\n";
}

ProblemSpec problem_of(const RunConfig& rc) {
    Eigen::VectorXd lo(rc.n);
    Eigen::VectorXd hi(rc.n);
    for (int a = 0; a < rc.n; ++a) {
        lo(a) = rc.lo[static_cast<std::size_t>(a)];
        hi(a) = rc.hi[static_cast<std::size_t>(a)];
    }
    const DomainDescriptor dom = DomainDescriptor::rectangle(lo, hi);
    ProblemSpec ps = make_problem(SumHessianParams{rc.k, rc.alpha}, dom, rc.dims, rc.f, rc.phi,
                                  rc.mode, rc.c_phi);
    ps.c_f = rc.c_f;
    ps.f_min = rc.f_min;
    validate(ps);
    return ps;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"sum Hessian Neumann solver and verification toolkit"};
    app.require_subcommand(1);

    constexpr std::array<const char*, 7> kConfigSubs = {
        "solve-elliptic", "solve-classical", "solve-translating", "flow",
        "flow-translating", "convergence-study", "check-config"};
    constexpr std::array<const char*, 7> kDescriptions = {
        "solve the general Neumann problem by continuation",
        "recover the classical Neumann constant by the eps scheme",
        "recover the translating constant by the pinned shift scheme",
        "integrate the parabolic flow to a steady state",
        "integrate the translating-mode flow",
        "solve at h, h/2, h/4 and report the error slope",
        "validate a config file and echo its normalized form"};
    std::array<SubSpec, 7> specs;
    for (std::size_t i = 0; i < kConfigSubs.size(); ++i) {
        SubSpec& sp = specs[i];
        sp.app = app.add_subcommand(kConfigSubs[i], kDescriptions[i]);
        sp.app->add_option("config", sp.config, "JSON run configuration file")->required();
        sp.seed_opt = sp.app->add_option("--seed", sp.seed, "override the config seed");
        sp.app->add_flag("--overwrite", sp.overwrite, "replace existing output files");
        const std::string name = kConfigSubs[i];
        if (name == "flow" || name == "flow-translating")
            sp.app->add_flag("--force", sp.force,
                             "start the flow even if the compatibility gate fails");
        sp.app->add_flag("-v,--verbose", sp.verbosity, "print progress to the error stream");
    }
    std::uint64_t vseed = 1;
    std::string vout;
    bool voverwrite = false;
    int vverbosity = 0;
    CLI::App* vsub = app.add_subcommand("verify-lemmas",
                                        "run the lemma property suites and report constants");
    vsub->add_option("--seed", vseed, "suite seed");
    vsub->add_option("--out", vout, "directory to write report.json into");
    vsub->add_flag("--overwrite", voverwrite, "replace an existing report.json");
    vsub->add_flag("-v,--verbose", vverbosity, "print progress to the error stream");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        return emit_error(out, err, exit_validation, "usage", e.what());
    }

    try {
        if (app.got_subcommand(vsub))
            return cmd_verify_lemmas(vseed, vout, voverwrite, vverbosity, out, err);
        for (std::size_t i = 0; i < kConfigSubs.size(); ++i) {
            if (!app.got_subcommand(specs[i].app)) continue;
            const SubSpec& sp = specs[i];
            const RunConfig rc = load_config(sp);
            const std::string name = kConfigSubs[i];
            if (name == "check-config") {
                (void)problem_of(rc);
                out << normalized_config(rc);
                return exit_ok;
            }
            if (name == "solve-elliptic") return cmd_solve_elliptic(rc, sp, out, err);
            if (name == "solve-classical") return cmd_solve_classical(rc, sp, out, err);
            if (name == "solve-translating") return cmd_solve_translating(rc, sp, out, err);
            if (name == "flow") return cmd_flow(rc, sp, out, err);
            if (name == "flow-translating") return cmd_flow_translating(rc, sp, out, err);
            if (name == "convergence-study") return cmd_convergence_study(rc, sp, out, err);
        }
        throw internal_error("run: no subcommand dispatched");
    } catch (const std::invalid_argument& e) {
        return emit_error(out, err, exit_validation, "validation", e.what());
    } catch (const numerical_error& e) {
        return emit_error(out, err, exit_not_converged, "numerical", e.what());
    } catch (const internal_error& e) {
        return emit_error(out, err, exit_internal, "internal", e.what());
    } catch (const std::exception& e) {
        return emit_error(out, err, exit_internal, "internal", e.what());
    }
}

int run(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace sumhess::cli
