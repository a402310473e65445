#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sumhess/cli.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using sumhess::cli::exit_not_converged;
using sumhess::cli::exit_ok;
using sumhess::cli::exit_validation;

struct RunResult {
    int code = 0;
    std::string out;
    std::string err;
};

RunResult run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("sumhess");
    for (const std::string& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code =
        sumhess::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return RunResult{code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("sumhess_cli_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    f << text;
}

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

/// Quadratic model run: u* = (x^2 + y^2)/2 solves S_2 = 3 with the
/// contracting flux nu.x - (u - u*) on the unit square.
json quadratic_config(int m) {
    json cfg;
    cfg["problem"]["n"] = 2;
    cfg["problem"]["k"] = 2;
    cfg["problem"]["alpha"] = 1.0;
    cfg["problem"]["domain"]["lo"] = {0.0, 0.0};
    cfg["problem"]["domain"]["hi"] = {1.0, 1.0};
    cfg["problem"]["dims"] = {m, m};
    cfg["problem"]["f"] = "3";
    cfg["problem"]["phi"] = "nx*x + ny*y - (u - (x^2 + y^2)/2)";
    cfg["problem"]["u_exact"] = "(x^2 + y^2)/2";
    cfg["problem"]["mode"] = "general";
    cfg["problem"]["c_phi"] = -1.0;
    return cfg;
}

fs::path place_config(const fs::path& dir, const json& cfg) {
    const fs::path p = dir / "config.json";
    write_file(p, cfg.dump(2) + "\n");
    return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("check-config echoes a normalized config that round-trips byte for byte") {
    const fs::path dir = fresh_dir("roundtrip");
    json cfg = quadratic_config(9);
    cfg["problem"]["f"] = "3.0 + 0*x";  // canonicalized on echo
    const fs::path path = place_config(dir, cfg);

    const RunResult first = run_cli({"check-config", path.string()});
    REQUIRE(first.code == exit_ok);
    const json echo = json::parse(first.out);
    CHECK(echo.at("problem").at("u0") == "0");            // default filled
    CHECK(echo.at("problem").at("f_min") == 1e-8);        // default filled
    CHECK(echo.at("solver").at("tol") == 1e-9);           // default block present
    CHECK(echo.at("flow").at("stepping") == "implicit");  // default block present
    CHECK(echo.at("output").at("directory") == "out");
    CHECK(echo.at("seed") == 1);

    write_file(dir / "echo.json", first.out);
    const RunResult second = run_cli({"check-config", (dir / "echo.json").string()});
    REQUIRE(second.code == exit_ok);
    CHECK(second.out == first.out);
}

TEST_CASE("config validation failures exit 2 with a JSON error object") {
    const fs::path dir = fresh_dir("badcfg");

    SUBCASE("unknown key names its path") {
        json cfg = quadratic_config(9);
        cfg["problem"]["typo"] = 1;
        const RunResult r = run_cli({"check-config", place_config(dir, cfg).string()});
        CHECK(r.code == exit_validation);
        CHECK(r.err.find("problem.typo") != std::string::npos);
        const json obj = json::parse(r.out);
        CHECK(obj.at("error").at("kind") == "validation");
        CHECK(obj.at("error").at("exit_code") == exit_validation);
    }
    SUBCASE("missing config file") {
        const RunResult r = run_cli({"check-config", (dir / "nope.json").string()});
        CHECK(r.code == exit_validation);
        CHECK(json::parse(r.out).contains("error"));
    }
    SUBCASE("malformed JSON") {
        write_file(dir / "broken.json", "{\"problem\": ");
        const RunResult r = run_cli({"check-config", (dir / "broken.json").string()});
        CHECK(r.code == exit_validation);
    }
    SUBCASE("expression syntax error names the key and offset") {
        json cfg = quadratic_config(9);
        cfg["problem"]["f"] = "3 + ";
        const RunResult r = run_cli({"check-config", place_config(dir, cfg).string()});
        CHECK(r.code == exit_validation);
        CHECK(r.err.find("problem.f") != std::string::npos);
        CHECK(r.err.find("offset") != std::string::npos);
    }
    SUBCASE("dims length must match n") {
        json cfg = quadratic_config(9);
        cfg["problem"]["dims"] = {9, 9, 9};
        const RunResult r = run_cli({"check-config", place_config(dir, cfg).string()});
        CHECK(r.code == exit_validation);
        CHECK(r.err.find("problem.dims") != std::string::npos);
    }
    SUBCASE("u_exact must not mention u") {
        json cfg = quadratic_config(9);
        cfg["problem"]["u_exact"] = "u + x";
        const RunResult r = run_cli({"check-config", place_config(dir, cfg).string()});
        CHECK(r.code == exit_validation);
    }
    SUBCASE("subcommand and mode must agree") {
        const RunResult r =
            run_cli({"solve-classical", place_config(dir, quadratic_config(9)).string()});
        CHECK(r.code == exit_validation);
        CHECK(r.err.find("classical") != std::string::npos);
    }
}

TEST_CASE("usage errors exit 2 and help exits 0") {
    CHECK(run_cli({}).code == exit_validation);
    CHECK(run_cli({"frobnicate"}).code == exit_validation);
    CHECK(run_cli({"solve-elliptic"}).code == exit_validation);  // config required
    CHECK(run_cli({"verify-lemmas", "--seed", "abc"}).code == exit_validation);

    const RunResult help = run_cli({"--help"});
    CHECK(help.code == exit_ok);
    CHECK(help.out.find("solve-elliptic") != std::string::npos);
    CHECK(help.out.find("verify-lemmas") != std::string::npos);
}

TEST_CASE("solve-elliptic writes deterministic outputs and nails the quadratic") {
    const fs::path dir = fresh_dir("solveq");
    const fs::path path = place_config(dir, quadratic_config(9));

    const RunResult r = run_cli({"solve-elliptic", path.string()});
    REQUIRE(r.code == exit_ok);
    CHECK(r.out.find("converged") != std::string::npos);

    const fs::path out_dir = dir / "out";
    REQUIRE(fs::exists(out_dir / "report.json"));
    REQUIRE(fs::exists(out_dir / "solution.dat"));
    const json report = json::parse(read_file(out_dir / "report.json"));
    CHECK(report.at("subcommand") == "solve-elliptic");
    CHECK(report.at("result").at("converged") == true);
    CHECK(report.at("result").at("error_max").get<double>() <= 1e-9);
    CHECK(report.at("result").at("c0_checked") == true);
    CHECK(report.at("result").at("c0_pass") == true);
    CHECK(report.at("config").at("problem").at("dims")[0] == 9);
    const std::string dat = read_file(out_dir / "solution.dat");
    CHECK(dat.rfind("# 9 9", 0) == 0);  // grid header row

    SUBCASE("existing outputs are refused without --overwrite") {
        const RunResult again = run_cli({"solve-elliptic", path.string()});
        CHECK(again.code == exit_validation);
        CHECK(again.err.find("--overwrite") != std::string::npos);
    }
    SUBCASE("repeated runs are byte-identical") {
        const std::string report_bytes = read_file(out_dir / "report.json");
        const std::string solution_bytes = read_file(out_dir / "solution.dat");
        const RunResult again = run_cli({"solve-elliptic", path.string(), "--overwrite"});
        REQUIRE(again.code == exit_ok);
        CHECK(read_file(out_dir / "report.json") == report_bytes);
        CHECK(read_file(out_dir / "solution.dat") == solution_bytes);
        CHECK(again.out == r.out);
    }
}

TEST_CASE("solver knobs reach the solver: starved iteration budget exits 3") {
    const fs::path dir = fresh_dir("starved");
    json cfg = quadratic_config(9);
    cfg["solver"]["tol"] = 1e-18;  // below roundoff, cannot be met
    cfg["solver"]["max_iter"] = 2;
    const RunResult r = run_cli({"solve-elliptic", place_config(dir, cfg).string()});
    CHECK(r.code == exit_not_converged);
    CHECK(r.out.find("not converged") != std::string::npos);
    // a nonzero exit always carries a machine-readable error object on stdout
    const json error = json::parse(r.out).at("error");
    CHECK(error.at("kind") == "numerical");
    CHECK(error.at("exit_code") == exit_not_converged);
    // the diagnostic report is still written for post-mortems
    const json report = json::parse(read_file(dir / "out" / "report.json"));
    CHECK(report.at("result").at("converged") == false);
    CHECK(report.at("result").at("failure").get<std::string>().size() > 0);
}

TEST_CASE("flow gate: incompatible initial data exits 2, --force proceeds") {
    const fs::path dir = fresh_dir("flowgate");
    json cfg = quadratic_config(9);
    cfg["problem"]["u0"] = "(x^2 + y^2)/2 + 0.001*x";  // flux off by ~1e-3
    const fs::path path = place_config(dir, cfg);

    const RunResult gated = run_cli({"flow", path.string()});
    CHECK(gated.code == exit_validation);
    CHECK(gated.err.find("compatibility gate") != std::string::npos);
    CHECK(json::parse(gated.out).at("error").at("kind") == "validation");

    const RunResult forced = run_cli({"flow", path.string(), "--force"});
    REQUIRE(forced.code == exit_ok);
    const json report = json::parse(read_file(dir / "out" / "report.json"));
    CHECK(report.at("result").at("outcome") == "steady");
    CHECK(report.at("result").at("cone_margin_min").get<double>() > 0.0);
    CHECK(report.at("result").at("error_max").get<double>() <= 1e-5);
    const std::string trace = read_file(dir / "out" / "trace.csv");
    CHECK(trace.rfind("t,ut_max,ut_mean,cone_margin,sup_du,sup_d2u", 0) == 0);
    CHECK(std::count(trace.begin(), trace.end(), '\n') >= 2);  // header + samples
}

TEST_CASE("flow from compatible steady data converges immediately") {
    const fs::path dir = fresh_dir("flowsteady");
    json cfg = quadratic_config(9);
    cfg["problem"]["u0"] = "(x^2 + y^2)/2";  // exact steady state, compatible
    const RunResult r = run_cli({"flow", place_config(dir, cfg).string()});
    REQUIRE(r.code == exit_ok);
    CHECK(r.out.rfind("flow: steady", 0) == 0);
    const json report = json::parse(read_file(dir / "out" / "report.json"));
    CHECK(report.at("result").at("compatibility").get<double>() <= 1e-12);
    CHECK(report.at("result").at("ut_violations").empty());
}

TEST_CASE("verify-lemmas exits 0 with a zero-failure JSON report") {
    const fs::path dir = fresh_dir("verify");
    const RunResult r =
        run_cli({"verify-lemmas", "--seed", "1", "--out", (dir / "rep").string()});
    REQUIRE(r.code == exit_ok);
    const json report = json::parse(r.out);
    CHECK(report.at("seed") == 1);
    CHECK(report.at("all_passed") == true);
    CHECK(report.at("failures") == 0);
    CHECK(report.at("suites").size() == 4);
    for (const json& suite : report.at("suites")) CHECK(suite.at("all_passed") == true);
    CHECK(r.err.find("worst slack") != std::string::npos);  // table goes to the error stream

    CHECK(read_file(dir / "rep" / "report.json") == r.out);
    const RunResult blocked =
        run_cli({"verify-lemmas", "--seed", "1", "--out", (dir / "rep").string()});
    CHECK(blocked.code == exit_validation);
}

TEST_CASE("solve-classical recovers the flux constant through the CLI") {
    const fs::path dir = fresh_dir("classical");
    json cfg = quadratic_config(17);
    cfg["problem"]["phi"] = "nx*x + ny*y - 0.7";  // u* = |x|^2/2 forces s* = 0.7
    cfg["problem"]["mode"] = "classical";
    cfg["problem"].erase("c_phi");
    cfg["problem"].erase("u_exact");
    const RunResult r = run_cli({"solve-classical", place_config(dir, cfg).string()});
    REQUIRE(r.code == exit_ok);
    const json report = json::parse(read_file(dir / "out" / "report.json"));
    CHECK(report.at("result").at("converged") == true);
    CHECK(std::abs(report.at("result").at("s").get<double>() - 0.7) <= 1e-2);
    CHECK(report.at("result").at("s_seq").size() == 4);
    CHECK(report.at("result").at("stages").size() == 4);
}

TEST_CASE("solve-translating and flow-translating agree on the speed") {
    const fs::path dir = fresh_dir("translating");
    json cfg = quadratic_config(17);
    cfg["problem"]["f"] = "3*exp(-0.3)";  // s* = 0.3 against the quadratic profile
    cfg["problem"]["phi"] = "nx*x + ny*y";
    cfg["problem"]["u0"] = "(x^2 + y^2)/2";
    cfg["problem"]["mode"] = "translating";
    cfg["problem"].erase("c_phi");
    cfg["problem"].erase("u_exact");
    const fs::path path = place_config(dir, cfg);

    const RunResult scheme = run_cli({"solve-translating", path.string(), "--overwrite"});
    REQUIRE(scheme.code == exit_ok);
    const json srep = json::parse(read_file(dir / "out" / "report.json"));
    const double s_scheme = srep.at("result").at("s").get<double>();
    CHECK(std::abs(s_scheme - 0.3) <= 1e-2);

    const RunResult flowed = run_cli({"flow-translating", path.string(), "--overwrite"});
    REQUIRE(flowed.code == exit_ok);
    const json frep = json::parse(read_file(dir / "out" / "report.json"));
    CHECK(frep.at("result").at("outcome") == "translating");
    const double s_flow = frep.at("result").at("s_est").get<double>();
    CHECK(std::abs(s_flow - 0.3) <= 1e-6);
    CHECK(std::abs(s_scheme - s_flow) <= 2e-2);
    CHECK(fs::exists(dir / "out" / "trace.csv"));
}

TEST_CASE("convergence-study reports a second-order slope on the exponential model") {
    const fs::path dir = fresh_dir("study");
    json cfg = quadratic_config(5);
    cfg["problem"]["f"] = "(exp(x)+2)*(exp(y)+2) + exp(x) + exp(y) + 4";
    cfg["problem"]["phi"] =
        "nx*(exp(x)+2*x) + ny*(exp(y)+2*y) - (u - (exp(x)+exp(y)+x^2+y^2))";
    cfg["problem"]["u_exact"] = "exp(x)+exp(y)+x^2+y^2";
    const RunResult r = run_cli({"convergence-study", place_config(dir, cfg).string()});
    REQUIRE(r.code == exit_ok);

    const std::string csv = read_file(dir / "out" / "study.csv");
    REQUIRE(csv.rfind("level,h_max,error,slope", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + three levels
    const json report = json::parse(read_file(dir / "out" / "report.json"));
    const json& levels = report.at("result").at("levels");
    REQUIRE(levels.size() == 3);
    CHECK(levels[0].at("dims")[0] == 5);
    CHECK(levels[2].at("dims")[0] == 17);
    for (const json& lv : levels) CHECK(lv.at("converged") == true);
    CHECK(levels[0].at("slope").is_null());  // no coarser level to compare against
    const double slope = levels[2].at("slope").get<double>();
    CHECK(slope >= 1.5);
    CHECK(slope <= 2.5);
    const std::string dat = read_file(dir / "out" / "solution.dat");
    CHECK(dat.rfind("# 17 17", 0) == 0);
}

TEST_CASE("convergence-study without a reference compares successive levels") {
    const fs::path dir = fresh_dir("study_pairwise");
    json cfg = quadratic_config(5);
    cfg["problem"]["f"] = "(exp(x)+2)*(exp(y)+2) + exp(x) + exp(y) + 4";
    cfg["problem"]["phi"] =
        "nx*(exp(x)+2*x) + ny*(exp(y)+2*y) - (u - (exp(x)+exp(y)+x^2+y^2))";
    cfg["problem"].erase("u_exact");
    const RunResult r = run_cli({"convergence-study", place_config(dir, cfg).string()});
    REQUIRE(r.code == exit_ok);
    const json report = json::parse(read_file(dir / "out" / "report.json"));
    CHECK(report.at("result").at("reference") == "pairwise");
    const json& levels = report.at("result").at("levels");
    CHECK(levels[0].at("error").is_null());
    const double slope = levels[2].at("slope").get<double>();
    CHECK(slope >= 1.5);
    CHECK(slope <= 2.5);
}

TEST_CASE("output controls: nested directories, format filter, seed override") {
    const fs::path dir = fresh_dir("outctl");
    json cfg = quadratic_config(9);
    cfg["output"]["directory"] = "nested/runs/a";
    cfg["output"]["formats"] = {"report"};
    cfg["seed"] = 7;
    const fs::path path = place_config(dir, cfg);

    const RunResult r = run_cli({"solve-elliptic", path.string(), "--seed", "42"});
    REQUIRE(r.code == exit_ok);
    const fs::path out_dir = dir / "nested" / "runs" / "a";
    CHECK(fs::exists(out_dir / "report.json"));
    CHECK(!fs::exists(out_dir / "solution.dat"));  // filtered out
    const json report = json::parse(read_file(out_dir / "report.json"));
    CHECK(report.at("seed") == 42);  // flag override wins
    CHECK(report.at("config").at("output").at("directory") == "nested/runs/a");

    // nothing else appeared next to the config file
    std::set<std::string> entries;
    for (const auto& e : fs::directory_iterator(dir)) {
        entries.insert(e.path().filename().string());
    }
    CHECK(entries == std::set<std::string>{"config.json", "nested"});
}

}  // TEST_SUITE
