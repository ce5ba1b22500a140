#include "doctest.h"

#include "dopo/errors.hpp"
#include "dopo/run.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace dopo;

namespace {

RunConfig base_cfg() {
    RunConfig c;
    c.mode = RunMode::steady;
    c.methods = {Method::meanfield};
    return c;
}

struct CliResult {
    int code = -1;
    std::string out, err;
};

std::string slurp(const char* path) {
    std::ifstream is(path, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

CliResult run_cli(const std::string& args) {
    static int serial = 0;
    const std::string out = "cli_out_" + std::to_string(serial) + ".txt";
    const std::string err = "cli_err_" + std::to_string(serial) + ".txt";
    ++serial;
    const char* bin = std::getenv("DOPO_CLI_BIN");
    REQUIRE(bin != nullptr);
    const std::string cmd = std::string(bin) + " " + args + " >" + out + " 2>" + err;
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = (status >= 0) ? (status >> 8) & 0xff : -1;
    r.out = slurp(out.c_str());
    r.err = slurp(err.c_str());
    std::remove(out.c_str());
    std::remove(err.c_str());
    return r;
}

// Output lines with the wall-clock stamp removed.
std::vector<std::string> stable_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line))
        if (line.rfind("# run:", 0) != 0 && line.find("\"run\"") == std::string::npos)
            lines.push_back(line);
    return lines;
}

} // namespace

TEST_CASE("validation fills defaults") {
    RunConfig c = base_cfg();
    const ValidatedRun v = validate(c);
    CHECK(v.params.gamma_s == 1.0);
    CHECK(v.params.gamma_p == 1.0);
    CHECK(v.params.chi == doctest::Approx(0.1));
    CHECK(v.params.sigma() == doctest::Approx(0.0));  // undriven unless asked
    CHECK(v.dim_s == 64);
    CHECK(v.dim_p == 10);
}

TEST_CASE("drive can be given either way but must agree") {
    RunConfig c = base_cfg();
    c.sigma = 1.0;
    CHECK(validate(c).params.eps_p == doctest::Approx(10.0));

    RunConfig e = base_cfg();
    e.eps_p = 10.0;
    CHECK(validate(e).params.sigma() == doctest::Approx(1.0));

    RunConfig both = base_cfg();
    both.sigma = 1.0;
    both.eps_p = 10.0;
    CHECK_NOTHROW(validate(both));

    both.eps_p = 11.0;
    CHECK_THROWS_AS(validate(both), const DimensionError&);
    try {
        validate(both);
    } catch (const DimensionError& ex) {
        CHECK(std::string(ex.what()).find("disagree") != std::string::npos);
    }
}

TEST_CASE("method list rules") {
    RunConfig none = base_cfg();
    none.methods.clear();
    CHECK_THROWS_AS(validate(none), const DimensionError&);

    RunConfig cmp = base_cfg();
    cmp.mode = RunMode::compare;
    CHECK_THROWS_AS(validate(cmp), const DimensionError&);
    cmp.methods.push_back(Method::cmop);
    CHECK_NOTHROW(validate(cmp));

    RunConfig dup = base_cfg();
    dup.methods = {Method::meanfield, Method::meanfield, Method::cmop};
    CHECK(validate(dup).cfg.methods.size() == 2);

    RunConfig dyn = base_cfg();
    dyn.mode = RunMode::dynamics;
    dyn.methods = {Method::std_lin};
    CHECK_THROWS_AS(validate(dyn), const DimensionError&);
    dyn.methods = {Method::gsa_cmop};
    CHECK_NOTHROW(validate(dyn));

    RunConfig wig = base_cfg();
    wig.mode = RunMode::wigner;
    wig.methods = {Method::cmop, Method::full};
    CHECK_THROWS_AS(validate(wig), const DimensionError&);
}

TEST_CASE("the size guard protects the dense solver") {
    RunConfig c = base_cfg();
    c.methods = {Method::full};
    c.dim_s = 400;
    try {
        validate(c);
        FAIL("expected a refusal");
    } catch (const DimensionError& ex) {
        const std::string msg = ex.what();
        CHECK(msg.find("--force-dims") != std::string::npos);
        CHECK(msg.find("matrix entries") != std::string::npos);
    }
    c.force_dims = true;
    CHECK_NOTHROW(validate(c));

    RunConfig fine = base_cfg();
    fine.methods = {Method::full};
    fine.dim_s = 32;
    fine.dim_p = 10;
    CHECK_NOTHROW(validate(fine));
}

TEST_CASE("parameter sanity is enforced") {
    RunConfig c = base_cfg();
    c.chi = -0.1;
    CHECK_THROWS_AS(validate(c), const DimensionError&);

    RunConfig s = base_cfg();
    s.mode = RunMode::sweep;
    s.sweep_from = 1.0;
    s.sweep_to = 0.5;
    CHECK_THROWS_AS(validate(s), const DimensionError&);
    s.sweep_to = 2.0;
    s.sweep_step = 0.0;
    CHECK_THROWS_AS(validate(s), const DimensionError&);

    RunConfig seed = base_cfg();
    seed.seed_from = "definitely_not_here.json";
    CHECK_THROWS_AS(validate(seed), const DimensionError&);
}

TEST_CASE("cli: identical invocations produce identical tables") {
    const std::string args = "steady --method meanfield,std-lin --chi 0.2 --sigma 0.8";
    const CliResult a = run_cli(args);
    const CliResult b = run_cli(args);
    CHECK(a.code == 0);
    CHECK(b.code == 0);
    CHECK(!a.out.empty());
    CHECK(stable_lines(a.out) == stable_lines(b.out));
}

TEST_CASE("cli: json output carries meta and rows") {
    const CliResult r =
        run_cli("steady --method meanfield --sigma 0.5 --chi 0.3 --format json");
    REQUIRE(r.code == 0);
    const nlohmann::json j = nlohmann::json::parse(r.out);
    CHECK(j.at("meta").at("mode") == "steady");
    CHECK(j.at("meta").at("methods") == "meanfield");
    CHECK(j.at("rows").size() == 1);
    CHECK(j.at("columns").size() >= 5);
}

TEST_CASE("cli: sweeps cover the requested drive range") {
    const CliResult r = run_cli(
        "sweep --sigma 0:0.5:1 --method meanfield,gsa-full --chi 0.2 --jobs 1");
    REQUIRE(r.code == 0);
    const auto lines = stable_lines(r.out);
    int rows = 0;
    for (const auto& l : lines)
        if (!l.empty() && l[0] != '#' && l.find("sigma") == std::string::npos) ++rows;
    CHECK(rows == 3);
}

TEST_CASE("cli: dynamics emits a time series") {
    const CliResult r = run_cli(
        "dynamics --method meanfield --sigma 1.2 --chi 0.5 --tmax 2 --dt-out 1");
    REQUIRE(r.code == 0);
    const auto lines = stable_lines(r.out);
    int rows = 0;
    for (const auto& l : lines)
        if (!l.empty() && l[0] != '#' && l.find("g2_") == std::string::npos) ++rows;
    CHECK(rows == 3);  // t = 0, 1, 2
}

TEST_CASE("cli: bad usage exits with the config code") {
    CHECK(run_cli("steady --sigma 0.5").code == 2);           // no methods
    CHECK(run_cli("steady --method nope").code == 2);         // unknown method
    CHECK(run_cli("").code == 2);                             // missing subcommand
    CHECK(run_cli("compare --method meanfield").code == 2);   // one method only
    CHECK(run_cli("steady --method full --ds 400").code == 2);  // size guard
}

TEST_CASE("cli: config file supplies defaults, flags win") {
    const char* path = "cli_cfg_test.ini";
    {
        std::ofstream os(path);
        os << "[steady]\n"
           << "chi=0.2\n"
           << "sigma=0.5\n"
           << "method=meanfield\n";
    }
    const CliResult file_only = run_cli(std::string("steady --config ") + path);
    REQUIRE(file_only.code == 0);
    const CliResult overridden =
        run_cli(std::string("steady --config ") + path + " --sigma 0.9");
    REQUIRE(overridden.code == 0);
    std::remove(path);
    CHECK(file_only.out.find("sigma: 0.5") != std::string::npos);
    CHECK(overridden.out.find("sigma: 0.9") != std::string::npos);
}
