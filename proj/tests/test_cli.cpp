#include "doctest.h"

#include "cli.hpp"
#include "hecke/amplifier.hpp"

#include "json.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using hecke::cli::run;
using json = nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result call(const std::vector<std::string>& args, bool color = false) {
    std::ostringstream out, err;
    const int code = run(args, out, err, color);
    return {code, out.str(), err.str()};
}

std::string temp_path(const char* name) { return std::string("/tmp/hecke_cli_test_") + name; }

} // namespace

TEST_CASE("degree and orbital tables") {
    auto r = call({"degree", "--p", "5", "--cotype", "1,0,0", "--format", "csv"});
    CHECK(r.code == 0);
    CHECK(r.out == "# hecke degree v1\np,cotype,degree\n5,\"1,0,0\",31\n");

    r = call({"orbital", "--p", "7", "--a", "1,0,0", "--b", "1,0,0", "--format", "json"});
    REQUIRE(r.code == 0);
    const auto doc = json::parse(r.out);
    CHECK(doc["schema"] == "hecke.orbital-pair/1");
    CHECK(doc["rows"][0]["total"] == 63);
    CHECK(doc["rows"][0]["off_diagonal"] == 6);

    r = call({"orbital", "--p", "3", "--a", "1,1,0", "--format", "csv"});
    CHECK(r.out == "# hecke orbital-single v1\np,a,integral\n3,\"1,1,0\",3\n");
}

TEST_CASE("pretty output defaults to aligned key-value lines") {
    const auto r = call({"degree", "--p", "5", "--cotype", "1,0,0"});
    CHECK(r.out == "p       5\ncotype  1,0,0\ndegree  31\n");
}

TEST_CASE("the resolved configuration is logged as JSON") {
    const auto r = call({"degree", "--p", "5", "--cotype", "1,0,0"});
    const auto cfg = json::parse(r.err.substr(0, r.err.find('\n')));
    CHECK(cfg["command"] == "degree");
    CHECK(cfg["options"]["p"] == "5");
    CHECK(cfg["options"]["format"] == "pretty");
    CHECK(cfg["options"]["max-subgroups"] == "10000000");
}

TEST_CASE("amp-ratio reports the exact ratio") {
    const auto r = call({"amp-ratio", "--c", "1", "--c1", "4", "--M", "100000", "--modulus", "1", "--format", "json"});
    REQUIRE(r.code == 0);
    const auto doc = json::parse(r.out);
    hecke::amp::AmplifierConfig cfg;
    cfg.c = 1;
    cfg.c1 = 4;
    cfg.M = 100000;
    const auto want = hecke::amp::amplifier_ratio(cfg);
    CHECK(doc["rows"][0]["ratio"] == want.ratio.get_str());
    CHECK(doc["rows"][0]["terms"] == want.term_count);
    CHECK(doc["details"]["primes_used"].size() == want.primes_used.size());
}

TEST_CASE("rationals accept fractions and terminating decimals") {
    const auto a = call({"amp-bounds", "--c", "1/2", "--format", "csv"});
    const auto b = call({"amp-bounds", "--c", "0.5", "--format", "csv"});
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out.find(",5,5,30,30,12/5,12/5,2.4") != std::string::npos);
    CHECK(call({"amp-bounds", "--c", "one"}).code == 2);
    CHECK(call({"amp-bounds", "--c", "1/0"}).code == 2);
}

TEST_CASE("identical arguments give identical bytes") {
    const std::vector<std::string> args{"bound-scan", "--primes", "2,3", "--max-entry", "1", "--format", "csv"};
    const auto a = call(args), b = call(args);
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
    const auto serial = call({"bound-scan", "--primes", "2,3", "--max-entry", "1", "--format", "csv", "--jobs", "1"});
    CHECK(serial.out == a.out);
}

TEST_CASE("exit codes") {
    CHECK(call({}).code == 2);
    CHECK(call({"degree", "--p", "5"}).code == 2);
    CHECK(call({"degree", "--p", "4", "--cotype", "1,0,0"}).code == 2);
    CHECK(call({"degree", "--p", "5", "--cotype", "1,0,0", "--bogus"}).code == 2);
    CHECK(call({"degree", "--p", "5", "--cotype", "1,x"}).code == 2);
    CHECK(call({"degree", "--p", "5", "--cotype", "1,0,0", "--format", "xml"}).code == 2);
    CHECK(call({"degree", "--p", "5", "--cotype", "1,0,0", "--max-subgroups", "10"}).code == 3);
    CHECK(call({"spherical", "--n", "3", "--nu", "1"}).code == 2);
    const std::vector<std::string> starved{"model-int", "--n",        "2",         "--h0",      "1", "--t",
                                           "10",        "--max-levels", "1",       "--rel-tol", "0", "--abs-tol", "0"};
    CHECK(call(starved).code == 0);
    auto strict = starved;
    strict.push_back("--require-converged");
    CHECK(call(strict).code == 4);
    CHECK(call({"model-int", "--n", "2", "--h0", "1", "--max-levels", "0"}).code == 2);
    CHECK(call({"--help"}).code == 0);
}

TEST_CASE("output file and config file") {
    const std::string out = temp_path("out.csv");
    std::remove(out.c_str());
    auto r = call({"degree", "--p", "3", "--cotype", "1,0,0", "--format", "csv", "--output", out});
    CHECK(r.code == 0);
    CHECK(r.out.empty());
    std::ifstream f(out);
    std::stringstream s;
    s << f.rdbuf();
    CHECK(s.str() == "# hecke degree v1\np,cotype,degree\n3,\"1,0,0\",13\n");

    const std::string cfg = temp_path("config.toml");
    std::ofstream(cfg) << "format = \"csv\"\n[degree]\np = 3\ncotype = \"1,1,0\"\n";
    r = call({"--config", cfg, "degree"});
    CHECK(r.code == 0);
    CHECK(r.out == "# hecke degree v1\np,cotype,degree\n3,\"1,1,0\",13\n");
    // Command-line flags take precedence over the file.
    r = call({"degree", "--config", cfg, "--p", "7"});
    CHECK(r.out == "# hecke degree v1\np,cotype,degree\n7,\"1,1,0\",57\n");
    CHECK(call({"--config", temp_path("missing.toml"), "degree"}).code == 2);
}

TEST_CASE("color only in pretty output and never under NO_COLOR") {
    const std::vector<std::string> args{"hall", "--p", "3", "--a", "1,0", "--b", "1,0"};
    CHECK(call(args, true).out.find("\033[1m") != std::string::npos);
    CHECK(call(args, false).out.find('\033') == std::string::npos);
    ::setenv("NO_COLOR", "1", 1);
    CHECK(call(args, true).out.find('\033') == std::string::npos);
    ::unsetenv("NO_COLOR");
}

TEST_CASE("numeric subcommands") {
    auto r = call({"model-int", "--n", "2", "--h0", "1", "--t", "10,20", "--bracket", "1.6,2.5", "--format", "json"});
    REQUIRE(r.code == 0);
    auto doc = json::parse(r.out);
    REQUIRE(doc["rows"].size() == 2);
    CHECK(doc["rows"][0]["t"] == 10.0);
    CHECK(doc["rows"][1]["in_bracket"] == true);
    CHECK(doc["rows"][1]["converged"] == true);
    CHECK(doc["details"]["generic"] == true);

    r = call({"critical-set", "--n", "2", "--h0", "1", "--format", "json"});
    REQUIRE(r.code == 0);
    doc = json::parse(r.out);
    REQUIRE(doc["rows"].size() == 2);
    CHECK(doc["rows"][1]["angle"].get<double>() == doctest::Approx(0.7853981633974483));
    CHECK(doc["rows"][1]["n_plus"] == 1);

    r = call({"spherical", "--n", "2", "--nu", "0", "--g", "2,0,0,0.5", "--format", "json"});
    REQUIRE(r.code == 0);
    doc = json::parse(r.out);
    CHECK(doc["rows"][0]["converged"] == true);
    CHECK(doc["rows"][0]["re"].get<double>() > 0);
    CHECK(doc["rows"][0]["re"].get<double>() < 1);
    CHECK(call({"spherical", "--n", "2", "--nu", "0", "--g", "2,0,0,1"}).code == 2);

    r = call({"orbital-int", "--n", "2", "--h0", "1", "--t", "3", "--format", "json"});
    REQUIRE(r.code == 0);
    doc = json::parse(r.out);
    CHECK(doc["rows"][0]["levi_distance"] == 0.0);
}

TEST_CASE("verify passes") {
    const auto r = call({"verify", "--format", "json"});
    CHECK(r.code == 0);
    const auto doc = json::parse(r.out);
    CHECK(doc["details"]["failed"] == 0);
    CHECK(doc["rows"].size() > 80);
}
