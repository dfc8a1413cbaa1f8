// Drives the dcalc binary: output values, the exit-code taxonomy, and
// byte-level determinism.  The binary path comes from the build system.
#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

#ifndef DCALC_CLI_PATH
#define DCALC_CLI_PATH "./tools/dcalc"
#endif

namespace {

struct run_result {
    int exit_code;
    std::string out;
};

run_result run_cli(const std::string& args)
{
    std::string cmd = std::string(DCALC_CLI_PATH) + " " + args + " 2>/dev/null";
    std::array<char, 4096> buf{};
    std::string out;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0)
        out.append(buf.data(), n);
    int status = pclose(pipe);
    return {WEXITSTATUS(status), out};
}

}  // namespace

TEST_CASE("documented examples")
{
    auto phi = run_cli("phi --p 2 --m 0 --r 2");
    CHECK(phi.exit_code == 0);
    CHECK(phi.out.find("\"eta^{1}\": \"x1\"") != std::string::npos);
    CHECK(phi.out.find("\"eta^{2}\": \"1\"") != std::string::npos);

    auto bil = run_cli("bilateral-check --p 2 --m 1 --gens \"x^4\"");
    CHECK(bil.exit_code == 0);
    CHECK(bil.out.find("\"horizontal\": true") != std::string::npos);

    auto neg = run_cli("bilateral-check --p 2 --m 1 --gens \"x^2\"");
    CHECK(neg.out.find("\"horizontal\": false") != std::string::npos);

    auto mem = run_cli("tube-member --p 2 --N \"x^2\" --g \"1/2*x^3\"");
    CHECK(mem.exit_code == 0);
    CHECK(mem.out.find("\"member\": true") != std::string::npos);

    auto nomem = run_cli("tube-member --p 2 --N \"x^2\" --g \"1/2*x\"");
    CHECK(nomem.out.find("\"member\": false") != std::string::npos);
}

TEST_CASE("exit code taxonomy")
{
    // 0: success
    CHECK(run_cli("coeff --p 2 --m 1 --kind qfac --K 4 --I 2").exit_code == 0);
    // 2: malformed input
    CHECK(run_cli("tube-member --p 2 --N \"x^2\" --g \"1/2*y\"").exit_code == 2);
    CHECK(run_cli("dop-act --p 2 --m 0 --op 'not json' --f x1").exit_code == 2);
    CHECK(run_cli("no-such-command").exit_code == 2);
    // 3: precondition violations
    CHECK(run_cli("phi --p 2 --m 0 --r 3").exit_code == 3);
    CHECK(run_cli("phi --p 4 --m 0 --r 4").exit_code == 3);
    CHECK(run_cli("tube-member --p 2 --N \"x1+x2\" --vars 2 --shape general --g x1").exit_code ==
          3);
    // 4: internal invariant failure (via the developer hook)
    CHECK(run_cli("dev-raise --kind internal").exit_code == 4);
}

TEST_CASE("byte-identical reruns")
{
    const std::array<const char*, 6> jobs = {
        "phi --p 3 --m 1 --r 9",
        "coeff --p 2 --m 1 --kind padic --K 4,2 --I 2,1",
        "dop-mul --p 2 --m 1 --op1 '{\"1\": \"x1\"}' --op2 '{\"2\": \"1\"}'",
        "gen-corpus --seed 7 --vars 2 --count 5 --kind op",
        "gen-corpus --seed 7 --vars 1 --count 3 --kind module --rank 2",
        "tube-compare --p 2 --m 1",
    };
    for (auto* job : jobs) {
        auto a = run_cli(job);
        auto b = run_cli(job);
        CHECK(a.exit_code == 0);
        CHECK(a.out == b.out);
        CHECK(!a.out.empty());
    }

    // different seeds give different corpora
    CHECK(run_cli("gen-corpus --seed 1 --count 3").out !=
          run_cli("gen-corpus --seed 2 --count 3").out);
}

TEST_CASE("json job documents")
{
    auto direct = run_cli("coeff --p 2 --m 1 --kind qfac --K 4 --I 2");
    auto viajob = run_cli(
        "run --file "
        "'{\"cmd\":\"coeff\",\"p\":2,\"m\":1,\"kind\":\"qfac\",\"K\":\"4\",\"I\":\"2\"}'");
    CHECK(viajob.exit_code == 0);
    CHECK(direct.out == viajob.out);

    CHECK(run_cli("run --file '{\"p\": 2}'").exit_code == 2);  // no cmd
    CHECK(run_cli("run --file '{\"cmd\": \"nope\"}'").exit_code == 2);
}

TEST_CASE("strat commands round-trip through files")
{
    std::string module = R"({"rank": 1, "level": 0, "p": 2, "vars": 1, "order_bound": 3,
        "theta": {"1": [["1"]], "2": [["1"]], "3": [["1"]]}})";
    {
        std::ofstream out("/tmp/dcalc_mod.json");
        out << module;
    }
    auto chk = run_cli("strat-check --file /tmp/dcalc_mod.json");
    CHECK(chk.exit_code == 0);
    CHECK(chk.out.find("\"cocycle\": true") != std::string::npos);

    auto pb = run_cli("strat-frobenius --file /tmp/dcalc_mod.json --F \"x1^2\" --s 1");
    CHECK(pb.exit_code == 0);
    CHECK(pb.out.find("\"cocycle\": true") != std::string::npos);
    CHECK(pb.out.find("2*x1") != std::string::npos);  // chain-rule factor

    auto hom = run_cli(
        "strat-hom --file1 /tmp/dcalc_mod.json --file2 /tmp/dcalc_mod.json --degree-bound 2");
    CHECK(hom.exit_code == 0);
    CHECK(hom.out.find("\"dimension\": 1") != std::string::npos);

    // modules over a tube ambient: entries are checked against membership
    std::string tube_mod = R"({"rank": 1, "level": 0, "p": 2, "vars": 1, "order_bound": 2,
        "ambient": {"N": ["x1^2"], "shape": "variable-powers"},
        "theta": {"1": [["1/2*x1^2"]]}})";
    {
        std::ofstream out("/tmp/dcalc_tubemod.json");
        out << tube_mod;
    }
    CHECK(run_cli("strat-check --file /tmp/dcalc_tubemod.json").exit_code == 0);

    std::string bad_mod = R"({"rank": 1, "level": 0, "p": 2, "vars": 1, "order_bound": 2,
        "ambient": {"N": ["x1^2"], "shape": "variable-powers"},
        "theta": {"1": [["1/2*x1"]]}})";
    {
        std::ofstream out("/tmp/dcalc_badmod.json");
        out << bad_mod;
    }
    CHECK(run_cli("strat-check --file /tmp/dcalc_badmod.json").exit_code == 3);
}
