#include <catch2/catch.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "hesscraft/tape.hpp"

namespace {

struct CliResult {
    int exit_code;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CliResult run_cli(const std::string& args, const std::string& env = "") {
    const std::string out_path = "cli_stdout.tmp";
    const std::string err_path = "cli_stderr.tmp";
    std::string cmd = env.empty() ? "" : env + " ";
    cmd += std::string(HESSCRAFT_CLI_PATH) + " " + args + " >" + out_path + " 2>" + err_path;
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_path);
    r.err = slurp(err_path);
    std::remove(out_path.c_str());
    std::remove(err_path.c_str());
    return r;
}

int count_lines(const std::string& s) {
    int n = 0;
    for (char c : s)
        if (c == '\n') ++n;
    return n;
}

}  // namespace

TEST_CASE("cli: gradient of the linear family") {
    const CliResult r = run_cli("grad --function linear --n 4 --x-const 0");
    REQUIRE(r.exit_code == 0);
    CHECK(r.out == "3 3 3 3\n");
}

TEST_CASE("cli: band1 Hessian in Matrix Market format") {
    const CliResult r = run_cli("hess --function band1 --n 6 --x-const 1.0 --format mm");
    REQUIRE(r.exit_code == 0);
    std::istringstream in(r.out);
    std::string header;
    std::getline(in, header);
    CHECK(header == "%%MatrixMarket matrix coordinate real symmetric");
    int rows, cols;
    long long nnz;
    in >> rows >> cols >> nnz;
    CHECK(rows == 6);
    CHECK(cols == 6);
    CHECK(nnz == 11);
    int entry_lines = 0;
    int r1, c1;
    double v;
    while (in >> r1 >> c1 >> v) {
        CHECK(r1 >= c1);  // lower triangle, 1-based
        CHECK(r1 >= 1);
        CHECK(c1 >= 1);
        ++entry_lines;
    }
    CHECK(entry_lines == 11);
}

TEST_CASE("cli: structural pattern flag emits unit values") {
    const CliResult r = run_cli("hess --function band1 --n 6 --pattern --format csv");
    REQUIRE(r.exit_code == 0);
    CHECK(count_lines(r.out) == 12);  // header + 11 entries
    CHECK(r.out.find("row,col,value") == 0);
}

TEST_CASE("cli: eval and grad on a tape file") {
    {
        hesscraft::Tape t = fixtures::exp_poly_tape();
        std::ofstream f("cli_tape.tmp");
        hesscraft::dump_tape(t, f);
    }
    {
        std::ofstream f("cli_point.tmp");
        f << "1 0 2\n";
    }
    const CliResult e = run_cli("eval --function cli_tape.tmp --x cli_point.tmp");
    REQUIRE(e.exit_code == 0);
    CHECK(e.out == "8\n");

    const CliResult g = run_cli("grad --function cli_tape.tmp --x cli_point.tmp");
    REQUIRE(g.exit_code == 0);
    CHECK(g.out == "4 10 8\n");

    const CliResult mismatch = run_cli("eval --function cli_tape.tmp --n 7 --x cli_point.tmp");
    CHECK(mismatch.exit_code == 2);

    std::remove("cli_tape.tmp");
    std::remove("cli_point.tmp");
}

TEST_CASE("cli: usage errors exit 2") {
    CHECK(run_cli("grad").exit_code == 2);
    CHECK(run_cli("grad --function no_such_family --n 4").exit_code == 2);
    CHECK(run_cli("frobnicate").exit_code == 2);
    CHECK(run_cli("grad --function linear --n 4 --format yaml").exit_code == 2);
    CHECK(run_cli("hess --function band1").exit_code == 2);  // family without --n
}

TEST_CASE("cli: domain errors exit 1 and name the node") {
    {
        hesscraft::Tape t = hesscraft::record(
            1, [](std::span<const hesscraft::Var> x) { return log(x[0]) * 2.0; });
        std::ofstream f("cli_ln_tape.tmp");
        hesscraft::dump_tape(t, f);
    }
    const CliResult r = run_cli("eval --function cli_ln_tape.tmp --x-const -1");
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("node") != std::string::npos);
    std::remove("cli_ln_tape.tmp");
}

TEST_CASE("cli: identical argv gives byte-identical output") {
    const std::string args = "hess --function irregular --n 25 --x-seed 7 --format mm";
    const CliResult a = run_cli(args);
    const CliResult b = run_cli(args);
    REQUIRE(a.exit_code == 0);
    CHECK(a.out == b.out);
    // different pair seed changes the function
    const CliResult c = run_cli("hess --function irregular --n 25 --x-seed 7 --seed 5 --format mm");
    CHECK(c.out != a.out);
}

TEST_CASE("cli: check subcommand cross-validates the oracles") {
    const CliResult r = run_cli("check --trials 8 --max-n 4 --max-ell 12");
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("check: OK") != std::string::npos);
    CHECK(r.out.find("max oracle discrepancy") != std::string::npos);
}

TEST_CASE("cli: dense cap env var trips the check") {
    const CliResult r = run_cli("check --trials 4 --max-n 6 --max-ell 30", "HESSCRAFT_DENSE_CAP=5");
    CHECK(r.exit_code != 0);
    CHECK(r.err.find("dense oracle cap") != std::string::npos);
}

TEST_CASE("cli: bench emits the CSV schema") {
    const CliResult r = run_cli("bench --function linear --n 64 --repeats 2");
    REQUIRE(r.exit_code == 0);
    std::istringstream in(r.out);
    std::string header, row;
    std::getline(in, header);
    CHECK(header == "family,n,ell,phase,median_ns,nnz,peak_live_edges");
    REQUIRE(std::getline(in, row));
    CHECK(row.rfind("linear,64,127,hessian-only,", 0) == 0);
    CHECK(row.rfind(",0,0", row.size() - 4) != std::string::npos);
}

TEST_CASE("cli: graph export produces DOT") {
    const CliResult plain = run_cli("export-graph --function band1 --n 4");
    REQUIRE(plain.exit_code == 0);
    CHECK(plain.out.rfind("digraph", 0) == 0);

    const CliResult folded = run_cli("export-graph --function band1 --n 4 --x-const 1 --folded");
    REQUIRE(folded.exit_code == 0);
    CHECK(folded.out.find("style=dashed") != std::string::npos);
}
