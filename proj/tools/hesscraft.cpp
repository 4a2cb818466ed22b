// hesscraft command line: evaluate scalar functions recorded on a tape and
// compute gradients, sparse Hessians, sparsity patterns, benchmarks, and
// graph exports.
//
// Exit codes: 0 success, 1 numeric/domain error, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hesscraft/hesscraft.hpp"

namespace {

using namespace hesscraft;

struct PointSpec {
    std::string file;
    std::optional<double> constant;
    std::optional<std::uint64_t> seed;
};

std::vector<double> resolve_point(const PointSpec& spec, int n) {
    std::vector<double> x(static_cast<std::size_t>(n), 1.0);
    if (!spec.file.empty()) {
        std::ifstream in(spec.file);
        if (!in) throw CLI::ValidationError("--x", "cannot open point file '" + spec.file + "'");
        x.clear();
        double v;
        while (in >> v) x.push_back(v);
        if (static_cast<int>(x.size()) != n)
            throw CLI::ValidationError("--x", "point file holds " + std::to_string(x.size()) +
                                                  " values, expected " + std::to_string(n));
    } else if (spec.seed) {
        std::mt19937_64 rng(*spec.seed);
        std::uniform_real_distribution<double> dist(0.5, 1.5);
        for (double& xi : x) xi = dist(rng);
    } else if (spec.constant) {
        for (double& xi : x) xi = *spec.constant;
    }
    return x;
}

struct FunctionSpec {
    std::string name;  // family name or tape file path
    int n = 0;         // 0 = take from tape file
    std::uint64_t family_seed = bench::kDefaultSeed;
};

Tape resolve_tape(const FunctionSpec& spec) {
    if (bench::find_family(spec.name)) {
        if (spec.n <= 0) throw CLI::ValidationError("--n", "family functions need --n");
        return bench::make_family(spec.name, spec.n, spec.family_seed);
    }
    if (std::filesystem::exists(spec.name)) {
        std::ifstream in(spec.name);
        Tape t = parse_tape(in);
        if (spec.n > 0 && spec.n != t.n())
            throw CLI::ValidationError("--n", "tape file has " + std::to_string(t.n()) +
                                                  " inputs, but --n says " + std::to_string(spec.n));
        return t;
    }
    throw CLI::ValidationError("--function",
                               "'" + spec.name + "' is neither a known family nor a tape file");
}

std::ostream& open_output(const std::string& path, std::ofstream& file) {
    if (path.empty()) return std::cout;
    file.open(path);
    if (!file) throw CLI::ValidationError("--out", "cannot open '" + path + "' for writing");
    return file;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void add_function_options(CLI::App* cmd, FunctionSpec& fn, PointSpec& pt) {
    cmd->add_option("--function", fn.name, "family name or tape file")->required();
    cmd->add_option("--n", fn.n, "dimension (number of independents)");
    cmd->add_option("--seed", fn.family_seed, "pair-generator seed for the irregular family");
    auto* xfile = cmd->add_option("--x", pt.file, "file of whitespace-separated reals");
    auto* xconst = cmd->add_option("--x-const", pt.constant, "constant point (default 1.0)");
    auto* xseed = cmd->add_option("--x-seed", pt.seed, "seeded uniform point in [0.5, 1.5]");
    xfile->excludes(xconst)->excludes(xseed);
    xconst->excludes(xseed);
}

int run(int argc, char** argv) {
    CLI::App app{"tape-based derivatives: values, gradients, sparse Hessians"};
    app.require_subcommand(1);

    FunctionSpec fn;
    PointSpec pt;
    std::string grad_format = "plain";
    std::string hess_format = "mm";
    std::string out_path;
    double drop_tol = 0.0;
    bool pattern_only = false;

    auto* eval = app.add_subcommand("eval", "evaluate f(x)");
    add_function_options(eval, fn, pt);

    auto* grad = app.add_subcommand("grad", "reverse-mode gradient");
    add_function_options(grad, fn, pt);
    grad->add_option("--format", grad_format, "plain | csv");

    auto* hess = app.add_subcommand("hess", "sparse Hessian by edge pushing");
    add_function_options(hess, fn, pt);
    hess->add_option("--format", hess_format, "mm | csv");
    hess->add_option("--out", out_path, "output file (default stdout)");
    hess->add_option("--drop-tol", drop_tol, "drop entries with |w| strictly below")
        ->check(CLI::NonNegativeNumber);
    hess->add_flag("--pattern", pattern_only, "structural pattern instead of values");

    auto* benchcmd = app.add_subcommand("bench", "timing and nnz measurements, CSV");
    std::vector<int> bench_ns;
    int repeats = 5;
    std::string phase = "hessian-only";
    benchcmd->add_option("--function", fn.name, "family name, or 'all'")->required();
    benchcmd->add_option("--n", bench_ns, "dimension(s)")->required();
    benchcmd->add_option("--seed", fn.family_seed, "pair-generator seed for the irregular family");
    auto* bseed = benchcmd->add_option("--x-seed", pt.seed, "seeded uniform point in [0.5, 1.5]");
    benchcmd->add_option("--x-const", pt.constant, "constant point (default 1.0)")->excludes(bseed);
    benchcmd->add_option("--repeats", repeats, "timed repeats per row (median reported)")
        ->default_val(5);
    benchcmd->add_option("--phase", phase, "hessian-only | total | both")->default_val("hessian-only");
    benchcmd->add_option("--out", out_path, "output file (default stdout)");

    auto* graph = app.add_subcommand("export-graph", "DOT rendering of the computational graph");
    add_function_options(graph, fn, pt);
    bool folded = false, keep_pushed = false;
    int sweep_state = -1;
    graph->add_flag("--folded", folded, "include nonlinear arcs of the folded gradient graph");
    graph->add_option("--sweep-state", sweep_state,
                      "debug: accumulator snapshot after sweeping this node id");
    graph->add_flag("--keep-pushed", keep_pushed, "keep consumed arcs (gray) in the snapshot");
    graph->add_option("--out", out_path, "output file (default stdout)");

    auto* check = app.add_subcommand("check", "cross-validate edge pushing against all oracles");
    CrosscheckConfig ccfg;
    check->add_option("--trials", ccfg.trials)->default_val(1000);
    check->add_option("--max-n", ccfg.max_n)->default_val(8);
    check->add_option("--max-ell", ccfg.max_ell)->default_val(40);
    check->add_option("--seed", ccfg.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    std::ofstream out_file;

    if (eval->parsed()) {
        Tape tape = resolve_tape(fn);
        const std::vector<double> x = resolve_point(pt, tape.n());
        std::printf("%s\n", fmt(forward_sweep(tape, x)).c_str());
        return 0;
    }

    if (grad->parsed()) {
        if (grad_format != "plain" && grad_format != "csv")
            throw CLI::ValidationError("--grad_format", "grad supports plain or csv");
        Tape tape = resolve_tape(fn);
        const std::vector<double> x = resolve_point(pt, tape.n());
        forward_sweep(tape, x);
        const GradientResult g = reverse_gradient(tape);
        if (grad_format == "csv") {
            std::printf("index,value\n");
            for (int k = 0; k < tape.n(); ++k)
                std::printf("%d,%s\n", k + 1, fmt(g.gradient[static_cast<std::size_t>(k)]).c_str());
        } else {
            std::string line;
            for (int k = 0; k < tape.n(); ++k) {
                if (k) line += ' ';
                line += fmt(g.gradient[static_cast<std::size_t>(k)]);
            }
            std::printf("%s\n", line.c_str());
        }
        return 0;
    }

    if (hess->parsed()) {
        if (hess_format != "mm" && hess_format != "csv")
            throw CLI::ValidationError("--hess_format", "hess supports mm or csv");
        Tape tape = resolve_tape(fn);
        SparseHessian h;
        if (pattern_only) {
            h = structural_pattern(tape);
        } else {
            const std::vector<double> x = resolve_point(pt, tape.n());
            forward_sweep(tape, x);
            EdgePushingOptions opts;
            opts.drop_tol = drop_tol;
            h = edge_pushing_hessian(tape, opts).hessian;
        }
        std::ostream& os = open_output(out_path, out_file);
        if (hess_format == "mm") {
            write_matrix_market(h, os);
        } else {
            os << "row,col,value\n";
            for (const HessianEntry& e : h.entries())
                os << e.row + 1 << ',' << e.col + 1 << ',' << fmt(e.value) << '\n';
        }
        return 0;
    }

    if (benchcmd->parsed()) {
        std::vector<std::string> names;
        if (fn.name == "all")
            for (const auto& f : bench::families()) names.emplace_back(f.name);
        else
            names.push_back(fn.name);
        std::vector<bench::Phase> phases;
        if (phase == "hessian-only" || phase == "both") phases.push_back(bench::Phase::HessianOnly);
        if (phase == "total" || phase == "both") phases.push_back(bench::Phase::Total);
        if (phases.empty()) throw CLI::ValidationError("--phase", "expected hessian-only, total, or both");

        std::ostream& os = open_output(out_path, out_file);
        bench::write_csv_header(os);
        for (const std::string& name : names)
            for (int n : bench_ns) {
                const std::vector<double> x = resolve_point(pt, n);
                for (bench::Phase ph : phases)
                    bench::write_csv_row(os, bench::run_bench(name, n, repeats, ph, x, fn.family_seed));
            }
        return 0;
    }

    if (graph->parsed()) {
        Tape tape = resolve_tape(fn);
        std::string dot;
        if (sweep_state >= 0 || folded) {
            const std::vector<double> x = resolve_point(pt, tape.n());
            forward_sweep(tape, x);
            if (sweep_state >= 0) {
                dot = sweep_state_to_dot(tape, sweep_state, keep_pushed);
            } else {
                const GradientResult g = reverse_gradient(tape);
                dot = folded_graph_to_dot(tape, build_folded_graph(tape, g.adjoints));
            }
        } else {
            if (!pt.file.empty() || pt.constant || pt.seed) {
                const std::vector<double> x = resolve_point(pt, tape.n());
                forward_sweep(tape, x);
            }
            dot = tape_to_dot(tape);
        }
        open_output(out_path, out_file) << dot;
        return 0;
    }

    // check
    const CrosscheckReport rep = run_crosscheck(ccfg);
    const CrosscheckTolerances tol;
    std::printf("check: trials=%d max-n=%d max-ell=%d seed=%llu\n", rep.trials, ccfg.max_n, ccfg.max_ell,
                static_cast<unsigned long long>(ccfg.seed));
    std::printf("  dense nested oracle   max discrepancy %.3e  (tol %.0e)\n", rep.max_dense, tol.dense);
    std::printf("  path enumeration      max discrepancy %.3e  (tol %.0e, %d tapes)\n", rep.max_path,
                tol.path, rep.path_checked);
    std::printf("  finite-diff Hessian   max discrepancy %.3e  (tol %.0e)\n", rep.max_fd_hess, tol.fd_hess);
    std::printf("  finite-diff gradient  max discrepancy %.3e  (tol %.0e)\n", rep.max_fd_grad, tol.fd_grad);
    std::printf("  adjoint path identity max discrepancy %.3e  (tol %.0e, %d tapes)\n", rep.max_adjoint,
                tol.adjoint, rep.adjoint_checked);
    std::printf("  Hessian-vector cols   max discrepancy %.3e  (tol %.0e, %d tapes)\n", rep.max_hvp,
                tol.hvp, rep.hvp_checked);
    std::printf("  storage-order shuffle max discrepancy %.3e  (tol %.0e, %d tapes)\n", rep.max_shuffle,
                tol.shuffle, rep.shuffle_checked);
    std::printf("  invariant violations: symmetry=%lld support=%lld adjoint-bitwise=%lld\n",
                static_cast<long long>(rep.symmetry_violations),
                static_cast<long long>(rep.support_violations),
                static_cast<long long>(rep.adjoint_mismatches));
    const bool ok = crosscheck_passed(rep, tol);
    std::printf("check: %s (max oracle discrepancy %.3e)\n", ok ? "OK" : "FAILED",
                rep.worst_oracle_discrepancy());
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const hesscraft::EvalError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 1;
    } catch (const hesscraft::RecordError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const CLI::Error& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
