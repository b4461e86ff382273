#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "datn/bench.hpp"
#include "datn/dynattn.hpp"
#include "datn/hmv.hpp"
#include "datn/matrix.hpp"
#include "datn/numfmt.hpp"
#include "datn/static_attn.hpp"
#include "datn/trace.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfigError = 2;

double default_rtol() {
    if (const char* env = std::getenv("DATN_RTOL")) {
        try {
            const double v = datn::parse_double(env);
            if (v > 0.0) return v;
        } catch (const std::exception&) {
        }
        std::cerr << "warning: ignoring invalid DATN_RTOL='" << env << "'\n";
    }
    return 1e-10;
}

// Matrix paths in a trace file resolve relative to the trace file itself.
std::string resolve(const std::string& base_file, const std::string& path) {
    fs::path p(path);
    if (p.is_absolute()) return path;
    return (fs::path(base_file).parent_path() / p).string();
}

int cmd_verify(std::size_t n, std::size_t d, double a, std::size_t ops,
               std::uint64_t seed, double rtol, bool verbose) {
    auto inst = datn::generate(n, d, a, ops, datn::OpMix{}, 0.5, seed);
    auto dyn = datn::replay(inst.trace, inst.Q, inst.K, inst.V, datn::Engine::dynattn);
    auto ora = datn::replay(inst.trace, inst.Q, inst.K, inst.V, datn::Engine::oracle);

    double worst = 0.0;
    for (std::size_t t = 0; t < dyn.size(); ++t) {
        const double scale = std::max({1.0, std::fabs(dyn[t]), std::fabs(ora[t])});
        worst = std::max(worst, std::fabs(dyn[t] - ora[t]) / scale);
    }
    const bool ok = worst <= rtol;
    if (verbose)
        std::cout << "replayed " << inst.trace.ops.size() << " ops on both engines\n";
    std::cout << "verified=" << (ok ? "true" : "false")
              << " max_abs_rel_err=" << datn::format_double(worst)
              << " queries=" << dyn.size() << "\n";
    return ok ? kExitOk : kExitCheckFailed;
}

int cmd_bench(std::size_t n, std::size_t d, double a, std::size_t ops,
              std::uint64_t seed, bool verbose) {
    auto result = datn::run_bench(n, d, a, ops, seed);
    std::cout << datn::kBenchCsvHeader << "\n" << datn::bench_csv(result);
    if (verbose)
        std::cout << "# amortized update speedup (naive/dynattn): "
                  << datn::format_double(result.update_speedup()) << "\n";
    return kExitOk;
}

int cmd_gen(std::size_t n, std::size_t d, double a, std::size_t ops,
            std::uint64_t seed, double value_scale, const std::string& out_dir) {
    auto inst = datn::generate(n, d, a, ops, datn::OpMix{}, value_scale, seed);
    fs::create_directories(out_dir);
    datn::write_datn1(inst.Q, (fs::path(out_dir) / "Q.datn1").string());
    datn::write_datn1(inst.K, (fs::path(out_dir) / "K.datn1").string());
    datn::write_datn1(inst.V, (fs::path(out_dir) / "V.datn1").string());
    datn::save_trace(inst.trace, (fs::path(out_dir) / "trace.txt").string());
    std::cout << "wrote " << (fs::path(out_dir) / "trace.txt").string() << "\n";
    return kExitOk;
}

int cmd_run(const std::string& trace_path, const std::string& out_path) {
    datn::Trace trace;
    try {
        trace = datn::load_trace(trace_path);
    } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << "\n";
        return kExitConfigError;
    }
    trace.q_path = resolve(trace_path, trace.q_path);
    trace.k_path = resolve(trace_path, trace.k_path);
    trace.v_path = resolve(trace_path, trace.v_path);

    std::vector<double> answers;
    try {
        answers = datn::replay_from_files(trace, datn::Engine::dynattn);
    } catch (const std::runtime_error& e) {
        std::cerr << e.what() << "\n";
        return kExitCheckFailed;
    }
    std::ofstream os(out_path);
    if (!os) {
        std::cerr << "cannot open for write: " << out_path << "\n";
        return kExitConfigError;
    }
    os << datn::serialize_answers(answers);
    std::cout << "queries=" << answers.size() << " answers=" << out_path << "\n";
    return kExitOk;
}

int cmd_hmv_check(std::size_t n, double tau, std::size_t cases, std::uint64_t seed,
                  const std::string& mode_flag, bool verbose) {
    std::vector<datn::HmvMode> modes;
    if (mode_flag == "both") {
        modes = {datn::HmvMode::oamv, datn::HmvMode::odamv};
    } else if (mode_flag == "oamv") {
        modes = {datn::HmvMode::oamv};
    } else if (mode_flag == "odamv") {
        modes = {datn::HmvMode::odamv};
    } else {
        std::cerr << "invalid mode '" << mode_flag << "' (oamv|odamv|both)\n";
        return kExitConfigError;
    }

    std::size_t passed = 0, failed = 0;
    for (auto mode : modes) {
        auto report = datn::check_reduction(n, tau, seed, cases, mode);
        for (const auto& c : report.cases)
            std::cout << datn::hmv_case_record(c, mode, n, tau) << "\n";
        passed += report.passed;
        failed += report.failed;
        if (verbose && report.has_counterexample)
            std::cout << "first counterexample in mode "
                      << (mode == datn::HmvMode::oamv ? "oamv" : "odamv") << "\n";
    }
    std::cout << "summary passed=" << passed << " failed=" << failed << "\n";
    return failed == 0 ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic attention maintenance: verify, bench, replay, reduction checks"};
    app.require_subcommand(1);

    std::size_t n = 16, d = 4, ops = 200, cases = 100;
    double a = 0.5, tau = 0.5, value_scale = 0.5;
    std::uint64_t seed = 1;
    double rtol = default_rtol();
    bool verbose = false;
    std::string out_dir = "gen_out", trace_path, answers_path = "answers.txt";
    std::string mode = "both";

    app.add_flag("--verbose", verbose, "Human-readable extra output");

    auto add_common = [&](CLI::App* sub, bool with_d) {
        sub->add_option("--n", n, "Sequence length n")->check(CLI::PositiveNumber);
        if (with_d)
            sub->add_option("--d", d, "Feature dimension d")->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "PRNG seed");
    };

    auto* verify = app.add_subcommand("verify", "Oracle-equivalence check on a random trace");
    add_common(verify, true);
    verify->add_option("--a", a, "Threshold exponent in (0,1]")
        ->check(CLI::Range(1e-9, 1.0));
    verify->add_option("--ops", ops, "Number of trace operations");
    verify->add_option("--rtol", rtol, "Relative tolerance")->check(CLI::PositiveNumber);

    auto* bench = app.add_subcommand("bench", "Lazy-vs-naive timing, CSV output");
    add_common(bench, true);
    bench->add_option("--a", a, "Threshold exponent in (0,1]")
        ->check(CLI::Range(1e-9, 1.0));
    bench->add_option("--ops", ops, "Number of trace operations");

    auto* gen = app.add_subcommand("gen", "Generate a trace plus matrices");
    add_common(gen, true);
    gen->add_option("--a", a, "Threshold exponent in (0,1]")->check(CLI::Range(1e-9, 1.0));
    gen->add_option("--ops", ops, "Number of trace operations");
    gen->add_option("--value-scale", value_scale, "Entry magnitude bound")
        ->check(CLI::PositiveNumber);
    gen->add_option("--out", out_dir, "Output directory");

    auto* run = app.add_subcommand("run", "Replay a trace file on the dynamic structure");
    run->add_option("--trace", trace_path, "Trace file")->required();
    run->add_option("--out", answers_path, "Answers file");

    auto* hmv = app.add_subcommand("hmv-check", "Empirical reduction check against the boolean oracle");
    add_common(hmv, false);
    hmv->add_option("--tau", tau, "Sparsity exponent in (0,1]")
        ->check(CLI::Range(1e-9, 1.0));
    hmv->add_option("--cases", cases, "Random cases per mode")->check(CLI::PositiveNumber);
    hmv->add_option("--mode", mode, "oamv|odamv|both");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitConfigError;
    }

    try {
        if (*verify) return cmd_verify(n, d, a, ops, seed, rtol, verbose);
        if (*bench) return cmd_bench(n, d, a, ops, seed, verbose);
        if (*gen) return cmd_gen(n, d, a, ops, seed, value_scale, out_dir);
        if (*run) return cmd_run(trace_path, answers_path);
        if (*hmv) return cmd_hmv_check(n, tau, cases, seed, mode, verbose);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckFailed;
    }
    return kExitConfigError;
}
