// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "transfer/continuation.hpp"
#include "transfer/omega.hpp"
#include "transfer/problem_io.hpp"
#include "transfer/solver.hpp"
#include "transfer/verify.hpp"

using namespace transfer;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

solver::ProblemSpec load(const char* name) { return io::load_problem(std::string(PROBLEMS_DIR) + "/" + name + ".json").spec; }

solver::SolutionHandle solved(const solver::ProblemSpec& input)
{
    const auto p = solver::ensure_contractive(input);
    return solver::solve(p, Complex(-p.cutoff.J() - 1.0));
}

double max_grid_residual(solver::SolutionHandle& h, double re_lo, double re_hi)
{
    const continuation::EvalGrid g{re_lo, re_hi, 0.5, -0.5, 0.5, 0.25};
    double worst = 0.0;
    for (const auto& row : continuation::evaluate_grid(h, g)) {
        if (!row.residual)
            return INFINITY;
        worst = std::max(worst, *row.residual);
    }
    return worst;
}

Outcome residual_example()
{
    const auto t0 = std::chrono::steady_clock::now();
    auto h = solved(load("example2"));
    const double worst = max_grid_residual(h, -20.0, -10.0);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {worst < 1e-8 && secs < 10.0, "max residual " + fmt("%.3g", worst) + " over 105 points in " + fmt("%.2f", secs) + " s"};
}

Outcome residual_other_examples()
{
    auto hr = solved(load("rational2"));
    const double r = max_grid_residual(hr, -25.0, -15.0);
    auto hg = solved(load("gaussian2"));
    const double g = max_grid_residual(hg, -10.0, -6.0);
    return {r < 1e-8 && g < 1e-8, "rational " + fmt("%.3g", r) + ", gaussian " + fmt("%.3g", g)};
}

Outcome contraction_prediction()
{
    const auto p = solver::ensure_contractive(load("example2"));
    const double lambda = solver::estimate_lambda(p);
    const double bound = solver::predicted_mu(lambda, p.order) + 0.1;
    const auto h = solver::solve(p, Complex(-p.cutoff.J() - 1.0));
    bool ok = true;
    double worst = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i + 1 < h.level_diffs.size(); ++i) {
        if (h.level_diffs[i] == 0.0)
            continue;
        const double ratio = h.level_diffs[i + 1] / h.level_diffs[i];
        worst = std::max(worst, ratio);
        ok = ok && ratio <= bound;
        ++count;
    }
    return {ok, std::to_string(count) + " ratios, max " + fmt("%.3g", worst) + " <= " + fmt("%.3g", bound)};
}

auto exp_sequence(double radius)
{
    return omega::CompositionSequence([](std::size_t j, Complex s, Complex z) { return std::exp(s - double(j) + z); },
                                      DomainSpec(Disk{Complex(0.0), radius}, Complex(0.0)));
}

Outcome tail_bound()
{
    std::mt19937 rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double radius = 0.5;
    const auto seq = exp_sequence(radius);
    const CompactSample dom = sample_disk(Disk{Complex(0.0), radius}, 16, 16);
    int passed = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const Complex s(-10.0 - 20.0 * u(rng), -0.5 + u(rng));
        const Complex z = std::polar(0.49 * u(rng), 2.0 * std::numbers::pi * u(rng));
        const CompactSample at_s{{s}, "s"};
        bool ok = true;
        for (std::size_t n = 1; n <= 6; ++n) {
            const double rho = omega::estimate_rho(seq, n, at_s, dom);
            for (std::size_t m = n; m <= n + 30; ++m)
                ok = ok && std::abs(omega::compose_finite(seq, n, m, s, z)) <= rho * (1.0 + 1e-6);
        }
        passed += ok ? 1 : 0;
    }
    return {passed == 50, std::to_string(passed) + "/50 points"};
}

Outcome splitting_identity()
{
    std::mt19937 rng(202);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const double c = 0.4 + 0.3 * u(rng);
        const Complex w(u(rng), u(rng));
        const omega::CompositionSequence seq(
            [c, w](std::size_t j, Complex s, Complex z) { return c * std::exp(s - 0.5 * double(j)) * (z * z + w); },
            DomainSpec(Disk{Complex(0.0), 3.0}, Complex(0.0)));
        const Complex s(-1.0 + u(rng), 0.5 * u(rng));
        const Complex z(0.7 * u(rng), 0.7 * u(rng));
        const std::size_t m = 15;
        const Complex whole = omega::compose_finite(seq, 1, m, s, z);
        for (std::size_t j = 1; j < m; ++j) {
            const Complex split = omega::compose_finite(seq, 1, j, s, omega::compose_finite(seq, j + 1, m, s, z));
            worst = std::max(worst, std::abs(split - whole) / std::abs(whole));
        }
    }
    return {worst <= 1e-13, "max relative gap " + fmt("%.3g", worst)};
}

Outcome z_independence()
{
    const auto p = solver::ensure_contractive(load("example2"));
    const std::vector<Complex> starts{p.anchor(), Complex(0.3), Complex(-0.3, 0.2)};
    const double spread = verify::check_z_independence(p, Complex(-15.0), starts);
    return {spread < 1e-12, "spread " + fmt("%.3g", spread)};
}

Outcome binet_oracle()
{
    const fexpr::Expr F = fexpr::parse("z1+z2", 2);
    std::mt19937 rng(303);
    std::uniform_real_distribution<double> re(-10.0, 10.0), im(-0.74, 0.74);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i)
        worst = std::max(worst, continuation::functional_residual(F, verify::binet, Complex(re(rng), im(rng))));
    const double b10 = std::abs(verify::binet(10.0) - 55.0);
    const auto decay = verify::check_decay(load("fibonacci"), 32);
    const bool ok = worst < 1e-9 && b10 < 1e-9 && decay.verdict == verify::Verdict::Fail;
    return {ok, "max residual " + fmt("%.3g", worst) + ", |binet(10)-55| " + fmt("%.3g", b10) + ", decay verdict " +
                    verify::to_string(decay.verdict)};
}

Outcome asymptotics()
{
    auto h = solved(load("example2"));
    const Complex y30 = continuation::evaluate(h, Complex(-30.0));
    const double r1 = (y30 / (2.0 * std::exp(-32.0))).real();
    auto hg = solved(load("gaussian2"));
    const Complex y8 = continuation::evaluate(hg, Complex(-8.0));
    const double r2 = (y8 / std::exp(-100.0)).real();
    const bool ok = r1 >= 0.99 && r1 <= 1.01 && std::abs(r2 - 1.0) <= 0.05;
    return {ok, "exp sum ratio at -30: " + fmt("%.12g", r1) + ", gaussian ratio at -8: " + fmt("%.12g", r2)};
}

Outcome seam_consistency()
{
    const auto p = solver::ensure_contractive(load("example2"));
    const double J = p.cutoff.J();
    auto near = solver::solve(p, Complex(-J - 1.0));
    auto far = solver::solve(solver::with_cutoff(p, J + 4.0), Complex(-J - 5.0));
    const double tol = near.error_bound + far.error_bound + 1e-10;
    double worst = 0.0;
    for (double re = -J - 4.0; re <= -J; re += 0.25)
        for (const double im : {-0.5, 0.0, 0.5})
            worst = std::max(worst, std::abs(continuation::evaluate(near, Complex(re, im)) -
                                             continuation::evaluate(far, Complex(re, im))));
    return {worst <= tol, "J=" + fmt("%g", J) + " vs J=" + fmt("%g", J + 4.0) + ": max gap " + fmt("%.3g", worst) +
                              " <= " + fmt("%.3g", tol)};
}

Outcome holomorphy()
{
    auto h = solved(load("example2"));
    const double defect = verify::holomorphy_probe(h, Complex(-15.0), 0.25, 64);
    const double stub = verify::contour_defect([](Complex s) { return std::conj(s); }, Complex(-15.0), 0.25, 64);
    return {defect < 1e-8 && stub > 1e-3, "defect " + fmt("%.3g", defect) + ", conjugate stub " + fmt("%.3g", stub)};
}

Complex brute_level(const solver::ProblemSpec& p, int n, Complex t, int depth)
{
    const int k = p.order;
    Complex z = p.anchor();
    std::vector<Complex> args(static_cast<std::size_t>(k));
    for (int j = depth; j >= 1; --j) {
        const Complex at(t.real() - j * k, t.imag());
        args[0] = z;
        for (int i = 1; i < k; ++i)
            args[static_cast<std::size_t>(i)] = n == 0 ? p.parameters[static_cast<std::size_t>(i - 1)]
                                                       : brute_level(p, n - 1, Complex(at.real() + i, at.imag()), depth);
        z = fexpr::eval(p.F, at, args);
    }
    return z;
}

Outcome oracle_equivalence()
{
    const auto p = solver::ensure_contractive(load("example2"));
    const double J = p.cutoff.J();
    const double far = solver::far_left_position(p);
    std::mt19937 rng(404);
    std::uniform_real_distribution<double> re(-J - 16.0, -J - 0.5), im(-0.7, 0.7);
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
        const Complex s(re(rng), im(rng));
        solver::LatticeCache cache = solver::make_cache(p, s, far);
        worst = std::max(worst, std::abs(solver::seed_value(p, s) - brute_level(p, 0, s, 20)));
        for (int n = 1; n <= 2; ++n)
            worst = std::max(worst, std::abs(solver::level_value(p, n, s, cache) - brute_level(p, n, s, 20)));
    }
    return {worst < 1e-12, "max gap " + fmt("%.3g", worst) + " over 10 points, levels 0..2"};
}

struct Run {
    int code;
    std::string out;
};

Run run_cli(const std::string& args)
{
    const std::string cmd = std::string(TRANSFER_CLI) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe)
        return {-1, ""};
    std::string out;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0)
        out.append(buf, n);
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome cli_contract()
{
    struct Case {
        const char* name;
        const char* at;
        const char* re;
    };
    const Case cases[] = {{"example2", "-15,0", "-20:-10:0.5"},
                          {"rational2", "-20,0.25", "-25:-15:0.5"},
                          {"gaussian2", "-8,0", "-10:-6:0.5"}};
    const fs::path dir = fs::temp_directory_path() / "transfer_acceptance";
    fs::create_directories(dir);
    std::string failures;
    for (const Case& c : cases) {
        const std::string file = std::string(PROBLEMS_DIR) + "/" + c.name + ".json";
        const std::vector<std::string> commands{
            "solve " + file + " --at=" + c.at,
            "verify " + file,
        };
        for (const auto& cmd : commands) {
            const Run a = run_cli(cmd);
            const Run b = run_cli(cmd);
            if (a.code != 0 || b.code != 0 || a.out != b.out)
                failures += std::string(" ") + c.name + ":" + cmd.substr(0, cmd.find(' '));
        }
        const fs::path csv1 = dir / (std::string(c.name) + "_1.csv");
        const fs::path csv2 = dir / (std::string(c.name) + "_2.csv");
        const std::string grid = "grid " + file + " --re=" + c.re + " --im=-0.5:0.5:0.25 --out ";
        const Run g1 = run_cli(grid + csv1.string());
        const Run g2 = run_cli(grid + csv2.string());
        if (g1.code != 0 || g2.code != 0 || slurp(csv1) != slurp(csv2) || slurp(csv1).empty())
            failures += std::string(" ") + c.name + ":grid";
    }
    const Run fib = run_cli("solve " + std::string(PROBLEMS_DIR) + "/fibonacci.json --at=-5,0");
    if (fib.code != 3)
        failures += " fibonacci exit " + std::to_string(fib.code);
    return {failures.empty(), failures.empty() ? "3 problems x solve/grid/verify byte-stable, fibonacci exit 3"
                                               : "failed:" + failures};
}

} // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"functional-equation residual, exponential sum", residual_example},
        {"functional-equation residual, rational and gaussian examples", residual_other_examples},
        {"contraction ratio within prediction", contraction_prediction},
        {"tail bound of finite compositions", tail_bound},
        {"splitting identity", splitting_identity},
        {"independence from the start value", z_independence},
        {"Binet oracle and Fibonacci rejection", binet_oracle},
        {"asymptotic ratios", asymptotics},
        {"seam consistency across cutoffs", seam_consistency},
        {"holomorphy probe", holomorphy},
        {"cached levels match brute force", oracle_equivalence},
        {"CLI contract", cli_contract},
    };
    int failed = 0;
    int index = 0;
    for (const auto& [name, check] : criteria) {
        ++index;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d/%zu criteria passed\n", index - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
