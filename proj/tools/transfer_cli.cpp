// transfer: solve, tabulate and verify transfer equations from JSON problem files.
//
// Exit codes: 0 ok, 1 io, 2 parse/usage, 3 hypothesis, 4 domain/grid/evaluation, 5 no convergence.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "transfer/continuation.hpp"
#include "transfer/problem_io.hpp"
#include "transfer/solver.hpp"
#include "transfer/verify.hpp"

using namespace transfer;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kIo = 1, kParse = 2, kHypothesis = 3, kDomain = 4, kNoConvergence = 5 };

int exit_code(Error::Kind kind)
{
    switch (kind) {
    case Error::Kind::Io: return kIo;
    case Error::Kind::Parse:
    case Error::Kind::InvalidArgument: return kParse;
    case Error::Kind::HypothesisFailure: return kHypothesis;
    case Error::Kind::DomainEscape:
    case Error::Kind::OutsideStrip:
    case Error::Kind::Eval:
    case Error::Kind::NonFiniteValue: return kDomain;
    case Error::Kind::NoConvergence:
    case Error::Kind::TruncationLimit:
    case Error::Kind::ContractionViolation: return kNoConvergence;
    }
    return kDomain;
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

int report(const Error& e)
{
    json err{{"kind", kind_name(e.kind())}, {"message", e.what()}};
    if (const auto* pe = dynamic_cast<const io::ProblemFileError*>(&e); pe && pe->position)
        err["position"] = *pe->position;
    if (const auto* pe = dynamic_cast<const fexpr::ParseError*>(&e))
        err["position"] = pe->position;
    if (const auto* h = dynamic_cast<const HypothesisFailure*>(&e)) {
        err["lambda"] = h->lambda;
        err["cutoff"] = h->cutoff;
    }
    if (const auto* d = dynamic_cast<const DomainEscape*>(&e))
        err["point"] = {d->point.real(), d->point.imag()};
    print(json{{"error", err}});
    return exit_code(e.kind());
}

json pair(Complex v) { return json::array({v.real(), v.imag()}); }

Complex parse_point(const std::string& text)
{
    const auto comma = text.find(',');
    if (comma == std::string::npos)
        throw InvalidArgument("--at expects \"re,im\", got '" + text + "'");
    try {
        std::size_t a = 0, b = 0;
        const double re = std::stod(text.substr(0, comma), &a);
        const double im = std::stod(text.substr(comma + 1), &b);
        if (a != comma || b != text.size() - comma - 1)
            throw std::invalid_argument("trailing characters");
        return {re, im};
    } catch (const std::exception&) {
        throw InvalidArgument("--at expects \"re,im\", got '" + text + "'");
    }
}

struct Range {
    double lo, hi, step;
};

Range parse_range(const std::string& text, const char* flag)
{
    double v[3];
    std::size_t start = 0;
    for (int i = 0; i < 3; ++i) {
        const auto colon = text.find(':', start);
        if ((i < 2) != (colon != std::string::npos))
            throw InvalidArgument(std::string(flag) + " expects lo:hi:step, got '" + text + "'");
        const std::string part = text.substr(start, i < 2 ? colon - start : std::string::npos);
        try {
            std::size_t used = 0;
            v[i] = std::stod(part, &used);
            if (used != part.size())
                throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw InvalidArgument(std::string(flag) + " expects lo:hi:step, got '" + text + "'");
        }
        start = colon + 1;
    }
    return {v[0], v[1], v[2]};
}

/// Solves with a base point chosen so that s is served directly when it lies in S_J.
solver::SolutionHandle solve_for(const solver::ProblemSpec& input, Complex s)
{
    const solver::ProblemSpec p = solver::ensure_contractive(input);
    const double J = p.cutoff.J();
    const Complex base = p.cutoff.contains(s) ? s : continuation::detail::canonical_base(s, J);
    return solver::solve(p, base);
}

json diagnostics(const solver::SolutionHandle& h)
{
    return json{{"cutoff", h.problem.cutoff.J()},
                {"lambda", h.lambda_est},
                {"mu_predicted", h.mu_predicted},
                {"mu_measured", h.mu_est},
                {"levels", h.n_star},
                {"level_diffs", h.level_diffs},
                {"error_bound", h.error_bound},
                {"base", pair(h.cache.base())},
                {"far_left", h.far_left}};
}

int cmd_solve(const std::string& path, const std::string& at)
{
    const io::ProblemFile file = io::load_problem(path);
    const Complex s = parse_point(at);
    if (!file.spec.strip.contains(s))
        throw OutsideStrip(to_string(s) + " is outside the strip |Im s| < " +
                           std::to_string(file.spec.strip.half_height()));
    solver::SolutionHandle h = solve_for(file.spec, s);
    const Complex y = continuation::evaluate(h, s);
    json out{{"point", pair(s)}, {"value", pair(y)}};
    try {
        out["residual"] = continuation::residual(h, s);
    } catch (const Error&) {
        out["residual"] = nullptr;
    }
    out["diagnostics"] = diagnostics(h);
    print(out);
    return kOk;
}

std::string format_number(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

int cmd_grid(const std::string& path, const std::string& re, const std::string& im, const std::string& out_path)
{
    const io::ProblemFile file = io::load_problem(path);
    const Range r = parse_range(re, "--re");
    const Range i = parse_range(im, "--im");
    const continuation::EvalGrid grid{r.lo, r.hi, r.step, i.lo, i.hi, i.step};
    grid.validate(file.spec.strip);

    const std::vector<Complex> pts = grid.points();
    solver::SolutionHandle h = solve_for(file.spec, pts.front());
    const auto rows = continuation::evaluate_grid(h, grid);

    namespace fs = std::filesystem;
    const fs::path target(out_path);
    const fs::path dir = target.has_parent_path() ? target.parent_path() : fs::path(".");
    const fs::path tmp = dir / (target.filename().string() + ".tmp." + std::to_string(::getpid()));
    std::size_t failed = 0;
    double max_residual = 0.0;
    {
        std::ofstream csv(tmp, std::ios::trunc);
        if (!csv)
            throw IoError("cannot write '" + tmp.string() + "'");
        csv << "re_s,im_s,re_y,im_y,residual\n";
        for (const auto& row : rows) {
            csv << format_number(row.s.real()) << ',' << format_number(row.s.imag()) << ',';
            if (row.y)
                csv << format_number(row.y->real()) << ',' << format_number(row.y->imag());
            else
                csv << ',';
            csv << ',';
            if (row.residual) {
                csv << format_number(*row.residual);
                max_residual = std::max(max_residual, *row.residual);
            }
            csv << '\n';
            failed += row.error.empty() ? 0 : 1;
        }
        csv.flush();
        if (!csv) {
            std::error_code ignored;
            fs::remove(tmp, ignored);
            throw IoError("failed writing '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot move grid into place at '" + out_path + "'");
    }

    json errors = json::array();
    for (const auto& row : rows)
        if (!row.error.empty())
            errors.push_back({{"point", pair(row.s)}, {"message", row.error}});
    print(json{{"out", out_path},
               {"rows", rows.size()},
               {"failed", failed},
               {"max_residual", max_residual},
               {"errors", errors},
               {"diagnostics", diagnostics(h)}});
    return failed == 0 ? kOk : kDomain;
}

json verdict_json(verify::Verdict v) { return verify::to_string(v); }

int cmd_verify(const std::string& path, int j_max, bool hypothesis_only)
{
    const io::ProblemFile file = io::load_problem(path);
    verify::VerifyOptions opt;
    opt.j_max = j_max;
    opt.hypothesis_only = hypothesis_only;
    opt.asymptotic_model = file.asymptotic_model;
    const verify::VerificationReport rep = verify::verify_problem(file.spec, opt);

    json out;
    out["note"] = verify::kSampledNote;
    out["hypothesis"] = {{"verdict", verdict_json(rep.hypothesis.verdict)},
                         {"ratio", rep.hypothesis.ratio},
                         {"rho", rep.hypothesis.rho},
                         {"partial_sums", rep.hypothesis.partial_sums}};
    if (!hypothesis_only) {
        const auto or_null = [](const auto& opt_value, auto&& render) -> json {
            return opt_value ? render(*opt_value) : json(nullptr);
        };
        out["residual_stats"] = or_null(rep.residual_stats, [](const verify::ResidualStats& r) {
            return json{{"max", r.max}, {"mean", r.mean}, {"count", r.count}, {"verdict", verdict_json(r.verdict)}};
        });
        out["z_independence"] = or_null(rep.z_independence, [](const verify::ZIndependenceReport& z) {
            return json{{"at", pair(z.at)}, {"spread", z.spread}, {"verdict", verdict_json(z.verdict)}};
        });
        out["contraction"] = or_null(rep.contraction, [](const verify::ContractionReport& c) {
            return json{{"lambda", c.lambda},        {"mu_predicted", c.mu_predicted},
                        {"mu_measured", c.mu_measured}, {"cutoff", c.cutoff},
                        {"levels", c.levels},        {"error_bound", c.error_bound},
                        {"verdict", verdict_json(c.verdict)}};
        });
        out["asymptotics"] = or_null(rep.asymptotics, [](const verify::AsymptoticReport& a) {
            json pts = json::array();
            for (const auto& p : a.points)
                pts.push_back({{"re", p.re}, {"ratio", pair(p.ratio)}});
            return json{{"points", pts}, {"last_drift", a.last_drift}, {"verdict", verdict_json(a.verdict)}};
        });
        out["holomorphy"] = or_null(rep.holomorphy, [](const verify::HolomorphyReport& h) {
            return json{{"center", pair(h.center)},
                        {"radius", h.radius},
                        {"m_points", h.m_points},
                        {"defect", h.defect},
                        {"verdict", verdict_json(h.verdict)}};
        });
        if (!rep.solve_error.empty())
            out["solve_error"] = rep.solve_error;
    }
    print(out);
    return rep.hypothesis.verdict == verify::Verdict::Fail ? kHypothesis : kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Holomorphic solutions of transfer equations y(s+k) = F(s, y(s), ..., y(s+k-1))"};
    app.require_subcommand(1);

    std::string problem, at, re, im, out;
    int j_max = 32;
    bool hypothesis_only = false;

    auto* solve = app.add_subcommand("solve", "Evaluate the solution at one point");
    solve->add_option("problem", problem, "Problem file (JSON)")->required();
    solve->add_option("--at", at, "Point as \"re,im\"")->required()->allow_extra_args(false);

    auto* grid = app.add_subcommand("grid", "Tabulate the solution on a grid as CSV");
    grid->add_option("problem", problem, "Problem file (JSON)")->required();
    grid->add_option("--re", re, "Real range lo:hi:step")->required();
    grid->add_option("--im", im, "Imaginary range lo:hi:step")->required();
    grid->add_option("--out", out, "Output CSV path")->required();

    auto* verify_cmd = app.add_subcommand("verify", "Check hypotheses and the computed solution");
    verify_cmd->add_option("problem", problem, "Problem file (JSON)")->required();
    verify_cmd->add_option("--jmax", j_max, "Largest shift used by the decay check")->check(CLI::Range(8, 4096));
    verify_cmd->add_flag("--hypothesis-only", hypothesis_only, "Only run the decay check");

    auto* hypothesis = app.add_subcommand("hypothesis", "Alias of verify --hypothesis-only");
    hypothesis->add_option("problem", problem, "Problem file (JSON)")->required();
    hypothesis->add_option("--jmax", j_max, "Largest shift used by the decay check")->check(CLI::Range(8, 4096));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print(json{{"error", {{"kind", "usage"}, {"message", e.what()}}}});
        return kParse;
    }

    try {
        if (*solve)
            return cmd_solve(problem, at);
        if (*grid)
            return cmd_grid(problem, re, im, out);
        if (*verify_cmd)
            return cmd_verify(problem, j_max, hypothesis_only);
        return cmd_verify(problem, j_max, true);
    } catch (const Error& e) {
        return report(e);
    } catch (const std::exception& e) {
        print(json{{"error", {{"kind", "internal"}, {"message", e.what()}}}});
        return kDomain;
    }
}
