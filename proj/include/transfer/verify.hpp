#pragma once

// Numerical checks of the decay hypothesis and of the computed solution.
// Everything here is sampled, not proven: verdicts describe finite samples.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "transfer/continuation.hpp"
#include "transfer/core.hpp"
#include "transfer/fexpr.hpp"
#include "transfer/omega.hpp"
#include "transfer/solver.hpp"

namespace transfer::verify {

using solver::ProblemSpec;
using solver::SolutionHandle;

enum class Verdict { Pass, Fail, Inconclusive };

inline const char* to_string(Verdict v)
{
    switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

inline constexpr const char* kSampledNote = "sampled, not proven";

// ---------------------------------------------------------------------------
// Decay hypothesis
// ---------------------------------------------------------------------------

struct HypothesisReport {
    std::vector<double> rho;          // rho[j-1] = sampled sup |F(s - j, z) - A|
    std::vector<double> partial_sums;
    double ratio = 0.0;               // last measured rho_{j+1} / rho_j (0 if undefined)
    Verdict verdict = Verdict::Inconclusive;
};

inline HypothesisReport check_decay(const ProblemSpec& p, int j_max, const CompactSample& strip_sample,
                                    const CompactSample& domain_sample)
{
    if (j_max < 8)
        throw InvalidArgument("check_decay: j_max must be at least 8");
    const Complex A = p.anchor();
    HypothesisReport out;
    double running = 0.0;
    for (int j = 1; j <= j_max; ++j) {
        double r = 0.0;
        for (const Complex s : strip_sample.points) {
            const Complex shifted(s.real() - j, s.imag());
            solver::for_each_tuple(domain_sample, p.order, [&](std::span<const Complex> z) {
                r = std::max(r, std::abs(fexpr::eval(p.F, shifted, z) - A));
            });
        }
        running += r;
        out.rho.push_back(r);
        out.partial_sums.push_back(running);
    }

    const std::size_t n = out.rho.size();
    const std::size_t window = std::max<std::size_t>(4, n / 4);
    const std::size_t first = n - window;
    std::vector<double> ratios;
    for (std::size_t j = first; j + 1 < n; ++j)
        if (out.rho[j] > 0.0)
            ratios.push_back(out.rho[j + 1] / out.rho[j]);
    if (!ratios.empty())
        out.ratio = ratios.back();

    const double tail_increase = out.partial_sums.back() - (first == 0 ? 0.0 : out.partial_sums[first - 1]);
    const double tol = p.tolerances.tail_eps;
    if (tail_increase < tol) {
        out.verdict = Verdict::Pass;
    } else if (!ratios.empty()) {
        const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
        if (*hi < 1.0 - 1e-3 && *hi - *lo < 0.05)
            out.verdict = Verdict::Pass;
        else if (out.rho.back() > tol && *lo >= 1.0 - 1e-12)
            out.verdict = Verdict::Fail;
    }
    return out;
}

/// Strip sample at the right edge of S_J and the coarse domain sample.
inline HypothesisReport check_decay(const ProblemSpec& p, int j_max)
{
    return check_decay(p, j_max, solver::cutoff_strip_sample(p), solver::coarse_domain_sample(p.domain, p.order));
}

// ---------------------------------------------------------------------------
// Residuals and the Binet oracle
// ---------------------------------------------------------------------------

inline double residual(SolutionHandle& h, Complex s)
{
    return continuation::residual(h, s);
}

/// Binet's extension of the Fibonacci numbers, (phi^s - psi^s) / (phi - psi),
/// with psi^s = exp(s (ln|psi| + i pi)).
inline Complex binet(Complex s)
{
    const double sqrt5 = std::sqrt(5.0);
    const double phi = (1.0 + sqrt5) / 2.0;
    const double psi = (1.0 - sqrt5) / 2.0;
    const Complex log_psi(std::log(-psi), std::numbers::pi);
    return (std::exp(s * std::log(phi)) - std::exp(s * log_psi)) / (phi - psi);
}

// ---------------------------------------------------------------------------
// Independence of the composition limit from its start value
// ---------------------------------------------------------------------------

template <typename Seq>
double z_spread(const Seq& seq, Complex s, const std::vector<Complex>& starts, double eps, std::size_t n_max)
{
    if (starts.size() < 2)
        throw InvalidArgument("z-independence needs at least two start values");
    std::vector<Complex> values;
    for (const Complex z : starts) {
        if (!seq.domain().contains(z))
            throw DomainEscape("start value outside the domain", z);
        values.push_back(omega::compose_adaptive(seq, s, z, eps, n_max).value);
    }
    double spread = 0.0;
    for (std::size_t a = 0; a < values.size(); ++a)
        for (std::size_t b = a + 1; b < values.size(); ++b)
            spread = std::max(spread, std::abs(values[a] - values[b]));
    return spread;
}

/// Spread of the seed composition y_0(s) over different start values.
inline double check_z_independence(const ProblemSpec& p, Complex s, const std::vector<Complex>& starts)
{
    auto seq = solver::detail::level_sequence(p, [&p](std::size_t, std::span<Complex> rest) {
        std::copy(p.parameters.begin(), p.parameters.end(), rest.begin());
    });
    return z_spread(seq, s, starts, p.tolerances.tail_eps, static_cast<std::size_t>(p.tolerances.max_trunc));
}

// ---------------------------------------------------------------------------
// Asymptotics
// ---------------------------------------------------------------------------

struct AsymptoticPoint {
    double re;
    Complex ratio; // y(re) / model(re)
};

struct AsymptoticReport {
    std::vector<AsymptoticPoint> points;
    double last_drift = 0.0; // |ratio_last - ratio_previous|
    Verdict verdict = Verdict::Inconclusive;
};

/// Ratios y(s) / model(s) at s = r + 0i. Points are expected in order of
/// decreasing Re s; points where the model or y underflows are skipped.
inline AsymptoticReport check_asymptotics(SolutionHandle& h, const std::vector<double>& re_points,
                                          const fexpr::Expr& model)
{
    AsymptoticReport out;
    const std::vector<Complex> zeros(static_cast<std::size_t>(model.order()), Complex(0.0));
    for (const double r : re_points) {
        const Complex s(r, 0.0);
        const Complex m = fexpr::eval(model, s, zeros);
        if (std::abs(m) < 1e-300)
            continue;
        const Complex y = continuation::evaluate(h, s);
        if (y == Complex(0.0) && m != Complex(0.0) && std::abs(m) < 1e-250)
            continue;
        out.points.push_back({r, y / m});
    }
    if (out.points.size() >= 2) {
        const Complex last = out.points.back().ratio;
        const Complex prev = out.points[out.points.size() - 2].ratio;
        out.last_drift = std::abs(last - prev);
        const double first_drift = std::abs(out.points[1].ratio - out.points[0].ratio);
        if (out.last_drift <= 1e-2 * std::max(std::abs(last), 1e-300))
            out.verdict = Verdict::Pass;
        else if (out.last_drift > first_drift && out.last_drift > 0.1)
            out.verdict = Verdict::Fail;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Holomorphy probe
// ---------------------------------------------------------------------------

/// |trapezoid rule for the contour integral of y around the circle|.
template <typename Y>
double contour_defect(Y&& y, Complex center, double radius, int m_points)
{
    if (m_points < 64)
        throw InvalidArgument("holomorphy probe needs at least 64 points");
    if (!(radius > 0.0))
        throw InvalidArgument("holomorphy probe radius must be positive");
    Complex sum(0.0);
    for (int j = 0; j < m_points; ++j) {
        const Complex u = std::polar(1.0, 2.0 * std::numbers::pi * j / m_points);
        sum += y(center + radius * u) * (Complex(0.0, 1.0) * radius * u);
    }
    return std::abs(sum * (2.0 * std::numbers::pi / m_points));
}

inline double holomorphy_probe(SolutionHandle& h, Complex center, double radius, int m_points)
{
    if (std::abs(center.imag()) + radius >= h.problem.strip.half_height())
        throw OutsideStrip("holomorphy probe circle leaves the strip");
    return contour_defect([&h](Complex s) { return continuation::evaluate(h, s); }, center, radius, m_points);
}

// ---------------------------------------------------------------------------
// Aggregate report
// ---------------------------------------------------------------------------

struct ResidualStats {
    double max = 0.0;
    double mean = 0.0;
    std::size_t count = 0;
    Verdict verdict = Verdict::Inconclusive;
};

struct ContractionReport {
    double lambda = 0.0;
    double mu_predicted = 0.0;
    double mu_measured = 0.0;
    double cutoff = 0.0;
    int levels = 0;
    double error_bound = 0.0;
    Verdict verdict = Verdict::Inconclusive;
};

struct ZIndependenceReport {
    Complex at;
    double spread = 0.0;
    Verdict verdict = Verdict::Inconclusive;
};

struct HolomorphyReport {
    Complex center;
    double radius = 0.0;
    int m_points = 0;
    double defect = 0.0;
    Verdict verdict = Verdict::Inconclusive;
};

struct VerificationReport {
    HypothesisReport hypothesis;
    std::optional<ResidualStats> residual_stats;
    std::optional<ZIndependenceReport> z_independence;
    std::optional<ContractionReport> contraction;
    std::optional<AsymptoticReport> asymptotics;
    std::optional<HolomorphyReport> holomorphy;
    std::string solve_error; // set when no solution could be built
};

struct VerifyOptions {
    int j_max = 32;
    bool hypothesis_only = false;
    std::optional<fexpr::Expr> asymptotic_model;
};

inline VerificationReport verify_problem(const ProblemSpec& input, const VerifyOptions& opt)
{
    VerificationReport rep;
    rep.hypothesis = check_decay(input, opt.j_max);
    if (opt.hypothesis_only)
        return rep;

    ProblemSpec p = input;
    std::optional<SolutionHandle> handle;
    try {
        p = solver::ensure_contractive(input);
        const double J = p.cutoff.J();
        handle = solver::solve(p, Complex(-J - 1.0, 0.0));
    } catch (const Error& e) {
        rep.solve_error = std::string(kind_name(e.kind())) + ": " + e.what();
        return rep;
    }
    SolutionHandle& h = *handle;
    const double J = p.cutoff.J();
    const double a = p.strip.half_height();
    const double tol = p.tolerances.residual_tol;

    ContractionReport c;
    c.lambda = h.lambda_est;
    c.mu_predicted = h.mu_predicted;
    c.mu_measured = h.mu_est;
    c.cutoff = J;
    c.levels = h.n_star;
    c.error_bound = h.error_bound;
    c.verdict = c.mu_measured < 1.0 && c.mu_measured <= c.mu_predicted + 0.1 ? Verdict::Pass : Verdict::Fail;
    rep.contraction = c;

    ResidualStats rs;
    double total = 0.0;
    for (const double im : {-a / 2.0, 0.0, a / 2.0}) {
        for (int i = 0; i <= 16; ++i) {
            const Complex s(-J - 6.0 + 0.5 * i, im);
            const double r = residual(h, s);
            rs.max = std::max(rs.max, r);
            total += r;
            ++rs.count;
        }
    }
    rs.mean = total / static_cast<double>(rs.count);
    rs.verdict = rs.max < tol ? Verdict::Pass : Verdict::Fail;
    rep.residual_stats = rs;

    ZIndependenceReport zi;
    zi.at = Complex(-J - 2.0, 0.0);
    {
        const auto probes = domain_probe_points(p.domain);
        std::vector<Complex> starts{p.anchor(), probes[1], probes[probes.size() / 2 + 1]};
        zi.spread = check_z_independence(p, zi.at, starts);
    }
    zi.verdict = zi.spread < 10.0 * p.tolerances.tail_eps ? Verdict::Pass : Verdict::Fail;
    rep.z_independence = zi;

    if (opt.asymptotic_model) {
        std::vector<double> pts;
        for (int i = 0; i < 6; ++i)
            pts.push_back(-J - 2.0 - 4.0 * i);
        rep.asymptotics = check_asymptotics(h, pts, *opt.asymptotic_model);
    }

    HolomorphyReport hr;
    hr.center = Complex(-J - 3.0, 0.0);
    hr.radius = std::min(0.25, a / 2.0);
    hr.m_points = 64;
    hr.defect = holomorphy_probe(h, hr.center, hr.radius, hr.m_points);
    hr.verdict = hr.defect < 1e-8 ? Verdict::Pass : Verdict::Fail;
    rep.holomorphy = hr;
    return rep;
}

} // namespace transfer::verify
