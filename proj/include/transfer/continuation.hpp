#pragma once

// Extends a converged solution from S_J to the whole strip with the forward
// recursion y(s) = F(s - k, y(s - k), ..., y(s - 1)).

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "transfer/core.hpp"
#include "transfer/fexpr.hpp"
#include "transfer/solver.hpp"

namespace transfer::continuation {

using solver::LatticeCache;
using solver::SolutionHandle;

namespace detail {

/// Base point of the lattice class of s whose real part lies in [-J - 1, -J).
inline Complex canonical_base(Complex s, double J)
{
    const double n0 = std::floor(s.real() + J) + 1.0;
    return {s.real() - n0, s.imag()};
}

inline Complex forward_value(const solver::ProblemSpec& p, int level, long steps, LatticeCache& cache)
{
    if (const auto hit = cache.find_forward(steps))
        return *hit;
    const long k = p.order;
    std::vector<Complex> args(static_cast<std::size_t>(k));
    for (long q = 1; q <= steps; ++q) {
        if (cache.find_forward(q))
            continue;
        for (long i = 0; i < k; ++i) {
            const long pos = q - k + i; // position relative to the base
            args[static_cast<std::size_t>(i)] =
                pos <= 0 ? solver::lattice_value(p, level, -pos, cache) : *cache.find_forward(pos);
        }
        const Complex at = cache.point(-q);
        const Complex v = fexpr::eval(p.F, cache.point(-(q - k)), args);
        if (!p.domain.contains(v))
            throw DomainEscape("forward continuation left the domain", at);
        cache.store_forward(q, v);
    }
    return *cache.find_forward(steps);
}

inline Complex value_in(const solver::ProblemSpec& p, LatticeCache& cache, long m)
{
    const int level = cache.diagnostics().n_star;
    if (m >= 0)
        return solver::lattice_value(p, level, m, cache);
    return forward_value(p, level, -m, cache);
}

} // namespace detail

/// y(s) for any s in the strip. Points of S_J on the handle's own lattice at or
/// left of its base are read from its cache; other classes get their own
/// cache based in [-J - 1, -J), iterated to convergence on first use.
inline Complex evaluate(SolutionHandle& h, Complex s)
{
    const auto& p = h.problem;
    if (!p.strip.contains(s))
        throw OutsideStrip("evaluate: " + to_string(s) + " is outside the strip |Im s| < " +
                           std::to_string(p.strip.half_height()));
    if (!is_finite(s))
        throw NonFiniteValue("evaluate: non-finite argument");
    const double J = p.cutoff.J();

    // A cache serves s if s is within its stored range, or right of it when
    // the cache sits at the right edge of S_J.
    const auto serves = [J](const LatticeCache& c, long m) {
        return m >= 0 ? m <= c.max_offset() : c.base().real() + 1.0 >= -J;
    };
    if (const auto m = h.cache.find_offset(s); m && serves(h.cache, *m))
        return detail::value_in(p, h.cache, *m);
    for (auto& [key, cache] : h.class_caches) {
        if (const auto m = cache.find_offset(s); m && serves(cache, *m))
            return detail::value_in(p, cache, *m);
    }
    LatticeCache cache = solver::make_cache(p, detail::canonical_base(s, J), h.far_left);
    if (cache.offset_of(s) > cache.max_offset())
        cache = solver::make_cache(p, s, h.far_left); // s lies beyond the canonical cache's range
    const Complex base = cache.base();
    solver::run_levels(p, cache);
    auto [it, inserted] = h.class_caches.emplace(std::make_pair(base.real(), base.imag()), std::move(cache));
    return detail::value_in(p, it->second, it->second.offset_of(s));
}

/// |y(s + k) - F(s, y(s), ..., y(s + k - 1))| for any callable y.
template <typename Y>
double functional_residual(const fexpr::Expr& F, Y&& y, Complex s)
{
    const int k = F.order();
    std::vector<Complex> args(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i)
        args[static_cast<std::size_t>(i)] = y(Complex(s.real() + i, s.imag()));
    const Complex lhs = y(Complex(s.real() + k, s.imag()));
    return std::abs(lhs - fexpr::eval(F, s, args));
}

inline double residual(SolutionHandle& h, Complex s)
{
    return functional_residual(h.problem.F, [&h](Complex t) { return evaluate(h, t); }, s);
}

struct EvalGrid {
    double re_lo, re_hi, re_step;
    double im_lo, im_hi, im_step;

    static std::size_t count(double lo, double hi, double step)
    {
        return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    }

    void validate(const Strip& strip) const
    {
        for (const double v : {re_lo, re_hi, re_step, im_lo, im_hi, im_step})
            if (!std::isfinite(v))
                throw InvalidArgument("grid bounds must be finite");
        if (re_lo > re_hi || im_lo > im_hi)
            throw InvalidArgument("grid bounds need lo <= hi");
        if (!(re_step > 0) || !(im_step > 0))
            throw InvalidArgument("grid steps must be positive");
        if (!strip.contains({0.0, im_lo}) || !strip.contains({0.0, im_hi}))
            throw OutsideStrip("grid rows reach |Im s| >= " + std::to_string(strip.half_height()));
    }

    /// Row-major: imaginary part outer, real part inner.
    std::vector<Complex> points() const
    {
        std::vector<Complex> out;
        const std::size_t nre = count(re_lo, re_hi, re_step), nim = count(im_lo, im_hi, im_step);
        out.reserve(nre * nim);
        for (std::size_t j = 0; j < nim; ++j)
            for (std::size_t i = 0; i < nre; ++i)
                out.emplace_back(re_lo + static_cast<double>(i) * re_step, im_lo + static_cast<double>(j) * im_step);
        return out;
    }
};

struct GridRow {
    Complex s;
    std::optional<Complex> y;
    std::optional<double> residual;
    std::string error; // empty unless evaluation at s failed
};

inline std::vector<GridRow> evaluate_grid(SolutionHandle& h, const EvalGrid& g)
{
    g.validate(h.problem.strip);
    std::vector<GridRow> rows;
    for (const Complex s : g.points()) {
        GridRow row{s, std::nullopt, std::nullopt, {}};
        try {
            row.y = evaluate(h, s);
        } catch (const Error& e) {
            row.error = e.what();
            rows.push_back(std::move(row));
            continue;
        }
        const Complex ahead(s.real() + h.problem.order, s.imag());
        if (h.problem.strip.contains(ahead)) {
            try {
                row.residual = residual(h, s);
            } catch (const Error&) {
                // residual stays absent when s + k cannot be evaluated
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace transfer::continuation
