#pragma once

// Successive approximations y_0, y_1, ... of a k-th order transfer equation
//
//     y(s + k) = F(s, y(s), y(s + 1), ..., y(s + k - 1))
//
// on the left half-strip S_J. Level n solves the first-order equation
//
//     y_n(s + k) = F(s, y_n(s), y_{n-1}(s + 1), ..., y_{n-1}(s + k - 1))
//
// by an infinite composition in its first slot; level 0 feeds fixed
// parameters into the remaining slots.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "transfer/core.hpp"
#include "transfer/fexpr.hpp"
#include "transfer/omega.hpp"

namespace transfer::solver {

struct ProblemSpec {
    int order = 1;
    fexpr::Expr F;
    Strip strip;
    LeftCutoff cutoff;
    DomainSpec domain;
    std::vector<Complex> parameters; // values bound to z2..zk in the seed
    Tolerances tolerances;

    Complex anchor() const noexcept { return domain.anchor(); }
};

/// Validates and completes a problem: parameters default to the anchor and a
/// zero lipschitz_target becomes 1/(2k).
inline ProblemSpec make_problem(fexpr::Expr F, Strip strip, LeftCutoff cutoff, DomainSpec domain,
                                std::vector<Complex> parameters = {}, Tolerances tol = {})
{
    const int k = F.order();
    if (parameters.empty())
        parameters.assign(static_cast<std::size_t>(k - 1), domain.anchor());
    if (static_cast<int>(parameters.size()) != k - 1)
        throw InvalidArgument("expected " + std::to_string(k - 1) + " parameters for order " + std::to_string(k));
    for (const Complex w : parameters)
        if (!domain.contains(w))
            throw InvalidArgument("parameter " + to_string(w) + " is not inside the domain");
    if (tol.lipschitz_target == 0.0)
        tol.lipschitz_target = 1.0 / (2.0 * k);
    tol.validate(k);
    return ProblemSpec{k, std::move(F), strip, cutoff, std::move(domain), std::move(parameters), tol};
}

inline ProblemSpec with_cutoff(ProblemSpec p, double J)
{
    p.cutoff = LeftCutoff(J);
    return p;
}

// ---------------------------------------------------------------------------
// Samples used for Lipschitz and tail estimates
// ---------------------------------------------------------------------------

/// Strip points at the right edge of S_J, where decaying F is largest.
inline CompactSample cutoff_strip_sample(const ProblemSpec& p)
{
    return sample_left_strip(p.strip, p.cutoff, static_cast<double>(p.order), 4 * p.order + 1, 5);
}

/// Coarse domain sample whose k-fold product stays affordable.
inline CompactSample coarse_domain_sample(const DomainSpec& d, int k)
{
    const double budget = 5000.0;
    const int per_axis = std::max(3, static_cast<int>(std::floor(std::pow(budget, 1.0 / k))));
    if (std::holds_alternative<Disk>(d.shape()))
        return sample_domain(d, std::max(1, (per_axis - 1) / 8), 8);
    const int side = std::max(2, static_cast<int>(std::sqrt(static_cast<double>(per_axis))));
    return sample_domain(d, side, side);
}

/// Calls f(tuple) for k-tuples drawn from the sample: the full product when it
/// fits the budget, otherwise `budget` tuples from a fixed-seed generator.
template <typename F>
void for_each_tuple(const CompactSample& sample, int k, F&& f, std::size_t budget = 6000)
{
    const std::size_t q = sample.points.size();
    std::vector<Complex> tuple(static_cast<std::size_t>(k));
    std::size_t total = 1;
    for (int i = 0; i < k && total <= budget; ++i)
        total *= q;
    if (total <= budget) {
        for (std::size_t c = 0; c < total; ++c) {
            std::size_t idx = c;
            for (int i = 0; i < k; ++i) {
                tuple[static_cast<std::size_t>(i)] = sample.points[idx % q];
                idx /= q;
            }
            f(std::span<const Complex>(tuple));
        }
        return;
    }
    std::minstd_rand rng(12345);
    std::uniform_int_distribution<std::size_t> pick(0, q - 1);
    for (std::size_t c = 0; c < budget; ++c) {
        for (auto& z : tuple)
            z = sample.points[pick(rng)];
        f(std::span<const Complex>(tuple));
    }
}

// ---------------------------------------------------------------------------
// Lipschitz estimate and cutoff selection
// ---------------------------------------------------------------------------

inline constexpr double kLipschitzSafety = 2.0;

/// Twice the largest sampled |dF/dz_i|.
inline double estimate_lambda(const ProblemSpec& p, const CompactSample& strip_sample,
                              const CompactSample& domain_sample)
{
    if (strip_sample.points.empty() || domain_sample.points.empty())
        throw InvalidArgument("estimate_lambda: empty sample");
    if (fexpr::is_constant_in_z(p.F.root()))
        return 0.0;
    double worst = 0.0;
    for (const Complex s : strip_sample.points) {
        for_each_tuple(domain_sample, p.order, [&](std::span<const Complex> z) {
            for (int i = 1; i <= p.order; ++i)
                worst = std::max(worst, std::abs(fexpr::partial(p.F, i, s, z)));
        });
    }
    return kLipschitzSafety * worst;
}

inline double estimate_lambda(const ProblemSpec& p)
{
    return estimate_lambda(p, cutoff_strip_sample(p), coarse_domain_sample(p.domain, p.order));
}

inline constexpr double kMaxCutoff = 65536.0;

/// Doubles J until the Lipschitz estimate drops below the target.
inline ProblemSpec ensure_contractive(ProblemSpec p)
{
    double J = p.cutoff.J();
    double lambda = 0.0;
    while (J <= kMaxCutoff) {
        p.cutoff = LeftCutoff(J);
        lambda = estimate_lambda(p);
        if (lambda < p.tolerances.lipschitz_target)
            return p;
        J *= 2.0;
    }
    throw HypothesisFailure("no cutoff J <= 65536 gives lambda < " + std::to_string(p.tolerances.lipschitz_target) +
                                " (final lambda " + std::to_string(lambda) + " at J=" + std::to_string(J / 2.0) + ")",
                            lambda, J / 2.0);
}

// ---------------------------------------------------------------------------
// Far-left truncation
// ---------------------------------------------------------------------------

/// Real part left of which y_n is replaced by the anchor: the sampled tail
/// sum of |F(s - jk, .) - A| beyond that point is below tail_eps (or the scan
/// hit max_trunc), plus the far-left margin.
inline double far_left_position(const ProblemSpec& p)
{
    const int k = p.order;
    const Complex A = p.anchor();
    const CompactSample strip = sample_left_strip(p.strip, p.cutoff, 0.0, 1, 5);
    const CompactSample dom = coarse_domain_sample(p.domain, k);
    const auto jmax = static_cast<std::size_t>(p.tolerances.max_trunc);

    std::vector<double> rho;
    double extrapolated = 0.0;
    bool tail_known = false;
    for (std::size_t j = 1; j <= jmax && !tail_known; ++j) {
        double r = 0.0;
        for (const Complex s : strip.points) {
            const Complex shifted(s.real() - static_cast<double>(j) * k, s.imag());
            for_each_tuple(dom, k, [&](std::span<const Complex> z) {
                r = std::max(r, std::abs(fexpr::eval(p.F, shifted, z) - A));
            }, 256);
        }
        rho.push_back(r);
        if (r == 0.0) {
            tail_known = true;
        } else if (rho.size() >= 2 && r < 1e-3 * p.tolerances.tail_eps) {
            const double ratio = r / rho[rho.size() - 2];
            if (ratio < 0.5) {
                extrapolated = r * ratio / (1.0 - ratio);
                tail_known = true;
            }
        }
    }
    // Smallest j0 with sum_{j > j0} rho_j < tail_eps; the whole scan when the
    // tail could not be bounded.
    std::size_t j0 = rho.size();
    if (tail_known) {
        double suffix = extrapolated;
        while (j0 > 0 && suffix + rho[j0 - 1] < p.tolerances.tail_eps)
            suffix += rho[--j0];
    }
    return -p.cutoff.J() - static_cast<double>(j0 * static_cast<std::size_t>(k)) - p.tolerances.far_left_margin;
}

// ---------------------------------------------------------------------------
// Lattice cache
// ---------------------------------------------------------------------------

struct LevelDiagnostics {
    int n_star = 0;
    std::vector<double> diffs; // diffs[n-1] = sup over probes |y_n - y_{n-1}|
    std::vector<double> ratios;
    double mu_est = 0.0;
    double last_diff = 0.0;
    double error_bound = 0.0;
};

/// Values y_n(base - m) for integer offsets m >= 0, plus forward-continued
/// values at negative offsets. Offsets beyond max_offset() read as the anchor.
class LatticeCache {
public:
    LatticeCache(Complex base, int max_offset, Complex anchor)
        : base_(base), max_offset_(max_offset), anchor_(anchor)
    {
        if (max_offset < 0)
            throw InvalidArgument("lattice max offset must be non-negative");
    }

    Complex base() const noexcept { return base_; }
    int max_offset() const noexcept { return max_offset_; }
    Complex anchor() const noexcept { return anchor_; }

    Complex point(long m) const noexcept { return {base_.real() - static_cast<double>(m), base_.imag()}; }

    std::optional<long> find_offset(Complex s) const noexcept
    {
        if (std::abs(s.imag() - base_.imag()) > 1e-12 * std::max(1.0, std::abs(s.imag())))
            return std::nullopt;
        const double d = base_.real() - s.real();
        const double m = std::round(d);
        if (std::abs(d - m) > 1e-9 * std::max(1.0, std::abs(s.real())))
            return std::nullopt;
        return static_cast<long>(m);
    }

    long offset_of(Complex s) const
    {
        if (const auto m = find_offset(s))
            return *m;
        throw InvalidArgument(to_string(s) + " is not on the lattice of " + to_string(base_));
    }

    std::optional<Complex> find(int level, long m) const noexcept
    {
        if (m > max_offset_)
            return anchor_;
        if (m < 0 || level < 0 || static_cast<std::size_t>(level) >= levels_.size())
            return std::nullopt;
        return levels_[static_cast<std::size_t>(level)][static_cast<std::size_t>(m)];
    }

    void store(int level, long m, Complex v)
    {
        if (m < 0 || m > max_offset_ || level < 0)
            throw InvalidArgument("lattice store outside the cache");
        while (levels_.size() <= static_cast<std::size_t>(level))
            levels_.emplace_back(static_cast<std::size_t>(max_offset_) + 1);
        levels_[static_cast<std::size_t>(level)][static_cast<std::size_t>(m)] = v;
    }

    std::size_t filled(int level) const noexcept
    {
        if (level < 0 || static_cast<std::size_t>(level) >= levels_.size())
            return 0;
        const auto& row = levels_[static_cast<std::size_t>(level)];
        return static_cast<std::size_t>(std::count_if(row.begin(), row.end(), [](const auto& v) { return v.has_value(); }));
    }

    // Forward continuation, keyed by positive step count to the right of base.
    std::optional<Complex> find_forward(long steps) const
    {
        const auto it = forward_.find(steps);
        if (it == forward_.end())
            return std::nullopt;
        return it->second;
    }
    void store_forward(long steps, Complex v) { forward_[steps] = v; }
    std::size_t forward_count() const noexcept { return forward_.size(); }

    const LevelDiagnostics& diagnostics() const noexcept { return diagnostics_; }
    void set_diagnostics(LevelDiagnostics d) { diagnostics_ = std::move(d); }
    bool converged() const noexcept { return diagnostics_.n_star > 0; }

private:
    Complex base_;
    int max_offset_;
    Complex anchor_;
    std::vector<std::vector<std::optional<Complex>>> levels_;
    std::map<long, Complex> forward_;
    LevelDiagnostics diagnostics_;
};

inline LatticeCache make_cache(const ProblemSpec& p, Complex base, double far_left)
{
    const double span = base.real() - far_left;
    const int m_off = span <= 0.0 ? 0 : static_cast<int>(std::ceil(span));
    return LatticeCache(base, m_off, p.anchor());
}

inline LatticeCache make_cache(const ProblemSpec& p, Complex base)
{
    return make_cache(p, base, far_left_position(p));
}

// ---------------------------------------------------------------------------
// Seed and levels
// ---------------------------------------------------------------------------

namespace detail {

inline Complex shifted(Complex s, double by) { return {s.real() - by, s.imag()}; }

/// Composition whose j-th map is F(s - jk, z, args_j) with args_j supplied by `fill`.
template <typename Fill>
auto level_sequence(const ProblemSpec& p, Fill fill)
{
    auto gen = [&p, fill, args = std::vector<Complex>(static_cast<std::size_t>(p.order))](
                   std::size_t j, Complex s, Complex z) mutable {
        args[0] = z;
        fill(j, std::span<Complex>(args).subspan(1));
        return fexpr::eval(p.F, shifted(s, static_cast<double>(j) * p.order), args);
    };
    return omega::CompositionSequence(std::move(gen), p.domain);
}

} // namespace detail

/// y_0(s) = lim H_1(s, H_2(s, ... H_n(s, A))) with H_j(s, z) = F(s - jk, z, parameters).
inline Complex seed_value(const ProblemSpec& p, Complex s)
{
    auto seq = detail::level_sequence(p, [&p](std::size_t, std::span<Complex> rest) {
        std::copy(p.parameters.begin(), p.parameters.end(), rest.begin());
    });
    return omega::compose_adaptive(seq, s, p.anchor(), p.tolerances.tail_eps,
                                   static_cast<std::size_t>(p.tolerances.max_trunc))
        .value;
}

/// y_n(base - m), memoised in `cache`; missing lower levels are filled on demand.
inline Complex lattice_value(const ProblemSpec& p, int n, long m, LatticeCache& cache)
{
    if (m < 0)
        throw InvalidArgument("lattice_value: negative offset (use continuation for points right of the base)");
    if (const auto hit = cache.find(n, m))
        return *hit;
    const Complex t = cache.point(m);
    Complex v;
    if (n == 0) {
        v = seed_value(p, t);
    } else {
        const long k = p.order;
        auto seq = detail::level_sequence(p, [&p, &cache, n, m, k](std::size_t j, std::span<Complex> rest) {
            const long back = m + static_cast<long>(j) * k;
            for (long i = 1; i < k; ++i)
                rest[static_cast<std::size_t>(i - 1)] = lattice_value(p, n - 1, back - i, cache);
        });
        v = omega::compose_adaptive(seq, t, p.anchor(), p.tolerances.tail_eps,
                                    static_cast<std::size_t>(p.tolerances.max_trunc))
                .value;
    }
    if (!p.domain.contains(v))
        throw DomainEscape("level " + std::to_string(n) + " value left the domain", t);
    cache.store(n, m, v);
    return v;
}

inline Complex level_value(const ProblemSpec& p, int n, Complex s, LatticeCache& cache)
{
    if (n < 0)
        throw InvalidArgument("level_value: negative level");
    return lattice_value(p, n, cache.offset_of(s), cache);
}

/// Iterates levels on the probe offsets {0, ..., 2k} until successive levels
/// agree to iter_eps; records the measured contraction ratios.
inline LevelDiagnostics run_levels(const ProblemSpec& p, LatticeCache& cache)
{
    const long probes = std::min<long>(2L * p.order, cache.max_offset());
    std::vector<Complex> prev, cur;
    for (long m = 0; m <= probes; ++m)
        prev.push_back(lattice_value(p, 0, m, cache));

    LevelDiagnostics d;
    int growing = 0;
    for (int n = 1; n <= p.tolerances.max_levels; ++n) {
        cur.clear();
        for (long m = 0; m <= probes; ++m)
            cur.push_back(lattice_value(p, n, m, cache));
        double diff = 0.0;
        for (std::size_t i = 0; i < cur.size(); ++i)
            diff = std::max(diff, std::abs(cur[i] - prev[i]));
        d.diffs.push_back(diff);
        if (n >= 2 && d.diffs[d.diffs.size() - 2] > 0.0) {
            const double ratio = diff / d.diffs[d.diffs.size() - 2];
            d.ratios.push_back(ratio);
            d.mu_est = std::max(d.mu_est, ratio);
            growing = ratio >= 1.0 ? growing + 1 : 0;
            if (growing >= 3)
                throw ContractionViolation("level differences failed to contract for three consecutive levels at " +
                                           to_string(cache.base()));
        }
        if (diff < p.tolerances.iter_eps) {
            if (d.mu_est >= 1.0)
                throw ContractionViolation("measured contraction ratio " + std::to_string(d.mu_est) + " >= 1 at " +
                                           to_string(cache.base()));
            d.n_star = n;
            d.last_diff = diff;
            d.error_bound = d.mu_est / (1.0 - d.mu_est) * diff;
            cache.set_diagnostics(d);
            return d;
        }
        prev.swap(cur);
    }
    throw NoConvergence("level iteration did not reach iter_eps within " + std::to_string(p.tolerances.max_levels) +
                        " levels at " + to_string(cache.base()) + " (last diff " +
                        std::to_string(d.diffs.empty() ? 0.0 : d.diffs.back()) + ")");
}

// ---------------------------------------------------------------------------
// Solution handle
// ---------------------------------------------------------------------------

struct SolutionHandle {
    ProblemSpec problem;
    int n_star = 0;
    LatticeCache cache;
    double lambda_est = 0.0;
    double mu_predicted = 0.0; // (k-1) lambda / (1 - lambda)
    double mu_est = 0.0;
    double last_diff = 0.0;
    double error_bound = 0.0;
    std::vector<double> level_diffs;
    double far_left = 0.0;
    // Caches for other lattice classes, keyed by (Re, Im) of their base.
    std::map<std::pair<double, double>, LatticeCache> class_caches;
};

inline double predicted_mu(double lambda, int k) { return (k - 1) * lambda / (1.0 - lambda); }

inline SolutionHandle solve(const ProblemSpec& p, Complex s0)
{
    if (!p.strip.contains(s0))
        throw OutsideStrip("solve: " + to_string(s0) + " is outside the strip");
    if (!p.cutoff.contains(s0))
        throw OutsideStrip("solve: base point " + to_string(s0) + " is not left of -J = " +
                           std::to_string(-p.cutoff.J()));
    const double lambda = estimate_lambda(p);
    if (!(lambda * p.order < 1.0))
        throw HypothesisFailure("lambda = " + std::to_string(lambda) + " is not below 1/k at J = " +
                                    std::to_string(p.cutoff.J()),
                                lambda, p.cutoff.J());
    const double far_left = far_left_position(p);
    LatticeCache cache = make_cache(p, s0, far_left);
    const LevelDiagnostics d = run_levels(p, cache);
    return SolutionHandle{p,
                          d.n_star,
                          std::move(cache),
                          lambda,
                          predicted_mu(lambda, p.order),
                          d.mu_est,
                          d.last_diff,
                          d.error_bound,
                          d.diffs,
                          far_left,
                          {}};
}

} // namespace transfer::solver
