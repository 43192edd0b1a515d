#pragma once

// Finite and adaptively truncated infinite compositions
//
//     H_a(s, H_{a+1}(s, ... H_b(s, z)))
//
// of a sequence of maps H_j(s, z) that decay toward an anchor A.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "transfer/core.hpp"

namespace transfer::omega {

/// The sequence H_j together with the domain its values must stay in.
/// `Generator` is any callable (std::size_t j, Complex s, Complex z) -> Complex.
template <typename Generator>
class CompositionSequence {
public:
    CompositionSequence(Generator generator, DomainSpec domain, bool check_domain = true)
        : generator_(std::move(generator)), domain_(std::move(domain)), probes_(domain_probe_points(domain_)),
          check_domain_(check_domain)
    {}

    Complex operator()(std::size_t j, Complex s, Complex z) const { return generator_(j, s, z); }

    const DomainSpec& domain() const noexcept { return domain_; }
    Complex anchor() const noexcept { return domain_.anchor(); }
    bool checks_domain() const noexcept { return check_domain_; }
    void set_domain_checks(bool on) noexcept { check_domain_ = on; }

    /// Start values used by the adaptive truncation test; always includes the anchor.
    const std::vector<Complex>& probe_points() const noexcept { return probes_; }

private:
    // Generators may keep scratch buffers; a sequence is not shared across threads.
    mutable Generator generator_;
    DomainSpec domain_;
    std::vector<Complex> probes_;
    bool check_domain_;
};

template <typename Generator>
CompositionSequence(Generator, DomainSpec, bool) -> CompositionSequence<Generator>;
template <typename Generator>
CompositionSequence(Generator, DomainSpec) -> CompositionSequence<Generator>;

/// H_a(s, H_{a+1}(s, ... H_b(s, z))), applying H_b first.
template <typename Seq>
Complex compose_finite(const Seq& seq, std::size_t a, std::size_t b, Complex s, Complex z)
{
    if (a < 1 || a > b)
        throw InvalidArgument("compose_finite: need 1 <= a <= b");
    if (seq.checks_domain() && !seq.domain().contains(z))
        throw DomainEscape("compose_finite: start value outside the domain", z);
    for (std::size_t j = b + 1; j-- > a;) {
        z = seq(j, s, z);
        if (!is_finite(z))
            throw NonFiniteValue("compose_finite: H_" + std::to_string(j) + " produced a non-finite value");
        if (seq.checks_domain() && !seq.domain().contains(z))
            throw DomainEscape("compose_finite: H_" + std::to_string(j) + " left the domain", z);
    }
    return z;
}

/// Sampled sup of |H_j(s, z) - A| over strip_sample x domain_sample.
template <typename Seq>
double estimate_rho(const Seq& seq, std::size_t j, const CompactSample& strip_sample,
                    const CompactSample& domain_sample)
{
    if (strip_sample.points.empty() || domain_sample.points.empty())
        throw InvalidArgument("estimate_rho: empty sample");
    const Complex A = seq.anchor();
    double rho = 0.0;
    for (const Complex s : strip_sample.points) {
        for (const Complex z : domain_sample.points) {
            const Complex v = seq(j, s, z);
            if (!is_finite(v))
                throw NonFiniteValue("estimate_rho: non-finite H_" + std::to_string(j) + " at s=" + to_string(s));
            rho = std::max(rho, std::abs(v - A));
        }
    }
    return rho;
}

struct TailEstimate {
    std::vector<double> rho;          // rho[j-1] for j = 1..j_max
    std::vector<double> partial_sums; // running sums of rho
};

template <typename Seq>
TailEstimate estimate_tail(const Seq& seq, std::size_t j_max, const CompactSample& strip_sample,
                           const CompactSample& domain_sample)
{
    TailEstimate out;
    double running = 0.0;
    for (std::size_t j = 1; j <= j_max; ++j) {
        const double r = estimate_rho(seq, j, strip_sample, domain_sample);
        running += r;
        out.rho.push_back(r);
        out.partial_sums.push_back(running);
    }
    return out;
}

struct AdaptiveResult {
    Complex value;
    std::size_t n_used;
};

/// Smallest-depth truncation of the infinite composition started at z.
///
/// Stops at the first n with
///   (i)  |phi_{1,n}(z) - phi_{1,n-1}(z)| < eps   (skipped at n = 1), and
///   (ii) |phi_{1,n}(z) - phi_{1,n}(p)| < eps for every probe start p of the
///        sequence (anchor and points near the domain boundary),
/// i.e. the truncated composition has forgotten where its tail starts.
template <typename Seq>
AdaptiveResult compose_adaptive(const Seq& seq, Complex s, Complex z, double eps, std::size_t n_max)
{
    if (!(eps > 0.0))
        throw InvalidArgument("compose_adaptive: eps must be positive");
    if (n_max < 1)
        throw InvalidArgument("compose_adaptive: n_max must be at least 1");
    Complex previous{};
    double last_step = 0.0;
    for (std::size_t n = 1; n <= n_max; ++n) {
        const Complex current = compose_finite(seq, 1, n, s, z);
        const bool settled = n == 1 || (last_step = std::abs(current - previous)) < eps;
        previous = current;
        if (!settled)
            continue;
        bool forgotten = true;
        for (const Complex p : seq.probe_points()) {
            if (std::abs(compose_finite(seq, 1, n, s, p) - current) >= eps) {
                forgotten = false;
                break;
            }
        }
        if (forgotten)
            return {current, n};
    }
    throw TruncationLimit("compose_adaptive: no truncation depth <= " + std::to_string(n_max) +
                          " met eps=" + std::to_string(eps) + " at s=" + to_string(s) +
                          " (last step " + std::to_string(last_step) + ")");
}

} // namespace transfer::omega
