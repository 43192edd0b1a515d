#pragma once

#include <complex>
#include <vector>

#include "transfer/fexpr.hpp"
#include "transfer/solver.hpp"

namespace testing {

using transfer::Complex;

// Reference values from 40-digit mpmath evaluations.
namespace oracle {
inline constexpr double exp_m4 = 0.01831563888873418029;
inline constexpr double exp_m10 = 4.539992976248485154e-5;
inline constexpr double two_term_exp = 1.670180340935723282e-5;   // e^{-11 + e^{-12}}
inline constexpr double depth60_exp = 1.67018034095891869784e-5;  // depth-60 e^{s-j+z}, s = -10, z = 0
inline constexpr double seed_k2_m20 = 5.578936185948461963e-10;   // depth-40 seed of sum e^{s+z_j}, s = -20
inline constexpr double depth60_exp_m5 = 0.002481014296132407838; // depth-60 e^{s-j+z}, s = -5, z = 0
inline constexpr double affine = 0.28515625;
} // namespace oracle

inline transfer::solver::ProblemSpec disk_problem(const char* expr, int k, double radius, double J = 1.0,
                                                   std::vector<Complex> params = {}, double a = 0.75)
{
    using namespace transfer;
    return solver::make_problem(fexpr::parse(expr, k), Strip(a), LeftCutoff(J),
                                DomainSpec(Disk{Complex(0.0), radius}, Complex(0.0)), std::move(params));
}

/// The k = 2 exponential-sum problem as bundled in example2.json.
inline transfer::solver::ProblemSpec exp_sum_problem()
{
    return disk_problem("exp(s+z1)+exp(s+z2)", 2, 5.0);
}

/// Depth-limited nested evaluation of level n at t with no memoisation:
/// y_n(t) = F(t - k, F(t - 2k, ... F(t - depth k, A, ...), ...), y_{n-1}(t - jk + i), ...).
inline Complex brute_level(const transfer::solver::ProblemSpec& p, int n, Complex t, int depth)
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
        z = transfer::fexpr::eval(p.F, at, args);
    }
    return z;
}

} // namespace testing
