#pragma once

// Shared geometry, scalar conventions, tolerances and the error taxonomy.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace transfer {

using Complex = std::complex<double>;

inline bool is_finite(Complex v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }

inline std::string to_string(Complex v)
{
    std::ostringstream os;
    os.precision(17);
    os << v.real() << (v.imag() < 0 ? "" : "+") << v.imag() << "i";
    return os.str();
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    enum class Kind {
        NonFiniteValue,
        InvalidArgument,
        Io,
        Parse,
        Eval,
        DomainEscape,
        OutsideStrip,
        TruncationLimit,
        HypothesisFailure,
        NoConvergence,
        ContractionViolation,
    };

    Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

inline const char* kind_name(Error::Kind kind)
{
    switch (kind) {
    case Error::Kind::NonFiniteValue: return "non_finite_value";
    case Error::Kind::InvalidArgument: return "invalid_argument";
    case Error::Kind::Io: return "io";
    case Error::Kind::Parse: return "parse";
    case Error::Kind::Eval: return "eval";
    case Error::Kind::DomainEscape: return "domain_escape";
    case Error::Kind::OutsideStrip: return "outside_strip";
    case Error::Kind::TruncationLimit: return "truncation_limit";
    case Error::Kind::HypothesisFailure: return "hypothesis_failure";
    case Error::Kind::NoConvergence: return "no_convergence";
    case Error::Kind::ContractionViolation: return "contraction_violation";
    }
    return "unknown";
}

struct NonFiniteValue : Error {
    explicit NonFiniteValue(const std::string& what) : Error(Kind::NonFiniteValue, what) {}
};

struct InvalidArgument : Error {
    explicit InvalidArgument(const std::string& what) : Error(Kind::InvalidArgument, what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(Kind::Io, what) {}
};

struct DomainEscape : Error {
    DomainEscape(const std::string& what, Complex where)
        : Error(Kind::DomainEscape, what + " at " + to_string(where)), point(where)
    {}
    Complex point;
};

struct OutsideStrip : Error {
    explicit OutsideStrip(const std::string& what) : Error(Kind::OutsideStrip, what) {}
};

struct TruncationLimit : Error {
    explicit TruncationLimit(const std::string& what) : Error(Kind::TruncationLimit, what) {}
};

struct HypothesisFailure : Error {
    HypothesisFailure(const std::string& what, double lambda_, double cutoff_)
        : Error(Kind::HypothesisFailure, what), lambda(lambda_), cutoff(cutoff_)
    {}
    double lambda;
    double cutoff;
};

struct NoConvergence : Error {
    explicit NoConvergence(const std::string& what) : Error(Kind::NoConvergence, what) {}
};

struct ContractionViolation : Error {
    explicit ContractionViolation(const std::string& what) : Error(Kind::ContractionViolation, what) {}
};

inline Complex require_finite(Complex v, const char* context)
{
    if (!is_finite(v))
        throw NonFiniteValue(std::string("non-finite value in ") + context);
    return v;
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Horizontal strip {s : |Im s| < half_height}.
class Strip {
public:
    explicit Strip(double half_height) : half_height_(half_height)
    {
        if (!(half_height > 0.0) || !std::isfinite(half_height))
            throw InvalidArgument("strip half height must be positive");
    }

    double half_height() const noexcept { return half_height_; }
    bool contains(Complex s) const noexcept { return std::abs(s.imag()) < half_height_; }

private:
    double half_height_;
};

/// The left part S_J = {s in S : Re s < -J} of a strip.
class LeftCutoff {
public:
    explicit LeftCutoff(double J) : J_(J)
    {
        if (!(J > 0.0) || !std::isfinite(J))
            throw InvalidArgument("cutoff J must be positive");
    }

    double J() const noexcept { return J_; }
    bool contains(Complex s) const noexcept { return s.real() < -J_; }

private:
    double J_;
};

struct Disk {
    Complex center;
    double radius;
};

struct Rect {
    Complex lo;
    Complex hi;
};

/// Domain G (open disk or open rectangle) together with the anchor A.
class DomainSpec {
public:
    using Shape = std::variant<Disk, Rect>;

    DomainSpec(Shape shape, Complex anchor) : shape_(shape), anchor_(anchor)
    {
        if (const auto* d = std::get_if<Disk>(&shape_)) {
            if (!(d->radius > 0.0) || !std::isfinite(d->radius) || !is_finite(d->center))
                throw InvalidArgument("disk radius must be positive");
        } else {
            const auto& r = std::get<Rect>(shape_);
            if (!(r.lo.real() < r.hi.real()) || !(r.lo.imag() < r.hi.imag()))
                throw InvalidArgument("rectangle corners must satisfy lo < hi");
        }
        if (!contains(anchor_))
            throw InvalidArgument("anchor " + to_string(anchor_) + " is not inside the domain");
    }

    const Shape& shape() const noexcept { return shape_; }
    Complex anchor() const noexcept { return anchor_; }

    bool contains(Complex v) const noexcept
    {
        if (!is_finite(v))
            return false;
        if (const auto* d = std::get_if<Disk>(&shape_))
            return std::abs(v - d->center) < d->radius;
        const auto& r = std::get<Rect>(shape_);
        return v.real() > r.lo.real() && v.real() < r.hi.real() && v.imag() > r.lo.imag() &&
               v.imag() < r.hi.imag();
    }

private:
    Shape shape_;
    Complex anchor_;
};

inline bool in_domain(Complex v, const DomainSpec& d) { return d.contains(v); }

// ---------------------------------------------------------------------------
// Finite samples standing in for compact sets
// ---------------------------------------------------------------------------

struct CompactSample {
    std::vector<Complex> points;
    std::string description;
};

namespace detail {
// Keeps sampled points strictly inside open shapes.
inline constexpr double kInset = 1e-6;
} // namespace detail

/// Concentric polar grid: the center plus `rings` circles of `spokes` points each.
inline CompactSample sample_disk(const Disk& disk, int rings = 32, int spokes = 32)
{
    if (rings < 1 || spokes < 1)
        throw InvalidArgument("sample density must be positive");
    CompactSample out;
    out.description = "polar grid " + std::to_string(rings) + "x" + std::to_string(spokes) + " on disk";
    out.points.reserve(static_cast<std::size_t>(rings * spokes + 1));
    out.points.push_back(disk.center);
    const double rmax = disk.radius * (1.0 - detail::kInset);
    for (int i = 1; i <= rings; ++i) {
        const double r = rmax * i / rings;
        for (int j = 0; j < spokes; ++j) {
            const double theta = 2.0 * std::numbers::pi * j / spokes;
            out.points.push_back(disk.center + std::polar(r, theta));
        }
    }
    return out;
}

/// Tensor grid including the (inset) edges.
inline CompactSample sample_rect(const Rect& rect, int nx = 32, int ny = 32)
{
    if (nx < 2 || ny < 2)
        throw InvalidArgument("rectangle sample needs at least 2 points per side");
    CompactSample out;
    out.description = "tensor grid " + std::to_string(nx) + "x" + std::to_string(ny) + " on rectangle";
    const double wx = rect.hi.real() - rect.lo.real();
    const double wy = rect.hi.imag() - rect.lo.imag();
    const double x0 = rect.lo.real() + wx * detail::kInset, x1 = rect.hi.real() - wx * detail::kInset;
    const double y0 = rect.lo.imag() + wy * detail::kInset, y1 = rect.hi.imag() - wy * detail::kInset;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            out.points.emplace_back(x0 + (x1 - x0) * i / (nx - 1), y0 + (y1 - y0) * j / (ny - 1));
    return out;
}

inline CompactSample sample_domain(const DomainSpec& d, int n1 = 32, int n2 = 32)
{
    if (const auto* disk = std::get_if<Disk>(&d.shape()))
        return sample_disk(*disk, n1, n2);
    return sample_rect(std::get<Rect>(d.shape()), std::max(n1, 2), std::max(n2, 2));
}

/// A handful of points near the boundary of the domain plus the anchor; used
/// where a full sample would be too expensive.
inline std::vector<Complex> domain_probe_points(const DomainSpec& d)
{
    std::vector<Complex> out{d.anchor()};
    if (const auto* disk = std::get_if<Disk>(&d.shape())) {
        for (int j = 0; j < 8; ++j)
            out.push_back(disk->center + std::polar(0.95 * disk->radius, std::numbers::pi * j / 4.0));
    } else {
        const auto& r = std::get<Rect>(d.shape());
        const Complex mid = 0.5 * (r.lo + r.hi);
        const Complex half = 0.475 * (r.hi - r.lo);
        for (int sx = -1; sx <= 1; ++sx)
            for (int sy = -1; sy <= 1; ++sy)
                if (sx != 0 || sy != 0)
                    out.push_back(mid + Complex(sx * half.real(), sy * half.imag()));
    }
    return out;
}

/// Points of S_J: Re s in [-J - depth, -J), Im s across the strip.
inline CompactSample sample_left_strip(const Strip& strip, const LeftCutoff& cutoff, double depth,
                                       int n_re = 9, int n_im = 5)
{
    if (n_re < 1 || n_im < 1 || !(depth >= 0.0))
        throw InvalidArgument("invalid strip sample request");
    CompactSample out;
    out.description = "left half-strip sample";
    const double a = strip.half_height() * (1.0 - detail::kInset);
    const double right = -cutoff.J() - detail::kInset;
    for (int j = 0; j < n_im; ++j) {
        const double im = n_im == 1 ? 0.0 : -a + 2.0 * a * j / (n_im - 1);
        for (int i = 0; i < n_re; ++i) {
            const double re = n_re == 1 ? right : right - depth * i / (n_re - 1);
            out.points.emplace_back(re, im);
        }
    }
    return out;
}

/// Max of |f(p)| over the sample; a lower bound for the sup over the continuum.
template <typename F>
double sup_norm_over(const CompactSample& sample, F&& f)
{
    if (sample.points.empty())
        throw InvalidArgument("sup_norm_over: empty sample");
    double best = 0.0;
    for (const Complex p : sample.points) {
        const Complex v = f(p);
        if (!is_finite(v))
            throw NonFiniteValue("sup_norm_over: non-finite value at " + to_string(p));
        best = std::max(best, std::abs(v));
    }
    return best;
}

// ---------------------------------------------------------------------------
// Tolerances
// ---------------------------------------------------------------------------

struct Tolerances {
    double tail_eps = 1e-12;
    double iter_eps = 1e-12;
    double residual_tol = 1e-8;
    int max_trunc = 200;
    int max_levels = 64;
    double far_left_margin = 8.0;
    // Zero means "use 1/(2k)" when a problem is built.
    double lipschitz_target = 0.0;

    void validate(int order) const
    {
        if (!(tail_eps > 0) || !(iter_eps > 0) || !(residual_tol > 0))
            throw InvalidArgument("tolerances must be positive");
        if (max_trunc < 1 || max_levels < 1)
            throw InvalidArgument("iteration limits must be at least 1");
        if (!(far_left_margin > 0))
            throw InvalidArgument("far_left_margin must be positive");
        if (!(lipschitz_target > 0.0) || !(lipschitz_target * order < 1.0))
            throw InvalidArgument("lipschitz_target must lie in (0, 1/k)");
    }
};

} // namespace transfer
