#pragma once

// JSON problem files.
//
// {
//   "order": 2,
//   "expression": "exp(s+z1)+exp(s+z2)",
//   "strip": {"half_height": 0.75},
//   "cutoff_hint": 1.0,
//   "domain": {"type": "disk", "center": [0, 0], "radius": 5, "anchor": [0, 0]},
//   "parameters": [[0, 0]],                       optional, defaults to the anchor
//   "tolerances": {"tail_eps": 1e-12, ...},       optional overrides
//   "asymptotic_model": "2*exp(s-2)",             optional, used by verify
//   "description": "..."                          optional
// }
//
// A rectangular domain is {"type": "rect", "lo": [re, im], "hi": [re, im], "anchor": [re, im]}.
// Unknown keys are rejected.

#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "transfer/core.hpp"
#include "transfer/fexpr.hpp"
#include "transfer/solver.hpp"

namespace transfer::io {

using nlohmann::json;

/// Malformed problem file. `position` is set for errors inside the expression.
struct ProblemFileError : Error {
    ProblemFileError(const std::string& what, std::optional<std::size_t> pos = std::nullopt)
        : Error(Kind::Parse, what), position(pos)
    {}
    std::optional<std::size_t> position;
};

struct ProblemFile {
    solver::ProblemSpec spec;
    std::optional<fexpr::Expr> asymptotic_model;
    std::string description;
};

namespace detail {

inline void only_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where)
{
    if (!obj.is_object())
        throw ProblemFileError(where + " must be an object");
    for (const auto& [key, value] : obj.items()) {
        bool known = false;
        for (const char* a : allowed)
            known = known || key == a;
        if (!known)
            throw ProblemFileError("unknown key '" + key + "' in " + where);
    }
}

inline const json& required(const json& obj, const char* key, const std::string& where)
{
    const auto it = obj.find(key);
    if (it == obj.end())
        throw ProblemFileError("missing key '" + std::string(key) + "' in " + where);
    return *it;
}

inline double number(const json& v, const std::string& what)
{
    if (!v.is_number())
        throw ProblemFileError(what + " must be a number");
    return v.get<double>();
}

inline Complex complex_value(const json& v, const std::string& what)
{
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        throw ProblemFileError(what + " must be a [re, im] pair");
    return {v[0].get<double>(), v[1].get<double>()};
}

inline fexpr::Expr expression(const json& v, int order, const std::string& what)
{
    if (!v.is_string())
        throw ProblemFileError(what + " must be a string");
    try {
        return fexpr::parse(v.get<std::string>(), order);
    } catch (const fexpr::ParseError& e) {
        throw ProblemFileError(what + ": " + e.message, e.position);
    }
}

inline DomainSpec domain(const json& d)
{
    if (!d.is_object())
        throw ProblemFileError("domain must be an object");
    const json& type = required(d, "type", "domain");
    if (type == "disk") {
        only_keys(d, {"type", "center", "radius", "anchor"}, "domain");
        const Complex center = d.contains("center") ? complex_value(d["center"], "domain.center") : Complex(0.0);
        const double radius = number(required(d, "radius", "domain"), "domain.radius");
        return DomainSpec(Disk{center, radius}, complex_value(required(d, "anchor", "domain"), "domain.anchor"));
    }
    if (type == "rect") {
        only_keys(d, {"type", "lo", "hi", "anchor"}, "domain");
        const Rect r{complex_value(required(d, "lo", "domain"), "domain.lo"),
                     complex_value(required(d, "hi", "domain"), "domain.hi")};
        return DomainSpec(r, complex_value(required(d, "anchor", "domain"), "domain.anchor"));
    }
    throw ProblemFileError("domain.type must be \"disk\" or \"rect\"");
}

inline Tolerances tolerances(const json& t)
{
    only_keys(t,
              {"tail_eps", "iter_eps", "residual_tol", "max_trunc", "max_levels", "far_left_margin",
               "lipschitz_target"},
              "tolerances");
    Tolerances out;
    const auto real = [&](const char* key, double& field) {
        if (t.contains(key))
            field = number(t[key], std::string("tolerances.") + key);
    };
    const auto integer = [&](const char* key, int& field) {
        if (t.contains(key)) {
            if (!t[key].is_number_integer())
                throw ProblemFileError(std::string("tolerances.") + key + " must be an integer");
            field = t[key].get<int>();
        }
    };
    real("tail_eps", out.tail_eps);
    real("iter_eps", out.iter_eps);
    real("residual_tol", out.residual_tol);
    integer("max_trunc", out.max_trunc);
    integer("max_levels", out.max_levels);
    real("far_left_margin", out.far_left_margin);
    real("lipschitz_target", out.lipschitz_target);
    return out;
}

} // namespace detail

inline ProblemFile parse_problem(const json& doc)
{
    using namespace detail;
    only_keys(doc,
              {"order", "expression", "strip", "cutoff_hint", "domain", "parameters", "tolerances", "asymptotic_model",
               "description"},
              "problem");
    const json& order_v = required(doc, "order", "problem");
    if (!order_v.is_number_integer() || order_v.get<long>() < 1 || order_v.get<long>() > 64)
        throw ProblemFileError("order must be an integer in 1..64");
    const int k = order_v.get<int>();

    fexpr::Expr F = expression(required(doc, "expression", "problem"), k, "expression");

    const json& strip_v = required(doc, "strip", "problem");
    only_keys(strip_v, {"half_height"}, "strip");
    const double a = number(required(strip_v, "half_height", "strip"), "strip.half_height");
    const double J = doc.contains("cutoff_hint") ? number(doc["cutoff_hint"], "cutoff_hint") : 1.0;

    std::vector<Complex> params;
    if (doc.contains("parameters")) {
        if (!doc["parameters"].is_array())
            throw ProblemFileError("parameters must be a list of [re, im] pairs");
        for (const auto& v : doc["parameters"])
            params.push_back(complex_value(v, "parameters entry"));
    }
    const Tolerances tol = doc.contains("tolerances") ? tolerances(doc["tolerances"]) : Tolerances{};

    ProblemFile out{[&] {
                        try {
                            return solver::make_problem(std::move(F), Strip(a), LeftCutoff(J),
                                                        detail::domain(required(doc, "domain", "problem")),
                                                        std::move(params), tol);
                        } catch (const InvalidArgument& e) {
                            throw ProblemFileError(e.what());
                        }
                    }(),
                    std::nullopt,
                    {}};
    if (doc.contains("asymptotic_model"))
        out.asymptotic_model = expression(doc["asymptotic_model"], k, "asymptotic_model");
    if (doc.contains("description")) {
        if (!doc["description"].is_string())
            throw ProblemFileError("description must be a string");
        out.description = doc["description"].get<std::string>();
    }
    return out;
}

inline ProblemFile parse_problem(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ProblemFileError(std::string("invalid JSON: ") + e.what());
    }
    return parse_problem(doc);
}

inline ProblemFile load_problem(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open problem file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_problem(buf.str());
}

} // namespace transfer::io
