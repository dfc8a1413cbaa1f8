// JSON (de)serialization for the CLI: polynomials travel as grammar strings,
// multi-indices as comma-separated entries, operators and modules as objects
// keyed by index.  Output key order is canonical (nlohmann::json keeps keys
// sorted), which the determinism guarantee relies on.
#pragma once

#include "dcalc/dop.hpp"
#include "dcalc/poly.hpp"
#include "dcalc/strat.hpp"
#include "dcalc/tube.hpp"

#include <json.hpp>

#include <string>

namespace dcalc {

using json = nlohmann::json;

inline multi_index parse_multi_index(const std::string& s, std::size_t d)
{
    std::vector<std::uint32_t> entries;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t comma = s.find(',', pos);
        std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (tok.empty())
            throw parse_error("bad multi-index: '" + s + "'");
        for (char c : tok)
            if (!std::isdigit(static_cast<unsigned char>(c)))
                throw parse_error("bad multi-index: '" + s + "'");
        entries.push_back(static_cast<std::uint32_t>(std::stoul(tok)));
        if (comma == std::string::npos)
            break;
        pos = comma + 1;
    }
    if (entries.size() != d)
        throw parse_error("multi-index '" + s + "' has arity " + std::to_string(entries.size()) +
                          ", expected " + std::to_string(d));
    return multi_index(entries);
}

inline std::string multi_index_key(const multi_index& K)
{
    std::string s;
    for (std::size_t i = 0; i < K.size(); ++i) {
        if (i)
            s += ",";
        s += std::to_string(K[i]);
    }
    return s;
}

inline json poly_to_json(const poly_q& f) { return to_string(f); }

inline poly_q poly_from_json(const json& j, std::size_t d)
{
    if (!j.is_string())
        throw parse_error("polynomial must be a string");
    return parse_poly(j.get<std::string>(), d);
}

inline json diff_op_to_json(const diff_op& op)
{
    json terms = json::object();
    for (auto& [K, c] : op.terms())
        terms[multi_index_key(K)] = to_string(c);
    return json{{"level", op.level()},
                {"p", op.ctx().p.str()},
                {"vars", op.nvars()},
                {"terms", terms}};
}

inline diff_op diff_op_from_json(const json& j, const prime_ctx& pc, unsigned m, std::size_t d)
{
    diff_op op(pc, m, d);
    if (!j.is_object())
        throw parse_error("operator must be an object {multi-index: coefficient}");
    for (auto& [key, val] : j.items())
        op.add(parse_multi_index(key, d), poly_from_json(val, d));
    return op;
}

inline json pmatrix_to_json(const pmatrix& t)
{
    json rows = json::array();
    for (std::size_t i = 0; i < t.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < t.cols(); ++j)
            row.push_back(to_string(t.at(i, j)));
        rows.push_back(row);
    }
    return rows;
}

inline pmatrix pmatrix_from_json(const json& j, std::size_t rows, std::size_t cols, std::size_t d)
{
    if (!j.is_array() || j.size() != rows)
        throw parse_error("matrix must be an array of " + std::to_string(rows) + " rows");
    pmatrix t(rows, cols, d);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols)
            throw parse_error("matrix row " + std::to_string(i) + " must have " +
                              std::to_string(cols) + " entries");
        for (std::size_t c = 0; c < cols; ++c)
            t.at(i, c) = poly_from_json(j[i][c], d);
    }
    return t;
}

/// optional ambient object: {"N": ["x1^2", ...], "shape": "variable-powers"}
inline std::optional<tube_ctx> ambient_from_json(const json& j, const prime_ctx& pc,
                                                 std::size_t d)
{
    if (!j.contains("ambient"))
        return std::nullopt;
    const json& a = j["ambient"];
    std::vector<poly_q> gens;
    for (auto& gj : a.at("N"))
        gens.push_back(poly_from_json(gj, d));
    std::string shape = a.value("shape", std::string("variable-powers"));
    tube_shape sh = tube_shape::general;
    if (shape == "variable-powers")
        sh = tube_shape::variable_powers;
    else if (shape == "principal-regular")
        sh = tube_shape::principal_regular;
    else if (shape != "general")
        throw parse_error("unknown ambient shape '" + shape + "'");
    return tube_ctx(pc, d, std::move(gens), sh);
}

/// {rank, level, p, vars, order_bound, theta: {K: [[poly]]}, ambient?: {...}}
inline strat_module strat_module_from_json(const json& j)
{
    for (const char* key : {"rank", "level", "p", "theta"})
        if (!j.contains(key))
            throw parse_error(std::string("module is missing '") + key + "'");
    prime_ctx pc{Int(j["p"].is_string() ? j["p"].get<std::string>()
                                        : std::to_string(j["p"].get<long long>()))};
    std::size_t d = j.value("vars", std::size_t{1});
    std::size_t rank = j["rank"].get<std::size_t>();
    unsigned m = j["level"].get<unsigned>();
    std::uint64_t n_max = j.value("order_bound", std::uint64_t{4});
    strat_module M(pc, m, d, rank, n_max, ambient_from_json(j, pc, d));
    for (auto& [key, val] : j["theta"].items())
        M.set_theta(parse_multi_index(key, d), pmatrix_from_json(val, rank, rank, d));
    return M;
}

inline json strat_module_to_json(const strat_module& M)
{
    json theta = json::object();
    for (auto& [K, t] : M.thetas())
        theta[multi_index_key(K)] = pmatrix_to_json(t);
    return json{{"rank", M.rank()},     {"level", M.level()},
                {"p", M.ctx().p.str()}, {"vars", M.nvars()},
                {"order_bound", M.order_bound()}, {"theta", theta}};
}

inline json envelope_to_json(const envelope_elt& e, const std::string& symbol)
{
    json coeffs = json::object();
    for (auto& [K, f] : e.coefficients()) {
        std::string key = symbol;
        if (e.pd_vars() == 1) {
            key += "^{" + std::to_string(K[0]) + "}";
        } else {
            key += "^{" + multi_index_key(K) + "}";
        }
        coeffs[key] = to_string(f);
    }
    return coeffs;
}

}  // namespace dcalc
