// dcalc: batch frontend for the exact level-m differential-operator
// calculus.  Every subcommand maps 1:1 onto a library operation; jobs can
// also be submitted as JSON documents through `dcalc run`.
//
// Exit codes: 0 success, 2 malformed input, 3 violated precondition,
// 4 internal invariant failure.

#include "dcalc/corpus.hpp"
#include "dcalc/dop.hpp"
#include "dcalc/json_io.hpp"
#include "dcalc/mpd.hpp"
#include "dcalc/strat.hpp"
#include "dcalc/tube.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace dcalc;

std::vector<poly_q> parse_poly_list(const std::string& text, std::size_t d)
{
    std::vector<poly_q> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t sep = text.find(';', pos);
        std::string tok =
            text.substr(pos, sep == std::string::npos ? std::string::npos : sep - pos);
        if (!tok.empty())
            out.push_back(parse_poly(tok, d));
        if (sep == std::string::npos)
            break;
        pos = sep + 1;
    }
    return out;
}

json load_json_arg(const std::string& spec)
{
    // inline JSON, a filename, or "-" for stdin
    if (!spec.empty() && (spec[0] == '{' || spec[0] == '['))
        return json::parse(spec);
    std::stringstream buf;
    if (spec == "-") {
        buf << std::cin.rdbuf();
    } else {
        std::ifstream in(spec);
        if (!in)
            throw parse_error("cannot open '" + spec + "'");
        buf << in.rdbuf();
    }
    return json::parse(buf.str());
}

std::size_t index_arity(const std::string& s)
{
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), ',')) + 1;
}

// ---------------------------------------------------------------------------
// Handlers: json arguments in, json document out.

json handle_phi(const json& a)
{
    prime_ctx pc{Int(a.at("p").get<long long>())};
    unsigned m = a.at("m").get<unsigned>();
    std::uint64_t r = a.at("r").get<std::uint64_t>();
    auto phi = phi_poly(r, m, pc);
    return json{{"p", pc.p.str()},
                {"m", m},
                {"r", r},
                {"coefficients", envelope_to_json(phi, "eta")}};
}

json handle_coeff(const json& a)
{
    prime_ctx pc{Int(a.at("p").get<long long>())};
    unsigned m = a.at("m").get<unsigned>();
    std::string kind = a.at("kind").get<std::string>();
    std::string ks = a.at("K").get<std::string>();
    multi_index K = parse_multi_index(ks, index_arity(ks));
    multi_index I = parse_multi_index(a.at("I").get<std::string>(), K.size());
    json out{{"K", multi_index_key(K)}, {"I", multi_index_key(I)}, {"m", m}, {"p", pc.p.str()}};
    if (kind == "qfac")
        out["value"] = qfac_ratio(K, I, m, pc).str();
    else if (kind == "padic")
        out["value"] = padic_binom(K, I, m, pc).to_string();
    else if (kind == "multibinom")
        out["value"] = multi_binom(K, I).str();
    else
        throw parse_error("coeff: unknown kind '" + kind + "'");
    return out;
}

json handle_level_decompose(const json& a)
{
    prime_ctx pc{Int(a.at("p").get<long long>())};
    unsigned m = a.at("m").get<unsigned>();
    std::string ks = a.at("K").get<std::string>();
    multi_index K = parse_multi_index(ks, index_arity(ks));
    auto dec = level_decompose(K, m, pc);
    return json{{"K", multi_index_key(dec.K)},
                {"Q", multi_index_key(dec.Q)},
                {"R", multi_index_key(dec.R)},
                {"m", m},
                {"p", pc.p.str()}};
}

json handle_dop_act(const json& a)
{
    prime_ctx pc{Int(a.at("p").get<long long>())};
    unsigned m = a.at("m").get<unsigned>();
    std::size_t d = a.value("vars", std::size_t{1});
    diff_op op = diff_op_from_json(a.at("op"), pc, m, d);
    poly_q f = parse_poly(a.at("f").get<std::string>(), d);
    return json{{"result", to_string(apply(op, f))}};
}

json handle_dop_mul(const json& a)
{
    prime_ctx pc{Int(a.at("p").get<long long>())};
    unsigned m = a.at("m").get<unsigned>();
    std::size_t d = a.value("vars", std::size_t{1});
    diff_op P = diff_op_from_json(a.at("op1"), pc, m, d);
    diff_op Q = diff_op_from_json(a.at("op2"), pc, m, d);
    return json{{"result", diff_op_to_json(compose(P, Q))["terms"]}};
}

json handle_dop_change_level(const json& a)
{
    prime_ctx pc{Int(a.at("p").get<long long>())};
    unsigned m = a.at("m").get<unsigned>();
    unsigned m2 = a.at("m2").get<unsigned>();
    std::size_t d = a.value("vars", std::size_t{1});
    diff_op op = diff_op_from_json(a.at("op"), pc, m, d);
    return json{{"result", diff_op_to_json(change_level(op, m2))["terms"]}};
}

json handle_bilateral_check(const json& a)
{
    prime_ctx pc{Int(a.at("p").get<long long>())};
    unsigned m = a.at("m").get<unsigned>();
    std::size_t d = a.value("vars", std::size_t{1});
    ideal_spec J{parse_poly_list(a.at("gens").get<std::string>(), d)};
    return json{{"horizontal", is_horizontal(J, m, pc)}};
}

tube_ctx tube_ctx_from(const json& a, const prime_ctx& pc, std::size_t d)
{
    std::vector<poly_q> gens = parse_poly_list(a.at("N").get<std::string>(), d);
    std::string shape = a.value("shape", std::string("variable-powers"));
    tube_shape sh = tube_shape::general;
    if (shape == "variable-powers")
        sh = tube_shape::variable_powers;
    else if (shape == "principal-regular")
        sh = tube_shape::principal_regular;
    else if (shape != "general")
        throw parse_error("unknown tube shape '" + shape + "'");
    return tube_ctx(pc, d, std::move(gens), sh);
}

json handle_tube_member(const json& a)
{
    prime_ctx pc{Int(a.at("p").get<long long>())};
    std::size_t d = a.value("vars", std::size_t{1});
    tube_ctx ctx = tube_ctx_from(a, pc, d);
    poly_q g = parse_poly(a.at("g").get<std::string>(), d);
    return json{{"member", membership(g, ctx)}};
}

json handle_tube_frobenius(const json& a)
{
    prime_ctx pc{Int(a.at("p").get<long long>())};
    unsigned m = a.at("m").get<unsigned>();
    unsigned i = a.at("i").get<unsigned>();
    unsigned s = a.value("s", 1u);
    std::size_t d = a.value("vars", std::size_t{1});
    poly_q g = parse_poly(a.at("g").get<std::string>(), d);
    ring_map<Rat> F;
    F.images = parse_poly_list(a.at("F").get<std::string>(), d);
    std::uint32_t pis = pow_int(pc.p, i + s).convert_to<std::uint32_t>();
    // ambient tube A[(g)^{p^{i+s}}]; only images matter here
    tube_ctx ctx(pc, d, {g.pow(pis)}, tube_shape::general);
    auto w = frobenius_tube_witness(g, F, i, s, m, ctx);
    return json{{"h_prime", to_string(w.h_prime)},
                {"preimage_image", to_string(w.preimage.image)}};
}

json handle_tube_compare(const json& a)
{
    prime_ctx pc{Int(a.at("p").get<long long>())};
    unsigned m = a.at("m").get<unsigned>();
    std::uint32_t pm = pow_int(pc.p, m).convert_to<std::uint32_t>();
    std::uint32_t pm1 = pow_int(pc.p, m + 1).convert_to<std::uint32_t>();
    std::uint32_t pm2 = pow_int(pc.p, m + 2).convert_to<std::uint32_t>();
    std::vector<poly_q> base = {poly_q::variable(1, 0, Rat(1))};
    tube_ctx ctx_m(pc, 1, {base[0].pow(pm)}, tube_shape::variable_powers);
    tube_ctx ctx_m1(pc, 1, {base[0].pow(pm1)}, tube_shape::variable_powers);
    std::uint64_t order = 2 * static_cast<std::uint64_t>(pm2);

    auto t = from_witness(tube_witness::generator(0), ctx_m1);
    auto env = tube_to_env(t, base, ctx_m1, m, order);
    auto back = env_to_tube(env, base, ctx_m);
    auto included = incl_power_map(t, pm1 / pm, ctx_m1, ctx_m);
    bool inclusion_ok = back.image == included.image;

    bool change_ok = true;
    for (std::uint32_t k = 0; k <= pm2 && change_ok; ++k) {
        envelope_elt ek(pc, m + 1, 0, 1, order);
        ek.add(multi_index{k}, poly_q::constant(std::size_t(0), Rat(1)));
        auto mid = env_to_tube(ek, base, ctx_m1);
        auto out = tube_to_env(mid, base, ctx_m1, m, order);
        change_ok = out == env_change_level(ek, m);
    }
    return json{{"tube_env_tube_is_inclusion", inclusion_ok},
                {"env_tube_env_is_change_of_level", change_ok}};
}

json handle_strat_check(const json& a)
{
    strat_module M = strat_module_from_json(a.at("module"));
    return json{{"cocycle", cocycle_check(M)}};
}

json handle_strat_frobenius(const json& a)
{
    strat_module M = strat_module_from_json(a.at("module"));
    unsigned s = a.value("s", 1u);
    ring_map<Rat> images;
    images.images = parse_poly_list(a.at("F").get<std::string>(), M.nvars());
    frob_lift F(M.ctx(), s, images);
    strat_module P = frobenius_pullback(M, F);
    return json{{"pullback", strat_module_to_json(P)}, {"cocycle", cocycle_check(P)}};
}

json handle_strat_hom(const json& a)
{
    strat_module M = strat_module_from_json(a.at("module1"));
    strat_module M2 = strat_module_from_json(a.at("module2"));
    std::uint64_t D = a.value("degree_bound", std::uint64_t{2});
    auto basis = horizontal_hom(M, M2, D);
    json mats = json::array();
    for (auto& b : basis)
        mats.push_back(pmatrix_to_json(b));
    return json{{"dimension", basis.size()}, {"basis", mats}};
}

json handle_isoc_check(const json& a)
{
    const json& sys = a.at("system");
    isoc_system S;
    S.m_lo = sys.value("m_lo", 0u);
    for (auto& mj : sys.at("modules"))
        S.modules.push_back(strat_module_from_json(mj));
    for (auto& [key, val] : sys.at("transitions").items()) {
        std::size_t dash = key.find('-');
        if (dash == std::string::npos)
            throw parse_error("transition key must be 'm-m2'");
        unsigned m = std::stoul(key.substr(0, dash));
        unsigned m2 = std::stoul(key.substr(dash + 1));
        const strat_module& tgt = S.at(m);
        const strat_module& src = S.at(m2);
        S.transitions[{m, m2}] = pmatrix_from_json(val, tgt.rank(), src.rank(), tgt.nvars());
    }
    return json{{"compatible", isoc_compat_check(S)}};
}

json handle_gen_corpus(const json& a)
{
    std::uint64_t seed = a.value("seed", std::uint64_t{0});
    corpus_sizes sz;
    sz.nvars = a.value("vars", std::size_t{1});
    sz.max_degree = a.value("degree_bound", 3u);
    sz.terms = a.value("terms", 3);
    std::size_t count = a.value("count", std::size_t{10});
    std::string kind = a.value("kind", std::string("poly"));
    prime_ctx pc{Int(a.value("p", 2LL))};
    unsigned m = a.value("m", 0u);

    rng g(seed);
    json lines = json::array();
    for (std::size_t i = 0; i < count; ++i) {
        if (kind == "poly") {
            lines.push_back(json{{"poly", to_string(random_poly(g, sz))}});
        } else if (kind == "op") {
            std::uint64_t max_order = a.value("order_bound", std::uint64_t{3});
            lines.push_back(json{{"op", diff_op_to_json(random_op(g, pc, m, sz, max_order))}});
        } else if (kind == "module") {
            std::size_t rank = a.value("rank", std::size_t{2});
            std::uint64_t n_max = a.value("order_bound", std::uint64_t{2});
            lines.push_back(json{
                {"module", strat_module_to_json(random_gauge_module(g, pc, m, sz, rank, n_max))}});
        } else {
            throw parse_error("gen-corpus: unknown kind '" + kind + "'");
        }
    }
    return json{{"seed", seed}, {"entries", lines}};
}

json dispatch(const std::string& cmd, const json& args)
{
    if (cmd == "phi")
        return handle_phi(args);
    if (cmd == "coeff")
        return handle_coeff(args);
    if (cmd == "level-decompose")
        return handle_level_decompose(args);
    if (cmd == "dop-act")
        return handle_dop_act(args);
    if (cmd == "dop-mul")
        return handle_dop_mul(args);
    if (cmd == "dop-change-level")
        return handle_dop_change_level(args);
    if (cmd == "bilateral-check")
        return handle_bilateral_check(args);
    if (cmd == "tube-member")
        return handle_tube_member(args);
    if (cmd == "tube-frobenius")
        return handle_tube_frobenius(args);
    if (cmd == "tube-compare")
        return handle_tube_compare(args);
    if (cmd == "strat-check")
        return handle_strat_check(args);
    if (cmd == "strat-frobenius")
        return handle_strat_frobenius(args);
    if (cmd == "strat-hom")
        return handle_strat_hom(args);
    if (cmd == "isoc-check")
        return handle_isoc_check(args);
    if (cmd == "gen-corpus")
        return handle_gen_corpus(args);
    throw parse_error("unknown command '" + cmd + "'");
}

void emit(const json& doc, const std::string& format)
{
    if (format == "json") {
        // corpus documents stream as JSON-lines; everything else is one
        // pretty-printed document
        if (doc.is_object() && doc.contains("entries") && doc.contains("seed")) {
            for (auto& entry : doc["entries"])
                std::cout << entry.dump() << "\n";
            return;
        }
        std::cout << doc.dump(2) << "\n";
        return;
    }
    // human-readable; no stability guarantee
    std::function<void(const json&, const std::string&)> walk = [&](const json& j,
                                                                    const std::string& prefix) {
        if (j.is_object()) {
            for (auto& [k, v] : j.items())
                walk(v, prefix.empty() ? k : prefix + "." + k);
        } else if (j.is_array()) {
            std::size_t i = 0;
            for (auto& v : j)
                walk(v, prefix + "[" + std::to_string(i++) + "]");
        } else {
            std::cout << prefix << ": " << (j.is_string() ? j.get<std::string>() : j.dump())
                      << "\n";
        }
    };
    walk(doc, "");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"exact level-m arithmetic differential operator calculus"};
    app.require_subcommand(1);

    std::string format = "json";
    app.add_option("--format", format, "output format: json or text")
        ->check(CLI::IsMember({"json", "text"}));

    long long p = 2;
    unsigned m = 0, m2 = 0, i = 1, s = 1, prec = 4;
    std::uint64_t r = 2, order_bound = 3, degree_bound = 3, seed = 0;
    std::size_t vars = 1, count = 10, rank = 2;
    int terms = 3;
    std::string kind, K, I, op1, op2, f, gens, shape = "variable-powers", g, F, file, file2;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--p", p, "prime");
        sub->add_option("--m", m, "level");
        sub->add_option("--vars", vars, "number of variables");
        sub->add_option("--prec", prec, "precision N for mod p^N work");
    };

    auto* c_phi = app.add_subcommand("phi", "phi polynomial with p*phi = X2^r - X1^r");
    add_common(c_phi);
    c_phi->add_option("--r", r, "exponent (p^{m+1} must divide r)")->required();

    auto* c_coeff = app.add_subcommand("coeff", "level-m coefficient queries");
    add_common(c_coeff);
    c_coeff->add_option("--kind", kind, "qfac | padic | multibinom")->required();
    c_coeff->add_option("--K", K, "multi-index, e.g. 4 or 4,2")->required();
    c_coeff->add_option("--I", I, "multi-index below K")->required();

    auto* c_ld = app.add_subcommand("level-decompose", "K = p^m Q + R");
    add_common(c_ld);
    c_ld->add_option("--K", K)->required();

    auto* c_act = app.add_subcommand("dop-act", "apply an operator to a polynomial");
    add_common(c_act);
    c_act->add_option("--op", op1, "JSON {multi-index: coefficient}")->required();
    c_act->add_option("--f", f, "polynomial")->required();

    auto* c_mul = app.add_subcommand("dop-mul", "compose two operators");
    add_common(c_mul);
    c_mul->add_option("--op1", op1)->required();
    c_mul->add_option("--op2", op2)->required();

    auto* c_cl = app.add_subcommand("dop-change-level", "raise the level of an operator");
    add_common(c_cl);
    c_cl->add_option("--op", op1)->required();
    c_cl->add_option("--m2", m2, "target level")->required();

    auto* c_bil = app.add_subcommand("bilateral-check", "horizontality of an ideal (p implicit)");
    add_common(c_bil);
    c_bil->add_option("--gens", gens, "semicolon-separated generators")->required();

    auto* c_tm = app.add_subcommand("tube-member", "membership in a tube algebra");
    add_common(c_tm);
    c_tm->add_option("--N", gens, "semicolon-separated generators")->required();
    c_tm->add_option("--g", g, "candidate element of Q[x]")->required();
    c_tm->add_option("--shape", shape, "variable-powers | principal-regular | general");

    auto* c_tf = app.add_subcommand("tube-frobenius", "Frobenius surjectivity witness");
    add_common(c_tf);
    c_tf->add_option("--i", i)->required();
    c_tf->add_option("--s", s);
    c_tf->add_option("--g", g, "ideal generator")->required();
    c_tf->add_option("--F", F, "semicolon-separated images of the lift")->required();

    auto* c_tc = app.add_subcommand("tube-compare", "envelope/tube comparison compositions");
    add_common(c_tc);

    auto* c_sc = app.add_subcommand("strat-check", "cocycle check for a module file");
    add_common(c_sc);
    c_sc->add_option("--file", file, "module JSON (file, inline, or '-')")->required();

    auto* c_sf = app.add_subcommand("strat-frobenius", "pullback along a Frobenius lift");
    add_common(c_sf);
    c_sf->add_option("--file", file)->required();
    c_sf->add_option("--F", F, "images of the lift")->required();
    c_sf->add_option("--s", s);

    auto* c_sh = app.add_subcommand("strat-hom", "basis of horizontal homs");
    add_common(c_sh);
    c_sh->add_option("--file1", file)->required();
    c_sh->add_option("--file2", file2)->required();
    c_sh->add_option("--degree-bound", degree_bound);

    auto* c_ic = app.add_subcommand("isoc-check", "compatibility of a module tower");
    add_common(c_ic);
    c_ic->add_option("--file", file)->required();

    auto* c_gc = app.add_subcommand("gen-corpus", "deterministic random corpus");
    add_common(c_gc);
    c_gc->add_option("--seed", seed);
    c_gc->add_option("--degree-bound", degree_bound);
    c_gc->add_option("--order-bound", order_bound);
    c_gc->add_option("--terms", terms);
    c_gc->add_option("--count", count);
    c_gc->add_option("--rank", rank);
    c_gc->add_option("--kind", kind, "poly | op | module");

    auto* c_run = app.add_subcommand("run", "run a JSON job document");
    c_run->add_option("--file", file, "job JSON (file, inline, or '-')")->required();

    auto* c_dev = app.add_subcommand("dev-raise", "raise an error class (exit-code self-test)");
    c_dev->add_option("--kind", kind)->required();
    c_dev->group("");  // hidden

    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            if (e.get_exit_code() == 0)  // --help and friends
                return app.exit(e);
            std::cerr << e.what() << "\n";
            return 2;
        }

        json args;
        std::string cmd;
        if (c_phi->parsed()) {
            cmd = "phi";
            args = {{"p", p}, {"m", m}, {"r", r}};
        } else if (c_coeff->parsed()) {
            cmd = "coeff";
            args = {{"p", p}, {"m", m}, {"kind", kind}, {"K", K}, {"I", I}};
        } else if (c_ld->parsed()) {
            cmd = "level-decompose";
            args = {{"p", p}, {"m", m}, {"K", K}};
        } else if (c_act->parsed()) {
            cmd = "dop-act";
            args = {{"p", p}, {"m", m}, {"vars", vars}, {"op", json::parse(op1)}, {"f", f}};
        } else if (c_mul->parsed()) {
            cmd = "dop-mul";
            args = {{"p", p},
                    {"m", m},
                    {"vars", vars},
                    {"op1", json::parse(op1)},
                    {"op2", json::parse(op2)}};
        } else if (c_cl->parsed()) {
            cmd = "dop-change-level";
            args = {{"p", p}, {"m", m}, {"m2", m2}, {"vars", vars}, {"op", json::parse(op1)}};
        } else if (c_bil->parsed()) {
            cmd = "bilateral-check";
            args = {{"p", p}, {"m", m}, {"vars", vars}, {"gens", gens}};
        } else if (c_tm->parsed()) {
            cmd = "tube-member";
            args = {{"p", p}, {"vars", vars}, {"N", gens}, {"g", g}, {"shape", shape}};
        } else if (c_tf->parsed()) {
            cmd = "tube-frobenius";
            args = {{"p", p}, {"m", m}, {"i", i}, {"s", s}, {"vars", vars}, {"g", g}, {"F", F}};
        } else if (c_tc->parsed()) {
            cmd = "tube-compare";
            args = {{"p", p}, {"m", m}};
        } else if (c_sc->parsed()) {
            cmd = "strat-check";
            args = {{"module", load_json_arg(file)}};
        } else if (c_sf->parsed()) {
            cmd = "strat-frobenius";
            args = {{"module", load_json_arg(file)}, {"F", F}, {"s", s}};
        } else if (c_sh->parsed()) {
            cmd = "strat-hom";
            args = {{"module1", load_json_arg(file)},
                    {"module2", load_json_arg(file2)},
                    {"degree_bound", degree_bound}};
        } else if (c_ic->parsed()) {
            cmd = "isoc-check";
            args = {{"system", load_json_arg(file)}};
        } else if (c_gc->parsed()) {
            cmd = "gen-corpus";
            args = {{"p", p},
                    {"m", m},
                    {"vars", vars},
                    {"seed", seed},
                    {"degree_bound", static_cast<unsigned>(degree_bound)},
                    {"order_bound", order_bound},
                    {"terms", terms},
                    {"count", count},
                    {"rank", rank},
                    {"kind", kind.empty() ? "poly" : kind}};
        } else if (c_run->parsed()) {
            json job = load_json_arg(file);
            if (!job.contains("cmd"))
                throw parse_error("job document needs a 'cmd' field");
            cmd = job["cmd"].get<std::string>();
            args = job;
            args.erase("cmd");
            if (job.contains("format"))
                format = job["format"].get<std::string>();
        } else if (c_dev->parsed()) {
            if (kind == "parse")
                throw parse_error("dev-raise: parse");
            if (kind == "domain")
                throw domain_error("dev-raise: domain");
            if (kind == "internal")
                throw internal_error("dev-raise: internal");
            throw parse_error("dev-raise: unknown kind '" + kind + "'");
        }

        emit(dispatch(cmd, args), format);
        return 0;
    } catch (const parse_error& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const internal_error& e) {
        std::cerr << "internal invariant failure: " << e.what() << "\n";
        return 4;
    } catch (const dcalc::error& e) {
        std::cerr << "precondition violated: " << e.what() << "\n";
        return 3;
    } catch (const std::logic_error& e) {
        std::cerr << "internal invariant failure: " << e.what() << "\n";
        return 4;
    }
}
