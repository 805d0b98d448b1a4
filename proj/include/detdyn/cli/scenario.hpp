#pragma once

// Scenario documents and the text report produced for each of them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "../control.hpp"
#include "../dynamics.hpp"
#include "../singular.hpp"
#include "../spectral.hpp"
#include "matrix_io.hpp"
#include "svg.hpp"

namespace detdyn::cli {

inline constexpr std::array<std::string_view, 14> kScenarioKinds = {
    "det-update",  "det-sequence", "logdet",     "drazin",     "pdet",         "pdet-lemma", "regularized-limit",
    "secular",     "stability",    "covariance", "info-filter", "gramian",     "ellipse-plot", "perturb-experiment"};

inline bool is_scenario_kind(std::string_view k) {
    return std::find(kScenarioKinds.begin(), kScenarioKinds.end(), k) != kScenarioKinds.end();
}

struct Scenario {
    std::string kind;
    json doc = json::object();
    std::string base_dir = ".";  // relative matrix paths resolve against this
};

/// Command-line overrides. Precedence: flag > scenario document > env.
struct RunOptions {
    std::optional<double> eps_min;
    std::optional<std::uint64_t> seed;
    std::optional<double> tol_rel;
    std::optional<double> env_tol_rel;
    std::string svg_path;
};

struct Report {
    std::string text;
    int exit_code = 0;
};

constexpr int exit_code_for(ErrorCategory c) noexcept { return c == ErrorCategory::Input ? 1 : 2; }

inline Scenario load_scenario(const std::string& path, const std::string& kind) {
    Scenario s;
    s.kind = kind;
    s.base_dir = std::filesystem::path(path).parent_path().string();
    if (s.base_dir.empty()) s.base_dir = ".";
    const std::string text = read_text_file(path);
    if (!looks_like_json(text)) {
        const Matrix h = parse_matrix_csv(text);
        json rows = json::array();
        for (std::size_t i = 0; i < h.rows(); ++i) {
            json r = json::array();
            for (double x : h.row(i)) r.push_back(x);
            rows.push_back(r);
        }
        s.doc["H"] = rows;
        return s;
    }
    s.doc = parse_json_text(text);
    if (!s.doc.is_object()) throw Error(ErrorKind::ParseError, "scenario document must be an object");
    if (s.doc.contains("kind")) {
        if (!s.doc["kind"].is_string()) throw Error(ErrorKind::ParseError, "'kind' must be a string");
        const auto k = s.doc["kind"].get<std::string>();
        if (k != kind)
            throw Error(ErrorKind::InvalidArgument, "scenario kind '" + k + "' does not match subcommand '" + kind + "'");
    }
    return s;
}

namespace detail {

class ReportWriter {
public:
    void section(const std::string& name) { text_ += "[" + name + "]\n"; }
    void kv(const std::string& key, const std::string& value) { text_ += key + " = " + value + "\n"; }
    void kv(const std::string& key, double value) { kv(key, format_double(value)); }
    void kv(const std::string& key, std::size_t value) { kv(key, std::to_string(value)); }
    void kv(const std::string& key, int value) { kv(key, std::to_string(value)); }
    void kv(const std::string& key, bool value) { kv(key, std::string(value ? "true" : "false")); }
    void kv(const std::string& key, const char* value) { kv(key, std::string(value)); }
    void line(const std::string& l) { text_ += l + "\n"; }

    void matrix(const std::string& label, const Matrix& m) {
        section(label + " " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
        text_ += format_matrix_csv(m);
    }

    const std::string& text() const { return text_; }

private:
    std::string text_;
};

struct Context {
    const Scenario& s;
    const RunOptions& opt;
    ReportWriter& out;

    bool has(const char* key) const { return s.doc.contains(key); }

    Matrix matrix(const char* key) const {
        if (!has(key)) throw Error(ErrorKind::InvalidArgument, std::string("scenario is missing '") + key + "'");
        const json& j = s.doc.at(key);
        if (j.is_string()) {
            std::filesystem::path p = j.get<std::string>();
            if (p.is_relative()) p = std::filesystem::path(s.base_dir) / p;
            return parse_matrix_file(p.string());
        }
        return matrix_from_json(j, key);
    }

    Matrix input_matrix(const char* key) const {
        Matrix m = matrix(key);
        out.matrix(std::string("input ") + key, m);
        return m;
    }

    Vector vector(const char* key) const {
        if (!has(key)) throw Error(ErrorKind::InvalidArgument, std::string("scenario is missing '") + key + "'");
        return vector_from_json(s.doc.at(key), key);
    }

    Vector input_vector(const char* key) const {
        Vector v = vector(key);
        out.section(std::string("input ") + key + " " + std::to_string(v.size()));
        out.line(format_vector(v));
        return v;
    }

    std::vector<Vector> input_vector_list(const char* key) const {
        if (!has(key)) throw Error(ErrorKind::InvalidArgument, std::string("scenario is missing '") + key + "'");
        const json& j = s.doc.at(key);
        if (!j.is_array()) throw Error(ErrorKind::ParseError, std::string("'") + key + "' must be a list of vectors");
        std::vector<Vector> list;
        for (std::size_t i = 0; i < j.size(); ++i)
            list.push_back(vector_from_json(j[i], std::string(key) + "[" + std::to_string(i) + "]"));
        out.section(std::string("input ") + key + " " + std::to_string(list.size()));
        for (const auto& v : list) out.line(format_vector(v));
        return list;
    }

    double number(const char* key, std::optional<double> fallback = std::nullopt) const {
        if (!has(key)) {
            if (fallback) return *fallback;
            throw Error(ErrorKind::InvalidArgument, std::string("scenario is missing '") + key + "'");
        }
        const json& j = s.doc.at(key);
        if (!j.is_number()) throw Error(ErrorKind::ParseError, std::string("'") + key + "' must be a number");
        return j.get<double>();
    }

    std::size_t count(const char* key, std::optional<std::size_t> fallback = std::nullopt) const {
        if (!has(key)) {
            if (fallback) return *fallback;
            throw Error(ErrorKind::InvalidArgument, std::string("scenario is missing '") + key + "'");
        }
        const json& j = s.doc.at(key);
        if (!j.is_number_unsigned())
            throw Error(ErrorKind::ParseError, std::string("'") + key + "' must be a nonnegative integer");
        return j.get<std::size_t>();
    }

    bool flag(const char* key) const {
        if (!has(key)) return false;
        const json& j = s.doc.at(key);
        if (!j.is_boolean()) throw Error(ErrorKind::ParseError, std::string("'") + key + "' must be true or false");
        return j.get<bool>();
    }

    /// Updates from "U"/"V" factor matrices or an "updates" list of {u, v}
    /// objects; empty when neither is present.
    UpdateSequence updates(std::size_t n) const {
        if (has("U") || has("V")) {
            const Matrix u = input_matrix("U");
            const Matrix v = input_matrix("V");
            if (u.rows() != n || v.rows() != n)
                throw Error(ErrorKind::DimensionMismatch, "U and V must have " + std::to_string(n) + " rows");
            return UpdateSequence::from_factors(u, v);
        }
        UpdateSequence seq(n);
        if (has("updates")) {
            const json& j = s.doc.at("updates");
            if (!j.is_array()) throw Error(ErrorKind::ParseError, "'updates' must be a list of {u, v} objects");
            out.section("input updates " + std::to_string(j.size()));
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (!j[i].is_object() || !j[i].contains("u") || !j[i].contains("v"))
                    throw Error(ErrorKind::ParseError, "updates[" + std::to_string(i) + "] needs 'u' and 'v'");
                RankOneUpdate up{vector_from_json(j[i]["u"], "u"), vector_from_json(j[i]["v"], "v")};
                out.line("u = " + format_vector(up.u) + " ; v = " + format_vector(up.v));
                seq.push_back(std::move(up));
            }
        }
        return seq;
    }

    /// U and V as n x r matrices (r may be 0 when absent).
    std::pair<Matrix, Matrix> factors(std::size_t n) const {
        if (!has("U") && !has("V")) return {Matrix(n, 0), Matrix(n, 0)};
        Matrix u = input_matrix("U");
        Matrix v = input_matrix("V");
        if (u.rows() != n || v.rows() != n || u.cols() != v.cols())
            throw Error(ErrorKind::DimensionMismatch, "U is " + u.shape() + " and V is " + v.shape() +
                                                          " but the base matrix has " + std::to_string(n) + " rows");
        return {u, v};
    }

    OptTolerance tolerance() const {
        std::optional<double> rel = opt.env_tol_rel;
        std::optional<double> abs;
        std::string source = rel ? "env" : "default";
        if (has("tol_rel")) {
            rel = number("tol_rel");
            source = "scenario";
        }
        if (has("tolerance")) {
            const json& t = s.doc.at("tolerance");
            if (!t.is_object()) throw Error(ErrorKind::ParseError, "'tolerance' must be an object");
            if (t.contains("rel")) {
                if (!t["rel"].is_number()) throw Error(ErrorKind::ParseError, "'tolerance.rel' must be a number");
                rel = t["rel"].get<double>();
                source = "scenario";
            }
            if (t.contains("abs")) {
                if (!t["abs"].is_number()) throw Error(ErrorKind::ParseError, "'tolerance.abs' must be a number");
                abs = t["abs"].get<double>();
            }
        }
        if (opt.tol_rel) {
            rel = opt.tol_rel;
            source = "flag";
        }
        out.section("parameters");
        if (!rel && !abs) {
            out.kv("tol_rel", "default");
            return std::nullopt;
        }
        Tolerance tol;
        if (rel) tol.rel = *rel;
        if (abs) tol.abs = *abs;
        tol = tol.validated();
        out.kv("tol_rel", tol.rel);
        out.kv("tol_abs", tol.abs);
        out.kv("tol_source", source);
        return tol;
    }

    std::vector<double> schedule() const {
        std::vector<double> sched;
        if (has("eps_schedule") && !opt.eps_min) {
            sched = vector_from_json(s.doc.at("eps_schedule"), "eps_schedule");
        } else {
            const double eps_min = opt.eps_min ? *opt.eps_min : number("eps_min", 1e-8);
            sched = default_eps_schedule(eps_min);
        }
        out.kv("eps_schedule", format_vector(sched));
        return sched;
    }
};

inline Complex parse_lambda(const json& j) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return {j[0].get<double>(), j[1].get<double>()};
    throw Error(ErrorKind::ParseError, "lambda values must be numbers or [re, im] pairs");
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// --- per-kind runners -------------------------------------------------------

inline void run_det_update(Context& c) {
    const Matrix h = c.input_matrix("H");
    const RankOneUpdate up{c.input_vector("u"), c.input_vector("v")};
    const auto tol = c.tolerance();
    const double d = det_rank_one(h, up, tol);
    c.out.section("result");
    c.out.kv("det", d);
    c.out.kv("det_base", det(h, tol));
    Matrix full = h;
    full.add_outer(up.u, up.v);
    const double direct = det(full, tol);
    c.out.section("diagnostics");
    c.out.kv("direct_lu_det", direct);
    c.out.kv("abs_residual", std::abs(d - direct));
}

inline void run_det_sequence(Context& c) {
    const Matrix h = c.input_matrix("H");
    const auto seq = c.updates(h.rows());
    const auto tol = c.tolerance();
    const bool product = c.has("form") && c.s.doc.at("form") == "product";
    c.out.kv("form", product ? "product" : "additive");
    if (product) {
        const auto tr = det_product(h, seq, tol);
        c.out.section("trace product");
        c.out.line("k,det,factor");
        c.out.line("0," + format_double(tr.values[0]) + ",");
        for (std::size_t k = 0; k < tr.factors.size(); ++k)
            c.out.line(std::to_string(k + 1) + "," + format_double(tr.values[k + 1]) + "," + format_double(tr.factors[k]));
        c.out.section("result");
        c.out.kv("det", tr.final_det());
        return;
    }
    const auto tr = det_sequence(h, seq, tol);
    c.out.section("trace additive");
    c.out.line("k,det,increment");
    c.out.line("0," + format_double(tr.values[0]) + ",");
    for (std::size_t k = 0; k < tr.increments.size(); ++k)
        c.out.line(std::to_string(k + 1) + "," + format_double(tr.values[k + 1]) + "," + format_double(tr.increments[k]));
    c.out.section("result");
    c.out.kv("det", tr.final_value());
    c.out.section("diagnostics");
    const double direct = det(seq.applied_to(h), tol);
    c.out.kv("direct_lu_det", direct);
    c.out.kv("abs_residual", std::abs(tr.final_value() - direct));
}

inline void run_logdet(Context& c) {
    const Matrix h = c.input_matrix("H");
    const auto seq = c.updates(h.rows());
    const auto tol = c.tolerance();
    const auto tr = logdet_sequence(h, seq, tol);
    c.out.section("trace");
    c.out.line("k,det,factor,log_increment");
    c.out.line("0," + format_double(tr.values[0]) + ",,");
    for (std::size_t k = 0; k < tr.factors.size(); ++k)
        c.out.line(std::to_string(k + 1) + "," + format_double(tr.values[k + 1]) + "," + format_double(tr.factors[k]) +
                   "," + format_double(tr.log_increments[k]));
    c.out.section("result");
    c.out.kv("logdet_base", *tr.base_logdet);
    c.out.kv("logdet", *tr.final_logdet());
    c.out.kv("det", tr.final_det());
    if (c.flag("contributions")) {
        const Tolerance t = resolve(tol, h.rows());
        if (max_abs_diff(h, Matrix::identity(h.rows())) > t.threshold(1.0))
            throw Error(ErrorKind::InvalidArgument, "contribution analysis is defined for H = I");
        const auto rep = contribution_analysis(seq, tol);
        c.out.section("contributions");
        c.out.line("k,quadratic_form,weighted_sum,log_increment,weights");
        for (std::size_t k = 0; k < rep.steps.size(); ++k) {
            const auto& st = rep.steps[k];
            c.out.line(std::to_string(k + 1) + "," + format_double(st.quadratic_form) + "," +
                       format_double(st.weighted_sum) + "," + format_double(st.log_increment) + "," +
                       format_vector(st.weights));
        }
        c.out.kv("total_logdet_change", rep.total_logdet());
    }
}

inline void run_drazin(Context& c) {
    const Matrix h = c.input_matrix("H");
    const auto tol = c.tolerance();
    const auto g = group_inverse(h, tol);
    c.out.section("result");
    c.out.kv("rank", g.rank_q);
    c.out.kv("nullity", g.nullity_nu);
    c.out.matrix("H_drazin", g.h_drazin);
    c.out.matrix("P0", g.projector);
    const double scale = std::max(1.0, frobenius_norm(h) * frobenius_norm(g.h_drazin));
    c.out.section("diagnostics");
    c.out.kv("commute_residual", frobenius_norm(h * g.h_drazin - g.h_drazin * h) / scale);
    c.out.kv("reflexive_residual",
             frobenius_norm(g.h_drazin * h * g.h_drazin - g.h_drazin) / std::max(1.0, frobenius_norm(g.h_drazin)));
    c.out.kv("index_residual", frobenius_norm(h * h * g.h_drazin - h) / std::max(1.0, frobenius_norm(h)));
}

inline void run_pdet(Context& c) {
    const Matrix h = c.input_matrix("H");
    const auto tol = c.tolerance();
    const auto p = pdet(h, tol);
    c.out.section("result");
    c.out.kv("pdet", p.value);
    c.out.kv("nullity", p.nullity);
    c.out.kv("method", to_string(p.method));
    if (p.value > 0) c.out.kv("log_pdet", std::log(p.value));
    c.out.section("diagnostics");
    try {
        const auto e = pdet_eigenproduct(h, tol);
        c.out.kv("eigenproduct", e.value);
        c.out.kv("eigenproduct_nullity", e.nullity);
        c.out.kv("rel_difference", rel_diff(e.value, p.value));
    } catch (const Error& e) {
        c.out.kv("eigenproduct", std::string("unavailable (") + std::string(to_string(e.kind())) + ")");
    }
}

inline void print_compatibility(ReportWriter& out, const CompatibilityReport& r) {
    out.section("compatibility");
    out.kv("norm_P0U", r.norm_P0U);
    out.kv("threshold_U", r.threshold_U);
    out.kv("norm_VtP0", r.norm_VtP0);
    out.kv("threshold_V", r.threshold_V);
    out.kv("pass", r.pass);
}

inline void run_pdet_lemma(Context& c) {
    const Matrix h = c.input_matrix("H");
    const auto [u, v] = c.factors(h.rows());
    const auto tol = c.tolerance();
    const auto rep = compatibility_check(h, u, v, tol);
    print_compatibility(c.out, rep);
    const double value = pdet_lemma(h, u, v, tol);
    c.out.section("result");
    c.out.kv("pdet_lemma", value);
    c.out.kv("pdet_base", pdet(h, tol).value);
    c.out.section("diagnostics");
    try {
        const double direct = pdet(h + u * v.transpose(), tol).value;
        c.out.kv("pdet_direct", direct);
        c.out.kv("rel_difference", rel_diff(value, direct));
    } catch (const Error& e) {
        c.out.kv("pdet_direct", std::string("unavailable (") + std::string(to_string(e.kind())) + ")");
    }
}

inline void run_regularized_limit(Context& c) {
    const Matrix h = c.input_matrix("H");
    const auto [u, v] = c.factors(h.rows());
    const auto tol = c.tolerance();
    const auto sched = c.schedule();
    const auto lim = regularized_limit(h, u, v, sched, tol);
    c.out.section("trace");
    c.out.line("eps,normalized_det");
    for (const auto& [e, val] : lim.per_eps) c.out.line(format_double(e) + "," + format_double(val));
    c.out.section("result");
    c.out.kv("estimate", lim.estimate);
    c.out.kv("nullity", lim.nullity);
    c.out.kv("pdet_lemma", lim.lemma_value);
    c.out.kv("rel_error", lim.lemma_rel_error);
    c.out.kv("converged", lim.converged);
}

inline void run_secular(Context& c) {
    const Matrix a = c.input_matrix("A");
    const auto prev = c.updates(a.rows());
    const RankOneUpdate up{c.input_vector("u"), c.input_vector("v")};
    const auto tol = c.tolerance();
    if (!c.has("lambda")) throw Error(ErrorKind::InvalidArgument, "scenario is missing 'lambda'");
    const json& lj = c.s.doc.at("lambda");
    std::vector<Complex> lambdas;
    // a list of points, each a number or an [re, im] pair
    if (lj.is_array())
        for (const auto& x : lj) lambdas.push_back(parse_lambda(x));
    else
        lambdas.push_back(parse_lambda(lj));
    const bool refine = c.flag("refine");
    c.out.section("result");
    c.out.line(refine ? "lambda,value,resolvent_cond_flag,refined_root" : "lambda,value,resolvent_cond_flag");
    for (const auto& lam : lambdas) {
        const auto ev = secular_value(a, prev, up, lam, tol);
        std::string row = format_complex(lam) + "," + format_complex(ev.value) + "," +
                          (ev.resolvent_cond_flag ? "true" : "false");
        if (refine) row += "," + format_complex(refine_secular_root(a, prev, up, lam));
        c.out.line(row);
    }
}

inline void run_stability(Context& c) {
    const Matrix a = c.input_matrix("A");
    const Vector u = c.input_vector("u");
    const Vector v = c.input_vector("v");
    const auto tol = c.tolerance();
    ContourOptions co;
    co.samples = c.count("samples", co.samples);
    const auto cert = stability_preserved(a, u, v, co, tol);
    c.out.section("result");
    c.out.kv("base_hurwitz", cert.base_hurwitz);
    c.out.kv("winding", cert.winding);
    c.out.kv("rhp_eigs_oracle", cert.rhp_eigs_oracle);
    c.out.kv("contour_radius", cert.contour_radius);
    c.out.kv("samples", cert.samples);
    c.out.kv("verdict", cert.stable() ? "stable" : "unstable");
}

inline void run_covariance(Context& c) {
    const Matrix p = c.input_matrix("P");
    const auto ups = c.input_vector_list("updates");
    const auto tol = c.tolerance();
    const auto tr = covariance_trace(p, ups, tol);
    c.out.section("trace");
    c.out.line("k,logdet,x,increment");
    c.out.line("0," + format_double(tr.logdets[0]) + ",,");
    for (std::size_t k = 0; k < tr.increments.size(); ++k)
        c.out.line(std::to_string(k + 1) + "," + format_double(tr.logdets[k + 1]) + "," +
                   format_double(tr.quadratic[k]) + "," + format_double(tr.increments[k]));
    c.out.section("result");
    c.out.kv("logdet_change", tr.logdet_change());
    c.out.kv("sum_increments", tr.total_increment());
    c.out.kv("lower_bound", tr.lower_bound);
    c.out.kv("upper_bound", tr.upper_bound);
    c.out.section("diagnostics");
    c.out.kv("identity_residual", std::abs(tr.logdet_change() - tr.total_increment()));
}

inline void run_info_filter(Context& c) {
    const Matrix p = c.input_matrix("P");
    const auto ms = c.input_vector_list("measurements");
    const auto tol = c.tolerance();
    const auto tr = info_filter_trace(p, ms, tol);
    c.out.section("trace");
    c.out.line("k,det,quadratic,factor");
    c.out.line("0," + format_double(tr.dets[0]) + ",,");
    for (std::size_t k = 0; k < tr.factors.size(); ++k)
        c.out.line(std::to_string(k + 1) + "," + format_double(tr.dets[k + 1]) + "," + format_double(tr.quadratic[k]) +
                   "," + format_double(tr.factors[k]));
    c.out.section("result");
    c.out.kv("det_final", tr.dets.back());
    if (tr.beta) c.out.kv("beta", *tr.beta);
    if (tr.geometric_bound) c.out.kv("geometric_bound", *tr.geometric_bound);
}

inline GramianBuild gramian_inputs(Context& c) {
    const Matrix a = c.input_matrix("A");
    const Matrix b = c.input_matrix("B");
    const std::size_t n_h = c.count("horizon");
    c.out.section("input horizon");
    c.out.line(std::to_string(n_h));
    return build_gramian(a, b, n_h);
}

inline void run_gramian(Context& c) {
    const auto g = gramian_inputs(c);
    const auto tol = c.tolerance();
    const auto sched = c.schedule();
    c.out.section("directions " + std::to_string(g.directions.size()));
    for (const auto& u : g.directions) c.out.line(format_vector(u));
    c.out.matrix("W", g.W);
    const auto gr = gramian_pdet_growth(g, sched, tol);
    c.out.section("trace eps");
    c.out.line("eps,det_regularized,identity_residual,normalized_det,scaled_product");
    for (const auto& r : gr.rows)
        c.out.line(format_double(r.eps) + "," + format_double(r.det_regularized) + "," +
                   format_double(r.identity_residual) + "," + format_double(r.normalized_det) + "," +
                   format_double(r.scaled_product));
    c.out.section("trace factors");
    std::string header = "l";
    for (const auto& r : gr.rows) header += ",eps=" + format_double(r.eps);
    c.out.line(header);
    for (std::size_t l = 0; l < g.directions.size(); ++l) {
        std::string row = std::to_string(l + 1);
        for (const auto& r : gr.rows) row += "," + format_double(r.factors[l]);
        c.out.line(row);
    }
    c.out.section("result");
    c.out.kv("rank", gr.rank_r);
    c.out.kv("pdet_estimate", gr.pdet_estimate);
    c.out.kv("pdet_product_route", gr.pdet_product_route);
    if (gr.log_pdet) c.out.kv("log_pdet", *gr.log_pdet);
    c.out.section("diagnostics");
    c.out.kv("direct_det", det(g.W, tol));
    try {
        c.out.kv("eigenproduct", pdet_eigenproduct(g.W, tol).value);
    } catch (const Error& e) {
        c.out.kv("eigenproduct", std::string("unavailable (") + std::string(to_string(e.kind())) + ")");
    }
}

inline void run_ellipse_plot(Context& c) {
    const auto g = gramian_inputs(c);
    const double eps = c.number("eps", 0.05);
    c.out.section("parameters");
    c.out.kv("eps", eps);
    std::string path = c.opt.svg_path;
    if (path.empty() && c.has("svg")) {
        std::filesystem::path p = c.s.doc.at("svg").get<std::string>();
        if (p.is_relative()) p = std::filesystem::path(c.s.base_dir) / p;
        path = p.string();
    }
    const std::string doc = emit_ellipse_svg(g, eps);
    const auto sums = regularized_partial_sums(g.directions, g.n(), eps);
    c.out.section("ellipses");
    c.out.line("l,semi_axis_a,semi_axis_b,rotation_rad,area");
    for (std::size_t k = 0; k < sums.size(); ++k) {
        const auto e = reach_ellipse(sums[k]);
        c.out.line(std::to_string(k) + "," + format_double(e.semi_axis_a) + "," + format_double(e.semi_axis_b) + "," +
                   format_double(e.rotation_rad) + "," + format_double(e.area));
    }
    c.out.section("result");
    c.out.kv("ellipses", sums.size());
    if (!path.empty()) {
        write_ellipse_svg(g, eps, path);
        c.out.kv("svg", "written");
    } else {
        c.out.kv("svg", "not written (no --svg path)");
    }
    c.out.kv("svg_bytes", doc.size());
}

inline void run_perturb_experiment(Context& c) {
    const auto g = gramian_inputs(c);
    const auto tol = c.tolerance();
    const auto sched = c.schedule();
    const double noise = c.number("noise_scale");
    const std::size_t trials = c.count("trials", 100);
    const std::uint64_t seed = c.opt.seed ? *c.opt.seed : c.count("seed", 0);
    c.out.kv("noise_scale", noise);
    c.out.kv("trials", trials);
    c.out.kv("seed", std::to_string(seed));
    const auto ex = perturbed_gramian_experiment(g, noise, trials, seed, sched, tol);
    c.out.section("trials");
    c.out.line("trial,seed,rank,pdet,converged");
    for (std::size_t k = 0; k < ex.trials.size(); ++k) {
        const auto& t = ex.trials[k];
        c.out.line(std::to_string(k) + "," + std::to_string(t.seed) + "," + std::to_string(t.rank) + "," +
                   format_double(t.pdet) + "," + (t.converged ? "true" : "false"));
    }
    c.out.section("factors");
    c.out.line("l,nominal,mean_perturbed");
    for (std::size_t l = 0; l < ex.nominal_factors.size(); ++l)
        c.out.line(std::to_string(l + 1) + "," + format_double(ex.nominal_factors[l]) + "," +
                   (trials ? format_double(ex.mean_factors[l]) : std::string()));
    c.out.section("result");
    c.out.kv("nominal_rank", ex.nominal_rank);
    c.out.kv("nominal_pdet", ex.nominal_pdet);
    c.out.kv("mean_perturbed_pdet", ex.mean_pdet);
    c.out.kv("rank_increases", ex.rank_increases);
}

}  // namespace detail

/// Runs one scenario. Never throws for library or input errors; they are
/// rendered into the report and mapped to the exit code.
inline Report run_scenario(const Scenario& s, const RunOptions& opt = {}) {
    detail::ReportWriter out;
    out.line("detdyn report");
    out.kv("kind", s.kind);
    Report rep;
    auto fail = [&](const Error& e, const char* status) {
        out.section("error");
        out.kv("kind", std::string(to_string(e.kind())));
        out.kv("message", std::string(e.what()));
        if (const auto* se = dynamic_cast<const StepError*>(&e)) out.kv("step", se->step());
        if (const auto* pe = dynamic_cast<const ParseError*>(&e)) {
            out.kv("line", pe->line());
            out.kv("column", pe->column());
        }
        if (const auto* ce = dynamic_cast<const CompatibilityViolated*>(&e)) detail::print_compatibility(out, ce->report());
        if (const auto* ne = dynamic_cast<const NotConverged*>(&e)) {
            out.section("not-converged");
            out.line("eps,value");
            for (const auto& [x, y] : ne->table()) out.line(format_double(x) + "," + format_double(y));
        }
        rep.exit_code = exit_code_for(e.category());
        out.line(std::string("status: ") + status);
    };
    try {
        if (!is_scenario_kind(s.kind)) throw Error(ErrorKind::InvalidArgument, "unknown scenario kind '" + s.kind + "'");
        detail::Context c{s, opt, out};
        using Fn = void (*)(detail::Context&);
        static const std::array<std::pair<std::string_view, Fn>, 14> table = {{
            {"det-update", detail::run_det_update},
            {"det-sequence", detail::run_det_sequence},
            {"logdet", detail::run_logdet},
            {"drazin", detail::run_drazin},
            {"pdet", detail::run_pdet},
            {"pdet-lemma", detail::run_pdet_lemma},
            {"regularized-limit", detail::run_regularized_limit},
            {"secular", detail::run_secular},
            {"stability", detail::run_stability},
            {"covariance", detail::run_covariance},
            {"info-filter", detail::run_info_filter},
            {"gramian", detail::run_gramian},
            {"ellipse-plot", detail::run_ellipse_plot},
            {"perturb-experiment", detail::run_perturb_experiment},
        }};
        for (const auto& [k, fn] : table)
            if (k == s.kind) fn(c);
        out.line("status: ok");
        rep.exit_code = 0;
    } catch (const Error& e) {
        const auto cat = e.category();
        fail(e, cat == ErrorCategory::Input        ? "input-error"
                : cat == ErrorCategory::Hypothesis ? "hypothesis-violation"
                                                   : "numerical-diagnostic");
    } catch (const json::exception& e) {
        fail(Error(ErrorKind::ParseError, e.what()), "input-error");
    }
    out.kv("exit_code", rep.exit_code);
    rep.text = out.text();
    return rep;
}

}  // namespace detdyn::cli
