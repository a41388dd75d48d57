#pragma once

// Artifact serialization: solution documents as JSON, iteration traces and
// margin/violation tables as CSV. All writers are deterministic so a fixed
// seed reproduces byte-identical files.

#include <cinttypes>
#include <cstdint>
#include <json.hpp>
#include <string>

#include "ccopf/case_format.hpp"
#include "ccopf/cc_algorithm.hpp"
#include "ccopf/validation.hpp"

namespace ccopf {

using ordered_json = nlohmann::ordered_json;

/// FNV-1a hash of the canonical case serialization; ties solution files to
/// the network they were produced from.
inline std::uint64_t case_fingerprint(const Network& net) {
    std::string text = serialize_case(net);
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : text) h = (h ^ c) * 0x100000001B3ull;
    return h;
}

inline std::string fingerprint_hex(std::uint64_t fp) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, fp);
    return buf;
}

namespace detail {

inline ordered_json vec_json(const Eigen::VectorXd& v) {
    ordered_json a = ordered_json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline Eigen::VectorXd vec_from(const ordered_json& a) {
    Eigen::VectorXd v(a.size());
    for (size_t i = 0; i < a.size(); ++i) v[static_cast<int>(i)] = a[i].get<double>();
    return v;
}

inline ordered_json mat_json(const Eigen::MatrixXd& m) {
    ordered_json rows = ordered_json::array();
    for (int r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r).transpose()));
    return rows;
}

inline Eigen::MatrixXd mat_from(const ordered_json& rows) {
    int nr = static_cast<int>(rows.size());
    int nc = nr ? static_cast<int>(rows[0].size()) : 0;
    Eigen::MatrixXd m(nr, nc);
    for (int r = 0; r < nr; ++r)
        for (int c = 0; c < nc; ++c) m(r, c) = rows[r][c].get<double>();
    return m;
}

}  // namespace detail

inline ordered_json solution_to_json(const CcSolution& sol, const Network& net) {
    ordered_json j;
    j["format"] = "ccopf-solution-v1";
    j["case"] = {{"name", net.name}, {"fingerprint", fingerprint_hex(case_fingerprint(net))}};
    j["mode"] = sol.mode;
    j["epsilon"] = sol.epsilon;
    j["converged"] = sol.converged;
    j["objective_per_hour"] = sol.objective;
    j["iterations"] = sol.trace.records.size();
    j["cg_active_count"] = sol.cg_active_count;
    j["operating_point"] = {{"v_mag", detail::vec_json(sol.op.v_mag)},
                            {"v_ang", detail::vec_json(sol.op.v_ang)},
                            {"gen_p", detail::vec_json(sol.op.gen_p)},
                            {"gen_q", detail::vec_json(sol.op.gen_q)},
                            {"hvdc_p", detail::vec_json(sol.op.hvdc_p)},
                            {"hvdc_q", detail::vec_json(sol.op.hvdc_q)},
                            {"wind_p", detail::vec_json(sol.op.wind_p)},
                            {"wind_q", detail::vec_json(sol.op.wind_q)}};
    j["policies"] = {{"alpha", detail::vec_json(sol.policies.alpha)},
                     {"beta", detail::vec_json(sol.policies.beta)},
                     {"gamma", detail::vec_json(sol.policies.gamma)}};
    j["margins"] = {{"pg", detail::vec_json(sol.margins.pg)},
                    {"qg", detail::vec_json(sol.margins.qg)},
                    {"v", detail::vec_json(sol.margins.v)},
                    {"pl", detail::vec_json(sol.margins.pl)},
                    {"pc", detail::vec_json(sol.margins.pc)}};
    j["wind_model"] = {{"mean", detail::vec_json(sol.wind.mean())},
                       {"covariance", detail::mat_json(sol.wind.covariance())}};
    ordered_json binding = ordered_json::array();
    for (const auto& b : sol.last_opf.binding) binding.push_back(b);
    j["binding"] = binding;
    if (sol.last_opf.degenerate_alpha)
        j["notes"] = "participation factors may be non-unique (several interior values)";
    return j;
}

inline CcSolution solution_from_json(const ordered_json& j, const Network& net) {
    if (j.value("format", "") != std::string("ccopf-solution-v1"))
        throw std::runtime_error("unrecognized solution format");
    std::string fp = j.at("case").at("fingerprint").get<std::string>();
    if (fp != fingerprint_hex(case_fingerprint(net)))
        throw std::runtime_error("solution fingerprint does not match the case file");
    CcSolution sol;
    sol.mode = j.value("mode", "");
    sol.epsilon = j.at("epsilon").get<double>();
    sol.converged = j.at("converged").get<bool>();
    sol.objective = j.at("objective_per_hour").get<double>();
    sol.cg_active_count = j.value("cg_active_count", -1);
    const auto& op = j.at("operating_point");
    sol.op.v_mag = detail::vec_from(op.at("v_mag"));
    sol.op.v_ang = detail::vec_from(op.at("v_ang"));
    sol.op.gen_p = detail::vec_from(op.at("gen_p"));
    sol.op.gen_q = detail::vec_from(op.at("gen_q"));
    sol.op.hvdc_p = detail::vec_from(op.at("hvdc_p"));
    sol.op.hvdc_q = detail::vec_from(op.at("hvdc_q"));
    sol.op.wind_p = detail::vec_from(op.at("wind_p"));
    sol.op.wind_q = detail::vec_from(op.at("wind_q"));
    sol.op.p_inj.resize(net.num_buses());
    sol.op.q_inj.resize(net.num_buses());
    calc_injections(build_ybus(net), sol.op.v_mag, sol.op.v_ang, sol.op.p_inj, sol.op.q_inj);
    sol.op.solved = sol.converged;
    const auto& pol = j.at("policies");
    sol.policies.alpha = detail::vec_from(pol.at("alpha"));
    sol.policies.beta = detail::vec_from(pol.at("beta"));
    sol.policies.gamma = detail::vec_from(pol.at("gamma"));
    const auto& m = j.at("margins");
    sol.margins.pg = detail::vec_from(m.at("pg"));
    sol.margins.qg = detail::vec_from(m.at("qg"));
    sol.margins.v = detail::vec_from(m.at("v"));
    sol.margins.pl = detail::vec_from(m.at("pl"));
    sol.margins.pc = detail::vec_from(m.at("pc"));
    const auto& w = j.at("wind_model");
    sol.wind = WindModel(detail::vec_from(w.at("mean")), detail::mat_from(w.at("covariance")));
    return sol;
}

namespace detail {

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace detail

/// Iteration trace: one row per outer iteration with the margin stability
/// measure and the policy values. Wall time is deliberately not exported.
inline std::string trace_csv(const IterationTrace& trace) {
    std::ostringstream os;
    int na = trace.records.empty() ? 0 : static_cast<int>(trace.records.front().alpha.size());
    int nb = trace.records.empty() ? 0 : static_cast<int>(trace.records.front().beta.size());
    os << "iteration,objective,max_margin_delta,damped";
    for (int k = 0; k < na; ++k) os << ",alpha_" << k;
    for (int c = 0; c < nb; ++c) os << ",beta_" << c;
    os << "\n";
    for (const auto& r : trace.records) {
        os << r.iteration << "," << detail::num(r.objective) << ","
           << (std::isfinite(r.margin_delta) ? detail::num(r.margin_delta) : "inf") << ","
           << (r.damped ? 1 : 0);
        for (int k = 0; k < na; ++k) os << "," << detail::num(r.alpha[k]);
        for (int c = 0; c < nb; ++c) os << "," << detail::num(r.beta[c]);
        os << "\n";
    }
    return os.str();
}

inline std::string margins_csv(const Network& net, const MarginSet& m) {
    std::ostringstream os;
    os << "quantity,element,margin_pu,margin_mw\n";
    auto emit = [&](const char* cls, int idx, const std::string& tag, double v) {
        os << cls << "," << tag << "," << detail::num(v) << "," << detail::num(net.to_mw(v)) << "\n";
        (void)idx;
    };
    for (int g = 0; g < net.num_gens(); ++g)
        emit("pg", g, "gen" + std::to_string(g) + "@" + std::to_string(net.generators[g].bus),
             m.pg[g]);
    for (int g = 0; g < net.num_gens(); ++g)
        emit("qg", g, "gen" + std::to_string(g) + "@" + std::to_string(net.generators[g].bus),
             m.qg[g]);
    for (int b = 0; b < net.num_buses(); ++b)
        emit("v", b, "bus" + std::to_string(net.buses[b].id), m.v[b]);
    for (int l = 0; l < net.num_lines(); ++l)
        emit("pl", l,
             "line" + std::to_string(net.ac_lines[l].from) + "-" +
                 std::to_string(net.ac_lines[l].to),
             m.pl[l]);
    for (int t = 0; t < net.num_terminals(); ++t)
        emit("pc", t,
             "hvdc" + std::to_string(t / 2) + (t % 2 == 0 ? ".from" : ".to"), m.pc[t]);
    return os.str();
}

/// Per-row dump of the response factors for debugging.
inline std::string gamma_csv(const Network& net, const SensitivityBundle& b) {
    std::ostringstream os;
    os << "quantity,element";
    for (int w = 0; w < net.num_wind(); ++w) os << ",w" << net.wind_farms[w].bus;
    os << "\n";
    auto rows = [&](const char* cls, const Eigen::MatrixXd& m, auto tag) {
        for (int r = 0; r < m.rows(); ++r) {
            os << cls << "," << tag(r);
            for (int c = 0; c < m.cols(); ++c) os << "," << detail::num(m(r, c));
            os << "\n";
        }
    };
    rows("state", b.gamma_state, [](int r) { return "xhat" + std::to_string(r); });
    rows("delta", b.gamma_delta, [](int r) { return "delta" + std::to_string(r); });
    rows("flow", b.gamma_flow, [&](int r) {
        return "line" + std::to_string(net.ac_lines[r].from) + "-" +
               std::to_string(net.ac_lines[r].to);
    });
    rows("genp", b.gamma_genp, [](int r) { return "gen" + std::to_string(r); });
    rows("hvdc", b.gamma_hvdc,
         [](int r) { return "hvdc" + std::to_string(r / 2) + (r % 2 == 0 ? ".from" : ".to"); });
    return os.str();
}

/// Violation report: per-element rows followed by meta rows; the exact
/// column schema is documented in the README.
inline std::string report_csv(const Network& net, const ViolationReport& rep) {
    std::ostringstream os;
    os << "class,element,rate_pct\n";
    auto emit = [&](const char* cls, const std::string& tag, double v) {
        os << cls << "," << tag << "," << detail::num(v) << "\n";
    };
    for (int g = 0; g < net.num_gens(); ++g)
        emit("pg", "gen" + std::to_string(g) + "@" + std::to_string(net.generators[g].bus),
             rep.rate_pg[g]);
    for (int g = 0; g < net.num_gens(); ++g)
        emit("qg", "gen" + std::to_string(g) + "@" + std::to_string(net.generators[g].bus),
             rep.rate_qg[g]);
    for (int b = 0; b < net.num_buses(); ++b)
        emit("v", "bus" + std::to_string(net.buses[b].id), rep.rate_v[b]);
    for (int l = 0; l < net.num_lines(); ++l)
        emit("pl",
             "line" + std::to_string(net.ac_lines[l].from) + "-" +
                 std::to_string(net.ac_lines[l].to),
             rep.rate_pl[l]);
    for (int t = 0; t < net.num_terminals(); ++t)
        emit("pc", "hvdc" + std::to_string(t / 2) + (t % 2 == 0 ? ".from" : ".to"),
             rep.rate_pc[t]);
    os << "meta,samples," << rep.samples << "\n";
    os << "meta,converged," << rep.converged << "\n";
    os << "meta,non_converged," << rep.non_converged << "\n";
    os << "meta,floor_pct," << detail::num(rep.floor_percent) << "\n";
    os << "summary,pg," << detail::num(rep.class_pg()) << "\n";
    os << "summary,qg," << detail::num(rep.class_qg()) << "\n";
    os << "summary,v," << detail::num(rep.class_v()) << "\n";
    os << "summary,pl," << detail::num(rep.class_pl()) << "\n";
    os << "summary,pc," << detail::num(rep.class_pc()) << "\n";
    return os.str();
}

inline std::string report_pretty(const Network& net, const ViolationReport& rep) {
    std::ostringstream os;
    os << "samples " << rep.samples << " (" << rep.non_converged << " power flows not converged)\n";
    os << "max empirical violation probability per class (%):\n";
    char buf[128];
    std::snprintf(buf, sizeof buf, "  P_G %6.2f   Q_G %6.2f   V %6.2f   P_L %6.2f   P_C %6.2f\n",
                  rep.class_pg(), rep.class_qg(), rep.class_v(), rep.class_pl(), rep.class_pc());
    os << buf;
    (void)net;
    return os.str();
}

}  // namespace ccopf
