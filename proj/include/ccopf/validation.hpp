#pragma once

// Monte Carlo security assessment: replay forecast-error samples through
// the affine response policies and full nonlinear power flows, count
// empirical violations of the physical limits, and compare formulations.

#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "ccopf/cc_algorithm.hpp"
#include "ccopf/sampling.hpp"

namespace ccopf {

struct ViolationReport {
    // per-element empirical violation rates in percent, after flooring
    Eigen::VectorXd rate_pg, rate_qg, rate_v, rate_pl, rate_pc;
    int samples = 0;
    int converged = 0;
    int non_converged = 0;
    double floor_percent = 0.1;
    bool floor_applied = true;

    double class_pg() const { return rate_pg.size() ? rate_pg.maxCoeff() : 0.0; }
    double class_qg() const { return rate_qg.size() ? rate_qg.maxCoeff() : 0.0; }
    double class_v() const { return rate_v.size() ? rate_v.maxCoeff() : 0.0; }
    double class_pl() const { return rate_pl.size() ? rate_pl.maxCoeff() : 0.0; }
    double class_pc() const { return rate_pc.size() ? rate_pc.maxCoeff() : 0.0; }
    double worst_class() const {
        return std::max({class_pg(), class_qg(), class_v(), class_pl(), class_pc()});
    }
};

/// Replays every sample through apply_response_policy and a full nonlinear
/// power flow, then evaluates the original physical limits (not the
/// tightened ones). Raw rates below the 0.1% floor are reported as zero;
/// non-converged samples are counted separately and excluded from the
/// rate denominators.
inline ViolationReport monte_carlo(const Network& net, const CcSolution& solution,
                                   const SampleSet& samples, double guard = 1e-9) {
    if (samples.dims() != net.num_wind())
        throw std::invalid_argument("monte_carlo: sample dimension does not match the wind farms");
    ViolationReport rep;
    rep.samples = samples.count();
    Eigen::VectorXi c_pg = Eigen::VectorXi::Zero(net.num_gens());
    Eigen::VectorXi c_qg = Eigen::VectorXi::Zero(net.num_gens());
    Eigen::VectorXi c_v = Eigen::VectorXi::Zero(net.num_buses());
    Eigen::VectorXi c_pl = Eigen::VectorXi::Zero(net.num_lines());
    Eigen::VectorXi c_pc = Eigen::VectorXi::Zero(net.num_terminals());

    PfOptions pf_opts;
    for (int si = 0; si < samples.count(); ++si) {
        Eigen::VectorXd omega = samples.data.row(si).transpose();
        InjectionSpec spec = apply_response_policy(solution.op, solution.policies, net, omega);
        PfResult pf = solve_power_flow(net, spec, solution.op, pf_opts);
        if (!pf.converged) {
            rep.non_converged++;
            continue;
        }
        rep.converged++;
        const OperatingPoint& op = pf.op;
        for (int g = 0; g < net.num_gens(); ++g) {
            const Generator& gen = net.generators[g];
            if (op.gen_p[g] > gen.p_max + guard || op.gen_p[g] < gen.p_min - guard) c_pg[g]++;
            if (op.gen_q[g] > gen.q_max + guard || op.gen_q[g] < gen.q_min - guard) c_qg[g]++;
        }
        for (int b = 0; b < net.num_buses(); ++b)
            if (op.v_mag[b] > net.buses[b].v_max + guard || op.v_mag[b] < net.buses[b].v_min - guard)
                c_v[b]++;
        auto flows = line_flows(net, op);
        for (int l = 0; l < net.num_lines(); ++l)
            if (std::abs(flows[l].p_from) > net.ac_lines[l].p_max + guard) c_pl[l]++;
        for (int t = 0; t < net.num_terminals(); ++t)
            if (std::abs(op.hvdc_p[t]) > net.hvdc_lines[t / 2].p_cap() + guard) c_pc[t]++;
    }

    auto to_rates = [&](const Eigen::VectorXi& counts) {
        Eigen::VectorXd r(counts.size());
        for (int i = 0; i < counts.size(); ++i) {
            double pct = rep.converged > 0 ? 100.0 * counts[i] / rep.converged : 0.0;
            r[i] = (rep.floor_applied && pct < rep.floor_percent) ? 0.0 : pct;
        }
        return r;
    };
    rep.rate_pg = to_rates(c_pg);
    rep.rate_qg = to_rates(c_qg);
    rep.rate_v = to_rates(c_v);
    rep.rate_pl = to_rates(c_pl);
    rep.rate_pc = to_rates(c_pc);
    return rep;
}

/// Relative generation-cost increase of a chance-constrained solution over
/// the uncertainty-blind one, in percent.
inline double cost_of_uncertainty(double f_u, double f_0) {
    if (!(f_0 > 0)) throw std::domain_error("cost_of_uncertainty: baseline cost must be positive");
    return (f_u - f_0) / f_0 * 100.0;
}

struct ComparisonTable {
    std::vector<std::string> labels;
    std::vector<ViolationReport> reports;
    std::vector<double> objectives;

    std::string to_csv() const {
        std::ostringstream os;
        os << "metric";
        for (const auto& l : labels) os << "," << l;
        os << "\n";
        auto row = [&](const char* name, auto getter) {
            os << name;
            for (const auto& r : reports) os << "," << getter(r);
            os << "\n";
        };
        os << std::setprecision(10);
        row("rate_pg_pct", [](const ViolationReport& r) { return r.class_pg(); });
        row("rate_qg_pct", [](const ViolationReport& r) { return r.class_qg(); });
        row("rate_v_pct", [](const ViolationReport& r) { return r.class_v(); });
        row("rate_pl_pct", [](const ViolationReport& r) { return r.class_pl(); });
        row("rate_pc_pct", [](const ViolationReport& r) { return r.class_pc(); });
        os << "non_converged";
        for (const auto& r : reports) os << "," << r.non_converged;
        os << "\nobjective_per_h";
        for (double f : objectives) os << "," << f;
        os << "\ncost_of_uncertainty_pct";
        for (double f : objectives)
            os << "," << cost_of_uncertainty(f, objectives.front());
        os << "\n";
        return os.str();
    }

    std::string to_pretty() const {
        std::ostringstream os;
        size_t w = 16;
        for (const auto& l : labels) w = std::max(w, l.size() + 2);
        int cw = static_cast<int>(w);
        os << std::left << std::setw(26) << "constraint class";
        for (const auto& l : labels) os << std::right << std::setw(cw) << l;
        os << "\n";
        auto row = [&](const char* name, auto getter) {
            os << std::left << std::setw(26) << name << std::fixed << std::setprecision(2);
            for (const auto& r : reports) os << std::right << std::setw(cw) << getter(r);
            os.unsetf(std::ios_base::floatfield);
            os << "\n";
        };
        row("P_G (%)", [](const ViolationReport& r) { return r.class_pg(); });
        row("Q_G (%)", [](const ViolationReport& r) { return r.class_qg(); });
        row("V (%)", [](const ViolationReport& r) { return r.class_v(); });
        row("P_L (%)", [](const ViolationReport& r) { return r.class_pl(); });
        row("P_C (%)", [](const ViolationReport& r) { return r.class_pc(); });
        os << std::left << std::setw(26) << "objective ($/h)";
        for (double f : objectives)
            os << std::right << std::setw(cw) << std::fixed << std::setprecision(1) << f;
        os << "\n" << std::left << std::setw(26) << "cost of uncertainty (%)";
        for (double f : objectives)
            os << std::right << std::setw(cw) << std::setprecision(3)
               << cost_of_uncertainty(f, objectives.front());
        os << "\n";
        return os.str();
    }
};

/// Side-by-side comparison in the shape of the violation-probability
/// tables: one column per run, the first run is the cost baseline.
inline ComparisonTable compare_runs(const std::vector<ViolationReport>& reports,
                                    const std::vector<double>& objectives,
                                    std::vector<std::string> labels = {}) {
    if (reports.empty()) throw std::invalid_argument("compare_runs: no runs");
    if (reports.size() != objectives.size())
        throw std::invalid_argument("compare_runs: reports and objectives differ in length");
    ComparisonTable t;
    t.reports = reports;
    t.objectives = objectives;
    if (labels.empty())
        for (size_t i = 0; i < reports.size(); ++i) labels.push_back("run" + std::to_string(i));
    if (labels.size() != reports.size())
        throw std::invalid_argument("compare_runs: label count mismatch");
    t.labels = std::move(labels);
    return t;
}

}  // namespace ccopf
