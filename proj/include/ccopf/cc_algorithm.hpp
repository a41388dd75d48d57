#pragma once

// Outer iterative solution of the chance-constrained AC-OPF: alternate
// margin evaluation at the incumbent operating point with margin-tightened
// OPF solves until the margins stabilize, optionally accelerated by
// constraint generation over the cone-shaped margins.

#include <chrono>
#include <string>
#include <vector>

#include "ccopf/acopf.hpp"
#include "ccopf/sensitivity.hpp"

namespace ccopf {

enum class PolicyMode { Fixed, Optimize };

struct CcOptions {
    double epsilon = 0.05;
    double rho = 1e-5;
    int max_outer = 50;
    PolicyMode policy_mode = PolicyMode::Optimize;
    PolicySet fixed_policies;        // used in Fixed mode; beta source when fix_beta
    bool has_fixed_policies = false; // otherwise uniform participation is assumed
    bool fix_beta = false;           // optimize alpha only, hold beta at the fixed values
    bool constraint_generation = false;
    int max_cg_rounds = 20;
    double violation_tol = 1e-6;
    double beta_max = 1.0;
    int damping_after = 15;
    int verbose = 0;
    nlp::Options nlp;
};

struct IterationRecord {
    int iteration = 0;
    double objective = 0;
    MarginSet margins;          // evaluated at the iteration's solution
    double margin_delta = 0;    // infinity norm against the previous iteration
    Eigen::VectorXd alpha, beta;
    nlp::SolveStatus opf_status = nlp::SolveStatus::NumericalFailure;
    double wall_seconds = 0;    // diagnostic only, never exported
    bool damped = false;
};

struct IterationTrace {
    std::vector<IterationRecord> records;
    bool converged = false;
    std::string diagnosis;
};

struct CcSolution {
    OperatingPoint op;
    PolicySet policies;
    MarginSet margins;  // margins at the final point
    double objective = 0;
    double epsilon = 0.05;
    bool converged = false;
    IterationTrace trace;
    WindModel wind;
    std::string mode;        // det | cc-fixed | cc-opt, set by the driver
    int cg_active_count = -1;  // cone margins included when constraint generation ran
    OpfSolution last_opf;
};

/// Infinity norm of the margin change; vectors of different length are
/// compared with missing entries treated as zero (newly generated
/// constraints start from a zero margin).
inline double margin_convergence(const Eigen::VectorXd& now, const Eigen::VectorXd& prev) {
    Eigen::Index n = std::max(now.size(), prev.size());
    double worst = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double a = i < now.size() ? now[i] : 0.0;
        double b = i < prev.size() ? prev[i] : 0.0;
        worst = std::max(worst, std::abs(a - b));
    }
    return worst;
}

/// Worst violation of the margin-tightened limits at an operating point.
inline double margin_feasibility_violation(const Network& net, const OperatingPoint& op,
                                           const MarginSet& m) {
    double worst = 0;
    auto track = [&worst](double v) { worst = std::max(worst, v); };
    for (int g = 0; g < net.num_gens(); ++g) {
        track(op.gen_p[g] - (net.generators[g].p_max - m.pg[g]));
        track((net.generators[g].p_min + m.pg[g]) - op.gen_p[g]);
        track(op.gen_q[g] - (net.generators[g].q_max - m.qg[g]));
        track((net.generators[g].q_min + m.qg[g]) - op.gen_q[g]);
    }
    for (int b = 0; b < net.num_buses(); ++b) {
        track(op.v_mag[b] - (net.buses[b].v_max - m.v[b]));
        track((net.buses[b].v_min + m.v[b]) - op.v_mag[b]);
    }
    auto flows = line_flows(net, op);
    for (int l = 0; l < net.num_lines(); ++l) {
        track(flows[l].p_from - (net.ac_lines[l].p_max - m.pl[l]));
        track((-net.ac_lines[l].p_max + m.pl[l]) - flows[l].p_from);
    }
    for (int t = 0; t < net.num_terminals(); ++t) {
        double cap = net.hvdc_lines[t / 2].p_cap();
        track(op.hvdc_p[t] - (cap - m.pc[t]));
        track((-cap + m.pc[t]) - op.hvdc_p[t]);
    }
    return worst;
}

struct CgResult {
    OpfSolution sol;
    int rounds = 0;
    bool complete = false;
    std::vector<std::string> persistent_violations;
};

/// Constraint generation: start with only the policy-linear margins
/// (generator and HVDC active power), iteratively add the cone margins that
/// the incumbent violates, re-solve until the full margin set holds.
/// `problem.active` carries the growing set across calls.
inline CgResult constraint_generation_solve(OpfProblem& problem, const OperatingPoint& start,
                                            const nlp::WarmStart& warm = {}, int max_rounds = 20,
                                            double tol = 1e-6, const nlp::Options& nlp_opts = {}) {
    if (problem.margin_mode != MarginMode::AffinePolicies)
        throw std::invalid_argument("constraint generation requires the affine-in-policies mode");
    const Network& net = *problem.net;
    CgResult out;
    nlp::WarmStart ws = warm;
    OperatingPoint seed = start;
    for (int round = 0; round < max_rounds; ++round) {
        out.rounds = round + 1;
        out.sol = solve_acopf(problem, seed, ws, nlp_opts);
        if (!out.sol.ok()) return out;

        PolicySet pol = out.sol.policies;
        SensitivityBundle full = margins_from_response(net, *problem.response, pol, problem.wind,
                                                       problem.epsilon);
        // check the complete tightened set at the incumbent
        int added = 0;
        std::vector<std::string> violated;
        auto flows = line_flows(net, out.sol.op);
        for (int g = 0; g < net.num_gens(); ++g) {
            if (problem.active.qg[g]) continue;
            double v = std::max(
                out.sol.op.gen_q[g] - (net.generators[g].q_max - full.margins.qg[g]),
                (net.generators[g].q_min + full.margins.qg[g]) - out.sol.op.gen_q[g]);
            if (v > tol) {
                problem.active.qg[g] = 1;
                ++added;
                violated.push_back("gen" + std::to_string(g) + ".q");
            }
        }
        for (int b = 0; b < net.num_buses(); ++b) {
            if (problem.active.v[b]) continue;
            double v = std::max(out.sol.op.v_mag[b] - (net.buses[b].v_max - full.margins.v[b]),
                                (net.buses[b].v_min + full.margins.v[b]) - out.sol.op.v_mag[b]);
            if (v > tol) {
                problem.active.v[b] = 1;
                ++added;
                violated.push_back("bus" + std::to_string(net.buses[b].id) + ".v");
            }
        }
        for (int l = 0; l < net.num_lines(); ++l) {
            if (problem.active.pl[l]) continue;
            double v = std::max(
                flows[l].p_from - (net.ac_lines[l].p_max - full.margins.pl[l]),
                (-net.ac_lines[l].p_max + full.margins.pl[l]) - flows[l].p_from);
            if (v > tol) {
                problem.active.pl[l] = 1;
                ++added;
                violated.push_back("line" + std::to_string(net.ac_lines[l].from) + "-" +
                                   std::to_string(net.ac_lines[l].to) + ".p");
            }
        }
        if (added == 0) {
            out.complete = true;
            return out;
        }
        out.persistent_violations = violated;
        // margins changed, rebuild with the enlarged active set, warm start
        ws.valid = true;
        ws.y = out.sol.y;
        ws.w = out.sol.w;
        ws.s = out.sol.s;
        seed = out.sol.op;
    }
    out.sol.message = "constraint generation cycling after " + std::to_string(max_rounds) +
                      " rounds; persistent: " +
                      (out.persistent_violations.empty() ? "none" : out.persistent_violations[0]);
    return out;
}

/// The iterative chance-constrained AC-OPF. Iteration 0 solves with zero
/// margins and no policy variables; every further iteration freezes the
/// sensitivity factors at the incumbent, re-solves with margin-tightened
/// limits, and stops when the evaluated margins change less than rho in
/// the infinity norm and the tightened set is feasible at the final point.
inline CcSolution run_iterative_ccopf(const Network& net, const WindModel& wind,
                                      const CcOptions& opts) {
    if (!(opts.epsilon > 0 && opts.epsilon < 0.5)) throw std::domain_error("epsilon out of range");
    if (!(opts.rho > 0)) throw std::domain_error("rho must be positive");
    if (wind.dim() != net.num_wind())
        throw std::invalid_argument("wind model dimension does not match the network");

    PolicySet fixed = opts.has_fixed_policies ? opts.fixed_policies : PolicySet::uniform(net);
    fixed.validate(net);

    CcSolution cc;
    cc.epsilon = opts.epsilon;
    cc.wind = wind;

    Eigen::VectorXd wind_inj(net.num_wind());
    for (int w = 0; w < net.num_wind(); ++w)
        wind_inj[w] = net.wind_farms[w].p_forecast + (wind.dim() ? wind.mean()[w] : 0.0);

    auto now = [] { return std::chrono::steady_clock::now(); };
    auto secs = [](auto a, auto b) { return std::chrono::duration<double>(b - a).count(); };

    // iteration 0: zero margins, no policy variables
    auto t0 = now();
    OpfProblem det;
    det.net = &net;
    det.margin_mode = MarginMode::None;
    det.epsilon = opts.epsilon;
    det.wind = wind;
    det.policy.fixed = fixed;
    det.active = ActiveMargins::all(net);
    det.wind_injection = wind_inj;
    OpfSolution incumbent = solve_acopf(det, default_opf_start(net, wind_inj), {}, opts.nlp);
    {
        IterationRecord rec;
        rec.iteration = 0;
        rec.objective = incumbent.objective;
        rec.margins = MarginSet::zeros(net);
        rec.margin_delta = std::numeric_limits<double>::infinity();
        rec.alpha = fixed.alpha;
        rec.beta = fixed.beta;
        rec.opf_status = incumbent.status;
        rec.wall_seconds = secs(t0, now());
        cc.trace.records.push_back(rec);
    }
    if (!incumbent.ok()) {
        cc.trace.diagnosis = "initial OPF failed: " + incumbent.message;
        cc.last_opf = incumbent;
        return cc;
    }

    bool optimize = opts.policy_mode == PolicyMode::Optimize;
    MarginSet prev_margins = MarginSet::zeros(net);
    PolicySet pol = fixed;
    ActiveMargins active =
        opts.constraint_generation ? ActiveMargins::none(net) : ActiveMargins::all(net);
    LinearResponse lr_prev;
    bool have_lr_prev = false;
    nlp::WarmStart warm;

    for (int k = 1; k <= opts.max_outer; ++k) {
        auto tk = now();
        LinearResponse lr = build_linear_response(net, incumbent.op, fixed.gamma);
        bool damped = false;
        if (k > opts.damping_after && have_lr_prev) {
            for (size_t i = 0; i < lr.xhat.size(); ++i) {
                lr.xhat[i] = 0.5 * (lr.xhat[i] + lr_prev.xhat[i]);
                lr.delta[i] = 0.5 * (lr.delta[i] + lr_prev.delta[i]);
                lr.flow[i] = 0.5 * (lr.flow[i] + lr_prev.flow[i]);
            }
            damped = true;
        }
        lr_prev = lr;
        have_lr_prev = true;

        OpfProblem prob;
        prob.net = &net;
        prob.epsilon = opts.epsilon;
        prob.wind = wind;
        prob.policy.fixed = fixed;
        prob.policy.beta_max = opts.beta_max;
        prob.wind_injection = wind_inj;
        prob.response = lr;
        prob.active = active;

        OpfSolution sol;
        if (optimize) {
            prob.margin_mode = MarginMode::AffinePolicies;
            prob.policy.optimize_alpha = true;
            prob.policy.optimize_beta = !opts.fix_beta;
            if (opts.constraint_generation) {
                CgResult cg = constraint_generation_solve(prob, incumbent.op, warm,
                                                          opts.max_cg_rounds, opts.violation_tol,
                                                          opts.nlp);
                sol = cg.sol;
                active = prob.active;  // keep the grown set for later iterations
                cc.cg_active_count = active.count();
                if (!cg.complete && sol.ok()) {
                    cc.trace.diagnosis = sol.message;
                }
            } else {
                sol = solve_acopf(prob, incumbent.op, warm, opts.nlp);
            }
        } else {
            prob.margin_mode = MarginMode::FixedValues;
            prob.fixed_margins =
                margins_from_response(net, lr, fixed, wind, opts.epsilon).margins;
            sol = solve_acopf(prob, incumbent.op, warm, opts.nlp);
        }

        if (!sol.ok()) {
            cc.trace.diagnosis =
                "OPF failed at outer iteration " + std::to_string(k) + ": " + sol.message;
            cc.last_opf = sol;
            break;
        }
        pol = sol.policies;

        SensitivityBundle fresh = margins_for_all_constraints(net, sol.op, pol, wind, opts.epsilon);
        double delta = margin_convergence(fresh.margins.stacked(), prev_margins.stacked());
        double cert = margin_feasibility_violation(net, sol.op, fresh.margins);

        IterationRecord rec;
        rec.iteration = k;
        rec.objective = sol.objective;
        rec.margins = fresh.margins;
        rec.margin_delta = delta;
        rec.alpha = pol.alpha;
        rec.beta = pol.beta;
        rec.opf_status = sol.status;
        rec.wall_seconds = secs(tk, now());
        rec.damped = damped;
        cc.trace.records.push_back(rec);
        if (opts.verbose)
            std::printf("outer %2d  obj %.6e  |dlam| %9.3e  cert %9.3e\n", k, sol.objective, delta,
                        cert);

        incumbent = sol;
        prev_margins = fresh.margins;
        warm.valid = true;
        warm.y = sol.y;
        warm.w = sol.w;
        warm.s = sol.s;

        if (delta <= opts.rho && cert <= opts.violation_tol) {
            cc.converged = true;
            break;
        }
    }

    if (!cc.converged && cc.trace.diagnosis.empty())
        cc.trace.diagnosis = "margins did not stabilize within " +
                             std::to_string(opts.max_outer) + " outer iterations";
    cc.trace.converged = cc.converged;
    cc.op = incumbent.op;
    cc.policies = pol;
    cc.margins = prev_margins;
    cc.objective = incumbent.objective;
    cc.last_opf = incumbent;
    return cc;
}

/// Deterministic study wrapped in the same result shape: zero margins,
/// uniform replay policies attached for validation.
inline CcSolution run_deterministic(const Network& net, const WindModel& wind,
                                    const CcOptions& opts) {
    CcSolution cc;
    cc.epsilon = opts.epsilon;
    cc.wind = wind;
    cc.mode = "det";

    Eigen::VectorXd wind_inj(net.num_wind());
    for (int w = 0; w < net.num_wind(); ++w)
        wind_inj[w] = net.wind_farms[w].p_forecast + (wind.dim() ? wind.mean()[w] : 0.0);

    OpfProblem det;
    det.net = &net;
    det.margin_mode = MarginMode::None;
    det.epsilon = opts.epsilon;
    det.wind = wind;
    det.policy.fixed = opts.has_fixed_policies ? opts.fixed_policies : PolicySet::uniform(net);
    det.active = ActiveMargins::all(net);
    det.wind_injection = wind_inj;
    OpfSolution sol = solve_acopf(det, default_opf_start(net, wind_inj), {}, opts.nlp);
    IterationRecord rec;
    rec.iteration = 0;
    rec.objective = sol.objective;
    rec.margins = MarginSet::zeros(net);
    rec.margin_delta = 0;
    rec.alpha = det.policy.fixed.alpha;
    rec.beta = det.policy.fixed.beta;
    rec.opf_status = sol.status;
    cc.trace.records.push_back(rec);
    cc.converged = sol.ok();
    cc.trace.converged = cc.converged;
    if (!sol.ok()) cc.trace.diagnosis = sol.message;
    cc.op = sol.op;
    cc.policies = det.policy.fixed;
    cc.margins = MarginSet::zeros(net);
    cc.objective = sol.objective;
    cc.last_opf = sol;
    return cc;
}

}  // namespace ccopf
