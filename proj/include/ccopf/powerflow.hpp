#pragma once

// Nonlinear AC power flow in polar coordinates: bus admittance assembly,
// mismatch residuals, analytical first and second derivatives, a dense
// Newton-Raphson solve, branch flows, and application of affine response
// policies for a given wind realization.

#include <Eigen/Dense>
#include <complex>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccopf/model.hpp"
#include "ccopf/policy.hpp"

namespace ccopf {

struct OperatingPoint {
    Eigen::VectorXd v_mag;   // per bus, p.u.
    Eigen::VectorXd v_ang;   // per bus, rad
    Eigen::VectorXd p_inj;   // per bus net injection (derived)
    Eigen::VectorXd q_inj;   // per bus net injection (derived)
    Eigen::VectorXd gen_p;   // per generator
    Eigen::VectorXd gen_q;   // per generator
    Eigen::VectorXd hvdc_p;  // per converter terminal (2 per line; even = from end)
    Eigen::VectorXd hvdc_q;  // per converter terminal
    Eigen::VectorXd wind_p;  // per wind farm actual active injection
    Eigen::VectorXd wind_q;  // per wind farm actual reactive injection
    bool solved = false;

    static OperatingPoint flat(const Network& net) {
        OperatingPoint op;
        int n = net.num_buses();
        op.v_mag = Eigen::VectorXd::Ones(n);
        op.v_ang = Eigen::VectorXd::Zero(n);
        op.p_inj = Eigen::VectorXd::Zero(n);
        op.q_inj = Eigen::VectorXd::Zero(n);
        op.gen_p = Eigen::VectorXd::Zero(net.num_gens());
        op.gen_q = Eigen::VectorXd::Zero(net.num_gens());
        op.hvdc_p = Eigen::VectorXd::Zero(net.num_terminals());
        op.hvdc_q = Eigen::VectorXd::Zero(net.num_terminals());
        op.wind_p = Eigen::VectorXd::Zero(net.num_wind());
        op.wind_q = Eigen::VectorXd::Zero(net.num_wind());
        for (int w = 0; w < net.num_wind(); ++w) {
            op.wind_p[w] = net.wind_farms[w].p_forecast;
            op.wind_q[w] = net.wind_farms[w].power_ratio() * net.wind_farms[w].p_forecast;
        }
        return op;
    }
};

/// Bus-level injection specification for a power-flow solve, plus the
/// device schedules needed to recover per-device outputs afterwards.
struct InjectionSpec {
    Eigen::VectorXd p_set;  // used at non-REF buses
    Eigen::VectorXd q_set;  // used at PQ buses
    Eigen::VectorXd v_set;  // used at REF and PV buses
    double ref_angle = 0.0;
    Eigen::VectorXd gen_p_sched;  // per generator
    Eigen::VectorXd gen_q_sched;  // per generator (effective at PQ buses)
    Eigen::VectorXd hvdc_p;       // per terminal
    Eigen::VectorXd hvdc_q;       // per terminal
    Eigen::VectorXd wind_p;       // per farm
    Eigen::VectorXd wind_q;       // per farm
};

inline Eigen::MatrixXcd build_ybus(const Network& net) {
    int n = net.num_buses();
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& l : net.ac_lines) {
        int i = net.bus_index(l.from), j = net.bus_index(l.to);
        std::complex<double> ys = 1.0 / std::complex<double>(l.series_r, l.series_x);
        std::complex<double> sh(0.0, 0.5 * l.charging_b);
        y(i, i) += ys + sh;
        y(j, j) += ys + sh;
        y(i, j) -= ys;
        y(j, i) -= ys;
    }
    for (int i = 0; i < n; ++i)
        y(i, i) += std::complex<double>(net.buses[i].shunt_g, net.buses[i].shunt_b);
    return y;
}

/// Network injections implied by the voltage profile: P_i = V_i sum_j V_j
/// (G_ij cos th_ij + B_ij sin th_ij), Q analogous.
inline void calc_injections(const Eigen::MatrixXcd& ybus, const Eigen::VectorXd& v,
                            const Eigen::VectorXd& th, Eigen::VectorXd& p, Eigen::VectorXd& q) {
    int n = static_cast<int>(v.size());
    p.setZero(n);
    q.setZero(n);
    for (int i = 0; i < n; ++i) {
        double pi = 0, qi = 0;
        for (int j = 0; j < n; ++j) {
            double g = ybus(i, j).real(), b = ybus(i, j).imag();
            if (g == 0.0 && b == 0.0) continue;
            double dth = th[i] - th[j];
            double c = std::cos(dth), s = std::sin(dth);
            pi += v[j] * (g * c + b * s);
            qi += v[j] * (g * s - b * c);
        }
        p[i] = v[i] * pi;
        q[i] = v[i] * qi;
    }
}

/// Active and reactive mismatch per bus: specified injection minus network
/// flow, stacked [P; Q], length 2|N|.
inline Eigen::VectorXd pf_residual(const Network& net, const OperatingPoint& op) {
    int n = net.num_buses();
    if (op.v_mag.size() != n || op.v_ang.size() != n || op.p_inj.size() != n || op.q_inj.size() != n)
        throw std::invalid_argument("pf_residual: operating point does not match network size");
    Eigen::VectorXd p, q;
    calc_injections(build_ybus(net), op.v_mag, op.v_ang, p, q);
    Eigen::VectorXd r(2 * n);
    r.head(n) = op.p_inj - p;
    r.tail(n) = op.q_inj - q;
    return r;
}

/// Full power-flow Jacobian J = d(P,Q)/d(theta,V) at the given profile,
/// dense 2|N| x 2|N|; rows [P;Q], columns [theta;V].
inline Eigen::MatrixXd assemble_jacobian(const Eigen::MatrixXcd& ybus, const Eigen::VectorXd& v,
                                         const Eigen::VectorXd& th) {
    int n = static_cast<int>(v.size());
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) {
        double sum_vb = 0, sum_va = 0;  // sum_j V_j b_ij, sum_j V_j a_ij over j != i
        for (int j = 0; j < n; ++j) {
            double g = ybus(i, j).real(), b = ybus(i, j).imag();
            if (g == 0.0 && b == 0.0 && i != j) continue;
            double dth = th[i] - th[j];
            double c = std::cos(dth), s = std::sin(dth);
            double a_ij = g * c + b * s;
            double b_ij = g * s - b * c;
            if (j != i) {
                sum_vb += v[j] * b_ij;
                sum_va += v[j] * a_ij;
                jac(i, j) = v[i] * v[j] * b_ij;            // dP_i/dth_j
                jac(i, n + j) = v[i] * a_ij;               // dP_i/dV_j
                jac(n + i, j) = -v[i] * v[j] * a_ij;       // dQ_i/dth_j
                jac(n + i, n + j) = v[i] * b_ij;           // dQ_i/dV_j
            }
        }
        double g_ii = ybus(i, i).real(), b_ii = ybus(i, i).imag();
        jac(i, i) = -v[i] * sum_vb;                                  // dP_i/dth_i
        jac(i, n + i) = sum_va + 2.0 * v[i] * g_ii;                  // dP_i/dV_i
        jac(n + i, i) = v[i] * sum_va;                               // dQ_i/dth_i
        jac(n + i, n + i) = sum_vb - 2.0 * v[i] * b_ii;              // dQ_i/dV_i
    }
    return jac;
}

inline Eigen::MatrixXd assemble_jacobian(const Network& net, const OperatingPoint& op) {
    if (op.v_mag.size() != net.num_buses())
        throw std::invalid_argument("assemble_jacobian: operating point does not match network");
    return assemble_jacobian(build_ybus(net), op.v_mag, op.v_ang);
}

/// Weighted second derivatives of the network injections: returns
/// H = sum_i yp_i d2P_i + yq_i d2Q_i over the stacked variables [theta; V].
inline Eigen::MatrixXd injection_hessian(const Eigen::MatrixXcd& ybus, const Eigen::VectorXd& v,
                                         const Eigen::VectorXd& th, const Eigen::VectorXd& yp,
                                         const Eigen::VectorXd& yq) {
    int n = static_cast<int>(v.size());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    auto add = [&](int r, int c, double val) {
        h(r, c) += val;
        if (r != c) h(c, r) += val;
    };
    for (int i = 0; i < n; ++i) {
        double lp = yp[i], lq = yq[i];
        if (lp == 0.0 && lq == 0.0) continue;
        double acc_va = 0, acc_vb = 0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            double g = ybus(i, j).real(), b = ybus(i, j).imag();
            if (g == 0.0 && b == 0.0) continue;
            double dth = th[i] - th[j];
            double c = std::cos(dth), s = std::sin(dth);
            double a_ij = g * c + b * s;
            double b_ij = g * s - b * c;
            acc_va += v[j] * a_ij;
            acc_vb += v[j] * b_ij;
            // P_i terms
            add(i, j, lp * v[i] * v[j] * a_ij);       // th_i th_j
            add(j, j, -lp * v[i] * v[j] * a_ij);      // th_j th_j
            add(i, n + j, -lp * v[i] * b_ij);         // th_i V_j
            add(j, n + i, lp * v[j] * b_ij);          // th_j V_i
            add(j, n + j, lp * v[i] * b_ij);          // th_j V_j
            add(n + i, n + j, lp * a_ij);             // V_i V_j
            // Q_i terms
            add(i, j, lq * v[i] * v[j] * b_ij);       // th_i th_j
            add(j, j, -lq * v[i] * v[j] * b_ij);      // th_j th_j
            add(i, n + j, lq * v[i] * a_ij);          // th_i V_j
            add(j, n + i, -lq * v[j] * a_ij);         // th_j V_i
            add(j, n + j, -lq * v[i] * a_ij);         // th_j V_j
            add(n + i, n + j, lq * b_ij);             // V_i V_j
        }
        double g_ii = ybus(i, i).real(), b_ii = ybus(i, i).imag();
        add(i, i, -lp * v[i] * acc_va - lq * v[i] * acc_vb);  // th_i th_i
        add(i, n + i, -lp * acc_vb + lq * acc_va);            // th_i V_i
        add(n + i, n + i, lp * 2.0 * g_ii - lq * 2.0 * b_ii); // V_i V_i
    }
    return h;
}

struct LineFlow {
    double p_from, q_from;  // measured into the line at the from end
    double p_to, q_to;      // measured into the line at the to end
};

inline LineFlow line_flow(const Network& net, const AcLine& l, const Eigen::VectorXd& v,
                          const Eigen::VectorXd& th) {
    int i = net.bus_index(l.from), j = net.bus_index(l.to);
    std::complex<double> ys = 1.0 / std::complex<double>(l.series_r, l.series_x);
    double g = ys.real(), b = ys.imag();
    double bc2 = 0.5 * l.charging_b;
    double dth = th[i] - th[j];
    double c = std::cos(dth), s = std::sin(dth);
    LineFlow f;
    f.p_from = v[i] * v[i] * g - v[i] * v[j] * (g * c + b * s);
    f.q_from = -v[i] * v[i] * (b + bc2) - v[i] * v[j] * (g * s - b * c);
    f.p_to = v[j] * v[j] * g - v[i] * v[j] * (g * c - b * s);
    f.q_to = -v[j] * v[j] * (b + bc2) + v[i] * v[j] * (g * s + b * c);
    return f;
}

/// Exact AC branch flows at the given operating point; the sending-end
/// active flow p_from is the constrained quantity.
inline std::vector<LineFlow> line_flows(const Network& net, const OperatingPoint& op) {
    std::vector<LineFlow> out;
    out.reserve(net.ac_lines.size());
    for (const auto& l : net.ac_lines) out.push_back(line_flow(net, l, op.v_mag, op.v_ang));
    return out;
}

/// Gradient of the sending-end active flow of line l with respect to
/// (th_i, th_j, V_i, V_j).
inline Eigen::Vector4d flow_p_from_grad(const Network& net, const AcLine& l,
                                        const Eigen::VectorXd& v, const Eigen::VectorXd& th) {
    int i = net.bus_index(l.from), j = net.bus_index(l.to);
    std::complex<double> ys = 1.0 / std::complex<double>(l.series_r, l.series_x);
    double g = ys.real(), b = ys.imag();
    double dth = th[i] - th[j];
    double c = std::cos(dth), s = std::sin(dth);
    double a = g * c + b * s;   // "cos-like" term
    double d = g * s - b * c;   // "sin-like" term
    Eigen::Vector4d grad;
    grad[0] = v[i] * v[j] * d;             // d/dth_i
    grad[1] = -v[i] * v[j] * d;            // d/dth_j
    grad[2] = 2.0 * v[i] * g - v[j] * a;   // d/dV_i
    grad[3] = -v[i] * a;                   // d/dV_j
    return grad;
}

/// Hessian of the sending-end active flow over (th_i, th_j, V_i, V_j).
inline Eigen::Matrix4d flow_p_from_hess(const Network& net, const AcLine& l,
                                        const Eigen::VectorXd& v, const Eigen::VectorXd& th) {
    int i = net.bus_index(l.from), j = net.bus_index(l.to);
    std::complex<double> ys = 1.0 / std::complex<double>(l.series_r, l.series_x);
    double g = ys.real(), b = ys.imag();
    double dth = th[i] - th[j];
    double c = std::cos(dth), s = std::sin(dth);
    double a = g * c + b * s;
    double d = g * s - b * c;
    Eigen::Matrix4d h;
    h(0, 0) = v[i] * v[j] * a;
    h(0, 1) = -v[i] * v[j] * a;
    h(0, 2) = v[j] * d;
    h(0, 3) = v[i] * d;
    h(1, 1) = v[i] * v[j] * a;
    h(1, 2) = -v[j] * d;
    h(1, 3) = -v[i] * d;
    h(2, 2) = 2.0 * g;
    h(2, 3) = -a;
    h(3, 3) = 0.0;
    for (int r = 1; r < 4; ++r)
        for (int cc = 0; cc < r; ++cc) h(r, cc) = h(cc, r);
    return h;
}

struct PfOptions {
    double tol = 1e-8;   // infinity norm of the mismatch
    int max_iter = 50;
    bool verbose = false;
};

struct PfResult {
    OperatingPoint op;
    bool converged = false;
    int iterations = 0;
    std::vector<double> residual_history;  // infinity norms, one per iteration
    std::string message;
};

/// Builds the injection specification implied by a dispatch: generator
/// set-points, converter set-points and forecast wind, with flat voltage
/// targets unless provided.
inline InjectionSpec spec_from_dispatch(const Network& net, const Eigen::VectorXd& gen_p,
                                        const Eigen::VectorXd& gen_q,
                                        const Eigen::VectorXd& hvdc_p,
                                        const Eigen::VectorXd& hvdc_q,
                                        const Eigen::VectorXd& v_set) {
    int n = net.num_buses();
    InjectionSpec spec;
    spec.gen_p_sched = gen_p;
    spec.gen_q_sched = gen_q;
    spec.hvdc_p = hvdc_p;
    spec.hvdc_q = hvdc_q;
    spec.wind_p.resize(net.num_wind());
    spec.wind_q.resize(net.num_wind());
    for (int w = 0; w < net.num_wind(); ++w) {
        spec.wind_p[w] = net.wind_farms[w].p_forecast;
        spec.wind_q[w] = net.wind_farms[w].power_ratio() * spec.wind_p[w];
    }
    spec.v_set = v_set;
    spec.p_set = Eigen::VectorXd::Zero(n);
    spec.q_set = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        spec.p_set[i] = -net.buses[i].load_p;
        spec.q_set[i] = -net.buses[i].load_q;
    }
    for (int g = 0; g < net.num_gens(); ++g) {
        int i = net.bus_index(net.generators[g].bus);
        spec.p_set[i] += gen_p[g];
        spec.q_set[i] += gen_q[g];
    }
    for (int w = 0; w < net.num_wind(); ++w) {
        int i = net.bus_index(net.wind_farms[w].bus);
        spec.p_set[i] += spec.wind_p[w];
        spec.q_set[i] += spec.wind_q[w];
    }
    for (int t = 0; t < net.num_terminals(); ++t) {
        int i = net.terminal_bus_index(t);
        spec.p_set[i] += hvdc_p[t];
        spec.q_set[i] += hvdc_q[t];
    }
    return spec;
}

/// Newton-Raphson power flow. The reference bus absorbs active and
/// reactive slack; PV buses hold voltage and absorb reactive power with no
/// limit enforcement (limit checking is the validator's job).
inline PfResult solve_power_flow(const Network& net, const InjectionSpec& spec,
                                 const OperatingPoint& start, const PfOptions& opts = {}) {
    int n = net.num_buses();
    int ref = net.ref_index();
    PfResult res;

    std::vector<int> th_vars, v_vars, p_rows, q_rows;
    for (int i = 0; i < n; ++i) {
        if (i != ref) {
            th_vars.push_back(i);
            p_rows.push_back(i);
        }
        if (net.buses[i].kind == BusKind::PQ) {
            v_vars.push_back(i);
            q_rows.push_back(i);
        }
    }
    int nvar = static_cast<int>(th_vars.size() + v_vars.size());

    Eigen::VectorXd v = start.v_mag, th = start.v_ang;
    if (v.size() != n || th.size() != n)
        throw std::invalid_argument("solve_power_flow: start point does not match network");
    for (int i = 0; i < n; ++i)
        if (net.buses[i].kind != BusKind::PQ) v[i] = spec.v_set[i];
    th[ref] = spec.ref_angle;

    Eigen::MatrixXcd ybus = build_ybus(net);
    Eigen::VectorXd p, q;

    auto mismatch = [&](Eigen::VectorXd& r) {
        calc_injections(ybus, v, th, p, q);
        r.resize(nvar);
        int k = 0;
        for (int i : p_rows) r[k++] = spec.p_set[i] - p[i];
        for (int i : q_rows) r[k++] = spec.q_set[i] - q[i];
    };

    Eigen::VectorXd r;
    mismatch(r);
    double rnorm = r.size() ? r.lpNorm<Eigen::Infinity>() : 0.0;
    res.residual_history.push_back(rnorm);

    int it = 0;
    while (rnorm > opts.tol && it < opts.max_iter) {
        Eigen::MatrixXd jac = assemble_jacobian(ybus, v, th);
        Eigen::MatrixXd jred(nvar, nvar);
        for (int a = 0; a < nvar; ++a) {
            int row = a < (int)p_rows.size() ? p_rows[a] : n + q_rows[a - p_rows.size()];
            for (int bcol = 0; bcol < nvar; ++bcol) {
                int col = bcol < (int)th_vars.size() ? th_vars[bcol]
                                                     : n + v_vars[bcol - th_vars.size()];
                jred(a, bcol) = jac(row, col);
            }
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(jred);
        Eigen::VectorXd du = lu.solve(r);
        if (!du.allFinite()) {
            res.message = "singular Jacobian in Newton step " + std::to_string(it + 1);
            break;
        }
        for (size_t a = 0; a < th_vars.size(); ++a) th[th_vars[a]] += du[a];
        for (size_t a = 0; a < v_vars.size(); ++a) v[v_vars[a]] += du[th_vars.size() + a];
        mismatch(r);
        rnorm = r.lpNorm<Eigen::Infinity>();
        res.residual_history.push_back(rnorm);
        ++it;
        if (opts.verbose) std::printf("pf iter %d  mismatch %.3e\n", it, rnorm);
        if (!std::isfinite(rnorm)) {
            res.message = "diverged (non-finite mismatch) at iteration " + std::to_string(it);
            break;
        }
    }
    res.iterations = it;
    res.converged = std::isfinite(rnorm) && rnorm <= opts.tol;
    if (!res.converged && res.message.empty())
        res.message = "no convergence after " + std::to_string(it) +
                      " iterations, residual " + std::to_string(rnorm);

    OperatingPoint& op = res.op;
    op.v_mag = v;
    op.v_ang = th;
    calc_injections(ybus, v, th, op.p_inj, op.q_inj);
    op.wind_p = spec.wind_p;
    op.wind_q = spec.wind_q;
    op.hvdc_p = spec.hvdc_p;
    op.hvdc_q = spec.hvdc_q;
    op.gen_p = spec.gen_p_sched;
    op.gen_q = spec.gen_q_sched;

    // Recover device outputs: slack generators absorb delta_P at the
    // reference bus, REF/PV generators absorb the bus reactive residual.
    Eigen::VectorXd other_p = Eigen::VectorXd::Zero(n), other_q = Eigen::VectorXd::Zero(n);
    for (int w = 0; w < net.num_wind(); ++w) {
        int i = net.bus_index(net.wind_farms[w].bus);
        other_p[i] += spec.wind_p[w];
        other_q[i] += spec.wind_q[w];
    }
    for (int t = 0; t < net.num_terminals(); ++t) {
        int i = net.terminal_bus_index(t);
        other_p[i] += spec.hvdc_p[t];
        other_q[i] += spec.hvdc_q[t];
    }
    {
        auto ref_gens = net.gens_at(ref);
        if (!ref_gens.empty()) {
            double total = op.p_inj[ref] + net.buses[ref].load_p - other_p[ref];
            double sched = 0;
            for (int g : ref_gens) sched += spec.gen_p_sched[g];
            double share = (total - sched) / static_cast<double>(ref_gens.size());
            for (int g : ref_gens) op.gen_p[g] = spec.gen_p_sched[g] + share;
        }
    }
    for (int i = 0; i < n; ++i) {
        if (net.buses[i].kind == BusKind::PQ) continue;
        auto gens = net.gens_at(i);
        if (gens.empty()) continue;
        double total = op.q_inj[i] + net.buses[i].load_q - other_q[i];
        double each = total / static_cast<double>(gens.size());
        for (int g : gens) op.gen_q[g] = each;
    }
    op.solved = res.converged;
    return res;
}

/// Shifts the base operating point's schedules by the affine policies for
/// realization omega: wind buses pick up omega (and gamma-coupled reactive
/// power), participating generators back off alpha_k * Omega, HVDC
/// terminal set-points move by +-beta_c * Omega. Loss changes are not
/// scheduled; the reference bus absorbs them in the nonlinear solve.
inline InjectionSpec apply_response_policy(const OperatingPoint& base, const PolicySet& policies,
                                           const Network& net, const Eigen::VectorXd& omega) {
    if (omega.size() != net.num_wind())
        throw std::invalid_argument("apply_response_policy: omega must have one entry per wind farm");
    policies.validate(net);
    double total = omega.sum();

    InjectionSpec spec;
    int n = net.num_buses();
    spec.v_set = base.v_mag;
    spec.ref_angle = base.v_ang[net.ref_index()];
    spec.gen_p_sched = base.gen_p - policies.alpha * total;
    spec.gen_q_sched = base.gen_q;
    spec.hvdc_p = base.hvdc_p;
    spec.hvdc_q = base.hvdc_q;
    for (int c = 0; c < net.num_hvdc(); ++c) {
        spec.hvdc_p[2 * c] += policies.beta[c] * total;
        spec.hvdc_p[2 * c + 1] -= policies.beta[c] * total;
    }
    spec.wind_p = base.wind_p + omega;
    spec.wind_q = base.wind_q + policies.gamma.cwiseProduct(omega);

    spec.p_set = Eigen::VectorXd::Zero(n);
    spec.q_set = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        spec.p_set[i] = -net.buses[i].load_p;
        spec.q_set[i] = -net.buses[i].load_q;
    }
    for (int g = 0; g < net.num_gens(); ++g) {
        int i = net.bus_index(net.generators[g].bus);
        spec.p_set[i] += spec.gen_p_sched[g];
        spec.q_set[i] += spec.gen_q_sched[g];
    }
    for (int w = 0; w < net.num_wind(); ++w) {
        int i = net.bus_index(net.wind_farms[w].bus);
        spec.p_set[i] += spec.wind_p[w];
        spec.q_set[i] += spec.wind_q[w];
    }
    for (int t = 0; t < net.num_terminals(); ++t) {
        int i = net.terminal_bus_index(t);
        spec.p_set[i] += spec.hvdc_p[t];
        spec.q_set[i] += spec.hvdc_q[t];
    }
    return spec;
}

/// Active-power change absorbed by the reference bus beyond the scheduled
/// response (the delta^P loss term).
inline double ref_delta_p(const Network& net, const InjectionSpec& spec,
                          const OperatingPoint& solved) {
    int ref = net.ref_index();
    double d = 0;
    for (int g : net.gens_at(ref)) d += solved.gen_p[g] - spec.gen_p_sched[g];
    return d;
}

}  // namespace ccopf
