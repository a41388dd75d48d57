#pragma once

// Linear sensitivity machinery: the generation distribution factor matrix
// Psi(alpha, beta, gamma), the partitioned-Jacobian solve for the state
// and injection responses Gamma, branch-flow sensitivities, and the
// Gaussian uncertainty margins that tighten every constrained quantity.

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "ccopf/gaussian.hpp"
#include "ccopf/model.hpp"
#include "ccopf/policy.hpp"
#include "ccopf/powerflow.hpp"

namespace ccopf {

/// Index bookkeeping for the rearranged Taylor expansion: zero-change
/// states (theta at REF, V at REF/PV) and unknown injection responses
/// delta = [dP_ref, dQ_ref, dQ_PV] are separated from the rest.
struct StatePartition {
    std::vector<int> xhat_cols;   // Jacobian columns [th_PV, th_PQ, V_PQ], values in [0, 2N)
    std::vector<int> known_rows;  // P rows of non-REF buses, Q rows of PQ buses
    std::vector<int> delta_rows;  // [P_ref, Q_ref, Q rows of PV buses]
    std::vector<int> xhat_pos;    // size 2N; position in xhat_cols or -1
    int n = 0;

    int v_position(int bus) const { return xhat_pos[n + bus]; }
    int theta_position(int bus) const { return xhat_pos[bus]; }
};

inline StatePartition make_partition(const Network& net) {
    StatePartition p;
    int n = net.num_buses();
    p.n = n;
    int ref = net.ref_index();
    p.xhat_pos.assign(2 * n, -1);
    for (int i = 0; i < n; ++i)
        if (net.buses[i].kind == BusKind::PV) p.xhat_cols.push_back(i);
    for (int i = 0; i < n; ++i)
        if (net.buses[i].kind == BusKind::PQ) p.xhat_cols.push_back(i);
    for (int i = 0; i < n; ++i)
        if (net.buses[i].kind == BusKind::PQ) p.xhat_cols.push_back(n + i);
    for (size_t k = 0; k < p.xhat_cols.size(); ++k) p.xhat_pos[p.xhat_cols[k]] = static_cast<int>(k);

    for (int i = 0; i < n; ++i)
        if (i != ref) p.known_rows.push_back(i);
    for (int i = 0; i < n; ++i)
        if (net.buses[i].kind == BusKind::PQ) p.known_rows.push_back(n + i);

    p.delta_rows.push_back(ref);
    p.delta_rows.push_back(n + ref);
    for (int i = 0; i < n; ++i)
        if (net.buses[i].kind == BusKind::PV) p.delta_rows.push_back(n + i);
    return p;
}

/// GDF matrix Psi (2|N| x |W|): active rows carry the wind indicator minus
/// the (alpha + beta)-weighted all-ones spread; reactive rows carry
/// diag(gamma) at wind buses.
inline Eigen::MatrixXd assemble_gdf(const Network& net, const PolicySet& policies) {
    policies.validate(net);
    int n = net.num_buses(), w = net.num_wind();
    Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(2 * n, w);
    for (int k = 0; k < w; ++k) {
        int i = net.bus_index(net.wind_farms[k].bus);
        psi(i, k) += 1.0;
        psi(n + i, k) += policies.gamma[k];
    }
    for (int g = 0; g < net.num_gens(); ++g) {
        int i = net.bus_index(net.generators[g].bus);
        psi.row(i).array() -= policies.alpha[g];
    }
    for (int c = 0; c < net.num_hvdc(); ++c) {
        // matches the response convention: +beta at the from terminal
        psi.row(net.bus_index(net.hvdc_lines[c].from)).array() += policies.beta[c];
        psi.row(net.bus_index(net.hvdc_lines[c].to)).array() -= policies.beta[c];
    }
    return psi;
}

/// Solves the rearranged linearized power-flow identity for the nonzero
/// state response Gamma_xhat and the unknown injection response
/// Gamma_delta. Throws if the reduced Jacobian block is singular.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> partition_and_solve(
    const Eigen::MatrixXd& jac, const Eigen::MatrixXd& psi, const StatePartition& part) {
    int nk = static_cast<int>(part.known_rows.size());
    int nx = static_cast<int>(part.xhat_cols.size());
    int nd = static_cast<int>(part.delta_rows.size());
    int w = static_cast<int>(psi.cols());

    Eigen::MatrixXd j4(nk, nx), j2(nd, nx), psi2(nk, w), psi1(nd, w);
    for (int r = 0; r < nk; ++r) {
        psi2.row(r) = psi.row(part.known_rows[r]);
        for (int c = 0; c < nx; ++c) j4(r, c) = jac(part.known_rows[r], part.xhat_cols[c]);
    }
    for (int r = 0; r < nd; ++r) {
        psi1.row(r) = psi.row(part.delta_rows[r]);
        for (int c = 0; c < nx; ++c) j2(r, c) = jac(part.delta_rows[r], part.xhat_cols[c]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(j4);
    if (!lu.isInvertible())
        throw std::runtime_error("partition_and_solve: reduced power-flow Jacobian is singular");
    Eigen::MatrixXd gx = lu.solve(psi2);
    Eigen::MatrixXd gd = j2 * gx - psi1;
    return {gx, gd};
}

/// Branch-flow sensitivity rows: chain rule through the analytic
/// sending-end flow gradient, zero-change states contribute nothing.
inline Eigen::MatrixXd flow_sensitivities(const Network& net, const OperatingPoint& op,
                                          const Eigen::MatrixXd& gamma_state,
                                          const StatePartition& part) {
    int w = static_cast<int>(gamma_state.cols());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(net.num_lines(), w);
    for (int l = 0; l < net.num_lines(); ++l) {
        const AcLine& line = net.ac_lines[l];
        Eigen::Vector4d grad = flow_p_from_grad(net, line, op.v_mag, op.v_ang);
        int i = net.bus_index(line.from), j = net.bus_index(line.to);
        int cols[4] = {i, j, part.n + i, part.n + j};
        for (int k = 0; k < 4; ++k) {
            int pos = part.xhat_pos[cols[k]];
            if (pos >= 0) out.row(l) += grad[k] * gamma_state.row(pos);
        }
    }
    return out;
}

/// Uncertainty margin of one constrained quantity:
/// Phi^{-1}(1-eps) * sqrt(row Sigma row^T); exactly zero for a zero row.
inline double uncertainty_margin(const Eigen::VectorXd& gamma_row, const Eigen::MatrixXd& sigma,
                                 double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 0.5))
        throw std::domain_error("uncertainty_margin: epsilon must lie in (0, 0.5)");
    if (gamma_row.size() != sigma.rows())
        throw std::invalid_argument("uncertainty_margin: dimension mismatch");
    double var = gamma_row.dot(sigma * gamma_row);
    return normal_quantile(1.0 - epsilon) * std::sqrt(std::max(0.0, var));
}

struct MarginSet {
    Eigen::VectorXd pg;  // per generator
    Eigen::VectorXd qg;  // per generator
    Eigen::VectorXd v;   // per bus
    Eigen::VectorXd pl;  // per line
    Eigen::VectorXd pc;  // per converter terminal

    Eigen::VectorXd stacked() const {
        Eigen::VectorXd out(pg.size() + qg.size() + v.size() + pl.size() + pc.size());
        out << pg, qg, v, pl, pc;
        return out;
    }
    static MarginSet zeros(const Network& net) {
        MarginSet m;
        m.pg = Eigen::VectorXd::Zero(net.num_gens());
        m.qg = Eigen::VectorXd::Zero(net.num_gens());
        m.v = Eigen::VectorXd::Zero(net.num_buses());
        m.pl = Eigen::VectorXd::Zero(net.num_lines());
        m.pc = Eigen::VectorXd::Zero(net.num_terminals());
        return m;
    }
};

struct SensitivityBundle {
    Eigen::MatrixXd gamma_state;  // |xhat| x |W|
    Eigen::MatrixXd gamma_delta;  // |delta| x |W|
    Eigen::MatrixXd gamma_flow;   // |L| x |W|
    Eigen::MatrixXd gamma_genp;   // |G| x |W|
    Eigen::MatrixXd gamma_hvdc;   // 2|C| x |W|
    MarginSet margins;
};

/// Per-generator active response rows: -alpha_k * ones, with the
/// delta^P loss-response row added to generators at the reference bus
/// (shared equally when several are connected there).
inline Eigen::MatrixXd generator_response_rows(const Network& net, const PolicySet& policies,
                                               const Eigen::MatrixXd& gamma_delta) {
    int w = static_cast<int>(gamma_delta.cols());
    int ref = net.ref_index();
    auto ref_gens = net.gens_at(ref);
    Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(net.num_gens(), w);
    for (int g = 0; g < net.num_gens(); ++g) {
        rows.row(g).setConstant(-policies.alpha[g]);
        if (net.bus_index(net.generators[g].bus) == ref)
            rows.row(g) += gamma_delta.row(0) / static_cast<double>(ref_gens.size());
    }
    return rows;
}

/// Shared margin assembly once the state, injection and flow responses are
/// known for concrete policies.
inline SensitivityBundle assemble_margin_bundle(const Network& net, const StatePartition& part,
                                                const Eigen::MatrixXd& gx,
                                                const Eigen::MatrixXd& gd,
                                                const Eigen::MatrixXd& gflow,
                                                const PolicySet& policies, const WindModel& wind,
                                                double epsilon) {
    SensitivityBundle b;
    b.gamma_state = gx;
    b.gamma_delta = gd;
    b.gamma_flow = gflow;
    b.gamma_genp = generator_response_rows(net, policies, gd);

    int w = net.num_wind();
    b.gamma_hvdc = Eigen::MatrixXd::Zero(net.num_terminals(), w);
    for (int t = 0; t < net.num_terminals(); ++t)
        b.gamma_hvdc.row(t).setConstant(Network::terminal_sign(t) * policies.beta[t / 2]);

    const Eigen::MatrixXd& sigma = wind.covariance();
    MarginSet& m = b.margins;
    m = MarginSet::zeros(net);
    for (int g = 0; g < net.num_gens(); ++g)
        m.pg[g] = uncertainty_margin(b.gamma_genp.row(g), sigma, epsilon);

    int ref = net.ref_index();
    for (int i = 0; i < net.num_buses(); ++i) {
        auto gens = net.gens_at(i);
        if (gens.empty()) continue;
        int drow = -1;
        if (i == ref) drow = 1;
        else if (net.buses[i].kind == BusKind::PV) {
            int pv_pos = 0;
            for (int k = 0; k < i; ++k)
                if (net.buses[k].kind == BusKind::PV) ++pv_pos;
            drow = 2 + pv_pos;
        }
        if (drow < 0) continue;  // PQ-bus generators hold their schedule
        Eigen::VectorXd row = gd.row(drow) / static_cast<double>(gens.size());
        double lam = uncertainty_margin(row, sigma, epsilon);
        for (int g : gens) m.qg[g] = lam;
    }
    for (int i = 0; i < net.num_buses(); ++i) {
        int pos = part.v_position(i);
        if (pos < 0) continue;  // held voltages carry no margin
        m.v[i] = uncertainty_margin(gx.row(pos), sigma, epsilon);
    }
    for (int l = 0; l < net.num_lines(); ++l)
        m.pl[l] = uncertainty_margin(b.gamma_flow.row(l), sigma, epsilon);
    for (int t = 0; t < net.num_terminals(); ++t)
        m.pc[t] = uncertainty_margin(b.gamma_hvdc.row(t), sigma, epsilon);
    return b;
}

/// Evaluates the full sensitivity bundle and all uncertainty margins at a
/// solved operating point for the given policies.
inline SensitivityBundle margins_for_all_constraints(const Network& net, const OperatingPoint& op,
                                                     const PolicySet& policies,
                                                     const WindModel& wind, double epsilon) {
    StatePartition part = make_partition(net);
    Eigen::MatrixXd jac = assemble_jacobian(net, op);
    Eigen::MatrixXd psi = assemble_gdf(net, policies);
    auto [gx, gd] = partition_and_solve(jac, psi, part);
    Eigen::MatrixXd gflow = flow_sensitivities(net, op, gx, part);
    return assemble_margin_bundle(net, part, gx, gd, gflow, policies, wind, epsilon);
}

/// Affine decomposition of the response factors in the policy variables:
/// index 0 holds the policy-independent part, then one block per
/// generator's alpha, then one per HVDC line's beta. Evaluating any block
/// family at concrete policies reproduces the corresponding Gamma matrix.
struct LinearResponse {
    StatePartition part;
    int n_alpha = 0;
    int n_beta = 0;
    std::vector<Eigen::MatrixXd> xhat;   // 1 + n_alpha + n_beta blocks
    std::vector<Eigen::MatrixXd> delta;
    std::vector<Eigen::MatrixXd> flow;

    static Eigen::MatrixXd eval(const std::vector<Eigen::MatrixXd>& basis,
                                const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta) {
        Eigen::MatrixXd out = basis[0];
        for (int k = 0; k < alpha.size(); ++k)
            if (alpha[k] != 0.0) out += alpha[k] * basis[1 + k];
        for (int c = 0; c < beta.size(); ++c)
            if (beta[c] != 0.0) out += beta[c] * basis[1 + alpha.size() + c];
        return out;
    }
};

/// Margin bundle from a frozen response basis evaluated at concrete
/// policies; coincides with margins_for_all_constraints when the basis was
/// built at the same operating point.
inline SensitivityBundle margins_from_response(const Network& net, const LinearResponse& lr,
                                               const PolicySet& policies, const WindModel& wind,
                                               double epsilon) {
    Eigen::MatrixXd gx = LinearResponse::eval(lr.xhat, policies.alpha, policies.beta);
    Eigen::MatrixXd gd = LinearResponse::eval(lr.delta, policies.alpha, policies.beta);
    Eigen::MatrixXd gflow = LinearResponse::eval(lr.flow, policies.alpha, policies.beta);
    return assemble_margin_bundle(net, lr.part, gx, gd, gflow, policies, wind, epsilon);
}

inline LinearResponse build_linear_response(const Network& net, const OperatingPoint& op,
                                            const Eigen::VectorXd& gamma_ratios) {
    LinearResponse lr;
    lr.part = make_partition(net);
    lr.n_alpha = net.num_gens();
    lr.n_beta = net.num_hvdc();
    int n = net.num_buses(), w = net.num_wind();

    Eigen::MatrixXd jac = assemble_jacobian(net, op);
    int nk = static_cast<int>(lr.part.known_rows.size());
    int nx = static_cast<int>(lr.part.xhat_cols.size());
    int nd = static_cast<int>(lr.part.delta_rows.size());
    Eigen::MatrixXd j4(nk, nx), j2(nd, nx);
    for (int r = 0; r < nk; ++r)
        for (int c = 0; c < nx; ++c) j4(r, c) = jac(lr.part.known_rows[r], lr.part.xhat_cols[c]);
    for (int r = 0; r < nd; ++r)
        for (int c = 0; c < nx; ++c) j2(r, c) = jac(lr.part.delta_rows[r], lr.part.xhat_cols[c]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(j4);
    if (!lu.isInvertible())
        throw std::runtime_error("build_linear_response: reduced power-flow Jacobian is singular");

    auto push_block = [&](const Eigen::MatrixXd& psi) {
        Eigen::MatrixXd psi2(nk, w), psi1(nd, w);
        for (int r = 0; r < nk; ++r) psi2.row(r) = psi.row(lr.part.known_rows[r]);
        for (int r = 0; r < nd; ++r) psi1.row(r) = psi.row(lr.part.delta_rows[r]);
        Eigen::MatrixXd gx = lu.solve(psi2);
        lr.xhat.push_back(gx);
        lr.delta.push_back(j2 * gx - psi1);
        lr.flow.push_back(flow_sensitivities(net, op, gx, lr.part));
    };

    Eigen::MatrixXd psi0 = Eigen::MatrixXd::Zero(2 * n, w);
    for (int k = 0; k < w; ++k) {
        int i = net.bus_index(net.wind_farms[k].bus);
        psi0(i, k) += 1.0;
        psi0(n + i, k) += gamma_ratios[k];
    }
    push_block(psi0);
    for (int g = 0; g < net.num_gens(); ++g) {
        Eigen::MatrixXd psik = Eigen::MatrixXd::Zero(2 * n, w);
        psik.row(net.bus_index(net.generators[g].bus)).setConstant(-1.0);
        push_block(psik);
    }
    for (int c = 0; c < net.num_hvdc(); ++c) {
        Eigen::MatrixXd psic = Eigen::MatrixXd::Zero(2 * n, w);
        psic.row(net.bus_index(net.hvdc_lines[c].from)).setConstant(1.0);
        psic.row(net.bus_index(net.hvdc_lines[c].to)).setConstant(-1.0);
        push_block(psic);
    }
    return lr;
}

}  // namespace ccopf
