#pragma once

// Margin-tightened AC optimal power flow. One NLP adapter covers the
// deterministic problem, the fixed-margin problem, and the policy
// optimization where generator and HVDC participation factors are decision
// variables and the uncertainty margins enter as linear or second-order
// cone terms built from frozen sensitivity factors.

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ccopf/gaussian.hpp"
#include "ccopf/model.hpp"
#include "ccopf/nlp.hpp"
#include "ccopf/policy.hpp"
#include "ccopf/powerflow.hpp"
#include "ccopf/sensitivity.hpp"

namespace ccopf {

enum class MarginMode { None, FixedValues, AffinePolicies };

struct PolicyOptions {
    bool optimize_alpha = false;
    bool optimize_beta = false;
    PolicySet fixed;        // factors held fixed (all of them when not optimizing)
    double beta_max = 1.0;  // cap on |beta| per line when optimized
};

/// Constraint-generation bookkeeping: which cone-shaped margins are
/// enforced. Generator and HVDC active-power margins are always included
/// (they are linear in the policies and cheap); the rest start out
/// excluded when constraint generation is on.
struct ActiveMargins {
    std::vector<char> qg, v, pl;  // per generator / bus / line

    static ActiveMargins all(const Network& net) {
        ActiveMargins a;
        a.qg.assign(net.num_gens(), 1);
        a.v.assign(net.num_buses(), 1);
        a.pl.assign(net.num_lines(), 1);
        return a;
    }
    static ActiveMargins none(const Network& net) {
        ActiveMargins a;
        a.qg.assign(net.num_gens(), 0);
        a.v.assign(net.num_buses(), 0);
        a.pl.assign(net.num_lines(), 0);
        return a;
    }
    int count() const {
        auto c = [](const std::vector<char>& v) {
            int n = 0;
            for (char x : v) n += x != 0;
            return n;
        };
        return c(qg) + c(v) + c(pl);
    }
};

struct OpfProblem {
    const Network* net = nullptr;
    MarginMode margin_mode = MarginMode::None;
    double epsilon = 0.05;
    WindModel wind;                  // needed for margin modes
    MarginSet fixed_margins;         // FixedValues mode
    std::optional<LinearResponse> response;  // AffinePolicies mode, factors at the incumbent
    PolicyOptions policy;
    ActiveMargins active;            // cone margins enforced (Affine mode)
    Eigen::VectorXd wind_injection;  // effective per-farm forecast (p.u.)

    static OpfProblem deterministic(const Network& net) {
        OpfProblem p;
        p.net = &net;
        p.margin_mode = MarginMode::None;
        p.policy.fixed = PolicySet::zeros(net);
        p.active = ActiveMargins::all(net);
        p.wind_injection.resize(net.num_wind());
        for (int w = 0; w < net.num_wind(); ++w) p.wind_injection[w] = net.wind_farms[w].p_forecast;
        return p;
    }
};

struct OpfSolution {
    OperatingPoint op;
    PolicySet policies;
    double objective = 0.0;  // $/h
    nlp::SolveStatus status = nlp::SolveStatus::NumericalFailure;
    nlp::KktNorms kkt;
    int iterations = 0;
    std::string message;
    std::vector<std::string> binding;
    MarginSet margins_enforced;  // margin values the solver actually applied
    bool degenerate_alpha = false;
    double objective_scale = 1.0;  // internal scaling; divide multipliers by it for $/h prices
    // raw solver state, reusable as a warm start
    Eigen::VectorXd z, y, w, s;
    bool ok() const { return status == nlp::SolveStatus::Optimal; }
};

/// Generation cost in $/h for a per-unit dispatch.
inline double evaluate_objective(const Eigen::VectorXd& gen_p_pu, const Network& net) {
    if (gen_p_pu.size() != net.num_gens())
        throw std::invalid_argument("evaluate_objective: dispatch size mismatch");
    double total = 0;
    for (int g = 0; g < net.num_gens(); ++g) {
        double mw = net.to_mw(gen_p_pu[g]);
        const Generator& gen = net.generators[g];
        total += gen.cost_c2 * mw * mw + gen.cost_c1 * mw + gen.cost_c0;
    }
    return total;
}

namespace detail {

struct MarginTerm {
    enum class Kind { None, Const, LinearAlpha, LinearBeta, Soc };
    Kind kind = Kind::None;
    double value = 0.0;      // Const
    double coeff = 0.0;      // linear coefficient (per alpha var, or per beta pair)
    int policy_pos = -1;     // alpha variable position (LinearAlpha) or hvdc index (LinearBeta)
    Eigen::MatrixXd soc;     // W x (1 + npol) map; margin = |soc * [1; p]| smoothed
};

struct IneqDesc {
    enum class Kind {
        GenPUp, GenPLo, GenQUp, GenQLo, VUp, VLo, FlowUp, FlowLo,
        TermPUp, TermPLo, TermQUp, TermQLo, AlphaNonneg, BetaNonneg, BetaCap
    };
    Kind kind;
    int index = 0;   // device index (gen/bus/line/terminal/policy var)
    double bound = 0.0;
    MarginTerm margin;
    std::string name;
};

class AcopfNlp : public nlp::Problem {
public:
    static constexpr double kSocSmooth = 1e-8;

    AcopfNlp(const OpfProblem& prob) : prob_(prob), net_(*prob.net) {
        ybus_ = build_ybus(net_);
        nb_ = net_.num_buses();
        ng_ = net_.num_gens();
        nh_ = net_.num_hvdc();
        nw_ = net_.num_wind();
        ref_ = net_.ref_index();

        opt_alpha_ = prob_.margin_mode == MarginMode::AffinePolicies && prob_.policy.optimize_alpha;
        opt_beta_ = prob_.margin_mode == MarginMode::AffinePolicies && prob_.policy.optimize_beta &&
                    nh_ > 0;
        for (int g = 0; g < ng_; ++g)
            if (net_.generators[g].can_participate && opt_alpha_) alpha_vars_.push_back(g);
        npol_ = static_cast<int>(alpha_vars_.size()) + (opt_beta_ ? nh_ : 0);

        th0_ = 0;
        v0_ = nb_;
        pg0_ = 2 * nb_;
        qg0_ = pg0_ + ng_;
        pt0_ = qg0_ + ng_;
        qt0_ = pt0_ + 2 * nh_;
        a0_ = qt0_ + 2 * nh_;
        bp0_ = a0_ + static_cast<int>(alpha_vars_.size());
        bm0_ = bp0_ + (opt_beta_ ? nh_ : 0);
        nz_ = bm0_ + (opt_beta_ ? nh_ : 0);

        kappa_ = normal_quantile(1.0 - prob_.epsilon);
        sigma_total_ = prob_.wind.dim() == nw_ && nw_ > 0 ? prob_.wind.total_sigma() : 0.0;

        build_equalities();
        build_inequalities();

        // objective scaling keeps the KKT system well conditioned
        Eigen::VectorXd g0 = Eigen::VectorXd::Zero(nz_);
        for (int g = 0; g < ng_; ++g) {
            double mid = 0.5 * (net_.generators[g].p_min + net_.generators[g].p_max);
            double mw = net_.to_mw(mid);
            g0[pg0_ + g] = (2.0 * net_.generators[g].cost_c2 * mw + net_.generators[g].cost_c1) *
                           net_.base_mva;
        }
        obj_scale_ = 1.0 / std::max(1.0, g0.lpNorm<Eigen::Infinity>());
    }

    // --- nlp::Problem interface -------------------------------------------
    int num_vars() const override { return nz_; }
    int num_eq() const override { return n_eq_; }
    int num_ineq() const override { return static_cast<int>(ineqs_.size()); }

    double objective(const Eigen::VectorXd& z) const override {
        return obj_scale_ * evaluate_objective(z.segment(pg0_, ng_), net_);
    }
    void objective_gradient(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const override {
        grad.setZero(nz_);
        for (int g = 0; g < ng_; ++g) {
            double mw = net_.to_mw(z[pg0_ + g]);
            grad[pg0_ + g] = obj_scale_ *
                             (2.0 * net_.generators[g].cost_c2 * mw + net_.generators[g].cost_c1) *
                             net_.base_mva;
        }
    }

    void eq_constraints(const Eigen::VectorXd& z, Eigen::VectorXd& c) const override {
        c.resize(n_eq_);
        Eigen::VectorXd p, q;
        calc_injections(ybus_, z.segment(v0_, nb_), z.segment(th0_, nb_), p, q);
        Eigen::VectorXd psched = Eigen::VectorXd::Zero(nb_), qsched = Eigen::VectorXd::Zero(nb_);
        accumulate_scheduled(z, psched, qsched);
        c.segment(0, nb_) = psched - p;
        c.segment(nb_, nb_) = qsched - q;
        c[2 * nb_] = z[th0_ + ref_];
        for (int h = 0; h < nh_; ++h)
            c[2 * nb_ + 1 + h] =
                z[pt0_ + 2 * h] + z[pt0_ + 2 * h + 1] + net_.hvdc_lines[h].p_loss();
        if (opt_alpha_) {
            double sum = 0;
            for (size_t k = 0; k < alpha_vars_.size(); ++k) sum += z[a0_ + k];
            c[n_eq_ - 1] = sum - 1.0;
        }
    }

    void eq_jacobian(const Eigen::VectorXd& z, Eigen::MatrixXd& jac) const override {
        jac.setZero(n_eq_, nz_);
        Eigen::MatrixXd jpf = assemble_jacobian(ybus_, z.segment(v0_, nb_), z.segment(th0_, nb_));
        jac.block(0, 0, 2 * nb_, 2 * nb_) = -jpf;
        for (int g = 0; g < ng_; ++g) {
            int b = net_.bus_index(net_.generators[g].bus);
            jac(b, pg0_ + g) = 1.0;
            jac(nb_ + b, qg0_ + g) = 1.0;
        }
        for (int t = 0; t < 2 * nh_; ++t) {
            int b = net_.terminal_bus_index(t);
            jac(b, pt0_ + t) = 1.0;
            jac(nb_ + b, qt0_ + t) = 1.0;
        }
        jac(2 * nb_, th0_ + ref_) = 1.0;
        for (int h = 0; h < nh_; ++h) {
            jac(2 * nb_ + 1 + h, pt0_ + 2 * h) = 1.0;
            jac(2 * nb_ + 1 + h, pt0_ + 2 * h + 1) = 1.0;
        }
        if (opt_alpha_)
            for (size_t k = 0; k < alpha_vars_.size(); ++k) jac(n_eq_ - 1, a0_ + k) = 1.0;
    }

    void ineq_constraints(const Eigen::VectorXd& z, Eigen::VectorXd& c) const override {
        c.resize(ineqs_.size());
        std::vector<LineFlow> flows = eval_flows(z);
        for (size_t i = 0; i < ineqs_.size(); ++i) {
            const IneqDesc& d = ineqs_[i];
            double lam = margin_value(d.margin, z);
            double raw = 0;
            switch (d.kind) {
                case IneqDesc::Kind::GenPUp: raw = d.bound - z[pg0_ + d.index]; break;
                case IneqDesc::Kind::GenPLo: raw = z[pg0_ + d.index] - d.bound; break;
                case IneqDesc::Kind::GenQUp: raw = d.bound - z[qg0_ + d.index]; break;
                case IneqDesc::Kind::GenQLo: raw = z[qg0_ + d.index] - d.bound; break;
                case IneqDesc::Kind::VUp: raw = d.bound - z[v0_ + d.index]; break;
                case IneqDesc::Kind::VLo: raw = z[v0_ + d.index] - d.bound; break;
                case IneqDesc::Kind::FlowUp: raw = d.bound - flows[d.index].p_from; break;
                case IneqDesc::Kind::FlowLo: raw = flows[d.index].p_from - d.bound; break;
                case IneqDesc::Kind::TermPUp: raw = d.bound - z[pt0_ + d.index]; break;
                case IneqDesc::Kind::TermPLo: raw = z[pt0_ + d.index] - d.bound; break;
                case IneqDesc::Kind::TermQUp: raw = d.bound - z[qt0_ + d.index]; break;
                case IneqDesc::Kind::TermQLo: raw = z[qt0_ + d.index] - d.bound; break;
                case IneqDesc::Kind::AlphaNonneg: raw = z[a0_ + d.index]; break;
                case IneqDesc::Kind::BetaNonneg: raw = z[d.index]; break;  // absolute column
                case IneqDesc::Kind::BetaCap: raw = d.bound - z[d.index]; break;
            }
            c[i] = raw - lam;
        }
    }

    void ineq_jacobian(const Eigen::VectorXd& z, Eigen::MatrixXd& jac) const override {
        jac.setZero(ineqs_.size(), nz_);
        for (size_t i = 0; i < ineqs_.size(); ++i) {
            const IneqDesc& d = ineqs_[i];
            switch (d.kind) {
                case IneqDesc::Kind::GenPUp: jac(i, pg0_ + d.index) = -1; break;
                case IneqDesc::Kind::GenPLo: jac(i, pg0_ + d.index) = 1; break;
                case IneqDesc::Kind::GenQUp: jac(i, qg0_ + d.index) = -1; break;
                case IneqDesc::Kind::GenQLo: jac(i, qg0_ + d.index) = 1; break;
                case IneqDesc::Kind::VUp: jac(i, v0_ + d.index) = -1; break;
                case IneqDesc::Kind::VLo: jac(i, v0_ + d.index) = 1; break;
                case IneqDesc::Kind::FlowUp:
                case IneqDesc::Kind::FlowLo: {
                    const AcLine& line = net_.ac_lines[d.index];
                    Eigen::Vector4d grad =
                        flow_p_from_grad(net_, line, z.segment(v0_, nb_), z.segment(th0_, nb_));
                    double sgn = d.kind == IneqDesc::Kind::FlowUp ? -1.0 : 1.0;
                    int bi = net_.bus_index(line.from), bj = net_.bus_index(line.to);
                    jac(i, th0_ + bi) += sgn * grad[0];
                    jac(i, th0_ + bj) += sgn * grad[1];
                    jac(i, v0_ + bi) += sgn * grad[2];
                    jac(i, v0_ + bj) += sgn * grad[3];
                    break;
                }
                case IneqDesc::Kind::TermPUp: jac(i, pt0_ + d.index) = -1; break;
                case IneqDesc::Kind::TermPLo: jac(i, pt0_ + d.index) = 1; break;
                case IneqDesc::Kind::TermQUp: jac(i, qt0_ + d.index) = -1; break;
                case IneqDesc::Kind::TermQLo: jac(i, qt0_ + d.index) = 1; break;
                case IneqDesc::Kind::AlphaNonneg: jac(i, a0_ + d.index) = 1; break;
                case IneqDesc::Kind::BetaNonneg: jac(i, d.index) = 1; break;
                case IneqDesc::Kind::BetaCap: jac(i, d.index) = -1; break;
            }
            margin_gradient(d.margin, z, jac, static_cast<int>(i));
        }
    }

    void lagrangian_hessian(const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& w, Eigen::MatrixXd& hess) const override {
        hess.setZero(nz_, nz_);
        for (int g = 0; g < ng_; ++g)
            hess(pg0_ + g, pg0_ + g) =
                obj_scale_ * 2.0 * net_.generators[g].cost_c2 * net_.base_mva * net_.base_mva;

        // power-balance rows: c = sched - calc, so -y^T grad^2 c = +y^T grad^2 calc
        Eigen::VectorXd yp = y.segment(0, nb_), yq = y.segment(nb_, nb_);
        hess.topLeftCorner(2 * nb_, 2 * nb_) +=
            injection_hessian(ybus_, z.segment(v0_, nb_), z.segment(th0_, nb_), yp, yq);

        for (size_t i = 0; i < ineqs_.size(); ++i) {
            const IneqDesc& d = ineqs_[i];
            double wi = w[static_cast<int>(i)];
            if (wi == 0.0) continue;
            if (d.kind == IneqDesc::Kind::FlowUp || d.kind == IneqDesc::Kind::FlowLo) {
                const AcLine& line = net_.ac_lines[d.index];
                Eigen::Matrix4d fh =
                    flow_p_from_hess(net_, line, z.segment(v0_, nb_), z.segment(th0_, nb_));
                double sgn = d.kind == IneqDesc::Kind::FlowUp ? -1.0 : 1.0;
                int bi = net_.bus_index(line.from), bj = net_.bus_index(line.to);
                int idx[4] = {th0_ + bi, th0_ + bj, v0_ + bi, v0_ + bj};
                for (int r = 0; r < 4; ++r)
                    for (int cc = 0; cc < 4; ++cc) hess(idx[r], idx[cc]) -= wi * sgn * fh(r, cc);
            }
            margin_hessian(d.margin, z, hess, wi);
        }
    }

    // --- helpers for the OPF driver ---------------------------------------
    const std::vector<IneqDesc>& inequalities() const { return ineqs_; }
    double objective_scale() const { return obj_scale_; }
    int var_theta(int bus) const { return th0_ + bus; }
    int var_v(int bus) const { return v0_ + bus; }
    int var_pg(int g) const { return pg0_ + g; }
    int var_qg(int g) const { return qg0_ + g; }
    int var_pt(int t) const { return pt0_ + t; }
    int var_qt(int t) const { return qt0_ + t; }
    const std::vector<int>& alpha_vars() const { return alpha_vars_; }
    bool optimizing_alpha() const { return opt_alpha_; }
    bool optimizing_beta() const { return opt_beta_; }
    int var_alpha(int k) const { return a0_ + k; }
    int var_betap(int c) const { return bp0_ + c; }
    int var_betam(int c) const { return bm0_ + c; }

    /// Packs an operating point plus policies into a start vector.
    Eigen::VectorXd pack(const OperatingPoint& op, const PolicySet& pol) const {
        Eigen::VectorXd z = Eigen::VectorXd::Zero(nz_);
        z.segment(th0_, nb_) = op.v_ang;
        z.segment(v0_, nb_) = op.v_mag;
        z.segment(pg0_, ng_) = op.gen_p;
        z.segment(qg0_, ng_) = op.gen_q;
        if (nh_ > 0) {
            z.segment(pt0_, 2 * nh_) = op.hvdc_p;
            z.segment(qt0_, 2 * nh_) = op.hvdc_q;
        }
        for (size_t k = 0; k < alpha_vars_.size(); ++k)
            z[a0_ + k] = std::max(1e-3, pol.alpha[alpha_vars_[k]]);
        if (opt_beta_)
            for (int c = 0; c < nh_; ++c) {
                z[bp0_ + c] = std::max(1e-3, pol.beta[c]);
                z[bm0_ + c] = std::max(1e-3, -pol.beta[c]);
            }
        return z;
    }

    PolicySet unpack_policies(const Eigen::VectorXd& z) const {
        PolicySet pol = prob_.policy.fixed;
        if (opt_alpha_) {
            pol.alpha.setZero(ng_);
            for (size_t k = 0; k < alpha_vars_.size(); ++k)
                pol.alpha[alpha_vars_[k]] = std::max(0.0, z[a0_ + k]);
            double sum = pol.alpha.sum();
            if (sum > 0) pol.alpha /= sum;  // strip barrier slack
        }
        if (opt_beta_)
            for (int c = 0; c < nh_; ++c) pol.beta[c] = z[bp0_ + c] - z[bm0_ + c];
        return pol;
    }

    OperatingPoint unpack_point(const Eigen::VectorXd& z) const {
        OperatingPoint op;
        op.v_ang = z.segment(th0_, nb_);
        op.v_mag = z.segment(v0_, nb_);
        calc_injections(ybus_, op.v_mag, op.v_ang, op.p_inj, op.q_inj);
        op.gen_p = z.segment(pg0_, ng_);
        op.gen_q = z.segment(qg0_, ng_);
        op.hvdc_p = nh_ ? z.segment(pt0_, 2 * nh_).eval() : Eigen::VectorXd::Zero(0).eval();
        op.hvdc_q = nh_ ? z.segment(qt0_, 2 * nh_).eval() : Eigen::VectorXd::Zero(0).eval();
        // close each converter pair's balance identically; the residual
        // moved onto the to terminal is within the solver feasibility tol
        for (int c = 0; c < nh_; ++c)
            op.hvdc_p[2 * c + 1] = -op.hvdc_p[2 * c] - net_.hvdc_lines[c].p_loss();
        op.wind_p = prob_.wind_injection;
        op.wind_q.resize(nw_);
        for (int w = 0; w < nw_; ++w)
            op.wind_q[w] = net_.wind_farms[w].power_ratio() * op.wind_p[w];
        return op;
    }

    /// Numeric margin values enforced at z, by constraint class.
    MarginSet enforced_margins(const Eigen::VectorXd& z) const {
        MarginSet m = MarginSet::zeros(net_);
        for (const IneqDesc& d : ineqs_) {
            double lam = margin_value(d.margin, z);
            switch (d.kind) {
                case IneqDesc::Kind::GenPUp: m.pg[d.index] = lam; break;
                case IneqDesc::Kind::GenQUp: m.qg[d.index] = lam; break;
                case IneqDesc::Kind::VUp: m.v[d.index] = lam; break;
                case IneqDesc::Kind::FlowUp: m.pl[d.index] = lam; break;
                case IneqDesc::Kind::TermPUp: m.pc[d.index] = lam; break;
                default: break;
            }
        }
        return m;
    }

private:
    void accumulate_scheduled(const Eigen::VectorXd& z, Eigen::VectorXd& p,
                              Eigen::VectorXd& q) const {
        for (int i = 0; i < nb_; ++i) {
            p[i] = -net_.buses[i].load_p;
            q[i] = -net_.buses[i].load_q;
        }
        for (int g = 0; g < ng_; ++g) {
            int b = net_.bus_index(net_.generators[g].bus);
            p[b] += z[pg0_ + g];
            q[b] += z[qg0_ + g];
        }
        for (int w = 0; w < nw_; ++w) {
            int b = net_.bus_index(net_.wind_farms[w].bus);
            p[b] += prob_.wind_injection[w];
            q[b] += net_.wind_farms[w].power_ratio() * prob_.wind_injection[w];
        }
        for (int t = 0; t < 2 * nh_; ++t) {
            int b = net_.terminal_bus_index(t);
            p[b] += z[pt0_ + t];
            q[b] += z[qt0_ + t];
        }
    }

    std::vector<LineFlow> eval_flows(const Eigen::VectorXd& z) const {
        std::vector<LineFlow> flows;
        flows.reserve(net_.num_lines());
        for (const auto& l : net_.ac_lines)
            flows.push_back(line_flow(net_, l, z.segment(v0_, nb_), z.segment(th0_, nb_)));
        return flows;
    }

    void build_equalities() {
        n_eq_ = 2 * nb_ + 1 + nh_ + (opt_alpha_ ? 1 : 0);
    }

    // policy vector p used by cone margins: alpha variables then signed betas
    int soc_dim() const { return static_cast<int>(alpha_vars_.size()) + (opt_beta_ ? nh_ : 0); }

    Eigen::VectorXd soc_policy(const Eigen::VectorXd& z) const {
        Eigen::VectorXd p(soc_dim());
        for (size_t k = 0; k < alpha_vars_.size(); ++k) p[k] = z[a0_ + k];
        if (opt_beta_)
            for (int c = 0; c < nh_; ++c)
                p[alpha_vars_.size() + c] = z[bp0_ + c] - z[bm0_ + c];
        return p;
    }

    double margin_value(const MarginTerm& t, const Eigen::VectorXd& z) const {
        switch (t.kind) {
            case MarginTerm::Kind::None: return 0.0;
            case MarginTerm::Kind::Const: return t.value;
            case MarginTerm::Kind::LinearAlpha: return t.coeff * z[a0_ + t.policy_pos];
            case MarginTerm::Kind::LinearBeta:
                return t.coeff * (z[bp0_ + t.policy_pos] + z[bm0_ + t.policy_pos]);
            case MarginTerm::Kind::Soc: {
                Eigen::VectorXd up(1 + soc_dim());
                up[0] = 1.0;
                up.tail(soc_dim()) = soc_policy(z);
                double nrm2 = (t.soc * up).squaredNorm();
                return std::sqrt(nrm2 + kSocSmooth * kSocSmooth);
            }
        }
        return 0.0;
    }

    // margins enter inequalities as  c = raw - lambda, so d c/d z -= d lambda
    void margin_gradient(const MarginTerm& t, const Eigen::VectorXd& z, Eigen::MatrixXd& jac,
                         int row) const {
        switch (t.kind) {
            case MarginTerm::Kind::None:
            case MarginTerm::Kind::Const: return;
            case MarginTerm::Kind::LinearAlpha:
                jac(row, a0_ + t.policy_pos) -= t.coeff;
                return;
            case MarginTerm::Kind::LinearBeta:
                jac(row, bp0_ + t.policy_pos) -= t.coeff;
                jac(row, bm0_ + t.policy_pos) -= t.coeff;
                return;
            case MarginTerm::Kind::Soc: {
                Eigen::VectorXd up(1 + soc_dim());
                up[0] = 1.0;
                up.tail(soc_dim()) = soc_policy(z);
                Eigen::VectorXd m = t.soc * up;
                double lam = std::sqrt(m.squaredNorm() + kSocSmooth * kSocSmooth);
                Eigen::VectorXd gp = t.soc.rightCols(soc_dim()).transpose() * m / lam;
                scatter_policy_grad(gp, jac, row, -1.0);
                return;
            }
        }
    }

    void margin_hessian(const MarginTerm& t, const Eigen::VectorXd& z, Eigen::MatrixXd& hess,
                        double w) const {
        if (t.kind != MarginTerm::Kind::Soc) return;  // linear margins have no curvature
        Eigen::VectorXd up(1 + soc_dim());
        up[0] = 1.0;
        up.tail(soc_dim()) = soc_policy(z);
        Eigen::VectorXd m = t.soc * up;
        double lam = std::sqrt(m.squaredNorm() + kSocSmooth * kSocSmooth);
        Eigen::MatrixXd a = t.soc.rightCols(soc_dim());
        Eigen::VectorXd am = a.transpose() * m;
        // Lagrangian carries -w * grad^2 c = +w * grad^2 lambda, positive semidefinite
        Eigen::MatrixXd hp = (a.transpose() * a) / lam - am * am.transpose() / (lam * lam * lam);
        scatter_policy_hess(hp, hess, w);
    }

    void scatter_policy_grad(const Eigen::VectorXd& gp, Eigen::MatrixXd& jac, int row,
                             double sign) const {
        int na = static_cast<int>(alpha_vars_.size());
        for (int k = 0; k < na; ++k) jac(row, a0_ + k) += sign * gp[k];
        if (opt_beta_)
            for (int c = 0; c < nh_; ++c) {
                jac(row, bp0_ + c) += sign * gp[na + c];
                jac(row, bm0_ + c) -= sign * gp[na + c];
            }
    }

    void scatter_policy_hess(const Eigen::MatrixXd& hp, Eigen::MatrixXd& hess, double w) const {
        int na = static_cast<int>(alpha_vars_.size());
        int np = soc_dim();
        auto col_of = [&](int k, int piece) {
            // piece 0: +column, piece 1: -column (beta minus leg)
            if (k < na) return piece == 0 ? a0_ + k : -1;
            int c = k - na;
            return piece == 0 ? bp0_ + c : bm0_ + c;
        };
        auto sign_of = [&](int k, int piece) { return k < na || piece == 0 ? 1.0 : -1.0; };
        for (int r = 0; r < np; ++r)
            for (int c = 0; c < np; ++c) {
                double v = w * hp(r, c);
                if (v == 0.0) continue;
                for (int pr = 0; pr < 2; ++pr) {
                    int ir = col_of(r, pr);
                    if (ir < 0) continue;
                    for (int pc = 0; pc < 2; ++pc) {
                        int ic = col_of(c, pc);
                        if (ic < 0) continue;
                        hess(ir, ic) += sign_of(r, pr) * sign_of(c, pc) * v;
                    }
                }
            }
    }

    MarginTerm margin_for(IneqDesc::Kind kind, int index) const {
        MarginTerm t;
        if (prob_.margin_mode == MarginMode::None) return t;

        if (prob_.margin_mode == MarginMode::FixedValues) {
            const MarginSet& m = prob_.fixed_margins;
            double v = 0;
            switch (kind) {
                case IneqDesc::Kind::GenPUp:
                case IneqDesc::Kind::GenPLo: v = m.pg.size() ? m.pg[index] : 0; break;
                case IneqDesc::Kind::GenQUp:
                case IneqDesc::Kind::GenQLo: v = m.qg.size() ? m.qg[index] : 0; break;
                case IneqDesc::Kind::VUp:
                case IneqDesc::Kind::VLo: v = m.v.size() ? m.v[index] : 0; break;
                case IneqDesc::Kind::FlowUp:
                case IneqDesc::Kind::FlowLo: v = m.pl.size() ? m.pl[index] : 0; break;
                case IneqDesc::Kind::TermPUp:
                case IneqDesc::Kind::TermPLo: v = m.pc.size() ? m.pc[index] : 0; break;
                default: return t;
            }
            if (v != 0) {
                t.kind = MarginTerm::Kind::Const;
                t.value = v;
            }
            return t;
        }

        // affine-in-policies mode
        const LinearResponse& lr = *prob_.response;
        const PolicySet& fixed = prob_.policy.fixed;
        auto alpha_pos = [&](int g) {
            for (size_t k = 0; k < alpha_vars_.size(); ++k)
                if (alpha_vars_[k] == g) return static_cast<int>(k);
            return -1;
        };

        // builds the SOC map for an affine Gamma row family
        auto soc_from_rows = [&](auto row_of_block) {
            MarginTerm out;
            out.kind = MarginTerm::Kind::Soc;
            int np = soc_dim(), na = static_cast<int>(alpha_vars_.size());
            Eigen::MatrixXd cols(nw_, 1 + np);
            Eigen::VectorXd c0 = row_of_block(0);
            for (int g = 0; g < ng_; ++g) {
                int pos = alpha_pos(g);
                if (pos < 0 && fixed.alpha[g] != 0.0) c0 += fixed.alpha[g] * row_of_block(1 + g);
            }
            for (int c = 0; c < nh_; ++c)
                if (!opt_beta_ && fixed.beta[c] != 0.0)
                    c0 += fixed.beta[c] * row_of_block(1 + ng_ + c);
            cols.col(0) = c0;
            for (int k = 0; k < na; ++k) cols.col(1 + k) = row_of_block(1 + alpha_vars_[k]);
            if (opt_beta_)
                for (int c = 0; c < nh_; ++c) cols.col(1 + na + c) = row_of_block(1 + ng_ + c);
            out.soc = kappa_ * prob_.wind.sqrt_covariance() * cols;
            return out;
        };

        switch (kind) {
            case IneqDesc::Kind::GenPUp:
            case IneqDesc::Kind::GenPLo: {
                int g = index;
                bool at_ref = net_.bus_index(net_.generators[g].bus) == ref_;
                if (at_ref) {
                    // exact margin including the loss response delta^P
                    double share = 1.0 / static_cast<double>(net_.gens_at(ref_).size());
                    auto row = [&](int blk) -> Eigen::VectorXd {
                        Eigen::VectorXd r = share * lr.delta[blk].row(0).transpose();
                        if (blk == 1 + g) r -= Eigen::VectorXd::Ones(nw_);  // own -alpha ones
                        return r;
                    };
                    return soc_from_rows(row);
                }
                int pos = alpha_pos(g);
                if (pos >= 0) {
                    t.kind = MarginTerm::Kind::LinearAlpha;
                    t.coeff = kappa_ * sigma_total_;
                    t.policy_pos = pos;
                } else if (fixed.alpha[g] != 0.0) {
                    t.kind = MarginTerm::Kind::Const;
                    t.value = kappa_ * sigma_total_ * std::abs(fixed.alpha[g]);
                }
                return t;
            }
            case IneqDesc::Kind::TermPUp:
            case IneqDesc::Kind::TermPLo: {
                int c = index / 2;
                if (opt_beta_) {
                    t.kind = MarginTerm::Kind::LinearBeta;
                    t.coeff = kappa_ * sigma_total_;
                    t.policy_pos = c;
                } else if (fixed.beta[c] != 0.0) {
                    t.kind = MarginTerm::Kind::Const;
                    t.value = kappa_ * sigma_total_ * std::abs(fixed.beta[c]);
                }
                return t;
            }
            case IneqDesc::Kind::GenQUp:
            case IneqDesc::Kind::GenQLo: {
                int g = index;
                if (!prob_.active.qg[g]) return t;
                int b = net_.bus_index(net_.generators[g].bus);
                int drow = -1;
                if (b == ref_) drow = 1;
                else if (net_.buses[b].kind == BusKind::PV) {
                    int pv_pos = 0;
                    for (int k = 0; k < b; ++k)
                        if (net_.buses[k].kind == BusKind::PV) ++pv_pos;
                    drow = 2 + pv_pos;
                }
                if (drow < 0) return t;
                double share = 1.0 / static_cast<double>(net_.gens_at(b).size());
                return soc_from_rows([&](int blk) -> Eigen::VectorXd {
                    return share * lr.delta[blk].row(drow).transpose();
                });
            }
            case IneqDesc::Kind::VUp:
            case IneqDesc::Kind::VLo: {
                int b = index;
                if (!prob_.active.v[b]) return t;
                int pos = lr.part.v_position(b);
                if (pos < 0) return t;  // held buses carry no margin
                return soc_from_rows(
                    [&](int blk) -> Eigen::VectorXd { return lr.xhat[blk].row(pos).transpose(); });
            }
            case IneqDesc::Kind::FlowUp:
            case IneqDesc::Kind::FlowLo: {
                int l = index;
                if (!prob_.active.pl[l]) return t;
                return soc_from_rows(
                    [&](int blk) -> Eigen::VectorXd { return lr.flow[blk].row(l).transpose(); });
            }
            default: return t;
        }
    }

    void build_inequalities() {
        auto add = [&](IneqDesc::Kind kind, int index, double bound, const std::string& name) {
            IneqDesc d;
            d.kind = kind;
            d.index = index;
            d.bound = bound;
            d.name = name;
            d.margin = margin_for(kind, index);
            ineqs_.push_back(std::move(d));
        };
        for (int g = 0; g < ng_; ++g) {
            const Generator& gen = net_.generators[g];
            std::string tag = "gen" + std::to_string(g);
            add(IneqDesc::Kind::GenPUp, g, gen.p_max, tag + ".p_max");
            add(IneqDesc::Kind::GenPLo, g, gen.p_min, tag + ".p_min");
            add(IneqDesc::Kind::GenQUp, g, gen.q_max, tag + ".q_max");
            add(IneqDesc::Kind::GenQLo, g, gen.q_min, tag + ".q_min");
        }
        for (int b = 0; b < nb_; ++b) {
            std::string tag = "bus" + std::to_string(net_.buses[b].id);
            add(IneqDesc::Kind::VUp, b, net_.buses[b].v_max, tag + ".v_max");
            add(IneqDesc::Kind::VLo, b, net_.buses[b].v_min, tag + ".v_min");
        }
        for (int l = 0; l < net_.num_lines(); ++l) {
            std::string tag = "line" + std::to_string(net_.ac_lines[l].from) + "-" +
                              std::to_string(net_.ac_lines[l].to);
            add(IneqDesc::Kind::FlowUp, l, net_.ac_lines[l].p_max, tag + ".p_max");
            add(IneqDesc::Kind::FlowLo, l, -net_.ac_lines[l].p_max, tag + ".p_min");
        }
        for (int t = 0; t < 2 * nh_; ++t) {
            const HvdcLine& h = net_.hvdc_lines[t / 2];
            std::string tag = "hvdc" + std::to_string(t / 2) + (t % 2 == 0 ? ".from" : ".to");
            add(IneqDesc::Kind::TermPUp, t, h.p_cap(), tag + ".p_max");
            add(IneqDesc::Kind::TermPLo, t, -h.p_cap(), tag + ".p_min");
            add(IneqDesc::Kind::TermQUp, t, h.q_hi(), tag + ".q_max");
            add(IneqDesc::Kind::TermQLo, t, h.q_lo(), tag + ".q_min");
        }
        for (size_t k = 0; k < alpha_vars_.size(); ++k)
            add(IneqDesc::Kind::AlphaNonneg, static_cast<int>(k), 0.0,
                "alpha" + std::to_string(alpha_vars_[k]) + ".nonneg");
        if (opt_beta_)
            for (int c = 0; c < nh_; ++c) {
                add(IneqDesc::Kind::BetaNonneg, bp0_ + c, 0.0, "betap" + std::to_string(c));
                add(IneqDesc::Kind::BetaNonneg, bm0_ + c, 0.0, "betam" + std::to_string(c));
                add(IneqDesc::Kind::BetaCap, bp0_ + c, prob_.policy.beta_max,
                    "betap" + std::to_string(c) + ".cap");
                add(IneqDesc::Kind::BetaCap, bm0_ + c, prob_.policy.beta_max,
                    "betam" + std::to_string(c) + ".cap");
            }
    }

    const OpfProblem& prob_;
    const Network& net_;
    Eigen::MatrixXcd ybus_;
    int nb_, ng_, nh_, nw_, ref_;
    int th0_, v0_, pg0_, qg0_, pt0_, qt0_, a0_, bp0_, bm0_, nz_;
    int n_eq_ = 0;
    bool opt_alpha_ = false, opt_beta_ = false;
    int npol_ = 0;
    std::vector<int> alpha_vars_;
    std::vector<IneqDesc> ineqs_;
    double kappa_ = 0, sigma_total_ = 0, obj_scale_ = 1.0;
};

}  // namespace detail

/// Default start: flat voltages and a dispatch proportional to capacity.
inline OperatingPoint default_opf_start(const Network& net, const Eigen::VectorXd& wind_injection) {
    OperatingPoint op = OperatingPoint::flat(net);
    double wind = wind_injection.sum();
    double need = std::max(0.0, net.total_load_p() * 1.01 - wind);
    double cap = 0;
    for (const auto& g : net.generators) cap += g.p_max;
    for (int g = 0; g < net.num_gens(); ++g) {
        op.gen_p[g] = cap > 0 ? need * net.generators[g].p_max / cap : 0.0;
        op.gen_p[g] = std::min(std::max(op.gen_p[g], net.generators[g].p_min + 1e-3),
                               net.generators[g].p_max - 1e-3);
    }
    for (int w = 0; w < net.num_wind(); ++w) op.wind_p[w] = wind_injection[w];
    return op;
}

/// Solves the margin-tightened AC-OPF. `start` seeds voltages, dispatch
/// and converter set-points; `warm` optionally reuses a previous solve's
/// multipliers.
inline OpfSolution solve_acopf(const OpfProblem& problem, const OperatingPoint& start,
                               const nlp::WarmStart& warm = {}, const nlp::Options& nlp_opts = {}) {
    detail::AcopfNlp adapter(problem);
    PolicySet pol0 = problem.policy.fixed;
    Eigen::VectorXd z0 = adapter.pack(start, pol0);

    nlp::Result r = nlp::solve(adapter, z0, nlp_opts, warm);

    OpfSolution sol;
    sol.status = r.status;
    sol.kkt = r.kkt;
    sol.iterations = r.iterations;
    sol.message = r.message;
    sol.z = r.z;
    sol.y = r.y;
    sol.w = r.w;
    sol.s = r.s;
    sol.op = adapter.unpack_point(r.z);
    sol.op.solved = r.ok();
    sol.policies = adapter.unpack_policies(r.z);
    sol.objective = evaluate_objective(sol.op.gen_p, *problem.net);
    sol.margins_enforced = adapter.enforced_margins(r.z);
    sol.objective_scale = adapter.objective_scale();

    const auto& ineqs = adapter.inequalities();
    for (size_t i = 0; i < ineqs.size(); ++i)
        if (r.s.size() == static_cast<Eigen::Index>(ineqs.size()) && r.s[i] < 1e-5)
            sol.binding.push_back(ineqs[i].name);

    if (adapter.optimizing_alpha()) {
        int interior = 0;
        for (int k = 0; k < static_cast<int>(adapter.alpha_vars().size()); ++k)
            if (r.z[adapter.var_alpha(k)] > 1e-4 &&
                r.z[adapter.var_alpha(k)] < 1.0 - 1e-4)
                ++interior;
        sol.degenerate_alpha = interior >= 2;
    }
    if (!r.ok()) {
        nlp::KktNorms k = r.kkt;
        sol.message += " (primal violation " + std::to_string(std::max(k.primal_eq, k.primal_ineq)) + ")";
    }
    return sol;
}

/// Independent KKT re-evaluation for a solution produced by solve_acopf.
inline nlp::KktNorms kkt_residuals(const OpfProblem& problem, const OpfSolution& sol) {
    detail::AcopfNlp adapter(problem);
    return nlp::kkt_norms(adapter, sol.z, sol.y, sol.w);
}

}  // namespace ccopf
