#pragma once

// Dense primal-dual interior-point solver for smooth NLPs
//
//   min f(z)   s.t.  c_E(z) = 0,  c_I(z) >= 0
//
// with slack variables on the inequalities, a logarithmic barrier driven
// by a monotone mu schedule, an l1 penalty line search, and adaptive
// primal regularization when the Newton direction fails the descent test.
// Suited to desk-scale problems; all linear algebra is dense LU.

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

namespace ccopf::nlp {

class Problem {
public:
    virtual ~Problem() = default;
    virtual int num_vars() const = 0;
    virtual int num_eq() const = 0;
    virtual int num_ineq() const = 0;
    virtual double objective(const Eigen::VectorXd& z) const = 0;
    virtual void objective_gradient(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const = 0;
    virtual void eq_constraints(const Eigen::VectorXd& z, Eigen::VectorXd& c) const = 0;
    virtual void ineq_constraints(const Eigen::VectorXd& z, Eigen::VectorXd& c) const = 0;
    virtual void eq_jacobian(const Eigen::VectorXd& z, Eigen::MatrixXd& jac) const = 0;
    virtual void ineq_jacobian(const Eigen::VectorXd& z, Eigen::MatrixXd& jac) const = 0;
    /// Hessian of the Lagrangian  f(z) - y^T c_E(z) - w^T c_I(z).
    virtual void lagrangian_hessian(const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& w, Eigen::MatrixXd& hess) const = 0;
};

enum class SolveStatus { Optimal, MaxIterations, StepFailure, NumericalFailure };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::MaxIterations: return "max-iterations";
        case SolveStatus::StepFailure: return "step-failure";
        case SolveStatus::NumericalFailure: return "numerical-failure";
    }
    return "?";
}

struct KktNorms {
    double stationarity = 0;
    double primal_eq = 0;
    double primal_ineq = 0;
    double complementarity = 0;
    double worst() const {
        return std::max(std::max(stationarity, complementarity), std::max(primal_eq, primal_ineq));
    }
};

struct Options {
    double tol = 1e-6;
    int max_iter = 300;
    double mu_init = 1e-1;
    int verbose = 0;
};

struct WarmStart {
    Eigen::VectorXd y;  // equality multipliers
    Eigen::VectorXd w;  // inequality multipliers
    Eigen::VectorXd s;  // slacks
    bool valid = false;
};

struct Result {
    Eigen::VectorXd z, y, w, s;
    SolveStatus status = SolveStatus::NumericalFailure;
    int iterations = 0;
    double objective = 0;
    KktNorms kkt;
    std::string message;
    bool ok() const { return status == SolveStatus::Optimal; }
};

/// Independent KKT re-evaluation at a candidate primal-dual point.
inline KktNorms kkt_norms(const Problem& p, const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& w) {
    KktNorms out;
    Eigen::VectorXd grad;
    p.objective_gradient(z, grad);
    Eigen::VectorXd ce, ci;
    p.eq_constraints(z, ce);
    p.ineq_constraints(z, ci);
    Eigen::MatrixXd je, ji;
    p.eq_jacobian(z, je);
    p.ineq_jacobian(z, ji);
    Eigen::VectorXd stat = grad;
    if (y.size()) stat -= je.transpose() * y;
    if (w.size()) stat -= ji.transpose() * w;
    out.stationarity = stat.size() ? stat.lpNorm<Eigen::Infinity>() : 0.0;
    out.primal_eq = ce.size() ? ce.lpNorm<Eigen::Infinity>() : 0.0;
    out.primal_ineq = ci.size() ? std::max(0.0, -ci.minCoeff()) : 0.0;
    out.complementarity = ci.size() ? ci.cwiseProduct(w).lpNorm<Eigen::Infinity>() : 0.0;
    return out;
}

inline Result solve(const Problem& p, const Eigen::VectorXd& z0, const Options& opts = {},
                    const WarmStart& warm = {}) {
    const int nz = p.num_vars(), me = p.num_eq(), mi = p.num_ineq();
    Result res;
    Eigen::VectorXd z = z0;

    Eigen::VectorXd ce(me), ci(mi), grad(nz);
    Eigen::MatrixXd je(me, nz), ji(mi, nz), hess(nz, nz);
    p.eq_constraints(z, ce);
    p.ineq_constraints(z, ci);
    p.objective_gradient(z, grad);
    p.eq_jacobian(z, je);
    p.ineq_jacobian(z, ji);

    double mu = opts.mu_init;
    Eigen::VectorXd s(mi), w(mi), y(me);
    if (warm.valid && warm.s.size() == mi && warm.w.size() == mi && warm.y.size() == me) {
        s = warm.s.cwiseMax(1e-8);
        w = warm.w.cwiseMax(1e-8).cwiseMin(1e10);
        y = warm.y;
        if (mi > 0) mu = std::min(opts.mu_init, std::max(opts.tol, s.dot(w) / std::max(1, mi)));
    } else {
        for (int i = 0; i < mi; ++i) s[i] = std::max(ci[i], 1e-2);
        w = Eigen::VectorXd::Constant(mi, mu).cwiseQuotient(s);
        y = Eigen::VectorXd::Zero(me);
    }

    auto barrier_error = [&](double mu_val) {
        Eigen::VectorXd stat = grad;
        if (me) stat -= je.transpose() * y;
        if (mi) stat -= ji.transpose() * w;
        double sd = std::max(100.0, (y.lpNorm<1>() + w.lpNorm<1>()) / std::max(1, me + mi)) / 100.0;
        double e = stat.size() ? stat.lpNorm<Eigen::Infinity>() / sd : 0.0;
        if (me) e = std::max(e, ce.lpNorm<Eigen::Infinity>());
        if (mi) {
            e = std::max(e, (ci - s).lpNorm<Eigen::Infinity>());
            double sc = std::max(100.0, w.lpNorm<1>() / std::max(1, mi)) / 100.0;
            e = std::max(e, (s.cwiseProduct(w).array() - mu_val).abs().maxCoeff() / sc);
        }
        return e;
    };

    double nu = 1.0;            // l1 penalty weight
    double delta_last = 0.0;    // last successful regularization
    double delta_carry = 0.0;   // persistent damping after poor steps
    double last_alpha_p_ = 0.0, last_alpha_d_ = 0.0;
    int it = 0;
    std::string failure;

    while (it < opts.max_iter) {
        double err0 = barrier_error(0.0);
        if (opts.verbose >= 2)
            std::printf("  ipm it %3d  mu %8.1e  err %9.2e  f %.8e  nu %8.1e  alpha %8.1e/%8.1e\n",
                        it, mu, err0, p.objective(z), nu, last_alpha_p_, last_alpha_d_);
        if (opts.verbose >= 3) {
            Eigen::VectorXd stat = grad;
            if (me) stat -= je.transpose() * y;
            if (mi) stat -= ji.transpose() * w;
            int istat = 0;
            double vstat = stat.size() ? stat.cwiseAbs().maxCoeff(&istat) : 0.0;
            double comp = 0;
            int icomp = 0;
            if (mi) comp = (s.cwiseProduct(w).array() - mu).abs().maxCoeff(&icomp);
            std::printf("    stat %9.2e (var %d)  eq %9.2e  ineq %9.2e  comp %9.2e (ineq %d s %.1e w %.1e)\n",
                        vstat, istat, me ? ce.lpNorm<Eigen::Infinity>() : 0.0,
                        mi ? (ci - s).lpNorm<Eigen::Infinity>() : 0.0, comp, icomp,
                        mi ? s[icomp] : 0.0, mi ? w[icomp] : 0.0);
        }
        if (err0 <= opts.tol) {
            res.status = SolveStatus::Optimal;
            break;
        }
        if (mi > 0 && barrier_error(mu) <= 10.0 * mu && mu > opts.tol / 20.0) {
            mu = std::max(opts.tol / 20.0, std::min(0.2 * mu, std::pow(mu, 1.5)));
            continue;
        }

        p.lagrangian_hessian(z, y, w, hess);

        Eigen::VectorXd r_d = grad;
        if (me) r_d -= je.transpose() * y;
        if (mi) r_d -= ji.transpose() * w;
        Eigen::VectorXd r_i = mi ? (ci - s).eval() : Eigen::VectorXd();
        Eigen::VectorXd r_c = mi ? (s.cwiseProduct(w).array() - mu).matrix().eval() : Eigen::VectorXd();

        Eigen::VectorXd dz, dy = Eigen::VectorXd::Zero(me), ds, dw;
        double delta = delta_carry;
        bool step_ok = false;
        double dphi = 0.0;
        Eigen::PartialPivLU<Eigen::MatrixXd> lu;  // kept for the second-order correction
        Eigen::VectorXd dvec = mi ? w.cwiseQuotient(s).eval() : Eigen::VectorXd();

        // solves the reduced KKT system for given constraint residuals
        auto compute_direction = [&](const Eigen::VectorXd& re_eff, const Eigen::VectorXd& ri_eff,
                                     Eigen::VectorXd& dz_o, Eigen::VectorXd& dy_o,
                                     Eigen::VectorXd& ds_o, Eigen::VectorXd& dw_o) {
            Eigen::VectorXd rhs(nz + me);
            Eigen::VectorXd top = -r_d;
            if (mi) top -= ji.transpose() * (r_c.cwiseQuotient(s) + dvec.cwiseProduct(ri_eff));
            rhs.head(nz) = top;
            if (me) rhs.tail(me) = -re_eff;
            Eigen::VectorXd sol = lu.solve(rhs);
            if (!sol.allFinite()) return false;
            dz_o = sol.head(nz);
            if (me) dy_o = -sol.tail(me);  // kkt carries +Je^T u with u = -dy
            if (mi) {
                ds_o = ji * dz_o + ri_eff;
                dw_o = (-r_c - w.cwiseProduct(ds_o)).cwiseQuotient(s);
            }
            return true;
        };

        bool accepted = false;
        double alpha = 0.0, a_dual = 1.0;
        for (int attempt = 0; attempt < 6 && !accepted; ++attempt) {
        step_ok = false;
        for (int reg_try = 0; reg_try < 30 && !step_ok; ++reg_try) {
            Eigen::MatrixXd wtilde = hess;
            if (mi) wtilde += ji.transpose() * dvec.asDiagonal() * ji;
            if (delta > 0) wtilde.diagonal().array() += delta;

            Eigen::MatrixXd kkt(nz + me, nz + me);
            kkt.setZero();
            kkt.topLeftCorner(nz, nz) = wtilde;
            if (me) {
                kkt.topRightCorner(nz, me) = je.transpose();
                kkt.bottomLeftCorner(me, nz) = je;
                kkt.bottomRightCorner(me, me).diagonal().array() = -1e-10;
            }
            lu.compute(kkt);
            if (!compute_direction(ce, r_i, dz, dy, ds, dw)) {
                delta = std::max(1e-8, delta == 0 ? 1e-4 : 10.0 * delta);
                continue;
            }

            // penalty weight from the current multiplier estimates; computed
            // per iteration so a transient spike cannot poison later steps
            double y_need = 0.0;
            if (me) y_need = std::max(y_need, (y + dy).lpNorm<Eigen::Infinity>());
            if (mi) y_need = std::max(y_need, (w + dw).lpNorm<Eigen::Infinity>());
            nu = std::max(1.0, 1.1 * y_need + 0.1);

            double infeas = (me ? ce.lpNorm<1>() : 0.0) + (mi ? r_i.lpNorm<1>() : 0.0);
            dphi = grad.dot(dz) - nu * infeas;
            if (mi) dphi -= mu * ds.cwiseQuotient(s).sum();
            double curvature = dz.dot(wtilde.selfadjointView<Eigen::Lower>() * dz);
            bool need_curvature = infeas <= 1e-6;
            if (opts.verbose >= 3)
                std::printf("    dir: |dz| %9.2e  curv %9.2e  dphi %9.2e  delta %8.1e\n",
                            dz.norm(), curvature, dphi, delta);
            if (dphi < -1e-16 * std::max(1.0, std::abs(p.objective(z))) &&
                (!need_curvature || curvature >= 1e-12 * dz.squaredNorm())) {
                step_ok = true;
            } else {
                delta = std::max(1e-8, delta == 0 ? std::max(1e-6, delta_last * 0.33) : 10.0 * delta);
            }
        }
        if (!step_ok) break;
        delta_last = delta;

        double tau = std::max(0.99, 1.0 - mu);
        auto boundary_step = [&](const Eigen::VectorXd& dsv, const Eigen::VectorXd& dwv,
                                 double& ap, double& ad) {
            ap = 1.0;
            ad = 1.0;
            for (int i = 0; i < mi; ++i) {
                if (dsv[i] < 0) ap = std::min(ap, -tau * s[i] / dsv[i]);
                if (dwv[i] < 0) ad = std::min(ad, -tau * w[i] / dwv[i]);
            }
        };
        double a_primal;
        boundary_step(ds, dw, a_primal, a_dual);

        auto merit = [&](const Eigen::VectorXd& zt, const Eigen::VectorXd& st) {
            Eigen::VectorXd cet, cit;
            p.eq_constraints(zt, cet);
            p.ineq_constraints(zt, cit);
            double val = p.objective(zt);
            if (mi) {
                for (int i = 0; i < mi; ++i) val -= mu * std::log(st[i]);
                val += nu * (cit - st).lpNorm<1>();
            }
            if (me) val += nu * cet.lpNorm<1>();
            return val;
        };

        double phi0 = merit(z, s);
        auto armijo_ok = [&](const Eigen::VectorXd& zt, const Eigen::VectorXd& st, double a) {
            if (mi && st.minCoeff() <= 0) return false;
            double phit = merit(zt, st);
            return std::isfinite(phit) && phit <= phi0 + 1e-4 * a * dphi;
        };

        alpha = a_primal;
        {
            Eigen::VectorXd zt = z + alpha * dz;
            Eigen::VectorXd st = mi ? (s + alpha * ds).eval() : s;
            if (armijo_ok(zt, st, alpha)) {
                z = zt;
                s = st;
                accepted = true;
            }
        }
        if (!accepted) {
            // second-order correction: re-solve with constraint values at
            // the trial point to cancel the curvature-induced infeasibility
            Eigen::VectorXd ce_t, ci_t;
            p.eq_constraints(z + a_primal * dz, ce_t);
            Eigen::VectorXd re_soc = a_primal * ce + ce_t;
            Eigen::VectorXd ri_soc;
            if (mi) {
                p.ineq_constraints(z + a_primal * dz, ci_t);
                ri_soc = a_primal * r_i + (ci_t - (s + a_primal * ds));
            }
            Eigen::VectorXd dz2, dy2 = Eigen::VectorXd::Zero(me), ds2, dw2;
            if (compute_direction(re_soc, ri_soc, dz2, dy2, ds2, dw2)) {
                double a2p, a2d;
                boundary_step(ds2, dw2, a2p, a2d);
                Eigen::VectorXd zt = z + a2p * dz2;
                Eigen::VectorXd st = mi ? (s + a2p * ds2).eval() : s;
                if (armijo_ok(zt, st, a2p)) {
                    z = zt;
                    s = st;
                    dy = dy2;
                    dw = dw2;
                    alpha = a2p;
                    a_dual = a2d;
                    accepted = true;
                }
            }
        }
        if (!accepted) {
            // a step cut far below the boundary limit signals strong merit
            // curvature: escalate the damping and recompute instead
            double floor_alpha = std::max(1e-12, 1e-2 * a_primal);
            for (double a = 0.5 * a_primal; a >= floor_alpha && !accepted; a *= 0.5) {
                Eigen::VectorXd zt = z + a * dz;
                Eigen::VectorXd st = mi ? (s + a * ds).eval() : s;
                if (armijo_ok(zt, st, a)) {
                    z = zt;
                    s = st;
                    alpha = a;
                    accepted = true;
                }
            }
            if (!accepted && attempt + 1 < 6) {
                delta_carry = std::max(1e-6, 10.0 * std::max(delta, delta_carry));
                delta = delta_carry;
            } else if (!accepted) {
                // last resort: take whatever tiny step the merit admits
                for (double a = 1e-2 * a_primal; a >= 1e-14 && !accepted; a *= 0.5) {
                    Eigen::VectorXd zt = z + a * dz;
                    Eigen::VectorXd st = mi ? (s + a * ds).eval() : s;
                    if (armijo_ok(zt, st, a)) {
                        z = zt;
                        s = st;
                        alpha = a;
                        accepted = true;
                    }
                }
            }
        }
        }  // attempt loop
        if (!accepted) {
            failure = dphi < 0 ? "line search failed" : "could not produce a descent direction";
            res.status = SolveStatus::StepFailure;
            break;
        }
        last_alpha_p_ = alpha;
        last_alpha_d_ = a_dual;
        if (alpha > 0.5) delta_carry = delta_carry > 1e-10 ? delta_carry / 3.0 : 0.0;
        y += a_dual * dy;
        if (mi) {
            w += a_dual * dw;
            // keep multipliers compatible with the barrier neighbourhood
            const double k_sigma = 1e10;
            for (int i = 0; i < mi; ++i)
                w[i] = std::min(std::max(w[i], mu / (k_sigma * s[i])), k_sigma * mu / s[i]);
        }

        p.eq_constraints(z, ce);
        p.ineq_constraints(z, ci);
        p.objective_gradient(z, grad);
        p.eq_jacobian(z, je);
        p.ineq_jacobian(z, ji);
        ++it;
    }

    if (it >= opts.max_iter) {
        res.status = SolveStatus::MaxIterations;
        failure = "iteration limit reached";
    }
    res.z = z;
    res.y = y;
    res.w = w;
    res.s = s;
    res.iterations = it;
    res.objective = p.objective(z);
    res.kkt = kkt_norms(p, z, y, w);
    res.message = failure;
    if (res.status == SolveStatus::Optimal && res.kkt.worst() > 10 * opts.tol) {
        // the scaled barrier test passed but the unscaled norms did not
        res.status = SolveStatus::NumericalFailure;
        res.message = "converged point fails the unscaled KKT check";
    }
    return res;
}

}  // namespace ccopf::nlp
