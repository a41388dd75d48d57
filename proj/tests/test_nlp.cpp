#include <catch2/catch_amalgamated.hpp>

#include "ccopf/nlp.hpp"

using namespace ccopf;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// min (z1-2)^2 + (z2-2)^2  s.t.  2 - z1 - z2 >= 0, z >= 0
struct BoxQp : nlp::Problem {
    int num_vars() const override { return 2; }
    int num_eq() const override { return 0; }
    int num_ineq() const override { return 3; }
    double objective(const VectorXd& z) const override {
        return (z[0] - 2) * (z[0] - 2) + (z[1] - 2) * (z[1] - 2);
    }
    void objective_gradient(const VectorXd& z, VectorXd& g) const override {
        g.resize(2);
        g << 2 * (z[0] - 2), 2 * (z[1] - 2);
    }
    void eq_constraints(const VectorXd&, VectorXd& c) const override { c.resize(0); }
    void eq_jacobian(const VectorXd&, MatrixXd& j) const override { j.resize(0, 2); }
    void ineq_constraints(const VectorXd& z, VectorXd& c) const override {
        c.resize(3);
        c << 2 - z[0] - z[1], z[0], z[1];
    }
    void ineq_jacobian(const VectorXd&, MatrixXd& j) const override {
        j.resize(3, 2);
        j << -1, -1, 1, 0, 0, 1;
    }
    void lagrangian_hessian(const VectorXd&, const VectorXd&, const VectorXd&,
                            MatrixXd& h) const override {
        h = 2 * MatrixXd::Identity(2, 2);
    }
};

// min z1^2 + z2^2  s.t.  z1 * z2 = 1  (nonconvex equality)
struct ProductEq : nlp::Problem {
    int num_vars() const override { return 2; }
    int num_eq() const override { return 1; }
    int num_ineq() const override { return 0; }
    double objective(const VectorXd& z) const override { return z.squaredNorm(); }
    void objective_gradient(const VectorXd& z, VectorXd& g) const override { g = 2 * z; }
    void eq_constraints(const VectorXd& z, VectorXd& c) const override {
        c.resize(1);
        c << z[0] * z[1] - 1.0;
    }
    void eq_jacobian(const VectorXd& z, MatrixXd& j) const override {
        j.resize(1, 2);
        j << z[1], z[0];
    }
    void ineq_constraints(const VectorXd&, VectorXd& c) const override { c.resize(0); }
    void ineq_jacobian(const VectorXd&, MatrixXd& j) const override { j.resize(0, 2); }
    void lagrangian_hessian(const VectorXd&, const VectorXd& y, const VectorXd&,
                            MatrixXd& h) const override {
        h.resize(2, 2);
        h << 2, -y[0], -y[0], 2;
    }
};

// Hock-Schittkowski 71, the classic interior-point exercise.
struct Hs71 : nlp::Problem {
    double prod_lo = 25.0;
    int num_vars() const override { return 4; }
    int num_eq() const override { return 1; }
    int num_ineq() const override { return 9; }
    double objective(const VectorXd& x) const override {
        return x[0] * x[3] * (x[0] + x[1] + x[2]) + x[2];
    }
    void objective_gradient(const VectorXd& x, VectorXd& g) const override {
        g.resize(4);
        g[0] = x[3] * (2 * x[0] + x[1] + x[2]);
        g[1] = x[0] * x[3];
        g[2] = x[0] * x[3] + 1.0;
        g[3] = x[0] * (x[0] + x[1] + x[2]);
    }
    void eq_constraints(const VectorXd& x, VectorXd& c) const override {
        c.resize(1);
        c << x.squaredNorm() - 40.0;
    }
    void eq_jacobian(const VectorXd& x, MatrixXd& j) const override {
        j = 2.0 * x.transpose();
    }
    void ineq_constraints(const VectorXd& x, VectorXd& c) const override {
        c.resize(9);
        c[0] = x[0] * x[1] * x[2] * x[3] - prod_lo;
        for (int i = 0; i < 4; ++i) {
            c[1 + i] = x[i] - 1.0;
            c[5 + i] = 5.0 - x[i];
        }
    }
    void ineq_jacobian(const VectorXd& x, MatrixXd& j) const override {
        j.setZero(9, 4);
        j(0, 0) = x[1] * x[2] * x[3];
        j(0, 1) = x[0] * x[2] * x[3];
        j(0, 2) = x[0] * x[1] * x[3];
        j(0, 3) = x[0] * x[1] * x[2];
        for (int i = 0; i < 4; ++i) {
            j(1 + i, i) = 1.0;
            j(5 + i, i) = -1.0;
        }
    }
    void lagrangian_hessian(const VectorXd& x, const VectorXd& y, const VectorXd& w,
                            MatrixXd& h) const override {
        h.setZero(4, 4);
        h(0, 0) = 2 * x[3];
        h(0, 1) = h(1, 0) = x[3];
        h(0, 2) = h(2, 0) = x[3];
        h(0, 3) = h(3, 0) = 2 * x[0] + x[1] + x[2];
        h(1, 3) = h(3, 1) = x[0];
        h(2, 3) = h(3, 2) = x[0];
        h -= y[0] * 2.0 * MatrixXd::Identity(4, 4);
        MatrixXd hp(4, 4);
        hp << 0, x[2] * x[3], x[1] * x[3], x[1] * x[2],
              x[2] * x[3], 0, x[0] * x[3], x[0] * x[2],
              x[1] * x[3], x[0] * x[3], 0, x[0] * x[1],
              x[1] * x[2], x[0] * x[2], x[0] * x[1], 0;
        h -= w[0] * hp;
    }
};

}  // namespace

TEST_CASE("interior point solves a box QP with an active constraint") {
    BoxQp qp;
    nlp::Result res = nlp::solve(qp, VectorXd::Constant(2, 0.5));
    REQUIRE(res.ok());
    CHECK(res.z[0] == Catch::Approx(1.0).margin(1e-6));
    CHECK(res.z[1] == Catch::Approx(1.0).margin(1e-6));
    CHECK(res.objective == Catch::Approx(2.0).margin(1e-6));
    CHECK(res.w[0] == Catch::Approx(2.0).margin(1e-4));  // binding-constraint multiplier
    CHECK(res.kkt.worst() <= 1e-6);
}

TEST_CASE("interior point handles a nonconvex equality") {
    ProductEq prob;
    VectorXd start(2);
    start << 2.0, 0.7;
    nlp::Result res = nlp::solve(prob, start);
    REQUIRE(res.ok());
    CHECK(res.objective == Catch::Approx(2.0).margin(1e-6));
    CHECK(res.z[0] * res.z[1] == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("interior point reproduces the HS71 optimum") {
    Hs71 prob;
    VectorXd start(4);
    start << 1.0, 5.0, 5.0, 1.0;
    nlp::Result res = nlp::solve(prob, start);
    REQUIRE(res.ok());
    CHECK(res.objective == Catch::Approx(17.0140173).margin(1e-5));
    CHECK(res.z[0] == Catch::Approx(1.0).margin(1e-5));
    CHECK(res.z[1] == Catch::Approx(4.7429994).margin(1e-4));
    CHECK(res.z[2] == Catch::Approx(3.8211500).margin(1e-4));
    CHECK(res.z[3] == Catch::Approx(1.3794083).margin(1e-4));
    CHECK(res.kkt.worst() <= 1e-6);
}

TEST_CASE("binding multiplier equals the finite-difference shadow price") {
    // perturb the product lower bound by +-1e-4 and compare df*/db with w
    Hs71 base;
    VectorXd start(4);
    start << 1.0, 5.0, 5.0, 1.0;
    nlp::Result res = nlp::solve(base, start);
    REQUIRE(res.ok());

    Hs71 hi = base, lo = base;
    hi.prod_lo = 25.0 + 1e-4;
    lo.prod_lo = 25.0 - 1e-4;
    nlp::Result rhi = nlp::solve(hi, res.z);
    nlp::Result rlo = nlp::solve(lo, res.z);
    REQUIRE(rhi.ok());
    REQUIRE(rlo.ok());
    double shadow = (rhi.objective - rlo.objective) / 2e-4;
    CHECK(shadow == Catch::Approx(res.w[0]).epsilon(0.01));
}

TEST_CASE("warm start reuses multipliers and converges quickly") {
    Hs71 prob;
    VectorXd start(4);
    start << 1.0, 5.0, 5.0, 1.0;
    nlp::Result cold = nlp::solve(prob, start);
    REQUIRE(cold.ok());
    nlp::WarmStart warm;
    warm.valid = true;
    warm.y = cold.y;
    warm.w = cold.w;
    warm.s = cold.s;
    nlp::Result hot = nlp::solve(prob, cold.z, {}, warm);
    REQUIRE(hot.ok());
    CHECK(hot.iterations <= cold.iterations / 2 + 2);
    CHECK(hot.objective == Catch::Approx(cold.objective).margin(1e-7));
}

TEST_CASE("kkt norms flag a perturbed point") {
    BoxQp qp;
    nlp::Result res = nlp::solve(qp, VectorXd::Constant(2, 0.5));
    REQUIRE(res.ok());
    VectorXd z = res.z;
    z[0] += 1e-3;
    nlp::KktNorms norms = nlp::kkt_norms(qp, z, res.y, res.w);
    CHECK(norms.worst() >= 5e-4);  // stationarity or primal violation grows accordingly
}
