#pragma once

// Shared fixtures and independent oracles for the test suite. Oracles here
// intentionally avoid the library's computation paths.

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <complex>
#include <fstream>
#include <sstream>

#include "ccopf/case_format.hpp"
#include "ccopf/model.hpp"
#include "ccopf/powerflow.hpp"

namespace testutil {

using namespace ccopf;

inline std::string cases_dir() { return CCOPF_CASES_DIR; }

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline Network load_case(const std::string& name) {
    return parse_case(read_file(cases_dir() + "/" + name));
}

/// Standard-normal quantile by bisection on the error-function CDF.
inline double quantile_bisect(double p) {
    double lo = -12.0, hi = 12.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        double cdf = 0.5 * std::erfc(-mid / std::sqrt(2.0));
        (cdf < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Two-bus test system: REF generator feeding a PQ load of 1.0 + j0.5 p.u.
/// over z = 0.01 + j0.1.
inline Network make_case2() {
    Network net;
    net.name = "case2";
    net.base_mva = 100.0;
    net.buses.push_back({1, BusKind::REF, 0.9, 1.1, 0.0, 0.0, 0.0, 0.0});
    net.buses.push_back({2, BusKind::PQ, 0.9, 1.1, 1.0, 0.5, 0.0, 0.0});
    net.ac_lines.push_back({1, 2, 0.01, 0.1, 0.0, 2.0});
    Generator g;
    g.bus = 1;
    g.p_min = 0.0;
    g.p_max = 3.0;
    g.q_min = -2.0;
    g.q_max = 2.0;
    g.cost_c2 = 0.01;
    g.cost_c1 = 10.0;
    g.cost_c0 = 0.0;
    net.generators.push_back(g);
    return net;
}

/// Complex fixed-point solution of the two-bus load flow; independent of
/// the Newton implementation under test.
inline std::pair<double, double> solve_case2_oracle(double load_p = 1.0, double load_q = 0.5,
                                                    std::complex<double> z = {0.01, 0.1},
                                                    double v1 = 1.0) {
    std::complex<double> v2(1.0, 0.0);
    std::complex<double> s2(-load_p, -load_q);  // net injection at bus 2
    for (int i = 0; i < 500; ++i) v2 = v1 + z * std::conj(s2 / v2);
    return {std::abs(v2), std::arg(v2)};
}

/// Four-bus meshed system with one PV generator and wind for sensitivity
/// and replay tests.
inline Network make_case4() {
    Network net;
    net.name = "case4";
    net.base_mva = 100.0;
    net.buses.push_back({1, BusKind::REF, 0.9, 1.1, 0.0, 0.0, 0.0, 0.0});
    net.buses.push_back({2, BusKind::PV, 0.9, 1.1, 0.2, 0.05, 0.0, 0.0});
    net.buses.push_back({3, BusKind::PQ, 0.9, 1.1, 1.2, 0.4, 0.0, 0.0});
    net.buses.push_back({4, BusKind::PQ, 0.9, 1.1, 0.8, 0.2, 0.0, 0.0});
    net.ac_lines.push_back({1, 2, 0.008, 0.08, 0.02, 2.5});
    net.ac_lines.push_back({1, 3, 0.010, 0.10, 0.02, 2.5});
    net.ac_lines.push_back({2, 3, 0.012, 0.09, 0.02, 2.5});
    net.ac_lines.push_back({2, 4, 0.010, 0.11, 0.02, 2.5});
    net.ac_lines.push_back({3, 4, 0.009, 0.07, 0.02, 2.5});
    Generator g1;
    g1.bus = 1;
    g1.p_min = 0.0;
    g1.p_max = 2.5;
    g1.q_min = -1.5;
    g1.q_max = 1.5;
    g1.cost_c2 = 0.012;
    g1.cost_c1 = 14.0;
    net.generators.push_back(g1);
    Generator g2 = g1;
    g2.bus = 2;
    g2.p_max = 1.8;
    g2.cost_c2 = 0.02;
    g2.cost_c1 = 22.0;
    net.generators.push_back(g2);
    WindFarm w;
    w.bus = 4;
    w.p_forecast = 0.4;
    w.p_rated = 0.8;
    w.power_factor = 1.0;
    net.wind_farms.push_back(w);
    return net;
}

/// Same grid with the 2-3 corridor replaced by an HVDC line.
inline Network make_case4_hvdc() {
    Network net = make_case4();
    net.name = "case4_hvdc";
    net.ac_lines.erase(net.ac_lines.begin() + 2);  // drop the 2-3 AC line
    HvdcLine h;
    h.from = 2;
    h.to = 3;
    h.s_nom = 1.5;
    h.m_p = 0.8;
    h.m_q_lo = 0.4;
    h.m_q_hi = 0.5;
    h.loss_a = 0.01;
    net.hvdc_lines.push_back(h);
    return net;
}

/// Power flow at a plausible dispatch; REQUIREs convergence.
inline OperatingPoint solve_default_dispatch(const Network& net) {
    int ng = net.num_gens();
    double wind = 0;
    for (const auto& w : net.wind_farms) wind += w.p_forecast;
    double need = net.total_load_p() * 1.02 - wind;
    double cap = 0;
    for (const auto& g : net.generators) cap += g.p_max;
    Eigen::VectorXd gp(ng), gq = Eigen::VectorXd::Zero(ng);
    for (int g = 0; g < ng; ++g) gp[g] = std::max(0.0, need) * net.generators[g].p_max / cap;
    Eigen::VectorXd hp = Eigen::VectorXd::Zero(net.num_terminals());
    Eigen::VectorXd hq = Eigen::VectorXd::Zero(net.num_terminals());
    for (int c = 0; c < net.num_hvdc(); ++c) {
        hp[2 * c] = -0.3 * net.hvdc_lines[c].p_cap();
        hp[2 * c + 1] = 0.3 * net.hvdc_lines[c].p_cap() - net.hvdc_lines[c].p_loss();
    }
    Eigen::VectorXd vset = Eigen::VectorXd::Ones(net.num_buses());
    InjectionSpec spec = spec_from_dispatch(net, gp, gq, hp, hq, vset);
    PfResult res = solve_power_flow(net, spec, OperatingPoint::flat(net));
    REQUIRE(res.converged);
    return res.op;
}

}  // namespace testutil
