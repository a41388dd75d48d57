#include <catch2/catch_amalgamated.hpp>

#include "ccopf/case_format.hpp"
#include "ccopf/model.hpp"
#include "helpers.hpp"

using namespace ccopf;

static const char* kMinimalCase = R"(# smallest valid case
[system]
base_mva = 100

[bus]
id kind v_min v_max load_p load_q
1 REF 0.9 1.1 0 0
2 PQ  0.9 1.1 0.5 0.1

[line]
from to series_r series_x charging_b p_max
1 2 0.01 0.1 0 1.5

[gen]
bus p_min p_max q_min q_max cost_c2 cost_c1 cost_c0 participates
1 0 2 -1 1 0.01 10 0 1
)";

TEST_CASE("parse minimal two-bus document") {
    Network net = parse_case(kMinimalCase);
    CHECK(net.num_buses() == 2);
    CHECK(net.num_lines() == 1);
    CHECK(net.num_gens() == 1);
    CHECK(net.base_mva == 100.0);
    CHECK(net.buses[0].kind == BusKind::REF);
    CHECK(net.buses[1].load_p == 0.5);
    CHECK(validate_network(net).ok());
}

TEST_CASE("two reference buses is a semantic error") {
    std::string doc = kMinimalCase;
    doc.replace(doc.find("2 PQ"), 4, "2 REF");
    try {
        parse_case(doc);
        FAIL("expected semantic error");
    } catch (const CaseError& e) {
        CHECK(e.kind == CaseError::Kind::Semantic);
        CHECK(std::string(e.what()).find("multiple reference buses") != std::string::npos);
    }
}

TEST_CASE("syntax errors carry a line number") {
    std::string doc = kMinimalCase;
    doc.replace(doc.find("0.01 0.1"), 4, "oops");
    try {
        parse_case(doc);
        FAIL("expected syntax error");
    } catch (const CaseError& e) {
        CHECK(e.kind == CaseError::Kind::Syntax);
        CHECK(e.line >= 10);
    }
}

TEST_CASE("serialize then parse is the identity on the network value") {
    Network net = testutil::make_case4_hvdc();
    net.buses[2].shunt_b = 0.037;
    net.wind_farms[0].power_factor = 0.97;
    std::string text = serialize_case(net);
    Network back = parse_case(text);
    REQUIRE(back.num_buses() == net.num_buses());
    for (int i = 0; i < net.num_buses(); ++i) {
        CHECK(back.buses[i].id == net.buses[i].id);
        CHECK(back.buses[i].kind == net.buses[i].kind);
        CHECK(back.buses[i].load_p == net.buses[i].load_p);
        CHECK(back.buses[i].shunt_b == net.buses[i].shunt_b);
    }
    REQUIRE(back.num_lines() == net.num_lines());
    for (int l = 0; l < net.num_lines(); ++l) {
        CHECK(back.ac_lines[l].series_x == net.ac_lines[l].series_x);
        CHECK(back.ac_lines[l].p_max == net.ac_lines[l].p_max);
    }
    REQUIRE(back.num_gens() == net.num_gens());
    for (int g = 0; g < net.num_gens(); ++g)
        CHECK(back.generators[g].cost_c1 == net.generators[g].cost_c1);
    REQUIRE(back.num_wind() == 1);
    CHECK(back.wind_farms[0].power_factor == net.wind_farms[0].power_factor);
    REQUIRE(back.num_hvdc() == 1);
    CHECK(back.hvdc_lines[0].s_nom == net.hvdc_lines[0].s_nom);
    // serialized form is a fixed point
    CHECK(serialize_case(back) == text);
}

TEST_CASE("validate_network reports named findings") {
    Network net = testutil::make_case4();
    CHECK(validate_network(net).ok());

    Network bad = net;
    bad.generators[0].p_min = 3.0;  // above p_max
    auto rep = validate_network(bad);
    REQUIRE(rep.findings.size() == 1);
    CHECK(rep.findings[0].find("generator 0") != std::string::npos);
    CHECK(rep.findings[0].find("p_min") != std::string::npos);

    Network bad2 = testutil::make_case4_hvdc();
    bad2.hvdc_lines[0].s_nom = 0.0;
    auto rep2 = validate_network(bad2);
    REQUIRE(rep2.findings.size() == 1);
    CHECK(rep2.findings[0].find("s_nom") != std::string::npos);

    Network bad3 = net;
    bad3.ac_lines[0].to = 99;
    CHECK_FALSE(validate_network(bad3).ok());
}

TEST_CASE("per-unit conversion round trip") {
    Network net = testutil::make_case2();
    for (double mw : {0.0, 1.0, 123.456, 9876.5}) {
        double pu = net.to_pu(mw);
        CHECK(pu * net.base_mva == Catch::Approx(mw).epsilon(1e-12));
    }
}

TEST_CASE("legacy import handles tables and reports unsupported fields") {
    const char* legacy = R"(function mpc = tiny
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
 1 3 0   0  0 0 1 1.0 0 345 1 1.1 0.9;
 2 2 50  10 0 0 1 1.0 0 345 1 1.1 0.9;
 3 1 120 40 0 0 1 1.0 0 345 1 1.1 0.9;
];
mpc.gen = [
 1 100 0 80 -80 1.0 100 1 250 0;
 2 80  0 60 -60 1.0 100 1 160 0;
 2 10  0 20 -20 1.0 100 0 60  0;
];
mpc.branch = [
 1 2 0.01 0.08 0.02 200 0 0 0     0 1 -360 360;
 1 3 0.01 0.09 0.02 220 0 0 1.025 0 1 -360 360;
 2 3 0.02 0.10 0.02 0   0 0 0     0 1 -360 360;
];
mpc.gencost = [
 2 0 0 3 0.02 15 100;
 2 0 0 3 0.03 20 120;
 2 0 0 3 0.01 10 90;
];
)";
    ImportResult res = import_legacy_case(legacy);
    const Network& net = res.network;
    CHECK(net.num_buses() == 3);
    CHECK(net.num_gens() == 2);  // out-of-service generator dropped
    CHECK(net.num_lines() == 3);
    CHECK(net.buses[0].kind == BusKind::REF);
    CHECK(net.buses[2].load_p == Catch::Approx(1.2));
    CHECK(net.generators[0].cost_c1 == Catch::Approx(15.0));
    CHECK(net.generators[1].q_max == Catch::Approx(0.6));
    CHECK(net.ac_lines[0].p_max == Catch::Approx(2.0));
    bool tap_named = false, dropped_named = false, rating_named = false;
    for (const auto& w : res.warnings) {
        if (w.find("tap ratio") != std::string::npos) tap_named = true;
        if (w.find("out of service") != std::string::npos) dropped_named = true;
        if (w.find("no thermal rating") != std::string::npos) rating_named = true;
    }
    CHECK(tap_named);
    CHECK(dropped_named);
    CHECK(rating_named);
    CHECK(validate_network(net).ok());
}

TEST_CASE("sidecar applies wind, hvdc and import modifications") {
    const char* legacy = R"(mpc.baseMVA = 100;
mpc.bus = [
 1 3 0   0  0 0 1 1.0 0 345 1 1.06 0.94;
 2 1 150 30 0 0 1 1.0 0 345 1 1.06 0.94;
];
mpc.gen = [ 1 100 0 80 -80 1.0 100 1 300 0; ];
mpc.branch = [ 1 2 0.01 0.08 0.02 200 0 0 0 0 1 -360 360; ];
mpc.gencost = [ 2 0 0 3 0.02 15 100; ];
)";
    const char* sidecar = R"([import]
p_max_factor = 0.8

[wind]
bus p_forecast p_rated power_factor
2 0.5 1.0 1.0

[hvdc]
from to s_nom m_p m_q_lo m_q_hi loss_a
1 2 2.0 0.8 0.4 0.5 0.01
)";
    ImportResult res = import_legacy_case(legacy);
    apply_sidecar(res.network, sidecar, &res.warnings);
    CHECK(res.network.ac_lines[0].p_max == Catch::Approx(1.6));
    REQUIRE(res.network.num_wind() == 1);
    CHECK(res.network.wind_farms[0].p_forecast == 0.5);
    REQUIRE(res.network.num_hvdc() == 1);
    CHECK(res.network.hvdc_lines[0].p_loss() == Catch::Approx(0.04));
    // round-trips through the native format
    Network back = parse_case(serialize_case(res.network));
    CHECK(back.num_hvdc() == 1);
}
