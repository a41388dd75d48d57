#pragma once

// Domain model for the AC/HVDC network. All electrical quantities are
// stored in per-unit on the system base; cost coefficients are in $/h per
// MW^2, MW and constant. Objects are treated as immutable once built.

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccopf {

enum class BusKind { REF, PV, PQ };

inline const char* to_string(BusKind k) {
    switch (k) {
        case BusKind::REF: return "REF";
        case BusKind::PV: return "PV";
        case BusKind::PQ: return "PQ";
    }
    return "?";
}

struct Bus {
    int id = 0;
    BusKind kind = BusKind::PQ;
    double v_min = 0.9;
    double v_max = 1.1;
    double load_p = 0.0;
    double load_q = 0.0;
    double shunt_g = 0.0;
    double shunt_b = 0.0;
};

struct AcLine {
    int from = 0;
    int to = 0;
    double series_r = 0.0;
    double series_x = 0.0;
    double charging_b = 0.0;  // total line charging
    double p_max = 0.0;       // active sending-end flow limit
};

struct Generator {
    int bus = 0;
    double p_min = 0.0;
    double p_max = 0.0;
    double q_min = 0.0;
    double q_max = 0.0;
    double cost_c2 = 0.0;  // $/h per MW^2
    double cost_c1 = 0.0;  // $/h per MW
    double cost_c0 = 0.0;  // $/h
    bool can_participate = true;
};

struct WindFarm {
    int bus = 0;
    double p_forecast = 0.0;
    double p_rated = 0.0;
    double power_factor = 1.0;  // cos(phi) in (0, 1]

    /// Reactive-to-active power ratio; zero at unity power factor.
    double power_ratio() const {
        double c2 = power_factor * power_factor;
        return std::sqrt(std::max(0.0, (1.0 - c2) / c2));
    }
};

struct HvdcLine {
    int from = 0;  // AC terminal of the first converter
    int to = 0;    // AC terminal of the second converter
    double s_nom = 0.0;
    double m_p = 0.8;
    double m_q_lo = 0.4;
    double m_q_hi = 0.5;
    double loss_a = 0.01;  // constant converter loss fraction
    int q_lo_sign = -1;    // -1: reactive box is [-m_q_lo*S, m_q_hi*S]; +1: [+m_q_lo*S, m_q_hi*S]

    double p_cap() const { return m_p * s_nom; }
    double q_lo() const { return static_cast<double>(q_lo_sign) * m_q_lo * s_nom; }
    double q_hi() const { return m_q_hi * s_nom; }
    /// Lumped DC-system loss, constant: 2 a S_nom.
    double p_loss() const { return 2.0 * loss_a * s_nom; }
};

struct Network {
    std::string name;
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<AcLine> ac_lines;
    std::vector<Generator> generators;
    std::vector<WindFarm> wind_farms;
    std::vector<HvdcLine> hvdc_lines;

    int num_buses() const { return static_cast<int>(buses.size()); }
    int num_lines() const { return static_cast<int>(ac_lines.size()); }
    int num_gens() const { return static_cast<int>(generators.size()); }
    int num_wind() const { return static_cast<int>(wind_farms.size()); }
    int num_hvdc() const { return static_cast<int>(hvdc_lines.size()); }
    int num_terminals() const { return 2 * num_hvdc(); }

    int bus_index(int id) const {
        for (int i = 0; i < num_buses(); ++i)
            if (buses[i].id == id) return i;
        throw std::out_of_range("unknown bus id " + std::to_string(id));
    }
    bool has_bus(int id) const {
        return std::any_of(buses.begin(), buses.end(), [&](const Bus& b) { return b.id == id; });
    }
    int ref_index() const {
        for (int i = 0; i < num_buses(); ++i)
            if (buses[i].kind == BusKind::REF) return i;
        throw std::logic_error("network has no reference bus");
    }
    std::vector<int> gens_at(int bus_idx) const {
        std::vector<int> out;
        for (int g = 0; g < num_gens(); ++g)
            if (bus_index(generators[g].bus) == bus_idx) out.push_back(g);
        return out;
    }
    /// Terminal t in [0, 2*num_hvdc): even = `from` end, odd = `to` end.
    int terminal_bus_index(int t) const {
        const HvdcLine& h = hvdc_lines[t / 2];
        return bus_index(t % 2 == 0 ? h.from : h.to);
    }
    static double terminal_sign(int t) { return t % 2 == 0 ? +1.0 : -1.0; }

    double total_load_p() const {
        double s = 0;
        for (const auto& b : buses) s += b.load_p;
        return s;
    }

    double to_mw(double pu) const { return pu * base_mva; }
    double to_pu(double mw) const { return mw / base_mva; }
};

struct ValidationReport {
    std::vector<std::string> findings;
    bool ok() const { return findings.empty(); }
};

/// Checks every structural invariant of the network; pure, never throws.
inline ValidationReport validate_network(const Network& net) {
    ValidationReport rep;
    auto add = [&rep](std::string msg) { rep.findings.push_back(std::move(msg)); };

    std::map<int, int> id_count;
    for (const auto& b : net.buses) id_count[b.id]++;
    for (const auto& [id, n] : id_count)
        if (n > 1) add("duplicate bus id " + std::to_string(id));

    int n_ref = 0;
    for (const auto& b : net.buses) {
        if (b.kind == BusKind::REF) n_ref++;
        if (!(b.v_min < b.v_max))
            add("bus " + std::to_string(b.id) + ": v_min must be below v_max");
        if (!(b.v_min > 0.0)) add("bus " + std::to_string(b.id) + ": v_min must be positive");
    }
    if (n_ref == 0) add("missing reference bus");
    if (n_ref > 1) add("multiple reference buses");

    auto known = [&](int id) { return id_count.count(id) == 1 || (id_count.count(id) && id_count[id] >= 1); };

    for (size_t i = 0; i < net.ac_lines.size(); ++i) {
        const auto& l = net.ac_lines[i];
        std::string tag = "line " + std::to_string(l.from) + "-" + std::to_string(l.to);
        if (!known(l.from)) add(tag + ": unknown from-bus");
        if (!known(l.to)) add(tag + ": unknown to-bus");
        if (l.from == l.to) add(tag + ": from and to coincide");
        if (l.series_x == 0.0) add(tag + ": series_x must be nonzero");
        if (!(l.p_max > 0.0)) add(tag + ": p_max must be positive");
    }
    bool ref_has_gen = false;
    for (size_t g = 0; g < net.generators.size(); ++g) {
        const auto& gen = net.generators[g];
        std::string tag = "generator " + std::to_string(g) + " at bus " + std::to_string(gen.bus);
        if (!known(gen.bus)) add(tag + ": unknown bus");
        if (gen.p_min > gen.p_max) add(tag + ": p_min exceeds p_max");
        if (gen.q_min > gen.q_max) add(tag + ": q_min exceeds q_max");
        if (gen.cost_c2 < 0.0) add(tag + ": negative quadratic cost");
        if (known(gen.bus)) {
            for (const auto& b : net.buses)
                if (b.id == gen.bus && b.kind == BusKind::REF) ref_has_gen = true;
        }
    }
    if (n_ref == 1 && !ref_has_gen) add("reference bus has no generator");

    for (const auto& w : net.wind_farms) {
        std::string tag = "wind farm at bus " + std::to_string(w.bus);
        if (!known(w.bus)) add(tag + ": unknown bus");
        if (!(w.p_forecast >= 0.0 && w.p_forecast <= w.p_rated))
            add(tag + ": forecast must lie in [0, rated]");
        if (!(w.power_factor > 0.0 && w.power_factor <= 1.0))
            add(tag + ": power factor must lie in (0, 1]");
    }
    for (const auto& h : net.hvdc_lines) {
        std::string tag = "hvdc " + std::to_string(h.from) + "-" + std::to_string(h.to);
        if (!known(h.from)) add(tag + ": unknown from-bus");
        if (!known(h.to)) add(tag + ": unknown to-bus");
        if (!(h.s_nom > 0.0)) add(tag + ": s_nom must be positive");
        if (!(h.m_p > 0.0 && h.m_p <= 1.0)) add(tag + ": m_p must lie in (0, 1]");
        if (h.m_q_lo < 0.0 || h.m_q_hi < 0.0) add(tag + ": reactive fractions must be nonnegative");
        if (!(h.loss_a >= 0.0 && h.loss_a < 0.1)) add(tag + ": loss_a must lie in [0, 0.1)");
    }
    return rep;
}

}  // namespace ccopf
