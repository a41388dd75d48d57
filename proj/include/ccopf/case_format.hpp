#pragma once

// Case file I/O. The native format is a sectioned text document with named
// columns; a converter ingests the common matrix-table exchange format
// (bus/gen/branch tables plus a baseMVA scalar) as an import subset.

#include <cctype>
#include <cstdio>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ccopf/model.hpp"

namespace ccopf {

struct CaseError : std::runtime_error {
    enum class Kind { Syntax, Semantic };
    Kind kind;
    int line;
    int column;
    CaseError(Kind k, int ln, int col, const std::string& msg)
        : std::runtime_error((k == Kind::Syntax ? "syntax error" : "semantic error") +
                             std::string(" at line ") + std::to_string(ln) + ":" +
                             std::to_string(col) + ": " + msg),
          kind(k), line(ln), column(col) {}
};

namespace detail {

inline std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Record {
    int line;
    std::vector<std::string> fields;
};

struct Section {
    std::string name;
    int line = 0;
    std::vector<std::pair<std::string, std::string>> kv;  // for [system]-style sections
    std::vector<std::string> header;
    std::vector<Record> records;
};

inline std::vector<Section> tokenize_sections(std::string_view text) {
    std::vector<Section> sections;
    int lineno = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t nl = text.find('\n', pos);
        std::string line(text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos));
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw CaseError(CaseError::Kind::Syntax, lineno, 1, "unterminated section header");
            Section s;
            s.name = trim(std::string_view(t).substr(1, t.size() - 2));
            s.line = lineno;
            sections.push_back(std::move(s));
            continue;
        }
        if (sections.empty())
            throw CaseError(CaseError::Kind::Syntax, lineno, 1, "content before any [section]");
        Section& cur = sections.back();
        size_t eq = t.find('=');
        if (eq != std::string::npos && cur.header.empty() && cur.records.empty()) {
            cur.kv.emplace_back(trim(std::string_view(t).substr(0, eq)),
                                trim(std::string_view(t).substr(eq + 1)));
            continue;
        }
        auto toks = split_ws(t);
        if (cur.header.empty()) {
            cur.header = toks;
        } else {
            cur.records.push_back({lineno, std::move(toks)});
        }
    }
    return sections;
}

class RecordView {
public:
    RecordView(const std::vector<std::string>& header, const Record& rec) : header_(header), rec_(rec) {
        if (rec.fields.size() != header.size())
            throw CaseError(CaseError::Kind::Syntax, rec.line, 1,
                            "expected " + std::to_string(header.size()) + " fields, found " +
                                std::to_string(rec.fields.size()));
    }
    int line() const { return rec_.line; }
    std::optional<std::string> raw(const std::string& col) const {
        for (size_t i = 0; i < header_.size(); ++i)
            if (header_[i] == col) return rec_.fields[i];
        return std::nullopt;
    }
    double num(const std::string& col) const {
        auto r = raw(col);
        if (!r) throw CaseError(CaseError::Kind::Syntax, rec_.line, 1, "missing column '" + col + "'");
        return parse_num(*r);
    }
    double num_or(const std::string& col, double dflt) const {
        auto r = raw(col);
        return r ? parse_num(*r) : dflt;
    }
    int integer(const std::string& col) const { return static_cast<int>(num(col)); }
    int integer_or(const std::string& col, int dflt) const {
        auto r = raw(col);
        return r ? static_cast<int>(parse_num(*r)) : dflt;
    }
    std::string text(const std::string& col) const {
        auto r = raw(col);
        if (!r) throw CaseError(CaseError::Kind::Syntax, rec_.line, 1, "missing column '" + col + "'");
        return *r;
    }

private:
    double parse_num(const std::string& s) const {
        try {
            size_t used = 0;
            double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw CaseError(CaseError::Kind::Syntax, rec_.line, 1, "not a number: '" + s + "'");
        }
    }
    const std::vector<std::string>& header_;
    const Record& rec_;
};

}  // namespace detail

/// Parses a native case document into a per-unit Network. Throws CaseError
/// with line/column for malformed input and with the violated invariant
/// named for semantically broken networks.
inline Network parse_case(std::string_view document) {
    using detail::RecordView;
    Network net;
    bool saw_system = false;
    for (const auto& sec : detail::tokenize_sections(document)) {
        if (sec.name == "system") {
            saw_system = true;
            for (const auto& [k, v] : sec.kv) {
                if (k == "base_mva") net.base_mva = std::stod(v);
                else if (k == "name") net.name = v;
                else
                    throw CaseError(CaseError::Kind::Syntax, sec.line, 1, "unknown system key '" + k + "'");
            }
        } else if (sec.name == "bus") {
            for (const auto& rec : sec.records) {
                RecordView r(sec.header, rec);
                Bus b;
                b.id = r.integer("id");
                std::string kind = r.text("kind");
                if (kind == "REF") b.kind = BusKind::REF;
                else if (kind == "PV") b.kind = BusKind::PV;
                else if (kind == "PQ") b.kind = BusKind::PQ;
                else
                    throw CaseError(CaseError::Kind::Syntax, rec.line, 1, "unknown bus kind '" + kind + "'");
                b.v_min = r.num("v_min");
                b.v_max = r.num("v_max");
                b.load_p = r.num_or("load_p", 0.0);
                b.load_q = r.num_or("load_q", 0.0);
                b.shunt_g = r.num_or("shunt_g", 0.0);
                b.shunt_b = r.num_or("shunt_b", 0.0);
                net.buses.push_back(b);
            }
        } else if (sec.name == "line") {
            for (const auto& rec : sec.records) {
                RecordView r(sec.header, rec);
                AcLine l;
                l.from = r.integer("from");
                l.to = r.integer("to");
                l.series_r = r.num("series_r");
                l.series_x = r.num("series_x");
                l.charging_b = r.num_or("charging_b", 0.0);
                l.p_max = r.num("p_max");
                net.ac_lines.push_back(l);
            }
        } else if (sec.name == "gen") {
            for (const auto& rec : sec.records) {
                RecordView r(sec.header, rec);
                Generator g;
                g.bus = r.integer("bus");
                g.p_min = r.num("p_min");
                g.p_max = r.num("p_max");
                g.q_min = r.num("q_min");
                g.q_max = r.num("q_max");
                g.cost_c2 = r.num_or("cost_c2", 0.0);
                g.cost_c1 = r.num_or("cost_c1", 0.0);
                g.cost_c0 = r.num_or("cost_c0", 0.0);
                g.can_participate = r.integer_or("participates", 1) != 0;
                net.generators.push_back(g);
            }
        } else if (sec.name == "wind") {
            for (const auto& rec : sec.records) {
                RecordView r(sec.header, rec);
                WindFarm w;
                w.bus = r.integer("bus");
                w.p_forecast = r.num("p_forecast");
                w.p_rated = r.num("p_rated");
                w.power_factor = r.num_or("power_factor", 1.0);
                net.wind_farms.push_back(w);
            }
        } else if (sec.name == "hvdc") {
            for (const auto& rec : sec.records) {
                RecordView r(sec.header, rec);
                HvdcLine h;
                h.from = r.integer("from");
                h.to = r.integer("to");
                h.s_nom = r.num("s_nom");
                h.m_p = r.num("m_p");
                h.m_q_lo = r.num("m_q_lo");
                h.m_q_hi = r.num("m_q_hi");
                h.loss_a = r.num("loss_a");
                h.q_lo_sign = r.integer_or("q_lo_sign", -1);
                net.hvdc_lines.push_back(h);
            }
        } else {
            throw CaseError(CaseError::Kind::Syntax, sec.line, 1, "unknown section [" + sec.name + "]");
        }
    }
    if (!saw_system)
        throw CaseError(CaseError::Kind::Syntax, 1, 1, "missing [system] section");
    ValidationReport rep = validate_network(net);
    if (!rep.ok())
        throw CaseError(CaseError::Kind::Semantic, 1, 1, rep.findings.front());
    return net;
}

/// Canonical native-format serialization; parse(serialize(net)) reproduces
/// the network value exactly (doubles are written round-trip safe).
inline std::string serialize_case(const Network& net) {
    using detail::fmt_double;
    std::ostringstream os;
    os << "[system]\n";
    if (!net.name.empty()) os << "name = " << net.name << "\n";
    os << "base_mva = " << fmt_double(net.base_mva) << "\n\n";

    os << "[bus]\n";
    os << "id kind v_min v_max load_p load_q shunt_g shunt_b\n";
    for (const auto& b : net.buses)
        os << b.id << " " << to_string(b.kind) << " " << fmt_double(b.v_min) << " "
           << fmt_double(b.v_max) << " " << fmt_double(b.load_p) << " " << fmt_double(b.load_q)
           << " " << fmt_double(b.shunt_g) << " " << fmt_double(b.shunt_b) << "\n";

    os << "\n[line]\n";
    os << "from to series_r series_x charging_b p_max\n";
    for (const auto& l : net.ac_lines)
        os << l.from << " " << l.to << " " << fmt_double(l.series_r) << " "
           << fmt_double(l.series_x) << " " << fmt_double(l.charging_b) << " "
           << fmt_double(l.p_max) << "\n";

    os << "\n[gen]\n";
    os << "bus p_min p_max q_min q_max cost_c2 cost_c1 cost_c0 participates\n";
    for (const auto& g : net.generators)
        os << g.bus << " " << fmt_double(g.p_min) << " " << fmt_double(g.p_max) << " "
           << fmt_double(g.q_min) << " " << fmt_double(g.q_max) << " " << fmt_double(g.cost_c2)
           << " " << fmt_double(g.cost_c1) << " " << fmt_double(g.cost_c0) << " "
           << (g.can_participate ? 1 : 0) << "\n";

    if (!net.wind_farms.empty()) {
        os << "\n[wind]\n";
        os << "bus p_forecast p_rated power_factor\n";
        for (const auto& w : net.wind_farms)
            os << w.bus << " " << fmt_double(w.p_forecast) << " " << fmt_double(w.p_rated) << " "
               << fmt_double(w.power_factor) << "\n";
    }
    if (!net.hvdc_lines.empty()) {
        os << "\n[hvdc]\n";
        os << "from to s_nom m_p m_q_lo m_q_hi loss_a q_lo_sign\n";
        for (const auto& h : net.hvdc_lines)
            os << h.from << " " << h.to << " " << fmt_double(h.s_nom) << " " << fmt_double(h.m_p)
               << " " << fmt_double(h.m_q_lo) << " " << fmt_double(h.m_q_hi) << " "
               << fmt_double(h.loss_a) << " " << h.q_lo_sign << "\n";
    }
    return os.str();
}

struct ImportResult {
    Network network;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<std::vector<double>> parse_matrix_block(const std::string& body, int base_line) {
    std::vector<std::vector<double>> rows;
    std::istringstream is(body);
    std::string row;
    int ln = base_line;
    while (std::getline(is, row, ';')) {
        ++ln;
        std::string t = trim(row);
        if (t.empty()) continue;
        std::vector<double> vals;
        std::istringstream rs(t);
        double v;
        while (rs >> v) vals.push_back(v);
        if (!rs.eof()) throw CaseError(CaseError::Kind::Syntax, ln, 1, "bad numeric row in matrix table");
        if (!vals.empty()) rows.push_back(std::move(vals));
    }
    return rows;
}

}  // namespace detail

/// Imports the legacy matrix-table exchange format (baseMVA scalar plus
/// bus/gen/branch/gencost tables). Fields outside the model (taps, shifts,
/// ramp data) are reported in `warnings`, never silently dropped.
inline ImportResult import_legacy_case(std::string_view text) {
    ImportResult out;
    Network& net = out.network;

    auto find_block = [&](const std::string& key) -> std::optional<std::string> {
        std::string pat = key + " = [";
        size_t p = text.find(pat);
        if (p == std::string_view::npos) {
            pat = key + " =[";
            p = text.find(pat);
        }
        if (p == std::string_view::npos) {
            pat = key + "=[";
            p = text.find(pat);
        }
        if (p == std::string_view::npos) return std::nullopt;
        size_t open = text.find('[', p);
        size_t close = text.find(']', open);
        if (close == std::string_view::npos)
            throw CaseError(CaseError::Kind::Syntax, 1, 1, "unterminated matrix for " + key);
        return std::string(text.substr(open + 1, close - open - 1));
    };

    {
        std::string key = "baseMVA";
        size_t p = text.find(key);
        if (p == std::string_view::npos)
            throw CaseError(CaseError::Kind::Syntax, 1, 1, "missing baseMVA");
        size_t eq = text.find('=', p);
        size_t sc = text.find(';', eq);
        net.base_mva = std::stod(detail::trim(text.substr(eq + 1, sc - eq - 1)));
    }
    {
        size_t p = text.find("function mpc = ");
        if (p != std::string_view::npos) {
            size_t e = text.find_first_of("\r\n", p);
            net.name = detail::trim(text.substr(p + 15, e - p - 15));
        }
    }

    auto bus_block = find_block("mpc.bus");
    if (!bus_block) throw CaseError(CaseError::Kind::Syntax, 1, 1, "missing mpc.bus table");
    for (const auto& row : detail::parse_matrix_block(*bus_block, 0)) {
        if (row.size() < 13)
            throw CaseError(CaseError::Kind::Syntax, 1, 1, "bus row needs 13 columns");
        Bus b;
        b.id = static_cast<int>(row[0]);
        int type = static_cast<int>(row[1]);
        if (type == 3) b.kind = BusKind::REF;
        else if (type == 2) b.kind = BusKind::PV;
        else if (type == 1) b.kind = BusKind::PQ;
        else {
            out.warnings.push_back("bus " + std::to_string(b.id) + ": isolated (type 4), kept as PQ");
            b.kind = BusKind::PQ;
        }
        b.load_p = row[2] / net.base_mva;
        b.load_q = row[3] / net.base_mva;
        b.shunt_g = row[4] / net.base_mva;
        b.shunt_b = row[5] / net.base_mva;
        b.v_max = row[11];
        b.v_min = row[12];
        net.buses.push_back(b);
    }

    auto branch_block = find_block("mpc.branch");
    if (!branch_block) throw CaseError(CaseError::Kind::Syntax, 1, 1, "missing mpc.branch table");
    int branch_no = 0;
    for (const auto& row : detail::parse_matrix_block(*branch_block, 0)) {
        ++branch_no;
        if (row.size() < 11)
            throw CaseError(CaseError::Kind::Syntax, 1, 1, "branch row needs at least 11 columns");
        std::string tag = "branch " + std::to_string(branch_no) + " (" +
                          std::to_string((int)row[0]) + "-" + std::to_string((int)row[1]) + ")";
        if (row[10] == 0.0) {
            out.warnings.push_back(tag + ": out of service, dropped");
            continue;
        }
        if (row[8] != 0.0 && row[8] != 1.0)
            out.warnings.push_back(tag + ": off-nominal tap ratio " + detail::fmt_double(row[8]) +
                                   " ignored (tap transformers unsupported)");
        if (row[9] != 0.0)
            out.warnings.push_back(tag + ": phase shift " + detail::fmt_double(row[9]) +
                                   " deg ignored (phase shifters unsupported)");
        AcLine l;
        l.from = static_cast<int>(row[0]);
        l.to = static_cast<int>(row[1]);
        l.series_r = row[2];
        l.series_x = row[3];
        l.charging_b = row[4];
        l.p_max = row[5] > 0.0 ? row[5] / net.base_mva : 99.0;
        if (row[5] <= 0.0) out.warnings.push_back(tag + ": no thermal rating, limit set to 99 p.u.");
        net.ac_lines.push_back(l);
    }

    auto gen_block = find_block("mpc.gen");
    if (!gen_block) throw CaseError(CaseError::Kind::Syntax, 1, 1, "missing mpc.gen table");
    auto gen_rows = detail::parse_matrix_block(*gen_block, 0);
    std::vector<bool> in_service;
    for (size_t i = 0; i < gen_rows.size(); ++i) {
        const auto& row = gen_rows[i];
        if (row.size() < 10)
            throw CaseError(CaseError::Kind::Syntax, 1, 1, "gen row needs at least 10 columns");
        bool on = row[7] > 0.0;
        in_service.push_back(on);
        if (!on) {
            out.warnings.push_back("generator " + std::to_string(i + 1) + ": out of service, dropped");
            continue;
        }
        Generator g;
        g.bus = static_cast<int>(row[0]);
        g.q_max = row[3] / net.base_mva;
        g.q_min = row[4] / net.base_mva;
        g.p_max = row[8] / net.base_mva;
        g.p_min = row[9] / net.base_mva;
        net.generators.push_back(g);
    }

    if (auto cost_block = find_block("mpc.gencost")) {
        auto cost_rows = detail::parse_matrix_block(*cost_block, 0);
        size_t gi = 0;
        for (size_t i = 0; i < cost_rows.size() && i < gen_rows.size(); ++i) {
            if (!in_service[i]) continue;
            const auto& row = cost_rows[i];
            if (row.size() < 4 || static_cast<int>(row[0]) != 2) {
                out.warnings.push_back("gencost row " + std::to_string(i + 1) +
                                       ": only polynomial model 2 supported, cost left at zero");
                ++gi;
                continue;
            }
            int ncost = static_cast<int>(row[3]);
            Generator& g = net.generators[gi++];
            if (ncost >= 3 && row.size() >= 4 + static_cast<size_t>(ncost)) {
                g.cost_c2 = row[4];
                g.cost_c1 = row[5];
                g.cost_c0 = row[6];
            } else if (ncost == 2 && row.size() >= 6) {
                g.cost_c1 = row[4];
                g.cost_c0 = row[5];
            } else {
                out.warnings.push_back("gencost row " + std::to_string(i + 1) + ": unsupported cost shape");
            }
        }
    } else {
        out.warnings.push_back("no gencost table, all costs zero");
    }
    return out;
}

/// Sidecar directives applied after a legacy import: extra wind farms and
/// HVDC lines in native-format sections, plus an [import] section with
/// optional keys p_max_factor, v_min, v_max, ref_bus, drop_line (from-to).
inline void apply_sidecar(Network& net, std::string_view sidecar, std::vector<std::string>* warnings = nullptr) {
    Network addons;  // reuse the native parsers via a scratch network
    for (const auto& sec : detail::tokenize_sections(sidecar)) {
        if (sec.name == "import") {
            for (const auto& [k, v] : sec.kv) {
                if (k == "p_max_factor") {
                    double f = std::stod(v);
                    for (auto& l : net.ac_lines) l.p_max *= f;
                } else if (k == "v_min") {
                    for (auto& b : net.buses) b.v_min = std::stod(v);
                } else if (k == "v_max") {
                    for (auto& b : net.buses) b.v_max = std::stod(v);
                } else if (k == "ref_bus") {
                    int id = std::stoi(v);
                    for (auto& b : net.buses)
                        b.kind = b.id == id ? BusKind::REF
                                            : (b.kind == BusKind::REF ? BusKind::PV : b.kind);
                } else if (k == "drop_line") {
                    size_t dash = v.find('-');
                    int f = std::stoi(v.substr(0, dash)), t = std::stoi(v.substr(dash + 1));
                    std::erase_if(net.ac_lines, [&](const AcLine& l) {
                        return (l.from == f && l.to == t) || (l.from == t && l.to == f);
                    });
                } else if (k == "participate_only") {
                    // comma-separated bus ids keeping nonzero participation
                    std::vector<int> keep;
                    std::istringstream is{v};
                    std::string tok;
                    while (std::getline(is, tok, ',')) keep.push_back(std::stoi(detail::trim(tok)));
                    for (auto& g : net.generators)
                        g.can_participate =
                            std::find(keep.begin(), keep.end(), g.bus) != keep.end();
                } else if (warnings) {
                    warnings->push_back("unknown import key '" + k + "' ignored");
                }
            }
        } else if (sec.name == "wind") {
            for (const auto& rec : sec.records) {
                detail::RecordView r(sec.header, rec);
                WindFarm w;
                w.bus = r.integer("bus");
                w.p_forecast = r.num("p_forecast");
                w.p_rated = r.num("p_rated");
                w.power_factor = r.num_or("power_factor", 1.0);
                net.wind_farms.push_back(w);
            }
        } else if (sec.name == "hvdc") {
            for (const auto& rec : sec.records) {
                detail::RecordView r(sec.header, rec);
                HvdcLine h;
                h.from = r.integer("from");
                h.to = r.integer("to");
                h.s_nom = r.num("s_nom");
                h.m_p = r.num("m_p");
                h.m_q_lo = r.num("m_q_lo");
                h.m_q_hi = r.num("m_q_hi");
                h.loss_a = r.num("loss_a");
                h.q_lo_sign = r.integer_or("q_lo_sign", -1);
                net.hvdc_lines.push_back(h);
            }
        } else {
            throw CaseError(CaseError::Kind::Syntax, sec.line, 1,
                            "unsupported sidecar section [" + sec.name + "]");
        }
    }
}

}  // namespace ccopf
