// Command-line front end: case import, chance-constrained solves, Monte
// Carlo validation and run comparison. Exit codes: 0 success, 1 usage or
// file errors, 2 infeasible problem, 3 no convergence.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ccopf/case_format.hpp"
#include "ccopf/cc_algorithm.hpp"
#include "ccopf/sampling.hpp"
#include "ccopf/solution_io.hpp"
#include "ccopf/validation.hpp"

namespace fs = std::filesystem;
using namespace ccopf;

namespace {

int log_level() {
    const char* v = std::getenv("CCOPF_LOG");
    return v ? std::atoi(v) : 0;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void spit(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out.good()) throw std::runtime_error("cannot write file: " + path);
    out << content;
}

Network load_case_file(const std::string& path) {
    Network net = parse_case(slurp(path));
    ValidationReport rep = validate_network(net);
    if (!rep.ok()) throw std::runtime_error("invalid case: " + rep.findings.front());
    return net;
}

struct WindArgs {
    std::string samples_path;
    int fit_n = 100;
    double sigma_rel = 0.075;
    double correlation = 0.3;
};

WindModel resolve_wind(const Network& net, const WindArgs& args) {
    if (!args.samples_path.empty()) {
        std::ifstream in(args.samples_path);
        if (!in.good()) throw std::runtime_error("cannot open samples: " + args.samples_path);
        SampleSet all = load_samples(in, net);
        int n = std::min(args.fit_n, all.count());
        SampleSet head;
        head.data = all.data.topRows(n);
        head.provenance = all.provenance;
        return fit_gaussian(head);
    }
    return synthetic_wind_model(net, args.sigma_rel, args.correlation);
}

PolicySet load_policy(const std::string& path, const Network& net) {
    ordered_json j = ordered_json::parse(slurp(path));
    PolicySet pol = PolicySet::zeros(net);
    auto a = j.at("alpha");
    if (static_cast<int>(a.size()) != net.num_gens())
        throw std::runtime_error("policy file: alpha size mismatch");
    for (int g = 0; g < net.num_gens(); ++g) pol.alpha[g] = a[g].get<double>();
    if (j.contains("beta")) {
        auto b = j.at("beta");
        if (static_cast<int>(b.size()) != net.num_hvdc())
            throw std::runtime_error("policy file: beta size mismatch");
        for (int c = 0; c < net.num_hvdc(); ++c) pol.beta[c] = b[c].get<double>();
    }
    return pol;
}

int run_solve(const std::string& case_path, const std::string& mode, double epsilon, double rho,
              const WindArgs& wind_args, const std::string& policy_path, bool cgen, bool fix_beta,
              const std::string& out_dir, bool dump_gamma) {
    Network net = load_case_file(case_path);
    WindModel wind = resolve_wind(net, wind_args);

    CcOptions opts;
    opts.epsilon = epsilon;
    opts.rho = rho;
    opts.constraint_generation = cgen;
    opts.verbose = log_level();
    if (!policy_path.empty()) {
        opts.fixed_policies = load_policy(policy_path, net);
        opts.has_fixed_policies = true;
    }
    CcSolution sol;
    if (mode == "det") {
        sol = run_deterministic(net, wind, opts);
    } else if (mode == "cc-fixed") {
        opts.policy_mode = PolicyMode::Fixed;
        sol = run_iterative_ccopf(net, wind, opts);
        sol.mode = "cc-fixed";
    } else if (mode == "cc-opt") {
        opts.policy_mode = PolicyMode::Optimize;
        opts.fix_beta = fix_beta;
        sol = run_iterative_ccopf(net, wind, opts);
        sol.mode = "cc-opt";
    } else {
        std::cerr << "unknown mode '" << mode << "'\n";
        return 1;
    }

    fs::create_directories(out_dir);
    spit(out_dir + "/solution.json", solution_to_json(sol, net).dump(2) + "\n");
    spit(out_dir + "/trace.csv", trace_csv(sol.trace));
    spit(out_dir + "/margins.csv", margins_csv(net, sol.margins));
    if (dump_gamma && sol.converged) {
        SensitivityBundle b =
            margins_for_all_constraints(net, sol.op, sol.policies, wind, epsilon);
        spit(out_dir + "/gamma.csv", gamma_csv(net, b));
    }

    if (!sol.converged) {
        std::cerr << "not converged: " << sol.trace.diagnosis << "\n";
        bool infeasible = sol.last_opf.kkt.primal_eq > 1e-4 || sol.last_opf.kkt.primal_ineq > 1e-4;
        return infeasible ? 2 : 3;
    }
    std::cout << "status " << (mode == "det" ? "optimal" : "converged") << "\n";
    std::cout << "objective " << sol.objective << " $/h\n";
    std::cout << "iterations " << sol.trace.records.size() << "\n";
    if (sol.cg_active_count >= 0)
        std::cout << "generated margins " << sol.cg_active_count << "\n";
    return 0;
}

std::string augmented_report_csv(const Network& net, const ViolationReport& rep,
                                 const CcSolution& sol, const std::string& label) {
    std::string csv = report_csv(net, rep);
    csv += "meta,fingerprint," + fingerprint_hex(case_fingerprint(net)) + "\n";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", sol.objective);
    csv += "meta,objective," + std::string(buf) + "\n";
    csv += "meta,label," + label + "\n";
    return csv;
}

int run_validate(const std::string& case_path, const std::string& solution_path, int mc_n,
                 std::uint64_t seed, const std::string& oos_path, const std::string& out_dir) {
    Network net = load_case_file(case_path);
    CcSolution sol = solution_from_json(ordered_json::parse(slurp(solution_path)), net);

    fs::create_directories(out_dir);
    SampleSet in_sample = sample_gaussian(sol.wind, mc_n, derive_seed(seed, "mc-insample"));
    ViolationReport rep = monte_carlo(net, sol, in_sample);
    spit(out_dir + "/report_insample.csv",
         augmented_report_csv(net, rep, sol, sol.mode + "-insample"));
    std::cout << "in-sample  " << report_pretty(net, rep);

    if (!oos_path.empty()) {
        std::ifstream in(oos_path);
        if (!in.good()) throw std::runtime_error("cannot open samples: " + oos_path);
        SampleSet raw = load_samples(in, net);
        // realizations are re-centered by the model's forecast adjustment
        SampleSet oos = raw;
        oos.data.rowwise() -= sol.wind.mean().transpose();
        ViolationReport rep2 = monte_carlo(net, sol, oos);
        spit(out_dir + "/report_oos.csv", augmented_report_csv(net, rep2, sol, sol.mode + "-oos"));
        std::cout << "out-of-sample  " << report_pretty(net, rep2);
    }
    return 0;
}

struct ParsedReport {
    ViolationReport rep;
    double objective = 0;
    std::string label, fingerprint;
};

ParsedReport parse_report_csv(const std::string& text) {
    ParsedReport out;
    std::istringstream is(text);
    std::string line;
    std::vector<double> pg, qg, v, pl, pc;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string cls, tag, val;
        std::getline(ls, cls, ',');
        std::getline(ls, tag, ',');
        std::getline(ls, val, ',');
        if (cls == "pg") pg.push_back(std::stod(val));
        else if (cls == "qg") qg.push_back(std::stod(val));
        else if (cls == "v") v.push_back(std::stod(val));
        else if (cls == "pl") pl.push_back(std::stod(val));
        else if (cls == "pc") pc.push_back(std::stod(val));
        else if (cls == "meta" && tag == "samples") out.rep.samples = std::stoi(val);
        else if (cls == "meta" && tag == "non_converged") out.rep.non_converged = std::stoi(val);
        else if (cls == "meta" && tag == "objective") out.objective = std::stod(val);
        else if (cls == "meta" && tag == "label") out.label = val;
        else if (cls == "meta" && tag == "fingerprint") out.fingerprint = val;
    }
    auto to_vec = [](const std::vector<double>& x) {
        return Eigen::Map<const Eigen::VectorXd>(x.data(), x.size()).eval();
    };
    out.rep.rate_pg = to_vec(pg);
    out.rep.rate_qg = to_vec(qg);
    out.rep.rate_v = to_vec(v);
    out.rep.rate_pl = to_vec(pl);
    out.rep.rate_pc = to_vec(pc);
    return out;
}

int run_compare(const std::vector<std::string>& paths, const std::string& out_path) {
    if (paths.empty()) {
        std::cerr << "no runs\n";
        return 1;
    }
    std::vector<ViolationReport> reports;
    std::vector<double> objectives;
    std::vector<std::string> labels;
    std::string fingerprint;
    for (const auto& p : paths) {
        ParsedReport pr = parse_report_csv(slurp(p));
        if (fingerprint.empty()) fingerprint = pr.fingerprint;
        else if (pr.fingerprint != fingerprint) {
            std::cerr << "conflicting case fingerprints between reports\n";
            return 1;
        }
        reports.push_back(pr.rep);
        objectives.push_back(pr.objective);
        labels.push_back(pr.label.empty() ? fs::path(p).stem().string() : pr.label);
    }
    ComparisonTable table = compare_runs(reports, objectives, labels);
    spit(out_path, table.to_csv());
    std::cout << table.to_pretty();
    return 0;
}

int run_import(const std::string& legacy_path, const std::string& sidecar_path,
               const std::string& out_path, const std::string& name) {
    ImportResult res = import_legacy_case(slurp(legacy_path));
    if (!sidecar_path.empty()) apply_sidecar(res.network, slurp(sidecar_path), &res.warnings);
    if (!name.empty()) res.network.name = name;
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    ValidationReport rep = validate_network(res.network);
    if (!rep.ok()) {
        for (const auto& f : rep.findings) std::cerr << "invalid: " << f << "\n";
        return 1;
    }
    std::string text = serialize_case(res.network);
    // imported cases must survive the native round trip
    Network back = parse_case(text);
    if (serialize_case(back) != text) {
        std::cerr << "internal error: canonical form is not a fixed point\n";
        return 1;
    }
    spit(out_path, text);
    std::cout << "imported " << res.network.num_buses() << " buses, " << res.network.num_lines()
              << " lines, " << res.network.num_gens() << " generators ("
              << res.warnings.size() << " warnings)\n";
    return 0;
}

int run_sample(const std::string& case_path, const std::string& model, double sigma_rel,
               double corr, int n, std::uint64_t seed, const std::string& out_path) {
    Network net = load_case_file(case_path);
    WindModel wind = synthetic_wind_model(net, sigma_rel, corr);
    SampleSet s;
    if (model == "gaussian") s = sample_gaussian(wind, n, seed);
    else if (model == "mixture") s = sample_mixture(wind, n, seed);
    else {
        std::cerr << "unknown sample model '" << model << "'\n";
        return 1;
    }
    std::ostringstream os;
    save_samples(os, s, net);
    spit(out_path, os.str());
    std::cout << "wrote " << n << " samples to " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chance-constrained AC optimal power flow toolkit"};
    app.require_subcommand(1);

    std::string case_path, mode = "det", policy_path, out_dir = "out", samples_path;
    double epsilon = 0.05, rho = 1e-5;
    int fit_n = 100, mc_n = 10000;
    double sigma_rel = 0.075, corr = 0.3;
    std::uint64_t seed = 1;
    std::string cgen = "off";
    bool fix_beta = false, dump_gamma = false;

    auto* solve = app.add_subcommand("solve", "solve a case in one of the three formulations");
    solve->add_option("--case", case_path, "native case file")->required();
    solve->add_option("--mode", mode, "det | cc-fixed | cc-opt");
    solve->add_option("--epsilon", epsilon, "violation probability bound");
    solve->add_option("--rho", rho, "margin convergence tolerance");
    solve->add_option("--samples", samples_path, "fit the wind model from this CSV");
    solve->add_option("--fit-n", fit_n, "leading samples used for fitting");
    solve->add_option("--wind-sigma", sigma_rel, "synthetic model: sigma as fraction of forecast");
    solve->add_option("--wind-corr", corr, "synthetic model: pairwise correlation");
    solve->add_option("--fixed-policy", policy_path, "JSON with alpha (and beta) values");
    solve->add_option("--constraint-gen", cgen, "on | off");
    solve->add_flag("--fix-beta", fix_beta, "optimize alpha only, hold beta at the policy values");
    solve->add_flag("--dump-gamma", dump_gamma, "also write the response-factor table");
    solve->add_option("--seed", seed, "master seed");
    solve->add_option("--out", out_dir, "output directory");

    std::string solution_path, oos_path;
    auto* validate = app.add_subcommand("validate", "Monte Carlo assessment of a solution");
    validate->add_option("--case", case_path, "native case file")->required();
    validate->add_option("--solution", solution_path, "solution JSON")->required();
    validate->add_option("--mc-n", mc_n, "in-sample draw count");
    validate->add_option("--samples", oos_path, "out-of-sample realizations CSV");
    validate->add_option("--seed", seed, "master seed");
    validate->add_option("--out", out_dir, "output directory");

    std::vector<std::string> report_paths;
    std::string table_path = "comparison.csv";
    auto* compare = app.add_subcommand("compare", "merge violation reports side by side");
    compare->add_option("reports", report_paths, "report CSV files");
    compare->add_option("--out", table_path, "merged table path");

    std::string legacy_path, sidecar_path, import_out = "imported.case", import_name;
    auto* import = app.add_subcommand("import", "convert a legacy matrix-table case");
    import->add_option("--legacy", legacy_path, "legacy case file")->required();
    import->add_option("--sidecar", sidecar_path, "additions applied after import");
    import->add_option("--name", import_name, "network name for the output");
    import->add_option("--out", import_out, "native case output path");

    std::string sample_model = "mixture", sample_out = "samples.csv";
    int sample_n = 10000;
    auto* sample = app.add_subcommand("sample", "write synthetic forecast-error realizations");
    sample->add_option("--case", case_path, "native case file")->required();
    sample->add_option("--model", sample_model, "gaussian | mixture");
    sample->add_option("--wind-sigma", sigma_rel, "sigma as fraction of forecast");
    sample->add_option("--wind-corr", corr, "pairwise correlation");
    sample->add_option("--n", sample_n, "realization count");
    sample->add_option("--seed", seed, "seed");
    sample->add_option("--out", sample_out, "CSV output path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) {
            WindArgs wa{samples_path, fit_n, sigma_rel, corr};
            return run_solve(case_path, mode, epsilon, rho, wa, policy_path, cgen == "on",
                             fix_beta, out_dir, dump_gamma);
        }
        if (validate->parsed())
            return run_validate(case_path, solution_path, mc_n, seed, oos_path, out_dir);
        if (compare->parsed()) return run_compare(report_paths, table_path);
        if (import->parsed()) return run_import(legacy_path, sidecar_path, import_out, import_name);
        if (sample->parsed())
            return run_sample(case_path, sample_model, sigma_rel, corr, sample_n, seed, sample_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
