// Command-line front end: subcommands mirror the experiment modes, a JSON
// config file supersedes individual flags. Exit codes: 0 success, 2 config
// error, 3 numerical failure.

#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "phi4/runner.hpp"

namespace {

std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> out;
    std::istringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        if (!cell.empty()) out.push_back(std::stod(cell));
    }
    return out;
}

std::vector<int> parse_ints(const std::string& s) {
    std::vector<int> out;
    for (double v : parse_doubles(s)) out.push_back(static_cast<int>(v));
    return out;
}

struct Flags {
    std::string config_file;
    int sites = 10;
    double mass = 0.1;
    std::string lambda_tilde;
    std::string size_list;
    int cutoff = 16;
    std::string backend = "exact";
    long shots = 100000;
    long grad_shots = 2048;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string squeezed;
    double shift_s = 0.0;
    double ro_flip = 0.0;
    double cnot_p = 0.0;
    std::string mitigation = "none";
    int zne_order = 1;
    std::string zne_folds;
    int fit_order = 1;
    int bootstrap_b = 1000;
    double ci_level = 0.68;
    std::string optimizer;
    int max_iters = 150;
    std::string in_csv;
    std::string out_prefix = "phi4_run";
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config_file, "JSON config file (supersedes flags)");
    cmd->add_option("--L", f.sites, "lattice size (even)");
    cmd->add_option("--m", f.mass, "renormalized mass");
    cmd->add_option("--lambda-tilde", f.lambda_tilde, "comma-separated lambda/m^2 values");
    cmd->add_option("--L-list", f.size_list, "comma-separated lattice sizes (gep scan)");
    cmd->add_option("--cutoff", f.cutoff, "Fock levels per qumode");
    cmd->add_option("--backend", f.backend, "exact | sampled");
    cmd->add_option("--shots", f.shots, "shots per evaluation circuit");
    cmd->add_option("--grad-shots", f.grad_shots, "shots per gradient circuit");
    cmd->add_option("--seed", f.seed, "RNG seed (required for sampled)");
    cmd->add_option("--squeezed", f.squeezed, "comma-separated squeezed mode indices");
    cmd->add_option("--shift-s", f.shift_s, "CX parameter-shift magnitude");
    cmd->add_option("--ro-flip", f.ro_flip, "per-qubit readout flip probability");
    cmd->add_option("--cnot-p", f.cnot_p, "two-qubit depolarizing probability per CNOT");
    cmd->add_option("--mitigation", f.mitigation, "none | ro | ro+zne");
    cmd->add_option("--zne-order", f.zne_order, "ZNE polynomial order");
    cmd->add_option("--zne-folds", f.zne_folds, "comma-separated CNOT fold levels");
    cmd->add_option("--fit-order", f.fit_order, "crossing fit order (1 or 2)");
    cmd->add_option("--bootstrap-B", f.bootstrap_b, "bootstrap resamples");
    cmd->add_option("--ci-level", f.ci_level, "bootstrap CI level");
    cmd->add_option("--optimizer", f.optimizer, "simplex | gd");
    cmd->add_option("--max-iters", f.max_iters, "optimizer iteration budget");
    cmd->add_option("--in", f.in_csv, "input csv (fit crossing)");
    cmd->add_option("--out", f.out_prefix, "output path prefix");
}

phi4::runner::Config to_config(const Flags& f, const std::string& mode) {
    if (!f.config_file.empty()) {
        std::ifstream in(f.config_file);
        if (!in) throw std::invalid_argument("cannot open config file " + f.config_file);
        nlohmann::json j;
        in >> j;
        auto c = phi4::runner::Config::from_json(j);
        if (c.mode.empty()) c.mode = mode;
        return c;
    }
    phi4::runner::Config c;
    c.mode = mode;
    c.sites = f.sites;
    c.mass = f.mass;
    c.lambda_tilde = parse_doubles(f.lambda_tilde);
    c.size_list = parse_ints(f.size_list);
    c.cutoff = f.cutoff;
    c.backend = f.backend;
    c.shots = f.shots;
    c.grad_shots = f.grad_shots;
    c.seed = f.seed;
    c.seed_set = f.seed_given;
    c.squeezed_modes = parse_ints(f.squeezed);
    c.shift_s = f.shift_s;
    c.noise.ro_flip = f.ro_flip;
    c.noise.cnot_p = f.cnot_p;
    c.mitigation = f.mitigation;
    c.zne_order = f.zne_order;
    if (!f.zne_folds.empty()) c.zne_folds = parse_ints(f.zne_folds);
    c.fit.order = f.fit_order;
    c.fit.bootstrap_b = f.bootstrap_b;
    c.fit.level = f.ci_level;
    c.optimizer = f.optimizer;
    c.max_iters = f.max_iters;
    c.in_csv = f.in_csv;
    c.out_prefix = f.out_prefix;
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lattice phi^4 phase transition: GEP, CV-VQE and DV-VQE toolkit"};
    app.require_subcommand(1);
    Flags f;

    std::string mode;
    std::vector<CLI::App*> leaves;
    auto bind = [&](CLI::App* cmd, const std::string& m) {
        add_common(cmd, f);
        leaves.push_back(cmd);
        cmd->callback([&mode, m] { mode = m; });
    };

    auto* gep = app.add_subcommand("gep", "classical Gaussian effective potential");
    gep->require_subcommand(1);
    bind(gep->add_subcommand("scan", "critical point over lattice sizes"), "gep_scan");
    bind(gep->add_subcommand("critical", "critical point at one lattice size"),
         "gep_critical");
    bind(app.add_subcommand("duality", "mass-duality roots"), "duality");
    auto* cv = app.add_subcommand("cv", "continuous-variable VQE");
    cv->require_subcommand(1);
    bind(cv->add_subcommand("sweep", "coupling sweep with crossing fit"), "cv_sweep");
    bind(cv->add_subcommand("vqe", "single-coupling minimization"), "cv_vqe");
    auto* dv = app.add_subcommand("dv", "two-qubit discrete-variable VQE");
    dv->require_subcommand(1);
    bind(dv->add_subcommand("sweep", "coupling sweep with crossing fit"), "dv_sweep");
    bind(dv->add_subcommand("vqe", "single-coupling minimization"), "dv_vqe");
    auto* zne = app.add_subcommand("zne", "zero-noise extrapolation series");
    zne->require_subcommand(1);
    bind(zne->add_subcommand("run", "CNOT-folded series at fixed coupling"), "zne_run");
    auto* fitc = app.add_subcommand("fit", "fits");
    fitc->require_subcommand(1);
    bind(fitc->add_subcommand("crossing", "crossing fit from a points csv"),
         "fit_crossing");

    CLI11_PARSE(app, argc, argv);
    for (const auto* leaf : leaves)
        if (leaf->parsed() && leaf->count("--seed") > 0) f.seed_given = true;

    try {
        const auto config = to_config(f, mode);
        const auto out = phi4::runner::run(config);
        if (!out.summary.empty()) std::cout << out.summary << "\n";
        std::cout << "wrote " << out.csv_path << " and " << out.manifest_path << "\n";
        return 0;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
}
