#include "phi4/runner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <sstream>
#include <stdexcept>

#include "phi4/cv.hpp"
#include "phi4/dv.hpp"
#include "phi4/fit.hpp"
#include "phi4/gep.hpp"
#include "phi4/io.hpp"
#include "phi4/numerics.hpp"
#include "phi4/qubit.hpp"

namespace phi4::runner {

namespace {

constexpr const char* kVersion = "phi4 1.0.0";

using nlohmann::json;

std::string fd(double v) { return io::format_double(v); }

qubit::NoiseModel noise_model(const Config& c) {
    qubit::NoiseModel nm;
    nm.cnot_depolarizing_p = c.noise.cnot_p;
    for (int q = 0; q < 2; ++q) {
        Eigen::Matrix2d conf;
        conf << 1.0 - c.noise.ro_flip, c.noise.ro_flip, c.noise.ro_flip,
            1.0 - c.noise.ro_flip;
        nm.ro_confusion[q] = conf;
    }
    return nm;
}

dv::Mitigation mitigation_of(const std::string& s) {
    if (s == "none") return dv::Mitigation::None;
    if (s == "ro") return dv::Mitigation::RO;
    if (s == "ro+zne") return dv::Mitigation::RO_ZNE;
    throw std::invalid_argument("unknown mitigation: " + s);
}

// Classical warm start on the broken branch: the larger zero of dV_G/dOmega^2
// and the matching phi_c. Falls back to a generic broken-side guess.
std::pair<double, double> broken_branch_start(const gep::LatticeSpec& spec) {
    const double m = spec.mass;
    double prev_x = 1.02 * m;
    double prev_g = gep::gep_gradient(prev_x, spec);
    double root = 0.0;
    for (int i = 1; i <= 400; ++i) {
        const double x = 1.02 * m * std::pow(40.0, i / 400.0);
        const double g = gep::gep_gradient(x, spec);
        if (prev_g < 0.0 && g >= 0.0) {  // local minimum: gradient - -> +
            double lo = prev_x, hi = x;
            for (int it = 0; it < 100; ++it) {
                const double mid = 0.5 * (lo + hi);
                (gep::gep_gradient(mid, spec) < 0.0 ? lo : hi) = mid;
            }
            root = 0.5 * (lo + hi);
            break;
        }
        prev_x = x;
        prev_g = g;
    }
    if (root == 0.0) return {2.5 * m, 0.35};
    const auto eval = gep::gep_of_omega(root, spec);
    const double phi = eval.phi_c_sq > 0.0 ? std::sqrt(eval.phi_c_sq) : 0.35;
    return {root, phi};
}

struct SweepPoint {
    double lambda_tilde = 0.0;
    cv::EnergyEstimate delta;
    double omega_opt = 0.0, phi_opt = 0.0;
    bool leakage = false;
};

SweepPoint cv_sweep_point(const Config& c, double lt, std::uint64_t point_seed) {
    gep::LatticeSpec spec{c.sites, c.mass, lt * c.mass * c.mass};
    cv::AnsatzConfig base;
    base.cutoff = c.cutoff;
    base.shift_s = c.shift_s;
    base.squeezed_modes = c.squeezed_modes.empty()
                              ? cv::AnsatzConfig::default_squeezed_modes(c.sites)
                              : c.squeezed_modes;
    const bool sampled = c.backend == "sampled";
    base.backend = sampled ? cv::Backend::sampled(c.grad_shots, point_seed)
                           : cv::Backend::exact();
    const auto [omega0, phi0] = broken_branch_start(spec);
    base.omega_prime = omega0;
    base.phi_c = phi0;

    cv::OptimizerOptions opt;
    opt.max_iters = c.max_iters;
    const std::string method = c.optimizer.empty() ? (sampled ? "gd" : "simplex") : c.optimizer;
    opt.method = method == "gd" ? cv::OptimizerOptions::Method::GradientDescent
                                : cv::OptimizerOptions::Method::Simplex;
    opt.grad_shots = c.grad_shots;

    auto result = cv::minimize(base, spec, opt);
    // guard against collapsing onto the symmetric basin
    if (std::abs(result.config.phi_c) < 1e-3) {
        cv::AnsatzConfig retry = base;
        retry.omega_prime = 1.3 * omega0;
        retry.phi_c = std::max(0.45, 1.5 * phi0);
        const auto second = cv::minimize(retry, spec, opt);
        if (std::abs(second.config.phi_c) > 1e-3) result = second;
    }

    cv::AnsatzConfig final_cfg = result.config;
    if (sampled)
        final_cfg.backend = cv::Backend::sampled(c.shots, split_seed(point_seed, 77));
    SweepPoint out;
    out.lambda_tilde = lt;
    out.delta = cv::energy_difference(final_cfg, spec);
    out.omega_opt = result.config.omega_prime;
    out.phi_opt = result.config.phi_c;
    out.leakage = out.delta.leakage_flag;
    return out;
}

RunOutput finish_sweep(const Config& c, json manifest, io::CsvWriter& csv,
                       std::vector<fit::CrossingPoint> points) {
    RunOutput out;
    out.csv_path = c.out_prefix + ".csv";
    out.manifest_path = c.out_prefix + ".manifest.json";
    if (points.size() >= static_cast<std::size_t>(c.fit.order + 1)) {
        const auto cf = fit::fit_crossing(points, c.fit.order);
        out.crossing = cf.intercept;
        out.has_crossing = true;
        const auto ci = fit::bootstrap_ci(points, c.fit.order, c.fit.bootstrap_b,
                                          c.fit.level, split_seed(c.seed, 0xB007));
        out.ci_lo = ci.first;
        out.ci_hi = ci.second;
        manifest["crossing"] = {{"intercept", cf.intercept},
                                {"order", c.fit.order},
                                {"ci_level", c.fit.level},
                                {"ci", {ci.first, ci.second}},
                                {"bootstrap_resamples", c.fit.bootstrap_b}};
        std::ostringstream s;
        s << "crossing lambda_tilde = " << fd(cf.intercept) << "  " << c.fit.level * 100
          << "% CI [" << fd(ci.first) << ", " << fd(ci.second) << "]";
        out.summary = s.str();
    } else {
        out.summary = "sweep written (no crossing fit: too few points)";
    }
    csv.write(out.csv_path);
    io::write_manifest(out.manifest_path, manifest);
    return out;
}

json base_manifest(const Config& c) {
    json m;
    m["version"] = kVersion;
    m["config"] = c.to_json();
    return m;
}

RunOutput run_gep_critical(const Config& c) {
    gep::LatticeSpec probe{c.sites, c.mass, 0.0};
    probe.validate();
    const auto cp = gep::critical_point(c.mass, c.sites);
    if (!cp) throw std::runtime_error("no symmetry-breaking transition found");
    io::CsvWriter csv({"L", "omega_c_sq_over_m2", "lambda_c_over_m2"});
    csv.add_row({std::to_string(c.sites), fd(cp->omega_c_sq_over_m2()),
                 fd(cp->lambda_c_over_m2())});
    RunOutput out;
    out.csv_path = c.out_prefix + ".csv";
    out.manifest_path = c.out_prefix + ".manifest.json";
    csv.write(out.csv_path);
    json manifest = base_manifest(c);
    manifest["critical_point"] = {{"omega_c_sq_over_m2", cp->omega_c_sq_over_m2()},
                                  {"lambda_c_over_m2", cp->lambda_c_over_m2()}};
    io::write_manifest(out.manifest_path, manifest);
    std::ostringstream s;
    s << "lambda_c/m^2 = " << fd(cp->lambda_c_over_m2())
      << "  Omega_c^2/m^2 = " << fd(cp->omega_c_sq_over_m2());
    out.summary = s.str();
    return out;
}

RunOutput run_gep_scan(const Config& c) {
    if (c.size_list.empty()) throw std::invalid_argument("gep_scan needs a size list");
    const auto table = gep::critical_scan(c.mass, c.size_list);
    io::CsvWriter csv({"L", "omega_c_sq_over_m2", "lambda_c_over_m2"});
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (table[i])
            csv.add_row({std::to_string(c.size_list[i]), fd(table[i]->omega_c_sq_over_m2()),
                         fd(table[i]->lambda_c_over_m2())});
        else
            csv.add_row({std::to_string(c.size_list[i]), "nan", "nan"});
    }
    RunOutput out;
    out.csv_path = c.out_prefix + ".csv";
    out.manifest_path = c.out_prefix + ".manifest.json";
    csv.write(out.csv_path);
    io::write_manifest(out.manifest_path, base_manifest(c));
    out.summary = "critical scan over " + std::to_string(c.size_list.size()) + " sizes";
    return out;
}

RunOutput run_duality(const Config& c) {
    if (c.lambda_tilde.empty())
        throw std::invalid_argument("duality needs lambda_tilde values");
    io::CsvWriter csv({"lambda_tilde", "mu2_over_m2_root1", "mu2_over_m2_root2"});
    for (double lt : c.lambda_tilde) {
        const auto roots = gep::duality_solutions(lt);
        csv.add_row({fd(lt), roots.size() > 0 ? fd(roots[0]) : "",
                     roots.size() > 1 ? fd(roots[1]) : ""});
    }
    RunOutput out;
    out.csv_path = c.out_prefix + ".csv";
    out.manifest_path = c.out_prefix + ".manifest.json";
    csv.write(out.csv_path);
    io::write_manifest(out.manifest_path, base_manifest(c));
    out.summary = "duality roots for " + std::to_string(c.lambda_tilde.size()) + " couplings";
    return out;
}

RunOutput run_cv_sweep(const Config& c) {
    if (c.lambda_tilde.empty()) throw std::invalid_argument("cv_sweep needs a grid");
    std::vector<std::future<SweepPoint>> futs;
    for (std::size_t i = 0; i < c.lambda_tilde.size(); ++i) {
        const double lt = c.lambda_tilde[i];
        const std::uint64_t ps = split_seed(c.seed, i);
        futs.push_back(std::async(std::launch::async,
                                  [&c, lt, ps] { return cv_sweep_point(c, lt, ps); }));
    }
    io::CsvWriter csv({"lambda_tilde", "delta_H", "stderr", "OmegaPrime_opt", "phiC_opt",
                       "shots", "seed"});
    std::vector<fit::CrossingPoint> points;
    bool leak = false;
    for (std::size_t i = 0; i < futs.size(); ++i) {
        const SweepPoint p = futs[i].get();
        leak = leak || p.leakage;
        csv.add_row({fd(p.lambda_tilde), fd(p.delta.value), fd(p.delta.sigma),
                     fd(p.omega_opt), fd(p.phi_opt), std::to_string(p.delta.shots_used),
                     std::to_string(split_seed(c.seed, i))});
        fit::CrossingPoint cp;
        cp.x = p.lambda_tilde;
        cp.y = p.delta.value;
        cp.sigma = p.delta.sigma;
        if (p.delta.resampler) {
            auto r = p.delta.resampler;
            cp.resample = [r](std::uint64_t s) { return r->resample(s); };
        }
        points.push_back(std::move(cp));
    }
    json manifest = base_manifest(c);
    manifest["leakage_flag"] = leak;
    return finish_sweep(c, std::move(manifest), csv, std::move(points));
}

RunOutput run_cv_vqe(const Config& c) {
    if (c.lambda_tilde.size() != 1)
        throw std::invalid_argument("cv_vqe expects exactly one lambda_tilde");
    const double lt = c.lambda_tilde[0];
    const SweepPoint p = cv_sweep_point(c, lt, split_seed(c.seed, 0));
    io::CsvWriter csv({"lambda_tilde", "delta_H", "stderr", "OmegaPrime_opt", "phiC_opt",
                       "shots", "seed"});
    csv.add_row({fd(lt), fd(p.delta.value), fd(p.delta.sigma), fd(p.omega_opt),
                 fd(p.phi_opt), std::to_string(p.delta.shots_used),
                 std::to_string(c.seed)});
    RunOutput out;
    out.csv_path = c.out_prefix + ".csv";
    out.manifest_path = c.out_prefix + ".manifest.json";
    csv.write(out.csv_path);
    json manifest = base_manifest(c);
    manifest["leakage_flag"] = p.leakage;
    io::write_manifest(out.manifest_path, manifest);
    std::ostringstream s;
    s << "delta<H> = " << fd(p.delta.value) << " +- " << fd(p.delta.sigma)
      << " at Omega' = " << fd(p.omega_opt) << ", phi_c = " << fd(p.phi_opt);
    out.summary = s.str();
    return out;
}

struct DvSweepPoint {
    double lambda_tilde = 0.0;
    dv::DvEnergyResult result;
    dv::DvParams params;
};

DvSweepPoint dv_sweep_point(const Config& c, double lt, std::uint64_t point_seed) {
    gep::LatticeSpec spec{c.sites, c.mass, lt * c.mass * c.mass};
    dv::DvParams params;
    params.squeezed_modes = c.squeezed_modes.empty()
                                ? cv::AnsatzConfig::default_squeezed_modes(c.sites)
                                : c.squeezed_modes;
    const auto [omega0, phi0] = broken_branch_start(spec);
    params.omega_prime = omega0;
    params.phi_c = phi0;

    dv::DvOptions opt;
    opt.noise = noise_model(c);
    opt.shots = c.backend == "sampled" ? c.shots : 0;
    opt.seed = point_seed;
    opt.mitigation = mitigation_of(c.mitigation);
    opt.zne_order = c.zne_order;
    opt.fold_levels = c.zne_folds;

    dv::DvMinimizeOptions mopt;
    mopt.max_iters = c.max_iters;
    mopt.grad_shots = c.grad_shots;
    const std::string method = c.optimizer.empty()
                                   ? (opt.shots > 0 ? "gd" : "simplex")
                                   : c.optimizer;
    mopt.method = method == "gd" ? dv::DvMinimizeOptions::Method::GradientDescent
                                 : dv::DvMinimizeOptions::Method::Simplex;
    const auto min_res = dv::dv_minimize(params, spec, opt, mopt);
    DvSweepPoint out;
    out.lambda_tilde = lt;
    out.params = min_res.params;
    dv::DvOptions final_opt = opt;
    final_opt.seed = split_seed(point_seed, 88);
    out.result = dv::dv_energy(min_res.params, spec, final_opt);
    return out;
}

RunOutput run_dv_sweep(const Config& c, bool single_point) {
    if (c.lambda_tilde.empty()) throw std::invalid_argument("dv run needs lambda_tilde");
    std::vector<std::future<DvSweepPoint>> futs;
    for (std::size_t i = 0; i < c.lambda_tilde.size(); ++i) {
        const double lt = c.lambda_tilde[i];
        const std::uint64_t ps = split_seed(c.seed, 500 + i);
        futs.push_back(std::async(std::launch::async,
                                  [&c, lt, ps] { return dv_sweep_point(c, lt, ps); }));
    }
    io::CsvWriter csv({"lambda_tilde", "delta_H_NE", "delta_H_LE", "stderr",
                       "OmegaPrime_opt", "phiC_opt"});
    std::vector<fit::CrossingPoint> points;
    for (auto& f : futs) {
        const DvSweepPoint p = f.get();
        csv.add_row({fd(p.lambda_tilde), fd(p.result.delta_h_ne), fd(p.result.delta_h),
                     fd(p.result.sigma), fd(p.params.omega_prime), fd(p.params.phi_c)});
        fit::CrossingPoint cp;
        cp.x = p.lambda_tilde;
        cp.y = p.result.delta_h;
        cp.sigma = p.result.sigma;
        points.push_back(cp);
    }
    json manifest = base_manifest(c);
    if (single_point) {
        RunOutput out;
        out.csv_path = c.out_prefix + ".csv";
        out.manifest_path = c.out_prefix + ".manifest.json";
        csv.write(out.csv_path);
        io::write_manifest(out.manifest_path, manifest);
        out.summary = "dv point evaluated";
        return out;
    }
    return finish_sweep(c, std::move(manifest), csv, std::move(points));
}

RunOutput run_zne(const Config& c) {
    if (c.lambda_tilde.size() != 1)
        throw std::invalid_argument("zne_run expects exactly one lambda_tilde");
    const double lt = c.lambda_tilde[0];
    gep::LatticeSpec spec{c.sites, c.mass, lt * c.mass * c.mass};
    dv::DvParams params;
    params.squeezed_modes = c.squeezed_modes.empty()
                                ? cv::AnsatzConfig::default_squeezed_modes(c.sites)
                                : c.squeezed_modes;
    // optimal parameters from the noiseless path, as in the hardware runs
    const auto [omega0, phi0] = broken_branch_start(spec);
    params.omega_prime = omega0;
    params.phi_c = phi0;
    dv::DvOptions noiseless;
    dv::DvMinimizeOptions zmopt;
    zmopt.method = dv::DvMinimizeOptions::Method::Simplex;
    const auto min_res = dv::dv_minimize(params, spec, noiseless, zmopt);
    dv::DvOptions opt;
    opt.noise = noise_model(c);
    opt.shots = c.backend == "sampled" ? c.shots : 0;
    opt.seed = c.seed;
    opt.mitigation = dv::Mitigation::RO_ZNE;
    opt.zne_order = c.zne_order;
    opt.fold_levels = c.zne_folds;
    const auto res = dv::dv_energy(min_res.params, spec, opt);
    io::CsvWriter csv({"cnot_count", "value", "stderr"});
    for (const auto& p : res.zne_series)
        csv.add_row({fd(p.cnot_count), fd(p.value), fd(p.sigma)});
    RunOutput out;
    out.csv_path = c.out_prefix + ".csv";
    out.manifest_path = c.out_prefix + ".manifest.json";
    csv.write(out.csv_path);
    json manifest = base_manifest(c);
    manifest["zne"] = {{"extrapolated", res.delta_h}, {"no_extrapolation", res.delta_h_ne}};
    io::write_manifest(out.manifest_path, manifest);
    std::ostringstream s;
    s << "ZNE delta<H> = " << fd(res.delta_h) << " (NE " << fd(res.delta_h_ne) << ")";
    out.summary = s.str();
    return out;
}

RunOutput run_fit_crossing(const Config& c) {
    if (c.in_csv.empty()) throw std::invalid_argument("fit_crossing needs an input csv");
    std::ifstream f(c.in_csv);
    if (!f) throw std::invalid_argument("cannot open " + c.in_csv);
    std::string line;
    std::getline(f, line);  // header
    std::vector<fit::CrossingPoint> points;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        fit::CrossingPoint p;
        std::getline(ss, cell, ',');
        p.x = std::stod(cell);
        std::getline(ss, cell, ',');
        p.y = std::stod(cell);
        if (std::getline(ss, cell, ',') && !cell.empty()) p.sigma = std::stod(cell);
        points.push_back(p);
    }
    if (points.size() < static_cast<std::size_t>(c.fit.order + 1))
        throw std::invalid_argument("not enough points for the requested order");
    io::CsvWriter csv({"lambda_tilde", "delta_H", "stderr"});
    for (const auto& p : points) csv.add_row({fd(p.x), fd(p.y), fd(p.sigma)});
    return finish_sweep(c, base_manifest(c), csv, std::move(points));
}

}  // namespace

Config Config::from_json(const json& j) {
    Config c;
    c.mode = j.value("mode", "");
    c.sites = j.value("L", c.sites);
    c.mass = j.value("m", c.mass);
    if (j.contains("lambda_tilde")) c.lambda_tilde = j["lambda_tilde"].get<std::vector<double>>();
    if (j.contains("L_list")) c.size_list = j["L_list"].get<std::vector<int>>();
    c.cutoff = j.value("cutoff", c.cutoff);
    c.backend = j.value("backend", c.backend);
    c.shots = j.value("shots", c.shots);
    c.grad_shots = j.value("grad_shots", c.grad_shots);
    if (j.contains("seed")) {
        c.seed = j["seed"].get<std::uint64_t>();
        c.seed_set = true;
    }
    if (j.contains("squeezed_modes")) c.squeezed_modes = j["squeezed_modes"].get<std::vector<int>>();
    c.shift_s = j.value("shift_s", c.shift_s);
    if (j.contains("noise")) {
        c.noise.ro_flip = j["noise"].value("ro_flip", 0.0);
        c.noise.cnot_p = j["noise"].value("cnot_p", 0.0);
    }
    c.mitigation = j.value("mitigation", c.mitigation);
    c.zne_order = j.value("zne_order", c.zne_order);
    if (j.contains("zne_folds")) c.zne_folds = j["zne_folds"].get<std::vector<int>>();
    if (j.contains("fit")) {
        c.fit.order = j["fit"].value("order", c.fit.order);
        c.fit.bootstrap_b = j["fit"].value("bootstrap_B", c.fit.bootstrap_b);
        c.fit.level = j["fit"].value("level", c.fit.level);
    }
    c.optimizer = j.value("optimizer", c.optimizer);
    c.max_iters = j.value("max_iters", c.max_iters);
    c.in_csv = j.value("in_csv", c.in_csv);
    c.out_prefix = j.value("out", c.out_prefix);
    return c;
}

json Config::to_json() const {
    json j;
    j["mode"] = mode;
    j["L"] = sites;
    j["m"] = mass;
    j["lambda_tilde"] = lambda_tilde;
    if (!size_list.empty()) j["L_list"] = size_list;
    j["cutoff"] = cutoff;
    j["backend"] = backend;
    j["shots"] = shots;
    j["grad_shots"] = grad_shots;
    if (seed_set) j["seed"] = seed;
    j["squeezed_modes"] = squeezed_modes;
    j["shift_s"] = shift_s;
    j["noise"] = {{"ro_flip", noise.ro_flip}, {"cnot_p", noise.cnot_p}};
    j["mitigation"] = mitigation;
    j["zne_order"] = zne_order;
    j["zne_folds"] = zne_folds;
    j["fit"] = {{"order", fit.order}, {"bootstrap_B", fit.bootstrap_b}, {"level", fit.level}};
    if (!optimizer.empty()) j["optimizer"] = optimizer;
    j["max_iters"] = max_iters;
    if (!in_csv.empty()) j["in_csv"] = in_csv;
    j["out"] = out_prefix;
    return j;
}

void Config::validate() const {
    if (mode.empty()) throw std::invalid_argument("config: mode is required");
    for (std::size_t i = 1; i < lambda_tilde.size(); ++i)
        if (!(lambda_tilde[i] > lambda_tilde[i - 1]))
            throw std::invalid_argument("config: lambda_tilde grid must be strictly increasing");
    if (backend != "exact" && backend != "sampled")
        throw std::invalid_argument("config: backend must be exact or sampled");
    if (backend == "sampled" && !seed_set)
        throw std::invalid_argument("config: sampled backends require a seed");
    if (fit.order < 1 || fit.order > 2)
        throw std::invalid_argument("config: fit order must be 1 or 2");
}

RunOutput run(const Config& config) {
    config.validate();
    if (config.mode == "gep_critical") return run_gep_critical(config);
    if (config.mode == "gep_scan") return run_gep_scan(config);
    if (config.mode == "duality") return run_duality(config);
    if (config.mode == "cv_sweep") return run_cv_sweep(config);
    if (config.mode == "cv_vqe") return run_cv_vqe(config);
    if (config.mode == "dv_sweep") return run_dv_sweep(config, false);
    if (config.mode == "dv_vqe") return run_dv_sweep(config, true);
    if (config.mode == "zne_run") return run_zne(config);
    if (config.mode == "fit_crossing") return run_fit_crossing(config);
    throw std::invalid_argument("unknown mode: " + config.mode);
}

}  // namespace phi4::runner
