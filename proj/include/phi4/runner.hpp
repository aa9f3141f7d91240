#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace phi4::runner {

/// One experiment = one self-describing config. The JSON keys mirror the CLI
/// flags; a config file supersedes flags.
struct Config {
    std::string mode;  // gep_scan gep_critical duality cv_sweep cv_vqe
                       // dv_sweep dv_vqe zne_run fit_crossing
    int sites = 10;
    double mass = 0.1;
    std::vector<double> lambda_tilde;
    std::vector<int> size_list;  // gep_scan
    int cutoff = 16;
    std::string backend = "exact";  // exact | sampled
    long shots = 100000;
    long grad_shots = 2048;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::vector<int> squeezed_modes;  // empty -> production defaults
    double shift_s = 0.0;             // 0 -> backend default
    struct Noise {
        double ro_flip = 0.0;  // symmetric per-qubit readout flip probability
        double cnot_p = 0.0;   // two-qubit depolarizing per CNOT
    } noise;
    std::string mitigation = "none";  // none | ro | ro+zne
    int zne_order = 1;
    std::vector<int> zne_folds = {0, 1, 2, 3, 4};
    struct Fit {
        int order = 1;
        int bootstrap_b = 1000;
        double level = 0.68;
    } fit;
    std::string optimizer = "";  // simplex | gd; empty -> by backend
    int max_iters = 150;
    std::string in_csv;  // fit_crossing input
    std::string out_prefix = "phi4_run";

    static Config from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    void validate() const;
};

struct RunOutput {
    std::string csv_path;
    std::string manifest_path;
    std::string summary;
    double crossing = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;
    bool has_crossing = false;
};

/// Dispatches on config.mode, writes <out_prefix>.csv and
/// <out_prefix>.manifest.json. Throws std::invalid_argument on config errors
/// and std::runtime_error on numerical failures.
RunOutput run(const Config& config);

}  // namespace phi4::runner
