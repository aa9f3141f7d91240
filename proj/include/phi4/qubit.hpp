#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <cstdint>
#include <vector>

namespace phi4::qubit {

using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;
using Vec4 = Eigen::Vector4cd;
using Probs = Eigen::Vector4d;

// Basis convention: |q0 q1> with qubit 0 most significant, index = 2*q0 + q1.

struct Gate {
    enum class Kind { OneQubit, Cnot };
    Kind kind = Kind::OneQubit;
    int target = 0;   // OneQubit target, or CNOT target
    int control = 0;  // CNOT control
    Mat2 u = Mat2::Identity();

    static Gate one_qubit(int target, const Mat2& u);
    static Gate cnot(int control, int target);
};

struct TwoQubitCircuit {
    std::vector<Gate> gates;
    int cnot_fold_pairs = 0;  // extra identity CNOT pairs inserted per CNOT

    int cnot_count() const;
};

Mat2 ry(double theta);
Mat2 hadamard2();
Mat2 sdg();  // S-dagger; HS† maps Y measurements onto Z

/// (U ⊗ V) · CNOT · (Ry(theta) ⊗ I) |00>: spans all real-Schmidt two-qubit
/// states with a single CNOT.
TwoQubitCircuit schmidt_circuit(double theta, const Mat2& u, const Mat2& v);
Vec4 schmidt_prepare(double theta, const Mat2& u, const Mat2& v);

struct NoiseModel {
    // columns sum to 1: ro_confusion[q](observed, true)
    std::array<Eigen::Matrix2d, 2> ro_confusion = {Eigen::Matrix2d::Identity(),
                                                   Eigen::Matrix2d::Identity()};
    double cnot_depolarizing_p = 0.0;

    bool is_trivial_readout() const;
    void validate() const;
};

struct Counts4 {
    std::array<long, 4> counts = {0, 0, 0, 0};
    long total = 0;
    std::uint64_t seed = 0;
};

struct RunResult {
    Probs probs = Probs::Zero();  // post-confusion outcome probabilities
    Counts4 counts;               // empty when shots == 0 (probability level)
    Eigen::Matrix4cd density;     // pre-measurement state
};

/// Density-matrix evolution; each CNOT is followed by a symmetric two-qubit
/// depolarizing channel of strength p, readout confusion is applied to the
/// outcome probabilities, then shots are drawn (shots = 0 keeps the exact
/// probability level).
RunResult run(const TwoQubitCircuit& circuit, const NoiseModel& noise, long shots,
              std::uint64_t seed);

/// 4x4 calibration built from the four basis-state preparation experiments.
Eigen::Matrix4d calibration_matrix(const NoiseModel& noise);

struct MitigatedDistribution {
    Probs quasi = Probs::Zero();  // may be slightly negative, sums to 1
    long shots = 0;
    std::uint64_t seed = 0;
};

MitigatedDistribution mitigate_readout(const Probs& frequencies,
                                       const Eigen::Matrix4d& calibration);

/// Each CNOT becomes 1 + 2*k_pairs CNOTs; identities in the noiseless case.
TwoQubitCircuit fold_cnots(const TwoQubitCircuit& circuit, int k_pairs);

struct ZnePoint {
    double cnot_count = 0.0;
    double value = 0.0;
    double sigma = 0.0;
};

/// Weighted least-squares polynomial in the CNOT count, evaluated at zero.
double zne_fit(const std::vector<ZnePoint>& points, int order);

}  // namespace phi4::qubit
