#pragma once

// Linearized mixed-platoon state space for ring and open roads.
//
// State ordering is interleaved per vehicle: x = (s1, v1, s2, v2, ..., sn, vn),
// deviations from equilibrium. Vehicle 1 is the CAV.

#include "platoon/linalg.hpp"
#include "platoon/ovm_model.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace platoon {

enum class RoadType { Ring, Open };

[[nodiscard]] std::string to_string(RoadType road);
[[nodiscard]] RoadType road_from_string(const std::string& name);

struct PlatoonSpec {
    std::size_t n = 0;
    RoadType road = RoadType::Ring;
    double ring_length = 0.0;         // metres, ring only
    std::vector<Betas> hdv_betas;     // vehicles 2..n
    std::vector<std::size_t> observed;  // sorted 1-based ids, must contain 1

    // Throws InvalidArgument / DimensionMismatch on a malformed spec.
    void validate() const;
};

struct PerformanceWeights {
    double gamma_s = 0.03;
    double gamma_v = 0.15;
    double gamma_u = 1.0;
    double gamma_u1 = 1.0;
    double gamma_u2 = 1.0;

    void validate(RoadType road) const;
};

// Plain (A, B, C, Bd, Cz, Dz) realization.
struct StateSpace {
    Matrix A;
    Matrix B;
    Matrix C;
    Matrix Bd;
    Matrix Cz;
    Matrix Dz;

    [[nodiscard]] Eigen::Index states() const { return A.rows(); }
    [[nodiscard]] Eigen::Index inputs() const { return B.cols(); }
    [[nodiscard]] Eigen::Index outputs() const { return C.rows(); }
};

struct LinearizedPlatoon {
    StateSpace ss;
    Equilibrium eq;
    PlatoonSpec spec;
    PerformanceWeights weights;
};

struct ReducedPlatoon {
    StateSpace ss;
    Matrix T_reduce;  // (2n-1) x 2n
    Matrix T_lift;    // 2n x (2n-1)
    Equilibrium eq;
    PlatoonSpec spec;
    PerformanceWeights weights;
};

// Observation set for vehicle count n: CAV plus `ahead` vehicles
// in front (ids n, n-1, ...) and `behind` vehicles following (ids 2, 3, ...).
[[nodiscard]] std::vector<std::size_t> neighbourhood_observed(std::size_t n, std::size_t ahead,
                                                              std::size_t behind);

[[nodiscard]] LinearizedPlatoon build_plant(const PlatoonSpec& spec, const Equilibrium& eq,
                                            const PerformanceWeights& w);

// Eliminates s1 = -(s2 + ... + sn). Throws NotRing for open-road plants.
[[nodiscard]] ReducedPlatoon reduce_ring(const LinearizedPlatoon& plant);

// Index of s_i / v_i (1-based vehicle) in the full state vector.
[[nodiscard]] constexpr Eigen::Index s_index(std::size_t vehicle) {
    return static_cast<Eigen::Index>(2 * (vehicle - 1));
}
[[nodiscard]] constexpr Eigen::Index v_index(std::size_t vehicle) {
    return static_cast<Eigen::Index>(2 * (vehicle - 1) + 1);
}

}  // namespace platoon
