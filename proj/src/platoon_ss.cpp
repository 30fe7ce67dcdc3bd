#include "platoon/platoon_ss.hpp"

#include "platoon/error.hpp"

#include <algorithm>
#include <sstream>

namespace platoon {

std::string to_string(RoadType road) { return road == RoadType::Ring ? "ring" : "open"; }

RoadType road_from_string(const std::string& name) {
    if (name == "ring") return RoadType::Ring;
    if (name == "open") return RoadType::Open;
    fail(ErrorKind::InvalidArgument, "unknown road type '" + name + "'");
}

void PlatoonSpec::validate() const {
    if (n < 2) fail(ErrorKind::InvalidArgument, "platoon needs n >= 2");
    if (hdv_betas.size() != n - 1) {
        std::ostringstream os;
        os << "expected " << n - 1 << " HDV beta sets, got " << hdv_betas.size();
        fail(ErrorKind::DimensionMismatch, os.str());
    }
    if (road == RoadType::Ring && !(ring_length > 0.0)) {
        fail(ErrorKind::InvalidArgument, "ring length must be positive");
    }
    for (std::size_t i = 0; i < hdv_betas.size(); ++i) {
        if (!hdv_betas[i].valid()) {
            fail(ErrorKind::DegenerateLinearization,
                 "betas of vehicle " + std::to_string(i + 2) + " are not all positive");
        }
    }
    if (!std::is_sorted(observed.begin(), observed.end()) ||
        std::adjacent_find(observed.begin(), observed.end()) != observed.end()) {
        fail(ErrorKind::InvalidArgument, "observed ids must be sorted and unique");
    }
    for (auto j : observed) {
        if (j < 1 || j > n) fail(ErrorKind::InvalidArgument, "observed id out of range");
    }
    if (!observed.empty() && observed.front() != 1) {
        fail(ErrorKind::InvalidArgument, "observed set must contain the CAV (vehicle 1)");
    }
}

void PerformanceWeights::validate(RoadType road) const {
    bool ok = gamma_s > 0.0 && gamma_v > 0.0;
    ok = ok && (road == RoadType::Ring ? gamma_u > 0.0 : (gamma_u1 > 0.0 && gamma_u2 > 0.0));
    if (!ok) fail(ErrorKind::InvalidArgument, "performance weights must be strictly positive");
}

std::vector<std::size_t> neighbourhood_observed(std::size_t n, std::size_t ahead,
                                                std::size_t behind) {
    std::vector<std::size_t> ids{1};
    for (std::size_t k = 1; k <= behind && 1 + k <= n; ++k) ids.push_back(1 + k);
    for (std::size_t k = 0; k < ahead && n - k > 1; ++k) ids.push_back(n - k);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

LinearizedPlatoon build_plant(const PlatoonSpec& spec, const Equilibrium& eq,
                              const PerformanceWeights& w) {
    spec.validate();
    w.validate(spec.road);
    const std::size_t n = spec.n;
    const Eigen::Index dim = static_cast<Eigen::Index>(2 * n);
    const bool ring = spec.road == RoadType::Ring;

    StateSpace ss;
    ss.A = Matrix::Zero(dim, dim);
    // CAV block: s1' = v_n - v1 on a ring, s1' = u1 - v1 on an open road.
    ss.A(0, 1) = -1.0;
    if (ring) ss.A(0, v_index(n)) = 1.0;
    for (std::size_t i = 2; i <= n; ++i) {
        const Betas& b = spec.hdv_betas[i - 2];
        const Eigen::Index si = s_index(i);
        const Eigen::Index vi = v_index(i);
        const Eigen::Index vp = v_index(i - 1);
        ss.A(si, vp) = 1.0;
        ss.A(vi, vp) = b.beta3;
        ss.A(si, vi) = -1.0;
        ss.A(vi, si) = b.beta1;
        ss.A(vi, vi) = -b.beta2;
    }

    const Eigen::Index q = ring ? 1 : 2;
    ss.B = Matrix::Zero(dim, q);
    if (ring) {
        ss.B(1, 0) = 1.0;
    } else {
        ss.B(0, 0) = 1.0;
        ss.B(1, 1) = 1.0;
    }

    const Eigen::Index m = static_cast<Eigen::Index>(spec.observed.size());
    ss.C = Matrix::Zero(2 * m, dim);
    for (Eigen::Index k = 0; k < m; ++k) {
        const std::size_t j = spec.observed[static_cast<std::size_t>(k)];
        ss.C(2 * k, s_index(j)) = 1.0;
        ss.C(2 * k + 1, v_index(j)) = 1.0;
    }

    ss.Bd = Matrix::Zero(dim, static_cast<Eigen::Index>(n));
    for (std::size_t i = 1; i <= n; ++i) ss.Bd(v_index(i), static_cast<Eigen::Index>(i - 1)) = 1.0;

    ss.Cz = Matrix::Zero(dim + q, dim);
    for (std::size_t i = 1; i <= n; ++i) {
        ss.Cz(s_index(i), s_index(i)) = w.gamma_s;
        ss.Cz(v_index(i), v_index(i)) = w.gamma_v;
    }
    ss.Dz = Matrix::Zero(dim + q, q);
    if (ring) {
        ss.Dz(dim, 0) = w.gamma_u;
    } else {
        ss.Dz(dim, 0) = w.gamma_u1;
        ss.Dz(dim + 1, 1) = w.gamma_u2;
    }

    return LinearizedPlatoon{std::move(ss), eq, spec, w};
}

ReducedPlatoon reduce_ring(const LinearizedPlatoon& plant) {
    if (plant.spec.road != RoadType::Ring) {
        fail(ErrorKind::NotRing, "state reduction applies to ring-road plants only");
    }
    const Eigen::Index dim = plant.ss.states();
    const Eigen::Index r = dim - 1;

    ReducedPlatoon red;
    red.T_reduce = Matrix::Zero(r, dim);
    red.T_reduce.rightCols(r).setIdentity();
    red.T_lift = Matrix::Zero(dim, r);
    red.T_lift.bottomRows(r).setIdentity();
    for (std::size_t i = 2; i <= plant.spec.n; ++i) red.T_lift(0, s_index(i) - 1) = -1.0;

    const StateSpace& f = plant.ss;
    red.ss.A = red.T_reduce * f.A * red.T_lift;
    red.ss.B = red.T_reduce * f.B;
    red.ss.C = f.C * red.T_lift;
    red.ss.Bd = red.T_reduce * f.Bd;
    red.ss.Cz = f.Cz * red.T_lift;
    red.ss.Dz = f.Dz;
    red.eq = plant.eq;
    red.spec = plant.spec;
    red.weights = plant.weights;
    return red;
}

}  // namespace platoon
