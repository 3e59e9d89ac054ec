#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace glocad {

using VectorField = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct TrajectoryMeta {
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string field_name;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> states;
    TrajectoryMeta meta;

    std::size_t size() const { return times.size(); }
    const Eigen::VectorXd& final_state() const { return states.back(); }
    /// Header t,state_0,...,state_k
    std::string to_csv() const;
};

/// States whose magnitude exceeds this are treated as divergent.
inline constexpr double kDivergenceBound = 1e6;

/// Classical RK4 with ceil(t_end/dt) steps; records t = 0 and every step.
/// On divergence `out` holds the valid prefix and DivergenceError is thrown.
void rk4_integrate(const VectorField& field, const Eigen::VectorXd& x0, double dt, double t_end, Trajectory& out);
Trajectory rk4_integrate(const VectorField& field, const Eigen::VectorXd& x0, double dt, double t_end);

struct GridSpec {
    double x_min = -3, x_max = 3;
    double y_min = -3, y_max = 3;
    int nx = 21, ny = 21;
};

struct PortraitNode {
    double x, y, dx, dy;
};

/// Field sampled on the lattice, x varying fastest.
std::vector<PortraitNode> phase_portrait(const VectorField& field, const GridSpec& grid);
/// Header x,y,dx,dy
std::string portrait_to_csv(const std::vector<PortraitNode>& nodes);

/// Central-difference Jacobian.
Eigen::MatrixXd fd_jacobian(const VectorField& field, const Eigen::VectorXd& x, double h = 1e-5);

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted descending.
Eigen::VectorXd jacobi_eigenvalues(const Eigen::MatrixXd& A, int max_sweeps = 10000, double tol = 1e-15);

struct StabilityReport {
    Eigen::MatrixXd jacobian;
    Eigen::VectorXd gg_block_eigs;
    double max_gg_eig = 0;
    double equilibrium_residual = 0;
};

StabilityReport stability_check(const VectorField& field, const Eigen::VectorXd& x_star,
                                const std::vector<int>& generator_indices, double h = 1e-5);

}  // namespace glocad
