#include "glocad/odesim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "glocad/errors.hpp"

namespace glocad {

namespace {

bool state_ok(const Eigen::VectorXd& x) { return x.allFinite() && x.cwiseAbs().maxCoeff() <= kDivergenceBound; }

void write_number(std::ostringstream& os, double v) { os << v; }

}  // namespace

std::string Trajectory::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    const Eigen::Index d = states.empty() ? 0 : states.front().size();
    os << 't';
    for (Eigen::Index i = 0; i < d; ++i) os << ",state_" << i;
    os << '\n';
    for (std::size_t k = 0; k < times.size(); ++k) {
        write_number(os, times[k]);
        for (Eigen::Index i = 0; i < d; ++i) {
            os << ',';
            write_number(os, states[k](i));
        }
        os << '\n';
    }
    return os.str();
}

void rk4_integrate(const VectorField& field, const Eigen::VectorXd& x0, double dt, double t_end, Trajectory& out) {
    detail::require(std::isfinite(dt) && dt > 0, "rk4_integrate: dt must be positive");
    detail::require(std::isfinite(t_end) && t_end >= dt, "rk4_integrate: t_end must be at least dt");
    detail::require(x0.size() >= 1, "rk4_integrate: empty initial state");
    if (!state_ok(x0)) throw DivergenceError("rk4_integrate: initial state is not finite", x0, 0.0);

    const auto steps = static_cast<long>(std::ceil(t_end / dt - 1e-9));
    out.times.clear();
    out.states.clear();
    out.times.reserve(static_cast<std::size_t>(steps) + 1);
    out.states.reserve(static_cast<std::size_t>(steps) + 1);
    out.times.push_back(0.0);
    out.states.push_back(x0);

    Eigen::VectorXd x = x0;
    for (long k = 1; k <= steps; ++k) {
        const Eigen::VectorXd k1 = field(x);
        const Eigen::VectorXd k2 = field(x + 0.5 * dt * k1);
        const Eigen::VectorXd k3 = field(x + 0.5 * dt * k2);
        const Eigen::VectorXd k4 = field(x + dt * k3);
        Eigen::VectorXd next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!state_ok(next)) {
            std::ostringstream msg;
            msg << "rk4_integrate: state diverged at t = " << k * dt;
            throw DivergenceError(msg.str(), x, out.times.back());
        }
        x = std::move(next);
        out.times.push_back(static_cast<double>(k) * dt);
        out.states.push_back(x);
    }
}

Trajectory rk4_integrate(const VectorField& field, const Eigen::VectorXd& x0, double dt, double t_end) {
    Trajectory t;
    rk4_integrate(field, x0, dt, t_end, t);
    return t;
}

std::vector<PortraitNode> phase_portrait(const VectorField& field, const GridSpec& g) {
    detail::require(g.nx >= 2 && g.ny >= 2, "phase_portrait: need at least 2 nodes per axis");
    detail::require(std::isfinite(g.x_min) && std::isfinite(g.x_max) && std::isfinite(g.y_min) &&
                        std::isfinite(g.y_max) && g.x_min < g.x_max && g.y_min < g.y_max,
                    "phase_portrait: grid bounds must be finite and ordered");
    std::vector<PortraitNode> nodes;
    nodes.reserve(static_cast<std::size_t>(g.nx) * static_cast<std::size_t>(g.ny));
    for (int j = 0; j < g.ny; ++j) {
        const double y = g.y_min + (g.y_max - g.y_min) * j / (g.ny - 1);
        for (int i = 0; i < g.nx; ++i) {
            const double x = g.x_min + (g.x_max - g.x_min) * i / (g.nx - 1);
            const Eigen::VectorXd r = field(Eigen::Vector2d(x, y));
            detail::require(r.size() == 2, "phase_portrait: field must be two-dimensional");
            nodes.push_back({x, y, r(0), r(1)});
        }
    }
    return nodes;
}

std::string portrait_to_csv(const std::vector<PortraitNode>& nodes) {
    std::ostringstream os;
    os.precision(17);
    os << "x,y,dx,dy\n";
    for (const auto& n : nodes) os << n.x << ',' << n.y << ',' << n.dx << ',' << n.dy << '\n';
    return os.str();
}

Eigen::MatrixXd fd_jacobian(const VectorField& field, const Eigen::VectorXd& x, double h) {
    detail::require(std::isfinite(h) && h > 0, "fd_jacobian: step must be positive");
    const Eigen::Index n = x.size();
    Eigen::MatrixXd J;
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        const Eigen::VectorXd col = (field(xp) - field(xm)) / (2 * h);
        if (i == 0) J.resize(col.size(), n);
        J.col(i) = col;
    }
    if (!J.allFinite()) throw NumericalError("fd_jacobian: non-finite entries");
    return J;
}

Eigen::VectorXd jacobi_eigenvalues(const Eigen::MatrixXd& A_in, int max_sweeps, double tol) {
    detail::require(A_in.rows() == A_in.cols(), "jacobi_eigenvalues: matrix must be square");
    detail::require(A_in.allFinite(), "jacobi_eigenvalues: matrix must be finite");
    Eigen::MatrixXd A = 0.5 * (A_in + A_in.transpose());
    const Eigen::Index n = A.rows();
    const double scale = std::max(A.cwiseAbs().maxCoeff(), 1e-300);
    auto off_norm = [&] {
        double s = 0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) s += A(p, q) * A(p, q);
        return std::sqrt(s);
    };
    int sweep = 0;
    while (off_norm() > tol * scale) {
        if (++sweep > max_sweeps) throw NumericalError("jacobi_eigenvalues: no convergence within sweep bound");
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (A(p, q) == 0.0) continue;
                const double theta = (A(q, q) - A(p, p)) / (2 * A(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
                const double c = 1 / std::sqrt(t * t + 1);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    Eigen::VectorXd eig = A.diagonal();
    std::sort(eig.data(), eig.data() + eig.size(), std::greater<>());
    return eig;
}

StabilityReport stability_check(const VectorField& field, const Eigen::VectorXd& x_star,
                                const std::vector<int>& generator_indices, double h) {
    detail::require(!generator_indices.empty(), "stability_check: generator block is empty");
    for (int i : generator_indices)
        detail::require(i >= 0 && i < x_star.size(), "stability_check: generator index out of range");
    StabilityReport r;
    r.jacobian = fd_jacobian(field, x_star, h);
    detail::require(r.jacobian.rows() == r.jacobian.cols(), "stability_check: field must map the state space to itself");
    const auto g = static_cast<Eigen::Index>(generator_indices.size());
    Eigen::MatrixXd block(g, g);
    for (Eigen::Index a = 0; a < g; ++a)
        for (Eigen::Index b = 0; b < g; ++b)
            block(a, b) = r.jacobian(generator_indices[static_cast<std::size_t>(a)],
                                     generator_indices[static_cast<std::size_t>(b)]);
    r.gg_block_eigs = jacobi_eigenvalues(0.5 * (block + block.transpose()));
    r.max_gg_eig = r.gg_block_eigs(0);
    r.equilibrium_residual = field(x_star).norm();
    return r;
}

}  // namespace glocad
