#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "glocad/odesim.hpp"

namespace glocad::svg {

struct Series {
    std::string label;
    std::vector<double> x, y;
};

struct PointSet {
    std::string label;
    Eigen::MatrixXd points;  // n x 2
    double radius = 1.5;
};

std::string line_plot(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                      const std::string& ylabel);
std::string scatter_plot(const std::vector<PointSet>& sets, const std::string& title);
/// Arrows scaled to the lattice spacing; colour encodes log speed.
std::string quiver_plot(const std::vector<PortraitNode>& nodes, const std::string& title);

}  // namespace glocad::svg
