#pragma once

#include <map>
#include <stdexcept>
#include <string>

namespace mats {

/// Numeric thresholds used across the pipeline. Keys can be overridden from
/// the command line as --tol key=value.
struct Tolerances {
    double nondegen = 1e-8;    // |det H| and eigenvalue floor at critical points
    double interior = 1e-4;    // min distance of critical points to the region boundary
    double collision = 1e-6;   // dedup radius and the critical point collision check
    double residual = 1e-10;   // Newton residual on |grad f|
    double ode = 1e-10;        // local error target per integration step
    double capture = 1e-8;     // |grad f| threshold for critical point capture
    double match = 1e-8;       // vertex coincidence in gradient trees
    double rigid = 1e-6;       // smallest singular value of the matching Jacobian
    int grid_boundary = 64;    // boundary samples per dimension in genericity checks
    int grid_multistart = 32;  // multistart grid resolution per dimension

    void set(const std::string& key, double value) {
        if (key == "nondegen")
            nondegen = value;
        else if (key == "interior")
            interior = value;
        else if (key == "collision")
            collision = value;
        else if (key == "residual")
            residual = value;
        else if (key == "ode")
            ode = value;
        else if (key == "capture")
            capture = value;
        else if (key == "match")
            match = value;
        else if (key == "rigid")
            rigid = value;
        else if (key == "grid_boundary")
            grid_boundary = static_cast<int>(value);
        else if (key == "grid_multistart")
            grid_multistart = static_cast<int>(value);
        else
            throw std::invalid_argument("unknown tolerance key '" + key + "'");
    }
};

}  // namespace mats
