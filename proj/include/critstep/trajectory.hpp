#pragma once

#include <string>
#include <vector>

#include "critstep/linalg.hpp"

namespace critstep {

/// Time-indexed states. `h` is the nominal step; `times` carries the actual
/// sample times (the last step may be shortened to land on the end time).
struct Trajectory {
    double t0 = 0.0;
    double h = 0.0;
    std::vector<double> times;
    std::vector<Vector> states;
    std::string method;
    std::string problem;

    std::size_t size() const noexcept { return states.size(); }
    double t_end() const { return times.empty() ? t0 : times.back(); }
};

}  // namespace critstep
