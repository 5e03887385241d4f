#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "critstep/continuation.hpp"
#include "critstep/trajectory.hpp"

namespace critstep {

/// Shortest-safe text form of a double: 17 significant digits, so that
/// parsing it back yields the same bits.
std::string format_real(double v);

/// `# trajectory method=.. problem=.. t0=.. tf=.. h=..` then `t,q_0,...`.
/// With `cartesian` (4-dimensional pendulum states only) the bob columns
/// b1x,b1y,b2x,b2y are appended.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, bool cartesian = false);

/// Inverse of write_trajectory_csv; Cartesian columns are ignored.
/// Throws std::runtime_error on malformed input.
Trajectory read_trajectory_csv(std::istream& is);

/// Metadata line written ahead of the trajectory header.
std::string trajectory_key(const Trajectory& traj);

/// Branch points and fold rows:
/// index,s,h,norm_y,tangent_h,residual_norm,e_rel,y_0..y_{m-1},event
/// `e_rel` may be empty (written as nan).
void write_trace_csv(std::ostream& os, const Branch& branch, const std::vector<double>& e_rel,
                     const std::vector<double>& fold_e_rel);

}  // namespace critstep
