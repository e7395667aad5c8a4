#pragma once

#include "diamond/vec.hpp"

namespace diamond {

// A point on the generative trajectory. For the flow family t is the
// rectified-flow time in [0,1]; for the diffusion family the same struct
// carries the current sigma in `t`.
struct LatentState {
    Vec x;
    double t = 1.0;
};

// N solver intervals over [1,0]: times holds N+1 knots, strictly descending,
// times.front() == 1 and times.back() == 0.
struct TimeGrid {
    std::size_t steps = 0;
    Vec times;
};

// (1-t)*x0 + t*x1
Vec interpolate(const Vec& x0, const Vec& x1, double t);

// x_t - t*v
Vec clean_estimate_flow(const Vec& x_t, const Vec& v, double t);

// x_t - dt*v, the unguided transition
Vec euler_step_flow(const Vec& x_t, const Vec& v, double dt);

TimeGrid make_time_grid(std::size_t n);

}  // namespace diamond
