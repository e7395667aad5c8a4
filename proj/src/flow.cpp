#include "diamond/flow.hpp"

namespace diamond {

static void check_time(double t, const char* where) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::invalid_argument(std::string(where) + ": time outside [0,1]");
    }
}

Vec interpolate(const Vec& x0, const Vec& x1, double t) {
    check_same_dim(x0, x1, "interpolate");
    check_time(t, "interpolate");
    Vec out(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) out[i] = (1.0 - t) * x0[i] + t * x1[i];
    return out;
}

Vec clean_estimate_flow(const Vec& x_t, const Vec& v, double t) {
    check_same_dim(x_t, v, "clean_estimate_flow");
    check_time(t, "clean_estimate_flow");
    Vec out(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i) out[i] = x_t[i] - t * v[i];
    return out;
}

Vec euler_step_flow(const Vec& x_t, const Vec& v, double dt) {
    check_same_dim(x_t, v, "euler_step_flow");
    if (!(dt > 0.0)) throw std::invalid_argument("euler_step_flow: dt must be positive");
    Vec out(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i) out[i] = x_t[i] - dt * v[i];
    return out;
}

TimeGrid make_time_grid(std::size_t n) {
    if (n == 0) throw std::invalid_argument("make_time_grid: step count must be >= 1");
    TimeGrid g;
    g.steps = n;
    g.times.resize(n + 1);
    // t_j = (n-j)/n so the first knot is exactly 1 and the last exactly 0
    for (std::size_t j = 0; j <= n; ++j) {
        g.times[j] = static_cast<double>(n - j) / static_cast<double>(n);
    }
    return g;
}

}  // namespace diamond
