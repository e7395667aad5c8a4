#include "diamond/diffusion.hpp"

#include <cmath>

namespace diamond {

Vec clean_estimate_diffusion(const Vec& x_t, const Vec& eps, double sigma_t) {
    check_same_dim(x_t, eps, "clean_estimate_diffusion");
    if (!(sigma_t >= 0.0)) throw std::invalid_argument("clean_estimate_diffusion: sigma must be >= 0");
    Vec out(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i) out[i] = x_t[i] - sigma_t * eps[i];
    return out;
}

Vec euler_step_diffusion(const Vec& x_t, const Vec& eps, double sigma_t, double sigma_next) {
    check_same_dim(x_t, eps, "euler_step_diffusion");
    if (!(sigma_next >= 0.0) || !(sigma_t > sigma_next)) {
        throw std::invalid_argument("euler_step_diffusion: need sigma_t > sigma_next >= 0");
    }
    const double d = sigma_t - sigma_next;
    Vec out(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i) out[i] = x_t[i] - d * eps[i];
    return out;
}

SigmaSchedule make_sigma_schedule(std::size_t n, double sigma_max, SigmaKind kind) {
    if (n == 0) throw std::invalid_argument("make_sigma_schedule: step count must be >= 1");
    if (!(sigma_max > 0.0)) throw std::invalid_argument("make_sigma_schedule: sigma_max must be positive");

    SigmaSchedule s;
    s.steps = n;
    s.sigmas.resize(n + 1);

    switch (kind) {
        case SigmaKind::linear:
            for (std::size_t i = 0; i <= n; ++i) {
                s.sigmas[i] = sigma_max * static_cast<double>(n - i) / static_cast<double>(n);
            }
            break;
        case SigmaKind::karras: {
            // rho = 7 interpolation in sigma^(1/rho) space, sigma_min = sigma_max/100,
            // terminal 0 appended
            const double rho = 7.0;
            const double sigma_min = sigma_max / 100.0;
            const double max_inv = std::pow(sigma_max, 1.0 / rho);
            const double min_inv = std::pow(sigma_min, 1.0 / rho);
            if (n == 1) {
                s.sigmas[0] = sigma_max;
            } else {
                for (std::size_t i = 0; i < n; ++i) {
                    const double f = static_cast<double>(i) / static_cast<double>(n - 1);
                    s.sigmas[i] = std::pow(max_inv + f * (min_inv - max_inv), rho);
                }
            }
            s.sigmas[n] = 0.0;
            break;
        }
        default:
            throw std::invalid_argument("make_sigma_schedule: unknown schedule kind");
    }
    return s;
}

SigmaKind sigma_kind_from_string(const std::string& s) {
    if (s == "linear") return SigmaKind::linear;
    if (s == "karras") return SigmaKind::karras;
    throw std::invalid_argument("unknown sigma schedule kind: " + s);
}

}  // namespace diamond
