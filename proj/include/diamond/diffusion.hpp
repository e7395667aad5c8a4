#pragma once

#include "diamond/vec.hpp"

namespace diamond {

// N denoising intervals: sigmas holds N+1 values, strictly descending from
// sigma_max to exactly 0.
struct SigmaSchedule {
    std::size_t steps = 0;
    Vec sigmas;
};

enum class SigmaKind { linear, karras };

// x_t - sigma_t*eps
Vec clean_estimate_diffusion(const Vec& x_t, const Vec& eps, double sigma_t);

// x_t - (sigma_t - sigma_next)*eps
Vec euler_step_diffusion(const Vec& x_t, const Vec& eps, double sigma_t, double sigma_next);

SigmaSchedule make_sigma_schedule(std::size_t n, double sigma_max, SigmaKind kind);
SigmaKind sigma_kind_from_string(const std::string& s);

}  // namespace diamond
