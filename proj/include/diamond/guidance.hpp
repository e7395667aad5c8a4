#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "diamond/diffusion.hpp"
#include "diamond/flow.hpp"
#include "diamond/gradients.hpp"

namespace diamond {

struct GuidanceConfig {
    double lambda_start = 0.0;
    double lambda_end = 0.0;
    double p = 2.0;                 // power factor, >= 1
    std::size_t tau_start = 0;      // iterations skipped at the start of the run
    std::size_t tau_end = 0;        // iterations skipped at the end
    double eps = 1e-8;              // normalization stabilizer
    double alpha = 0.0;             // identity-regularizer strength; 0 disables
    GradMode mode = GradMode::detached_velocity;
    bool normalize = true;          // false: raw lambda*g displacement (ablation)

    void validate() const;
    bool window_empty(std::size_t n) const { return tau_start + tau_end >= n; }
};

struct StepRecord {
    std::size_t i = 0;
    double t = 0.0;                 // sigma for the diffusion family
    Vec x;                          // state entering the step
    Vec x0_hat;
    double mask_max = 0.0;
    double mask_mean = 0.0;
    double la = 0.0;
    double delta_norm = 0.0;
    double lambda = 0.0;
    bool corrected = false;
};

// lambda_end + (lambda_start - lambda_end) * (1 - i/(N-1))^p; i counts solver
// iterations from the start of the run. N=1 returns lambda_start.
double lambda_schedule(std::size_t i, std::size_t n, const GuidanceConfig& cfg);

// lambda * g / (||g|| + eps)
Vec displacement(const Vec& g, double lambda_t, double eps);

// true iff iteration i is inside [tau_start, N-1-tau_end]
bool correction_window(std::size_t i, std::size_t n, std::size_t tau_start, std::size_t tau_end);

// alpha * lambda * mean |decoded - base| over cells where mask_na is set
double rec_loss(const Grid& decoded_x0hat, const Grid& base_image,
                const std::vector<std::uint8_t>& mask_na, double alpha, double lambda_t);

std::pair<LatentState, StepRecord> guided_step_flow(const LatentState& state, const Field& field,
                                                    const DecoderSpec& decoder,
                                                    const DetectorSpec& detector,
                                                    const GuidanceConfig& cfg, const TimeGrid& grid,
                                                    std::size_t i, const Grid* base_image = nullptr);

std::pair<LatentState, StepRecord> guided_step_diffusion(const LatentState& state, const Field& denoiser,
                                                         const DecoderSpec& decoder,
                                                         const DetectorSpec& detector,
                                                         const GuidanceConfig& cfg,
                                                         const SigmaSchedule& schedule, std::size_t i,
                                                         const Grid* base_image = nullptr);

enum class Family { flow, diffusion };
Family family_from_string(const std::string& s);

struct SamplerPlan {
    Family family = Family::flow;
    TimeGrid grid;
    SigmaSchedule schedule;

    static SamplerPlan flow(std::size_t n);
    static SamplerPlan diffusion(std::size_t n, double sigma_max, SigmaKind kind);
    std::size_t steps() const { return family == Family::flow ? grid.steps : schedule.steps; }
};

struct Trajectory {
    Vec final_x;
    std::vector<StepRecord> records;
};

Trajectory run_trajectory(const Vec& x1, const SamplerPlan& plan, const Field& field,
                          const DecoderSpec& decoder, const DetectorSpec& detector,
                          const GuidanceConfig& cfg, const Grid* base_image = nullptr);

}  // namespace diamond
