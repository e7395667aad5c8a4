#include "diamond/guidance.hpp"

#include <algorithm>
#include <cmath>

namespace diamond {

void GuidanceConfig::validate() const {
    if (!(lambda_start >= lambda_end) || !(lambda_end >= 0.0)) {
        throw std::invalid_argument("GuidanceConfig: need lambda_start >= lambda_end >= 0");
    }
    if (!(p >= 1.0)) throw std::invalid_argument("GuidanceConfig: power factor must be >= 1");
    if (!(eps > 0.0)) throw std::invalid_argument("GuidanceConfig: eps must be positive");
    if (!(alpha >= 0.0)) throw std::invalid_argument("GuidanceConfig: alpha must be >= 0");
}

double lambda_schedule(std::size_t i, std::size_t n, const GuidanceConfig& cfg) {
    if (n == 0) throw std::invalid_argument("lambda_schedule: step count must be >= 1");
    if (i >= n) throw std::invalid_argument("lambda_schedule: step index out of range");
    if (n == 1) return cfg.lambda_start;
    const double frac = static_cast<double>(i) / static_cast<double>(n - 1);
    return cfg.lambda_end + (cfg.lambda_start - cfg.lambda_end) * std::pow(1.0 - frac, cfg.p);
}

Vec displacement(const Vec& g, double lambda_t, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("displacement: eps must be positive");
    if (!all_finite(g)) throw std::invalid_argument("displacement: non-finite gradient");
    const double n = norm2(g);
    Vec out(g.size(), 0.0);
    if (n == 0.0) return out;
    const double scale = lambda_t / (n + eps);
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = scale * g[i];
    return out;
}

bool correction_window(std::size_t i, std::size_t n, std::size_t tau_start, std::size_t tau_end) {
    if (n == 0 || i >= n) throw std::invalid_argument("correction_window: step index out of range");
    return i >= tau_start && i + tau_end <= n - 1;
}

double rec_loss(const Grid& decoded_x0hat, const Grid& base_image,
                const std::vector<std::uint8_t>& mask_na, double alpha, double lambda_t) {
    check_same_shape(decoded_x0hat, base_image, "rec_loss");
    if (mask_na.size() != decoded_x0hat.size()) {
        throw std::invalid_argument("rec_loss: non-artifact mask size mismatch");
    }
    if (!(alpha >= 0.0)) throw std::invalid_argument("rec_loss: alpha must be >= 0");
    if (alpha == 0.0) return 0.0;

    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t q = 0; q < mask_na.size(); ++q) {
        if (!mask_na[q]) continue;
        acc += std::abs(decoded_x0hat.v[q] - base_image.v[q]);
        ++count;
    }
    if (count == 0) return 0.0;
    return alpha * lambda_t * acc / static_cast<double>(count);
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

struct StepOutcome {
    Vec x_next;
    StepRecord record;
};

// Shared body of the two guided steps. `scale` is the clean-estimate
// extrapolation scalar (t for flow, sigma for diffusion); the caller supplies
// the field output `v` at (x, time_like) and the unguided transition `x_base`.
StepOutcome guided_core(const Vec& x, double time_like, double scale, const Vec& v, Vec x_base,
                        const Field& field, const DecoderSpec& decoder, const DetectorSpec& detector,
                        const GuidanceConfig& cfg, std::size_t i, std::size_t n,
                        const Grid* base_image) {
    cfg.validate();
    if (cfg.alpha > 0.0 && base_image == nullptr) {
        throw std::invalid_argument("guided step: alpha > 0 requires a baseline image");
    }

    Vec x0_hat(x.size());
    for (std::size_t q = 0; q < x.size(); ++q) x0_hat[q] = x[q] - scale * v[q];

    const Grid decoded = decode(x0_hat, decoder);
    const ArtifactMask mask = eval_mask(decoded, detector);

    StepRecord rec;
    rec.i = i;
    rec.t = time_like;
    rec.x = x;
    rec.x0_hat = x0_hat;
    rec.la = artifact_loss(mask);
    rec.lambda = lambda_schedule(i, n, cfg);
    rec.corrected = correction_window(i, n, cfg.tau_start, cfg.tau_end);
    rec.mask_max = *std::max_element(mask.v.begin(), mask.v.end());
    rec.mask_mean = 0.0;
    for (double m : mask.v) rec.mask_mean += m;
    rec.mask_mean /= static_cast<double>(mask.size());

    if (rec.corrected) {
        // d L_a / d mask, through the detector and decoder transposes
        Grid cot(mask.rows, mask.cols);
        const double inv = 2.0 / static_cast<double>(mask.size());
        for (std::size_t q = 0; q < mask.size(); ++q) cot.v[q] = inv * mask.v[q];
        Grid g_decoded = mask_jacobian_action(decoded, detector, cot);

        // identity regularizer, applied from the second iteration; its
        // gradient joins L_a's before the shared normalization
        if (cfg.alpha > 0.0 && i >= 1) {
            check_same_shape(decoded, *base_image, "guided step");
            const std::vector<std::uint8_t> na_cells = [&] {
                std::vector<std::uint8_t> na = binarize(eval_mask(*base_image, detector), 0.5);
                for (auto& b : na) b = b ? 0 : 1;
                return na;
            }();
            std::size_t count = 0;
            for (auto b : na_cells) count += b;
            if (count > 0) {
                const double coeff = cfg.alpha * rec.lambda / static_cast<double>(count);
                for (std::size_t q = 0; q < na_cells.size(); ++q) {
                    if (na_cells[q]) g_decoded.v[q] += coeff * sign(decoded.v[q] - base_image->v[q]);
                }
            }
        }

        Vec g = decode_transpose(g_decoded, decoder, x.size());
        if (cfg.mode == GradMode::exact) {
            const Vec through_field = field.vjp(x, time_like, g);
            for (std::size_t q = 0; q < g.size(); ++q) g[q] -= scale * through_field[q];
        }

        Vec delta;
        if (cfg.normalize) {
            delta = displacement(g, rec.lambda, cfg.eps);
        } else {
            delta = g;
            for (double& dv : delta) dv *= rec.lambda;
        }
        rec.delta_norm = norm2(delta);
        if (rec.delta_norm > 0.0) {
            for (std::size_t q = 0; q < x_base.size(); ++q) x_base[q] -= delta[q];
        }
    }

    return {std::move(x_base), std::move(rec)};
}

}  // namespace

std::pair<LatentState, StepRecord> guided_step_flow(const LatentState& state, const Field& field,
                                                    const DecoderSpec& decoder,
                                                    const DetectorSpec& detector,
                                                    const GuidanceConfig& cfg, const TimeGrid& grid,
                                                    std::size_t i, const Grid* base_image) {
    if (i >= grid.steps) throw std::invalid_argument("guided_step_flow: step index out of range");
    const double t = grid.times[i];
    if (state.t != t) throw std::invalid_argument("guided_step_flow: state time does not match grid");
    const double t_next = grid.times[i + 1];

    const Vec v = field.eval(state.x, t);
    Vec x_base = euler_step_flow(state.x, v, t - t_next);
    StepOutcome out = guided_core(state.x, t, t, v, std::move(x_base), field, decoder, detector, cfg,
                                  i, grid.steps, base_image);
    return {LatentState{std::move(out.x_next), t_next}, std::move(out.record)};
}

std::pair<LatentState, StepRecord> guided_step_diffusion(const LatentState& state, const Field& denoiser,
                                                         const DecoderSpec& decoder,
                                                         const DetectorSpec& detector,
                                                         const GuidanceConfig& cfg,
                                                         const SigmaSchedule& schedule, std::size_t i,
                                                         const Grid* base_image) {
    if (i >= schedule.steps) throw std::invalid_argument("guided_step_diffusion: step index out of range");
    const double sigma = schedule.sigmas[i];
    if (state.t != sigma) throw std::invalid_argument("guided_step_diffusion: state sigma does not match schedule");
    const double sigma_next = schedule.sigmas[i + 1];

    const Vec eps = denoiser.eval(state.x, sigma);
    Vec x_base = euler_step_diffusion(state.x, eps, sigma, sigma_next);
    StepOutcome out = guided_core(state.x, sigma, sigma, eps, std::move(x_base), denoiser, decoder,
                                  detector, cfg, i, schedule.steps, base_image);
    return {LatentState{std::move(out.x_next), sigma_next}, std::move(out.record)};
}

Family family_from_string(const std::string& s) {
    if (s == "flow") return Family::flow;
    if (s == "diffusion") return Family::diffusion;
    throw std::invalid_argument("unknown family: " + s);
}

SamplerPlan SamplerPlan::flow(std::size_t n) {
    SamplerPlan p;
    p.family = Family::flow;
    p.grid = make_time_grid(n);
    return p;
}

SamplerPlan SamplerPlan::diffusion(std::size_t n, double sigma_max, SigmaKind kind) {
    SamplerPlan p;
    p.family = Family::diffusion;
    p.schedule = make_sigma_schedule(n, sigma_max, kind);
    return p;
}

Trajectory run_trajectory(const Vec& x1, const SamplerPlan& plan, const Field& field,
                          const DecoderSpec& decoder, const DetectorSpec& detector,
                          const GuidanceConfig& cfg, const Grid* base_image) {
    Trajectory traj;
    traj.records.reserve(plan.steps());
    LatentState state{x1, plan.family == Family::flow ? plan.grid.times.front()
                                                      : plan.schedule.sigmas.front()};
    for (std::size_t i = 0; i < plan.steps(); ++i) {
        auto [next, rec] = plan.family == Family::flow
                               ? guided_step_flow(state, field, decoder, detector, cfg, plan.grid, i, base_image)
                               : guided_step_diffusion(state, field, decoder, detector, cfg, plan.schedule, i, base_image);
        traj.records.push_back(std::move(rec));
        state = std::move(next);
    }
    traj.final_x = std::move(state.x);
    return traj;
}

}  // namespace diamond
