#include "diamond/metrics.hpp"

#include <cmath>

namespace diamond {

double mean_artifact_freq(const std::vector<ArtifactMask>& masks, double threshold) {
    if (masks.empty()) throw std::invalid_argument("mean_artifact_freq: empty batch");
    std::size_t flagged = 0;
    for (const auto& m : masks) {
        for (double v : m.v) {
            if (v >= threshold) {
                ++flagged;
                break;
            }
        }
    }
    return 100.0 * static_cast<double>(flagged) / static_cast<double>(masks.size());
}

double artifact_pixel_ratio(const ArtifactMask& mask, double threshold) {
    if (mask.size() == 0) throw std::invalid_argument("artifact_pixel_ratio: empty mask");
    std::size_t flagged = 0;
    for (double v : mask.v) flagged += v >= threshold ? 1 : 0;
    return 100.0 * static_cast<double>(flagged) / static_cast<double>(mask.size());
}

double artifact_pixel_ratio_mean(const std::vector<ArtifactMask>& masks, double threshold) {
    if (masks.empty()) throw std::invalid_argument("artifact_pixel_ratio_mean: empty batch");
    // batch masks share one shape, so the mean of per-mask ratios is the
    // pooled count; integer accumulation keeps it permutation-invariant
    std::size_t flagged = 0, cells = 0;
    for (const auto& m : masks) {
        if (m.size() == 0 || !m.same_shape(masks.front())) {
            throw std::invalid_argument("artifact_pixel_ratio_mean: inconsistent mask shapes");
        }
        for (double v : m.v) flagged += v >= threshold ? 1 : 0;
        cells += m.size();
    }
    return 100.0 * static_cast<double>(flagged) / static_cast<double>(cells);
}

MaeSplit mae_split(const Grid& image, const Grid& base_image, const ArtifactMask& base_mask,
                   double threshold) {
    check_same_shape(image, base_image, "mae_split");
    check_same_shape(image, base_mask, "mae_split");

    double total = 0.0, acc_a = 0.0, acc_na = 0.0;
    std::size_t n_a = 0, n_na = 0;
    for (std::size_t q = 0; q < image.size(); ++q) {
        const double d = std::abs(image.v[q] - base_image.v[q]);
        total += d;
        if (base_mask.v[q] >= threshold) {
            acc_a += d;
            ++n_a;
        } else {
            acc_na += d;
            ++n_na;
        }
    }

    MaeSplit out;
    out.mae = total / static_cast<double>(image.size());
    if (n_a > 0) out.mae_a = acc_a / static_cast<double>(n_a);
    if (n_na > 0) out.mae_na = acc_na / static_cast<double>(n_na);
    return out;
}

}  // namespace diamond
