#pragma once

#include <optional>

#include "diamond/detector.hpp"
#include "diamond/vec.hpp"

namespace diamond {

// MAE against the baseline image, split by the baseline mask into artifact
// (A) and non-artifact (NA) regions. An empty region reports no value.
struct MaeSplit {
    double mae = 0.0;
    std::optional<double> mae_a;
    std::optional<double> mae_na;
};

// percentage of masks containing any cell >= threshold
double mean_artifact_freq(const std::vector<ArtifactMask>& masks, double threshold = 0.5);

// percentage of cells >= threshold in one mask
double artifact_pixel_ratio(const ArtifactMask& mask, double threshold = 0.5);

// mean of artifact_pixel_ratio over a batch
double artifact_pixel_ratio_mean(const std::vector<ArtifactMask>& masks, double threshold = 0.5);

MaeSplit mae_split(const Grid& image, const Grid& base_image, const ArtifactMask& base_mask,
                   double threshold = 0.5);

}  // namespace diamond
