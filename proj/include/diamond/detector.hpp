#pragma once

#include <cstdint>
#include <string>

#include "diamond/vec.hpp"

namespace diamond {

// Per-cell artifact probabilities over decoded space; values in [0,1].
using ArtifactMask = Grid;

// Differentiable synthetic artifact fields.
//
//   radial:    probability from squared distance to an artifact-region
//              center; high inside the radius, decaying outside. A center of
//              dimension H*W measures distance from the whole decoded grid
//              (a constant mask); a scalar center measures per-cell distance
//              in value space.
//   patch:     per-cell deviation from a reference value (centers[0],
//              scalar); high where a cell strays more than the radius from
//              the reference.
//   composite: weighted probability-space mean of single-center radial
//              members (center_k, radii_k share an index).
//
// sharpness <= 0 selects the default 10/radius per member.
struct DetectorSpec {
    enum class Kind { radial, patch, composite };
    Kind kind = Kind::radial;
    std::vector<Vec> centers;
    Vec radii;
    double sharpness = 0.0;
    Vec weights;  // composite only

    void validate() const;
    double member_sharpness(std::size_t k) const;

    std::string to_json() const;
    static DetectorSpec from_json(const std::string& text);
};

ArtifactMask eval_mask(const Grid& decoded, const DetectorSpec& spec);

// cell true iff value >= threshold
std::vector<std::uint8_t> binarize(const ArtifactMask& mask, double threshold = 0.5);

// J^T * cotangent with J = d mask / d decoded
Grid mask_jacobian_action(const Grid& decoded, const DetectorSpec& spec, const Grid& cotangent);

}  // namespace diamond
