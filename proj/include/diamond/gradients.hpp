#pragma once

#include "diamond/detector.hpp"
#include "diamond/models.hpp"
#include "diamond/vec.hpp"

namespace diamond {

// detached_velocity: the field output is held constant while differentiating,
// so d(clean estimate)/d(x_t) = I. exact: the chain additionally runs through
// the field's own dependence on x_t.
enum class GradMode { detached_velocity, exact };

// mean of squared mask entries
double artifact_loss(const ArtifactMask& mask);

// gradient of artifact_loss(detector(decode(x - s*field(x,s)))) w.r.t. x.
// `s` is the extrapolation scale: t for the flow family, sigma for diffusion.
Vec grad_artifact(const Vec& x, double s, const Field& field, const DecoderSpec& decoder,
                  const DetectorSpec& detector, GradMode mode);

// central-difference oracle for grad_artifact; in detached mode the field
// output is frozen at the unperturbed point
Vec finite_difference_grad(const Vec& x, double s, const Field& field, const DecoderSpec& decoder,
                           const DetectorSpec& detector, GradMode mode, double h = 1e-5);

}  // namespace diamond
