#include "diamond/gradients.hpp"

namespace diamond {

double artifact_loss(const ArtifactMask& mask) {
    if (mask.size() == 0) throw std::invalid_argument("artifact_loss: empty mask");
    double acc = 0.0;
    for (double m : mask.v) acc += m * m;
    return acc / static_cast<double>(mask.size());
}

Vec grad_artifact(const Vec& x, double s, const Field& field, const DecoderSpec& decoder,
                  const DetectorSpec& detector, GradMode mode) {
    const Vec v = field.eval(x, s);
    Vec x0_hat(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) x0_hat[i] = x[i] - s * v[i];

    const Grid decoded = decode(x0_hat, decoder);
    const ArtifactMask mask = eval_mask(decoded, detector);

    // dL/dM = 2 M / (H*W), then transpose-compose back through the chain
    Grid cot(mask.rows, mask.cols);
    const double inv = 2.0 / static_cast<double>(mask.size());
    for (std::size_t q = 0; q < mask.size(); ++q) cot.v[q] = inv * mask.v[q];

    const Grid g_decoded = mask_jacobian_action(decoded, detector, cot);
    Vec g = decode_transpose(g_decoded, decoder, x.size());

    if (mode == GradMode::exact) {
        // d x0_hat/dx = I - s * dv/dx
        const Vec through_field = field.vjp(x, s, g);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= s * through_field[i];
    }
    return g;
}

Vec finite_difference_grad(const Vec& x, double s, const Field& field, const DecoderSpec& decoder,
                           const DetectorSpec& detector, GradMode mode, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_difference_grad: step must be positive");

    const Vec v0 = field.eval(x, s);
    auto loss_at = [&](const Vec& xq) {
        const Vec v = mode == GradMode::detached_velocity ? v0 : field.eval(xq, s);
        Vec x0_hat(xq.size());
        for (std::size_t i = 0; i < xq.size(); ++i) x0_hat[i] = xq[i] - s * v[i];
        return artifact_loss(eval_mask(decode(x0_hat, decoder), detector));
    };

    Vec g(x.size());
    Vec xq = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        xq[i] = orig + h;
        const double lp = loss_at(xq);
        xq[i] = orig - h;
        const double lm = loss_at(xq);
        xq[i] = orig;
        g[i] = (lp - lm) / (2.0 * h);
    }
    return g;
}

}  // namespace diamond
