#include <cmath>

#include "doctest.h"

#include "diamond/gradients.hpp"
#include "diamond/rng.hpp"
#include "oracles.hpp"

using namespace diamond;

namespace {

struct ConstantField final : Field {
    Vec value;
    explicit ConstantField(Vec v) : value(std::move(v)) {}
    std::size_t dim() const override { return value.size(); }
    Vec eval(const Vec&, double) const override { return value; }
    Vec vjp(const Vec&, double, const Vec& cot) const override { return Vec(cot.size(), 0.0); }
};

MixtureSpec two_mode() {
    MixtureSpec s;
    s.weights = {0.5, 0.5};
    s.means = {{-1.5, 0.5}, {1.5, -0.5}};
    s.stds = {0.6, 0.8};
    return s;
}

DecoderSpec identity_decoder(std::size_t h, std::size_t w) {
    DecoderSpec d;
    d.kind = DecoderSpec::Kind::identity;
    d.h = h;
    d.w = w;
    return d;
}

}  // namespace

TEST_CASE("artifact loss is the mean of squared mask entries") {
    ArtifactMask zero(3, 3);
    CHECK(artifact_loss(zero) == 0.0);

    ArtifactMask ones(2, 5, 1.0);
    CHECK(artifact_loss(ones) == 1.0);

    ArtifactMask corner(2, 2);
    corner.v = {1.0, 0.0, 0.0, 0.0};
    CHECK(artifact_loss(corner) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("single-cell chain matches the hand-composed derivative") {
    // identity decode of a 1-d latent, per-cell detector with scalar center
    const double c = 0.3, r = 0.9, s = 11.0, t = 0.4, v = 0.7;
    DetectorSpec det;
    det.kind = DetectorSpec::Kind::radial;
    det.centers = {{c}};
    det.radii = {r};
    det.sharpness = s;
    const DecoderSpec dec = identity_decoder(1, 1);
    const ConstantField field({v});

    for (double x : {0.1, 0.8, 1.4, -0.6}) {
        const double u = x - t * v;
        const double z = s * (r * r - (u - c) * (u - c)) / (2.0 * r);
        const double m = 1.0 / (1.0 + std::exp(-z));
        const double dm_du = m * (1.0 - m) * (-(s / r)) * (u - c);
        const double expect = 2.0 * m * dm_du;

        const Vec g = grad_artifact({x}, t, field, dec, det, GradMode::detached_velocity);
        CHECK(g[0] == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("gradient vanishes in flat artifact-free regions") {
    DetectorSpec det;
    det.kind = DetectorSpec::Kind::radial;
    det.centers = {{50.0, 50.0}};
    det.radii = {1.0};
    const DecoderSpec dec = identity_decoder(1, 2);
    const MixtureVelocityField field(two_mode());

    const Vec g = grad_artifact({0.0, 0.0}, 0.5, field, dec, det, GradMode::detached_velocity);
    CHECK(norm2(g) < 1e-6);
}

TEST_CASE("both modes match central finite differences across detector kinds") {
    const MixtureVelocityField field(two_mode());

    DecoderSpec linear;
    linear.kind = DecoderSpec::Kind::linear;
    linear.h = 2;
    linear.w = 2;
    linear.matrix = {1.0, 0.2, -0.3, 1.1, 0.5, -0.4, 0.9, 0.8};

    CounterRng rng = CounterRng::keyed("grad-tests", 1);
    for (int which_dec = 0; which_dec < 2; ++which_dec) {
        const DecoderSpec dec = which_dec == 0 ? identity_decoder(1, 2) : linear;
        // artifact regions anchored in the decoder's output space
        const Grid mode_a = decode({-1.5, 0.5}, dec);
        const Grid mode_b = decode({1.0, 0.0}, dec);

        DetectorSpec radial;
        radial.kind = DetectorSpec::Kind::radial;
        radial.centers = {mode_a.v};
        radial.radii = {1.0};

        DetectorSpec patch;
        patch.kind = DetectorSpec::Kind::patch;
        patch.centers = {{0.0}};
        patch.radii = {1.0};

        DetectorSpec comp;
        comp.kind = DetectorSpec::Kind::composite;
        comp.centers = {mode_a.v, mode_b.v};
        comp.radii = {1.0, 1.5};
        comp.weights = {0.5, 0.5};

        for (const DetectorSpec* det : {&radial, &patch, &comp}) {
            for (GradMode mode : {GradMode::detached_velocity, GradMode::exact}) {
                for (int rep = 0; rep < 20; ++rep) {
                    const Vec x{2.5 * rng.next_gaussian(), 2.5 * rng.next_gaussian()};
                    const double t = 0.2 + 0.7 * rng.next_unit();
                    const Vec got = grad_artifact(x, t, field, dec, *det, mode);
                    const Vec fd = finite_difference_grad(x, t, field, dec, *det, mode, 1e-5);
                    double err = 0.0;
                    for (std::size_t q = 0; q < fd.size(); ++q) {
                        err += (got[q] - fd[q]) * (got[q] - fd[q]);
                    }
                    err = std::sqrt(err);
                    const bool ok = err / std::max(norm2(fd), 1e-12) < 1e-4 || err < 1e-9;
                    CHECK(ok);
                }
            }
        }
    }
}

TEST_CASE("finite differences converge at second order") {
    const MixtureVelocityField field(two_mode());
    DetectorSpec det;
    det.kind = DetectorSpec::Kind::radial;
    det.centers = {{-1.5, 0.5}};
    det.radii = {1.2};
    const DecoderSpec dec = identity_decoder(1, 2);

    const Vec x{-0.9, 0.3};
    const Vec exact = grad_artifact(x, 0.5, field, dec, det, GradMode::detached_velocity);

    double prev_err = -1.0;
    for (double h : {1e-2, 5e-3, 2.5e-3}) {
        const Vec fd = finite_difference_grad(x, 0.5, field, dec, det, GradMode::detached_velocity, h);
        double err = 0.0;
        for (std::size_t q = 0; q < fd.size(); ++q) err += (fd[q] - exact[q]) * (fd[q] - exact[q]);
        err = std::sqrt(err);
        if (prev_err > 0.0) {
            const double ratio = err / prev_err;
            CHECK(ratio > 0.15);
            CHECK(ratio < 0.4);
        }
        prev_err = err;
    }
}

TEST_CASE("constant-loss region gives a zero finite difference") {
    DetectorSpec det;
    det.kind = DetectorSpec::Kind::radial;
    det.centers = {{100.0, 100.0}};
    det.radii = {0.5};
    const ConstantField field(Vec{0.0, 0.0});
    const Vec fd = finite_difference_grad({0.0, 0.0}, 0.5, field, identity_decoder(1, 2), det,
                                          GradMode::detached_velocity, 1e-5);
    CHECK(norm2(fd) < 1e-8);
}

TEST_CASE("modes agree where the field is locally constant in x") {
    // data == noise at t = 1/2: the velocity is identically zero there, so
    // the exact extra term vanishes
    MixtureSpec spec;
    spec.weights = {1.0};
    spec.means = {{0.0, 0.0}};
    spec.stds = {1.0};
    const MixtureVelocityField field(spec);

    DetectorSpec det;
    det.kind = DetectorSpec::Kind::radial;
    det.centers = {{0.5, 0.0}};
    det.radii = {1.0};
    const DecoderSpec dec = identity_decoder(1, 2);

    CounterRng rng = CounterRng::keyed("grad-tests", 2);
    for (int rep = 0; rep < 10; ++rep) {
        const Vec x = rng.gaussian_vec(2);
        const Vec detached = grad_artifact(x, 0.5, field, dec, det, GradMode::detached_velocity);
        const Vec exact = grad_artifact(x, 0.5, field, dec, det, GradMode::exact);
        for (int q = 0; q < 2; ++q) CHECK(detached[q] == doctest::Approx(exact[q]).epsilon(1e-12));
    }
}

TEST_CASE("exact mode differentiates through a trained field") {
    MixtureSpec target;
    target.weights = {1.0};
    target.means = {{0.5, -0.5}};
    target.stds = {0.4};
    const TrainReport rep = train_mlp_velocity(target, {16, 16}, 150, 5e-3, 21);

    DetectorSpec det;
    det.kind = DetectorSpec::Kind::radial;
    det.centers = {{0.5, -0.5}};
    det.radii = {0.8};
    const DecoderSpec dec = identity_decoder(1, 2);

    CounterRng rng = CounterRng::keyed("grad-tests", 3);
    for (int rep_i = 0; rep_i < 15; ++rep_i) {
        const Vec x = rng.gaussian_vec(2);
        const double t = 0.2 + 0.7 * rng.next_unit();
        const Vec got = grad_artifact(x, t, rep.field, dec, det, GradMode::exact);
        const Vec fd = finite_difference_grad(x, t, rep.field, dec, det, GradMode::exact, 1e-5);
        double err = 0.0;
        for (std::size_t q = 0; q < fd.size(); ++q) err += (got[q] - fd[q]) * (got[q] - fd[q]);
        err = std::sqrt(err);
        const bool ok = err / std::max(norm2(fd), 1e-12) < 1e-4 || err < 1e-9;
        CHECK(ok);
    }
}

TEST_CASE("gradient norm is continuous along closely spaced probes") {
    const MixtureVelocityField field(two_mode());
    DetectorSpec det;
    det.kind = DetectorSpec::Kind::radial;
    det.centers = {{-1.5, 0.5}};
    det.radii = {1.0};
    const DecoderSpec dec = identity_decoder(1, 2);

    Vec x{-0.7, 0.4};
    double prev = norm2(grad_artifact(x, 0.5, field, dec, det, GradMode::detached_velocity));
    for (int step = 0; step < 20; ++step) {
        x[0] += 1e-6;
        const double cur = norm2(grad_artifact(x, 0.5, field, dec, det, GradMode::detached_velocity));
        CHECK(std::abs(cur - prev) < 1e-3);
        prev = cur;
    }
}
