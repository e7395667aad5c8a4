#include <cmath>

#include "doctest.h"

#include "diamond/diffusion.hpp"
#include "diamond/models.hpp"
#include "diamond/rng.hpp"

using namespace diamond;

TEST_CASE("clean estimate with sigma 0 is the identity") {
    CounterRng rng = CounterRng::keyed("diff-tests", 1);
    for (int rep = 0; rep < 20; ++rep) {
        const Vec x = rng.gaussian_vec(3);
        const Vec eps = rng.gaussian_vec(3);
        CHECK(clean_estimate_diffusion(x, eps, 0.0) == x);
    }
    const Vec hand = clean_estimate_diffusion({2, 2}, {1, 1}, 1.0);
    CHECK(hand == Vec{1, 1});
    CHECK_THROWS_AS(clean_estimate_diffusion({1}, {1}, -0.5), std::invalid_argument);
}

TEST_CASE("euler denoising step") {
    CHECK(euler_step_diffusion({3, 1}, {0, 0}, 2.0, 1.0) == Vec{3, 1});
    const Vec hand = euler_step_diffusion({3, 0}, {1, 0}, 2.0, 1.0);
    CHECK(hand == Vec{2, 0});
    CHECK_THROWS_AS(euler_step_diffusion({1}, {1}, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(euler_step_diffusion({1}, {1}, 1.0, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(euler_step_diffusion({1}, {1}, 1.0, -0.1), std::invalid_argument);
}

TEST_CASE("one-step consistency with the clean estimate") {
    CounterRng rng = CounterRng::keyed("diff-tests", 2);
    for (int rep = 0; rep < 20; ++rep) {
        const Vec x = rng.gaussian_vec(2);
        const Vec eps = rng.gaussian_vec(2);
        const double sigma = rng.next_unit() + 0.1;
        CHECK(euler_step_diffusion(x, eps, sigma, 0.0) == clean_estimate_diffusion(x, eps, sigma));
    }
}

TEST_CASE("sigma schedules") {
    const SigmaSchedule lin = make_sigma_schedule(2, 1.0, SigmaKind::linear);
    CHECK(lin.sigmas == Vec{1.0, 0.5, 0.0});

    const SigmaSchedule kar = make_sigma_schedule(4, 10.0, SigmaKind::karras);
    CHECK(kar.sigmas.size() == 5);
    CHECK(kar.sigmas.back() == 0.0);
    for (std::size_t i = 0; i + 1 < kar.sigmas.size(); ++i) CHECK(kar.sigmas[i] > kar.sigmas[i + 1]);

    // rho=7 interpolation evaluated independently, sigma_min = sigma_max/100
    const double rho = 7.0;
    const double lo = std::pow(0.1, 1.0 / rho), hi = std::pow(10.0, 1.0 / rho);
    for (int i = 0; i < 4; ++i) {
        const double expect = std::pow(hi + (i / 3.0) * (lo - hi), rho);
        CHECK(kar.sigmas[i] == doctest::Approx(expect).epsilon(1e-12));
    }

    for (std::size_t n : {1, 3, 12}) {
        for (SigmaKind k : {SigmaKind::linear, SigmaKind::karras}) {
            const SigmaSchedule s = make_sigma_schedule(n, 2.5, k);
            CHECK(s.sigmas.size() == n + 1);
            CHECK(s.sigmas.back() == 0.0);
            for (std::size_t i = 0; i + 1 < s.sigmas.size(); ++i) CHECK(s.sigmas[i] > s.sigmas[i + 1]);
        }
    }

    CHECK_THROWS_AS(make_sigma_schedule(0, 1.0, SigmaKind::linear), std::invalid_argument);
    CHECK_THROWS_AS(make_sigma_schedule(4, 0.0, SigmaKind::linear), std::invalid_argument);
    CHECK_THROWS_AS(sigma_kind_from_string("exponential"), std::invalid_argument);
}

TEST_CASE("full schedule with the exact point-mass denoiser converges to the mean") {
    const Vec mu{0.5, -1.0};
    CounterRng rng = CounterRng::keyed("diff-tests", 3);
    const SigmaSchedule sched = make_sigma_schedule(12, 5.0, SigmaKind::karras);
    Vec x = rng.gaussian_vec(2);
    for (double& v : x) v *= sched.sigmas.front();
    for (std::size_t i = 0; i < sched.steps; ++i) {
        const double sigma = sched.sigmas[i];
        Vec eps(2);
        for (int q = 0; q < 2; ++q) eps[q] = (x[q] - mu[q]) / sigma;
        x = euler_step_diffusion(x, eps, sigma, sched.sigmas[i + 1]);
    }
    CHECK(x[0] == doctest::Approx(mu[0]).epsilon(1e-9));
    CHECK(x[1] == doctest::Approx(mu[1]).epsilon(1e-9));
}

TEST_CASE("exact mixture denoiser lands near a mode on almost every seeded run") {
    MixtureSpec spec;
    spec.weights = {0.5, 0.5};
    spec.means = {{-4.0, 0.0}, {4.0, 0.0}};
    spec.stds = {0.6, 0.6};
    const MixtureNoiseField field(spec);
    const SigmaSchedule sched = make_sigma_schedule(20, 12.0, SigmaKind::karras);

    std::size_t hits = 0;
    const std::size_t runs = 1000;
    for (std::size_t seed = 0; seed < runs; ++seed) {
        CounterRng rng = CounterRng::keyed("diff-3sigma", seed);
        Vec x = rng.gaussian_vec(2);
        for (double& v : x) v *= sched.sigmas.front();
        for (std::size_t i = 0; i < sched.steps; ++i) {
            const Vec eps = field.eval(x, sched.sigmas[i]);
            x = euler_step_diffusion(x, eps, sched.sigmas[i], sched.sigmas[i + 1]);
        }
        // within 3 component standard deviations (per coordinate) of a mean
        bool near_mode = false;
        for (std::size_t c = 0; c < spec.components(); ++c) {
            bool ok = true;
            for (int q = 0; q < 2; ++q) {
                if (std::abs(x[q] - spec.means[c][q]) > 3.0 * spec.stds[c]) ok = false;
            }
            if (ok) near_mode = true;
        }
        hits += near_mode ? 1 : 0;
    }
    CHECK(hits >= runs * 99 / 100);
}
