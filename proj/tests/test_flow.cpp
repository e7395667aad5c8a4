#include "doctest.h"

#include "diamond/flow.hpp"
#include "diamond/rng.hpp"

using namespace diamond;

TEST_CASE("interpolate hits both endpoints and the convex interior") {
    CHECK(interpolate({0, 0}, {2, 2}, 0.0) == Vec{0, 0});
    CHECK(interpolate({0, 0}, {2, 2}, 1.0) == Vec{2, 2});
    const Vec mid = interpolate({0, 0}, {2, 2}, 0.25);
    CHECK(mid[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(mid[1] == doctest::Approx(0.5).epsilon(1e-15));

    CHECK_THROWS_AS(interpolate({0, 0}, {1, 2, 3}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(interpolate({0, 0}, {1, 1}, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(interpolate({0, 0}, {1, 1}, -0.1), std::invalid_argument);
}

TEST_CASE("clean estimate at t=0 is exactly the identity") {
    CounterRng rng = CounterRng::keyed("flow-tests", 1);
    for (int rep = 0; rep < 50; ++rep) {
        const Vec x = rng.gaussian_vec(3);
        const Vec v = rng.gaussian_vec(3);
        CHECK(clean_estimate_flow(x, v, 0.0) == x);
    }
}

TEST_CASE("clean estimate hand values") {
    CHECK(clean_estimate_flow({3, 3}, {0, 0}, 0.7) == Vec{3, 3});
    const Vec r = clean_estimate_flow({3, 3}, {2, 2}, 0.5);
    CHECK(r[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(r[1] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK_THROWS_AS(clean_estimate_flow({1, 2}, {1}, 0.5), std::invalid_argument);
}

TEST_CASE("interpolate then recover the clean endpoint") {
    CounterRng rng = CounterRng::keyed("flow-tests", 2);
    for (int rep = 0; rep < 100; ++rep) {
        const Vec x0 = rng.gaussian_vec(4);
        const Vec x1 = rng.gaussian_vec(4);
        const double t = rng.next_unit();  // (0,1]
        Vec v(4);
        for (int i = 0; i < 4; ++i) v[i] = x1[i] - x0[i];
        const Vec rec = clean_estimate_flow(interpolate(x0, x1, t), v, t);
        for (int i = 0; i < 4; ++i) {
            CHECK(rec[i] == doctest::Approx(x0[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("euler step shares the clean-estimate formula") {
    CHECK(euler_step_flow({1, 1}, {0, 0}, 0.1) == Vec{1, 1});
    const Vec hand = euler_step_flow({1, 0}, {10, 0}, 0.1);
    CHECK(hand[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(hand[1] == 0.0);

    CounterRng rng = CounterRng::keyed("flow-tests", 3);
    for (int rep = 0; rep < 20; ++rep) {
        const Vec x = rng.gaussian_vec(3);
        const Vec v = rng.gaussian_vec(3);
        const double dt = rng.next_unit();
        CHECK(euler_step_flow(x, v, dt) == clean_estimate_flow(x, v, dt));
    }
    CHECK_THROWS_AS(euler_step_flow({1}, {1}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(euler_step_flow({1}, {1}, -0.1), std::invalid_argument);
}

TEST_CASE("composing Euler steps with the point-mass field lands on the mean") {
    const Vec mu{1.5, -2.0};
    CounterRng rng = CounterRng::keyed("flow-tests", 4);
    for (std::size_t n : {1, 7, 10}) {
        const TimeGrid grid = make_time_grid(n);
        Vec x = rng.gaussian_vec(2);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = grid.times[i];
            Vec v(2);
            for (int q = 0; q < 2; ++q) v[q] = (x[q] - mu[q]) / t;
            x = euler_step_flow(x, v, t - grid.times[i + 1]);
        }
        CHECK(x[0] == doctest::Approx(mu[0]).epsilon(1e-9));
        CHECK(x[1] == doctest::Approx(mu[1]).epsilon(1e-9));
    }
}

TEST_CASE("time grid is a uniform descending partition ending at exactly 0") {
    const TimeGrid g1 = make_time_grid(1);
    CHECK(g1.times == Vec{1.0, 0.0});
    CHECK(g1.steps == 1);

    const TimeGrid g4 = make_time_grid(4);
    CHECK(g4.times == Vec{1.0, 0.75, 0.5, 0.25, 0.0});

    const TimeGrid g10 = make_time_grid(10);
    CHECK(g10.times.size() == 11);
    CHECK(g10.times.front() == 1.0);
    CHECK(g10.times.back() == 0.0);
    for (std::size_t i = 0; i + 1 < g10.times.size(); ++i) {
        CHECK(g10.times[i] > g10.times[i + 1]);
    }

    CHECK_THROWS_AS(make_time_grid(0), std::invalid_argument);
}
