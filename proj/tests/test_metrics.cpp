#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "diamond/metrics.hpp"
#include "diamond/rng.hpp"

using namespace diamond;

TEST_CASE("mean artifact frequency counts masks with any flagged cell") {
    std::vector<ArtifactMask> zeros(3, ArtifactMask(2, 2));
    CHECK(mean_artifact_freq(zeros) == 0.0);

    std::vector<ArtifactMask> hot(4, ArtifactMask(2, 2));
    for (auto& m : hot) m.v[3] = 0.9;
    CHECK(mean_artifact_freq(hot) == 100.0);

    std::vector<ArtifactMask> mixed(3, ArtifactMask(1, 2));
    mixed[0].v = {0.6, 0.0};
    mixed[1].v = {0.2, 0.55};
    mixed[2].v = {0.1, 0.2};
    CHECK(mean_artifact_freq(mixed) == doctest::Approx(200.0 / 3.0).epsilon(1e-12));

    CHECK_THROWS_AS(mean_artifact_freq({}), std::invalid_argument);
}

TEST_CASE("artifact pixel ratio") {
    ArtifactMask zero(4, 4);
    CHECK(artifact_pixel_ratio(zero) == 0.0);

    ArtifactMask all(2, 2, 0.7);
    CHECK(artifact_pixel_ratio(all) == 100.0);

    ArtifactMask quarter(2, 2);
    quarter.v = {0.9, 0.2, 0.3, 0.1};
    CHECK(artifact_pixel_ratio(quarter) == 25.0);
}

TEST_CASE("mae split hand values") {
    Grid image(1, 2), base(1, 2);
    image.v = {1.0, 3.0};
    base.v = {0.0, 0.0};
    ArtifactMask base_mask(1, 2);
    base_mask.v = {0.9, 0.1};

    const MaeSplit s = mae_split(image, base, base_mask);
    CHECK(s.mae == doctest::Approx(2.0).epsilon(1e-15));
    REQUIRE(s.mae_a.has_value());
    REQUIRE(s.mae_na.has_value());
    CHECK(*s.mae_a == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(*s.mae_na == doctest::Approx(3.0).epsilon(1e-15));

    const MaeSplit same = mae_split(base, base, base_mask);
    CHECK(same.mae == 0.0);
    CHECK(*same.mae_a == 0.0);
    CHECK(*same.mae_na == 0.0);

    ArtifactMask empty_a(1, 2);
    const MaeSplit no_a = mae_split(image, base, empty_a);
    CHECK_FALSE(no_a.mae_a.has_value());
    REQUIRE(no_a.mae_na.has_value());
    CHECK(*no_a.mae_na == no_a.mae);

    Grid bad(2, 2);
    CHECK_THROWS_AS(mae_split(image, bad, base_mask), std::invalid_argument);
}

TEST_CASE("mae is the cell-count-weighted mean of the split") {
    CounterRng rng = CounterRng::keyed("metrics-tests", 1);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t h = 2 + rng.next_u64() % 4;
        const std::size_t w = 2 + rng.next_u64() % 4;
        Grid image(h, w), base(h, w);
        ArtifactMask mask(h, w);
        image.v = rng.gaussian_vec(h * w);
        base.v = rng.gaussian_vec(h * w);
        for (auto& v : mask.v) v = rng.next_unit();

        const MaeSplit s = mae_split(image, base, mask);
        if (!s.mae_a || !s.mae_na) continue;
        std::size_t n_a = 0;
        for (double v : mask.v) n_a += v >= 0.5 ? 1 : 0;
        const std::size_t n_na = h * w - n_a;
        const double recombined = (*s.mae_a * static_cast<double>(n_a) +
                                   *s.mae_na * static_cast<double>(n_na)) /
                                  static_cast<double>(h * w);
        CHECK(std::abs(recombined - s.mae) < 1e-12);
    }
}

TEST_CASE("maf and apr are invariant to batch permutation") {
    CounterRng rng = CounterRng::keyed("metrics-tests", 2);
    std::vector<ArtifactMask> batch;
    for (int i = 0; i < 7; ++i) {
        ArtifactMask m(2, 3);
        for (auto& v : m.v) v = rng.next_unit();
        batch.push_back(std::move(m));
    }
    const double maf = mean_artifact_freq(batch);
    const double apr = artifact_pixel_ratio_mean(batch);
    std::reverse(batch.begin(), batch.end());
    CHECK(mean_artifact_freq(batch) == maf);
    CHECK(artifact_pixel_ratio_mean(batch) == apr);
}

TEST_CASE("threshold inclusivity is consistent between maf and apr") {
    ArtifactMask boundary(1, 2);
    boundary.v = {0.5, 0.0};  // exactly at the threshold
    CHECK(artifact_pixel_ratio(boundary) == 50.0);
    CHECK(mean_artifact_freq({boundary}) == 100.0);

    ArtifactMask below(1, 2);
    below.v = {0.49999999, 0.0};
    CHECK(artifact_pixel_ratio(below) == 0.0);
    CHECK(mean_artifact_freq({below}) == 0.0);

    // APR == 0 exactly when the mask contributes nothing to MAF
    CounterRng rng = CounterRng::keyed("metrics-tests", 3);
    for (int rep = 0; rep < 50; ++rep) {
        ArtifactMask m(2, 2);
        for (auto& v : m.v) v = rng.next_unit();
        const bool apr_zero = artifact_pixel_ratio(m) == 0.0;
        const bool maf_zero = mean_artifact_freq({m}) == 0.0;
        CHECK(apr_zero == maf_zero);
    }
}
