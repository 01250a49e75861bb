#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nvf/errors.hpp"
#include "nvf/uncertainty.hpp"
#include "nvf/visibility.hpp"

using namespace nvf;

namespace {

constexpr double kLog2PiE = 2.8378770664093453;

RaySamples random_samples(Rng& rng, int n) {
    RaySamples s;
    double t = 0.1;
    for (int i = 0; i < n; ++i) {
        FieldSample fs;
        fs.sigma = rng.uniform(0.0, 30.0);
        fs.mu_c = {rng.uniform(), rng.uniform(), rng.uniform()};
        fs.q_c = {rng.uniform(1e-4, 0.5), rng.uniform(1e-4, 0.5), rng.uniform(1e-4, 0.5)};
        fs.vis = rng.uniform();
        double spacing = rng.uniform(0.01, 0.2);
        s.t.push_back(t);
        s.s.push_back(spacing);
        s.values.push_back(fs);
        t += spacing;
    }
    return s;
}

double max_mixture_deviation(const RayMixture& a, const RayMixture& b) {
    REQUIRE(a.components.size() == b.components.size());
    double dev = 0.0;
    for (size_t i = 0; i < a.components.size(); ++i) {
        dev = std::max(dev, std::abs(a.components[i].weight - b.components[i].weight));
        for (int c = 0; c < 3; ++c) {
            dev = std::max(dev, std::abs(a.components[i].mean[c] - b.components[i].mean[c]));
            dev = std::max(dev, std::abs(a.components[i].var[c] - b.components[i].var[c]));
        }
    }
    return dev;
}

RayMixture random_mixture(Rng& rng, int max_comps = 8, double var_lo = 1e-4, double var_hi = 1.0) {
    RayMixture m;
    int comps = 1 + static_cast<int>(rng.uniform_index(static_cast<uint64_t>(max_comps)));
    double wsum = 0.0;
    for (int i = 0; i < comps; ++i) {
        double w = rng.uniform(0.05, 1.0);
        wsum += w;
        m.components.push_back({w,
                                {rng.uniform(), rng.uniform(), rng.uniform()},
                                {rng.uniform(var_lo, var_hi), rng.uniform(var_lo, var_hi),
                                 rng.uniform(var_lo, var_hi)}});
    }
    for (auto& c : m.components) c.weight /= wsum;
    return m;
}

}  // namespace

TEST_CASE("composite_alpha_star: fully visible points reduce to the rendering alpha") {
    Rng rng(1);
    RaySamples s = random_samples(rng, 10);
    for (auto& fs : s.values) fs.vis = 1.0;
    UncertaintyPriors priors;
    priors.beta = 0.37;
    priors.sigma0 = 5.0;
    CompositeWeights cw = composite_alpha_star(s, priors);
    RayWeights rw = alpha_weights(s);
    for (size_t i = 0; i < s.size(); ++i) CHECK(cw.alpha_star[i] == rw.alpha[i]);
}

TEST_CASE("composite_alpha_star: invisible with beta=1 trusts the predicted density") {
    Rng rng(2);
    RaySamples s = random_samples(rng, 6);
    for (auto& fs : s.values) fs.vis = 0.0;
    UncertaintyPriors priors;
    priors.beta = 1.0;
    priors.sigma0 = 9.0;
    CompositeWeights cw = composite_alpha_star(s, priors);
    RayWeights rw = alpha_weights(s);
    for (size_t i = 0; i < s.size(); ++i)
        CHECK(cw.alpha_star[i] == doctest::Approx(rw.alpha[i]).epsilon(1e-15));
}

TEST_CASE("composite_alpha_star: invisible with beta=0 uses the prior density") {
    Rng rng(3);
    RaySamples s = random_samples(rng, 6);
    for (auto& fs : s.values) fs.vis = 0.0;
    UncertaintyPriors priors;
    priors.beta = 0.0;
    priors.sigma0 = 4.0;
    CompositeWeights cw = composite_alpha_star(s, priors);
    for (size_t i = 0; i < s.size(); ++i) {
        double expect = 1.0 - std::exp(-priors.sigma0 * s.s[i]);
        CHECK(cw.alpha_star[i] == doctest::Approx(expect).epsilon(1e-15));
    }
}

TEST_CASE("composite_alpha_star: weights plus residual telescope to one") {
    Rng rng(4);
    UncertaintyPriors priors;
    priors.beta = 0.4;
    priors.sigma0 = 11.0;
    for (int trial = 0; trial < 1000; ++trial) {
        RaySamples s = random_samples(rng, 1 + static_cast<int>(rng.uniform_index(20)));
        CompositeWeights cw = composite_alpha_star(s, priors);
        double sum = cw.w_bg;
        for (double w : cw.w_star) sum += w;
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("ray_mixture: fully visible tiny-variance mixture reproduces volume rendering") {
    Rng rng(5);
    RaySamples s = random_samples(rng, 3);
    for (auto& fs : s.values) {
        fs.vis = 1.0;
        fs.q_c = {1e-6, 1e-6, 1e-6};
    }
    UncertaintyPriors priors;  // mu0 = background = mid gray
    RayMixture m = ray_mixture(s, priors);
    RayWeights rw = alpha_weights(s);
    Vec3 manual{0, 0, 0};
    for (size_t i = 0; i < s.size(); ++i) manual += s.values[i].mu_c * rw.w[i];
    manual += priors.mu0 * rw.w_bg;
    CHECK(norm(m.mean() - manual) < 1e-12);
}

TEST_CASE("ray_mixture: invisible ray with beta=0 collapses onto the prior component") {
    Rng rng(6);
    RaySamples s = random_samples(rng, 7);
    for (auto& fs : s.values) fs.vis = 0.0;
    UncertaintyPriors priors;
    priors.beta = 0.0;
    priors.sigma0 = 8.0;
    RayMixture m = ray_mixture(s, priors);
    for (size_t i = 0; i + 1 < m.components.size(); ++i) CHECK(m.components[i].weight == 0.0);
    CHECK(m.components.back().weight == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.components.back().mean == priors.mu0);
}

TEST_CASE("ray_mixture: weights always sum to one") {
    Rng rng(7);
    UncertaintyPriors priors;
    priors.beta = 0.6;
    priors.sigma0 = 14.0;
    for (int trial = 0; trial < 500; ++trial) {
        RaySamples s = random_samples(rng, 1 + static_cast<int>(rng.uniform_index(16)));
        CHECK(std::abs(ray_mixture(s, priors).total_weight() - 1.0) < 1e-9);
    }
}

TEST_CASE("bn_enumerate: single fully visible sample splits alpha / 1-alpha") {
    RaySamples s;
    FieldSample fs;
    double spacing = 0.1;
    fs.sigma = -std::log(1.0 - 0.3) / spacing;
    fs.mu_c = {0.9, 0.1, 0.2};
    fs.q_c = {0.01, 0.01, 0.01};
    fs.vis = 1.0;
    s.t = {0.5};
    s.s = {spacing};
    s.values = {fs};
    UncertaintyPriors priors;
    RayMixture m = bn_enumerate(s, priors);
    REQUIRE(m.components.size() == 2);
    CHECK(m.components[0].weight == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(m.components[1].weight == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("bn_enumerate: two fully visible samples match the rendering weights") {
    Rng rng(8);
    RaySamples s = random_samples(rng, 2);
    for (auto& fs : s.values) fs.vis = 1.0;
    UncertaintyPriors priors;
    priors.beta = 0.123;
    priors.sigma0 = 3.0;
    RayMixture m = bn_enumerate(s, priors);
    RayWeights rw = alpha_weights(s);
    CHECK(m.components[0].weight == doctest::Approx(rw.w[0]).epsilon(1e-12));
    CHECK(m.components[1].weight == doctest::Approx(rw.w[1]).epsilon(1e-12));
    CHECK(m.components[2].weight == doctest::Approx(rw.w_bg).epsilon(1e-12));
}

TEST_CASE("bn_enumerate: closed-form mixture matches the enumeration oracle") {
    Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 3 + static_cast<int>(rng.uniform_index(6));  // 3..8
        RaySamples s = random_samples(rng, n);
        UncertaintyPriors priors;
        priors.beta = rng.uniform();
        priors.sigma0 = rng.uniform(0.0, 30.0);
        CHECK(max_mixture_deviation(ray_mixture(s, priors), bn_enumerate(s, priors)) <= 1e-9);
    }
}

TEST_CASE("bn_enumerate: refuses oversized rays") {
    Rng rng(10);
    RaySamples s = random_samples(rng, 13);
    CHECK_THROWS_AS(bn_enumerate(s, UncertaintyPriors{}), ResourceError);
}

TEST_CASE("gmm_entropy_huber: unit Gaussian entropy, no discrete term") {
    RayMixture m;
    m.components.push_back({1.0, {0, 0, 0}, {1, 1, 1}});
    EntropyEstimate est = gmm_entropy_huber(m);
    CHECK(est.value == doctest::Approx(1.5 * kLog2PiE).epsilon(1e-12));
    CHECK(est.value == doctest::Approx(4.2568).epsilon(1e-4));
    CHECK(est.discrete_term == 0.0);
}

TEST_CASE("gmm_entropy_huber: equal split adds exactly log 2 of discrete entropy") {
    RayMixture m;
    m.components.push_back({0.5, {0, 0, 0}, {1e-8, 1e-8, 1e-8}});
    m.components.push_back({0.5, {1, 1, 1}, {1e-8, 1e-8, 1e-8}});
    EntropyEstimate est = gmm_entropy_huber(m);
    CHECK(est.discrete_term == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    double gauss = 0.5 * (3.0 * kLog2PiE + 3.0 * std::log(1e-8));
    CHECK(est.differential_term == doctest::Approx(gauss).epsilon(1e-12));
}

TEST_CASE("gmm_entropy bounds: both sit above the Monte Carlo estimate") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        RayMixture m = random_mixture(rng);
        double mc, se;
        gmm_entropy_mc(m, 20000, rng.next_u64(), mc, se);
        CHECK(gmm_entropy_huber(m).value >= mc - 3.0 * se);
        CHECK(gmm_entropy_moment(m).value >= mc - 3.0 * se);
    }
}

TEST_CASE("gmm_entropy_moment: single component collapses to the Huber value") {
    RayMixture m;
    m.components.push_back({1.0, {0.3, 0.4, 0.5}, {0.02, 0.5, 0.07}});
    CHECK(gmm_entropy_moment(m).value ==
          doctest::Approx(gmm_entropy_huber(m).value).epsilon(1e-12));
}

TEST_CASE("gmm_entropy_moment: separated components make the moment bound looser") {
    RayMixture m;
    m.components.push_back({0.5, {0, 0, 0}, {1e-4, 1e-4, 1e-4}});
    m.components.push_back({0.5, {1, 1, 1}, {1e-4, 1e-4, 1e-4}});
    CHECK(gmm_entropy_moment(m).value > gmm_entropy_huber(m).value);
}

TEST_CASE("gmm_entropy_mc: recovers the closed form for a single Gaussian") {
    RayMixture m;
    m.components.push_back({1.0, {0.2, 0.5, 0.7}, {0.04, 0.01, 0.09}});
    double closed = 0.5 * (3.0 * kLog2PiE + std::log(0.04) + std::log(0.01) + std::log(0.09));
    double mc, se;
    gmm_entropy_mc(m, 100000, 42, mc, se);
    CHECK(std::abs(mc - closed) <= 3.0 * se);
}

TEST_CASE("gmm_entropy_mc: near-point mixture agrees with Huber closely") {
    RayMixture m;
    m.components.push_back({1.0, {0.5, 0.5, 0.5}, {1e-6, 1e-6, 1e-6}});
    double mc, se;
    gmm_entropy_mc(m, 100000, 7, mc, se);
    CHECK(std::abs(mc - gmm_entropy_huber(m).value) < 5e-2);
}

TEST_CASE("gmm_entropy_mc: standard error follows the 1/sqrt(n) law") {
    Rng rng(12);
    RayMixture m = random_mixture(rng, 4);
    double mc1, se1, mc4, se4;
    gmm_entropy_mc(m, 20000, 5, mc1, se1);
    gmm_entropy_mc(m, 80000, 5, mc4, se4);
    // quadrupling the samples should halve the standard error
    CHECK(std::abs(se4 - 0.5 * se1) / (0.5 * se1) < 0.2);
}

TEST_CASE("ray_entropy: wd on an empty field is exactly zero") {
    VoxelField f(8, {{0, 0, 0}, {1, 1, 1}});
    for (float& v : f.raw_density().data()) v = -45.0f;
    UncertaintyPriors priors;
    EntropyConfig cfg;
    Ray ray{{-0.5, 0.5, 0.5}, {1, 0, 0}, 0.0, 1e9};
    CHECK(ray_entropy(f, ray, Method::wd, priors, cfg).value == 0.0);
}

TEST_CASE("ray_entropy: opaque first sample zeroes the occlusion entropies") {
    RaySamples s;
    for (int i = 0; i < 4; ++i) {
        FieldSample fs;
        fs.sigma = i == 0 ? 1e9 : 0.0;
        fs.mu_c = {0.5, 0.5, 0.5};
        fs.q_c = {1e-4, 1e-4, 1e-4};
        fs.vis = 1.0;
        s.t.push_back(0.1 * (i + 1));
        s.s.push_back(0.1);
        s.values.push_back(fs);
    }
    RayWeights rw = alpha_weights(s);
    CHECK(rw.alpha[0] == 1.0);
    // binary entropies of alpha 1 and alpha 0 are both zero
    double h_rmap = 0.0, h_air = 0.0;
    for (size_t i = 0; i < rw.alpha.size(); ++i) {
        double a = rw.alpha[i];
        double hb = 0.0;
        if (a > 1e-12 && a < 1.0 - 1e-12) hb = -a * std::log(a) - (1 - a) * std::log(1 - a);
        h_rmap += hb;
        h_air += rw.w[i] * hb;
    }
    CHECK(h_rmap == 0.0);
    CHECK(h_air == 0.0);
}

TEST_CASE("ray_entropy: single opaque visible sample has no discrete term") {
    VoxelField f(8, {{0, 0, 0}, {1, 1, 1}}, 1e-6);
    for (float& v : f.raw_density().data()) v = 3000.0f;
    for (float& v : f.raw_visibility().data()) v = 100.0f;   // v = 1
    for (float& v : f.raw_variance().data()) v = -100.0f;    // q = floor
    UncertaintyPriors priors;
    EntropyConfig cfg;
    // origin inside the field: the first sample is opaque, so no prior mass
    Ray ray{{0.02, 0.5, 0.5}, {1, 0, 0}, 0.0, 1e9};
    EntropyEstimate est = ray_entropy(f, ray, Method::nvf, priors, cfg);
    double floor_entropy = 0.5 * (3.0 * kLog2PiE + 3.0 * std::log(1e-6));
    CHECK(est.discrete_term == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(est.value == doctest::Approx(floor_entropy).epsilon(1e-6));
}

TEST_CASE("ray_entropy: unknown method tags are rejected at parse time") {
    CHECK_THROWS_AS(parse_method("mystery"), ConfigError);
    CHECK(parse_method("activenerf") == Method::activenerf);
    CHECK(parse_method("nvf-loose") == Method::nvf_loose);
}

TEST_CASE("wd equals the discrete part of the nvf bound for uniform variances, v=1") {
    Rng rng(13);
    RaySamples s = random_samples(rng, 9);
    for (auto& fs : s.values) {
        fs.vis = 1.0;
        fs.q_c = {0.02, 0.02, 0.02};
    }
    UncertaintyPriors priors;
    RayMixture m = ray_mixture(s, priors);
    EntropyEstimate huber = gmm_entropy_huber(m);

    RayWeights rw = alpha_weights(s);
    double wd = 0.0;
    for (double w : rw.w)
        if (w > 1e-12) wd -= w * std::log(w);
    if (rw.w_bg > 1e-12) wd -= rw.w_bg * std::log(rw.w_bg);
    CHECK(std::abs(huber.discrete_term - wd) < 1e-12);
}

TEST_CASE("activenerf variance is componentwise below the moment-matched diagonal") {
    Rng rng(14);
    for (int trial = 0; trial < 200; ++trial) {
        RayMixture m = random_mixture(rng, 10);
        Vec3 mu_bar{0, 0, 0};
        for (const auto& c : m.components) mu_bar += c.mean * c.weight;
        Vec3 avg_var{0, 0, 0}, moment_diag{0, 0, 0};
        for (const auto& c : m.components) {
            avg_var += c.var * c.weight;
            Vec3 d = c.mean - mu_bar;
            moment_diag += (c.var + d.cwise(d)) * c.weight;
        }
        for (int ch = 0; ch < 3; ++ch) CHECK(avg_var[ch] <= moment_diag[ch] + 1e-12);
    }
}

TEST_CASE("rho: truncated quadratic correlation") {
    CorrelationConfig cfg;
    cfg.k = 0.25;
    cfg.scene_diameter = 2.0;
    cfg.dphi = 0.02;  // xi = 0.01
    double xi = cfg.xi();
    CHECK(rho(0.0, cfg) == 1.0);
    CHECK(rho(xi, cfg) == 0.0);
    CHECK(rho(2.0 * xi, cfg) == 0.0);
    CHECK(rho(0.5 * xi, cfg) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("image_entropy: correction never increases nonnegative totals") {
    VoxelField f(12, {{0, 0, 0}, {1, 1, 1}});
    Rng rng(15);
    for (float& v : f.raw_density().data()) v = static_cast<float>(rng.uniform(-1.0, 2.0));
    UncertaintyPriors priors;
    priors.sigma0 = 10.0;
    EntropyConfig ecfg;
    ecfg.samples_per_ray = 16;
    CorrelationConfig corr;
    corr.scene_diameter = f.bounds().diagonal();
    Pose pose = sample_pose_shell(f.bounds(), rng, 0.1);
    CameraIntrinsics intr{16, 16, 0.9};
    ImageEntropy plain = image_entropy(f, pose, intr, Method::nvf, priors, ecfg, corr, false);
    ImageEntropy corrected = image_entropy(f, pose, intr, Method::nvf, priors, ecfg, corr, true);
    bool all_nonneg = true;
    for (double h : plain.per_pixel.data()) all_nonneg = all_nonneg && h >= 0.0;
    REQUIRE(all_nonneg);  // untrained fog field: prior-dominated, positive
    CHECK(corrected.total <= plain.total + 1e-12);
}

TEST_CASE("image_entropy: no correction beyond the correlation length") {
    VoxelField f(12, {{0, 0, 0}, {1, 1, 1}});
    for (float& v : f.raw_density().data()) v = 2.0f;
    UncertaintyPriors priors;
    priors.sigma0 = 10.0;
    EntropyConfig ecfg;
    ecfg.samples_per_ray = 16;
    CorrelationConfig corr;
    corr.scene_diameter = f.bounds().diagonal();
    corr.k = 1e-5;  // xi so small every depth is beyond it
    Vec3 eye{0.5, 0.5, 8.0};
    Pose pose{look_at(eye, {0.5, 0.5, 0.5}), eye};
    // narrow enough that every ray (corners included) hits the box and
    // carries a positive depth
    CameraIntrinsics intr{12, 12, 0.08};
    ImageEntropy plain = image_entropy(f, pose, intr, Method::nvf, priors, ecfg, corr, false);
    ImageEntropy corrected = image_entropy(f, pose, intr, Method::nvf, priors, ecfg, corr, true);
    CHECK(corrected.total == plain.total);
}

TEST_CASE("image_entropy: parallel kernel matches the serial reference bit-exactly") {
    VoxelField f(10, {{0, 0, 0}, {1, 1, 1}});
    Rng rng(16);
    for (float& v : f.raw_density().data()) v = static_cast<float>(rng.uniform(-1.0, 2.0));
    for (float& v : f.raw_visibility().data()) v = static_cast<float>(rng.uniform(-2.0, 2.0));
    UncertaintyPriors priors;
    priors.sigma0 = 10.0;
    EntropyConfig ecfg;
    ecfg.samples_per_ray = 12;
    CorrelationConfig corr;
    corr.scene_diameter = f.bounds().diagonal();
    Pose pose = sample_pose_shell(f.bounds(), rng, 0.2);
    CameraIntrinsics intr{20, 20, 1.0};
    ImageEntropy a = image_entropy(f, pose, intr, Method::nvf, priors, ecfg, corr, true);
    ImageEntropy b = image_entropy_serial(f, pose, intr, Method::nvf, priors, ecfg, corr, true);
    CHECK(a.total == b.total);
    CHECK(a.per_pixel.data() == b.per_pixel.data());
}

TEST_CASE("image_entropy: invariant under a 90-degree roll of a square camera") {
    VoxelField f(12, {{0, 0, 0}, {1, 1, 1}});
    Rng rng(17);
    for (float& v : f.raw_density().data()) v = static_cast<float>(rng.uniform(-1.0, 2.5));
    for (float& v : f.raw_color().data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    for (float& v : f.raw_visibility().data()) v = static_cast<float>(rng.uniform(-2.0, 2.0));
    UncertaintyPriors priors;
    priors.sigma0 = 9.0;
    EntropyConfig ecfg;
    ecfg.samples_per_ray = 16;
    CorrelationConfig corr;
    corr.scene_diameter = f.bounds().diagonal();
    Vec3 eye{0.5, -1.0, 0.5};
    Pose pose{look_at(eye, {0.5, 0.5, 0.5}), eye};
    // roll 90 degrees about the optical axis
    Pose rolled = pose;
    rolled.rotation = pose.rotation * rotation_exp({0, 0, 3.141592653589793 / 2.0});
    CameraIntrinsics intr{14, 14, 0.8};
    ImageEntropy a = image_entropy(f, pose, intr, Method::nvf, priors, ecfg, corr, true);
    ImageEntropy b = image_entropy(f, rolled, intr, Method::nvf, priors, ecfg, corr, true);
    CHECK(std::abs(a.total - b.total) < 1e-6);
}

TEST_CASE("visibility_exact: mirrors the ground-truth visibility semantics") {
    VoxelField f(16, {{0, 0, 0}, {1, 1, 1}});
    for (float& v : f.raw_density().data()) v = -45.0f;  // empty
    CameraIntrinsics intr{32, 32, 1.0};
    Vec3 eye{0.5, -1.0, 0.5};
    Pose cam{look_at(eye, {0.5, 0.5, 0.5}), eye};

    CHECK(visibility_exact(f, {0.5, 0.5, 0.5}, {cam}, intr) >= 0.999);
    CHECK(visibility_exact(f, {0.5, 0.5, 0.5}, {}, intr) == 0.0);

    // wall of density between the camera and the point
    for (int z = 0; z < 16; ++z)
        for (int y = 4; y < 6; ++y)
            for (int x = 0; x < 16; ++x) f.raw_density().at(x, y, z, 0) = 3000.0f;
    CHECK(visibility_exact(f, {0.5, 0.8, 0.5}, {cam}, intr) <= 1e-3);
}
