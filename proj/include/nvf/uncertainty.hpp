#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nvf/geometry.hpp"
#include "nvf/image.hpp"
#include "nvf/render.hpp"

namespace nvf {

// Prior belief about invisible / escaped probability mass.
struct UncertaintyPriors {
    Vec3 mu0 = {0.5, 0.5, 0.5};                    // prior color mean
    Vec3 q0 = {1.0 / 12, 1.0 / 12, 1.0 / 12};      // prior color variance
    double sigma0 = 16.0;                          // prior density (occlusion fallback)
    double beta = 0.5;                             // occlusion-prediction accuracy

    void validate() const;
};

// alpha* and its telescoping weights; with v = 1 everywhere alpha* reduces
// to the plain rendering alpha exactly.
struct CompositeWeights {
    std::vector<double> alpha_star;
    std::vector<double> w_star;
    double w_bg = 1.0;
};

CompositeWeights composite_alpha_star(const RaySamples& samples, const UncertaintyPriors& priors);

// Per-ray Gaussian mixture over observed color: one component per sample
// (weight w*_i v_i) plus a single aggregated prior component carrying
// sum w*_i (1 - v_i) and the escaped mass.
struct RayMixture {
    struct Component {
        double weight;
        Vec3 mean;
        Vec3 var;  // diagonal
    };
    std::vector<Component> components;  // prior component last

    Vec3 mean() const;
    double total_weight() const;
};

RayMixture ray_mixture(const RaySamples& samples, const UncertaintyPriors& priors);

// Brute-force oracle: enumerates all 2^N x 2^N joint occlusion/visibility
// assignments of the factored network behind the closed-form mixture
// (occlusion per interval with the CPT-marginal probability alpha*_i,
// visibility independent per interval) and accumulates the emitted-color
// mass per assignment. Test-only cost 4^N; requires N <= 12.
RayMixture bn_enumerate(const RaySamples& samples, const UncertaintyPriors& priors);

enum class Method {
    nvf,
    nvf_loose,
    no_vis,
    no_var,
    wd,
    activermap,
    air,
    activenerf,
};

Method parse_method(const std::string& tag);
const char* method_name(Method m);
const std::vector<std::string>& method_tags();

struct EntropyEstimate {
    double value = 0.0;  // nats
    Method method = Method::nvf;
    double discrete_term = 0.0;
    double differential_term = 0.0;
};

// Componentwise upper bound: sum w_i (-log w_i + 1/2 log((2 pi e)^3 |Q_i|)).
// Exact for a single component; components below 1e-12 weight are skipped.
EntropyEstimate gmm_entropy_huber(const RayMixture& m);

// Moment-matched single-Gaussian bound (the loose variant); uses the full
// 3x3 covariance including the mean-spread term, eigenvalues floored at
// 1e-12 before the determinant.
EntropyEstimate gmm_entropy_moment(const RayMixture& m);

// Monte Carlo estimate (test oracle): -mean log p over n draws, with its
// standard error. Deterministic per seed.
void gmm_entropy_mc(const RayMixture& m, int64_t n_samples, uint64_t seed, double& estimate,
                    double& standard_error);

struct EntropyConfig {
    int samples_per_ray = 32;
    double novar_q = 1e-4;  // constant variance for the no-var ablation
};

// Correlation correction: xi = k * D * dphi, rho(x) = 1-(x/xi)^2 below xi.
struct CorrelationConfig {
    double k = 0.25;
    double scene_diameter = 1.7320508075688772;
    double dphi = 0.0;  // filled from the intrinsics when 0
    double xi() const { return k * scene_diameter * dphi; }
};

double rho(double distance, const CorrelationConfig& cfg);

// Per-ray entropy under any registry method; the ray is sampled at
// deterministic midpoints.
EntropyEstimate ray_entropy(const VoxelField& field, const Ray& ray, Method method,
                            const UncertaintyPriors& priors, const EntropyConfig& cfg);

struct PixelEntropy {
    double h = 0.0;      // nats (uncorrected)
    double depth = 0.0;  // composited expected depth
};

PixelEntropy pixel_entropy(const VoxelField& field, const Pose& pose, const CameraIntrinsics& intr,
                           int m, int n, Method method, const UncertaintyPriors& priors,
                           const EntropyConfig& cfg);

struct ImageEntropy {
    double total = 0.0;        // nats, corrected when `correlated`
    ScalarImage per_pixel;     // raw per-pixel entropies
    ScalarImage depth;         // composited depths
};

ImageEntropy image_entropy(const VoxelField& field, const Pose& pose, const CameraIntrinsics& intr,
                           Method method, const UncertaintyPriors& priors, const EntropyConfig& cfg,
                           const CorrelationConfig& corr, bool correlated);
ImageEntropy image_entropy_serial(const VoxelField& field, const Pose& pose,
                                  const CameraIntrinsics& intr, Method method,
                                  const UncertaintyPriors& priors, const EntropyConfig& cfg,
                                  const CorrelationConfig& corr, bool correlated);

// Entropy of a fixed pixel subset (used by pose refinement), with the same
// correction rule as image_entropy.
double subset_entropy(const VoxelField& field, const Pose& pose, const CameraIntrinsics& intr,
                      const std::vector<int>& pixel_indices, Method method,
                      const UncertaintyPriors& priors, const EntropyConfig& cfg,
                      const CorrelationConfig& corr, bool correlated);

// Eq.-9 visibility of x against the training cameras, ray-marched through
// the learned field's density. Produces head-training labels.
double visibility_exact(const VoxelField& field, const Vec3& x, const std::vector<Pose>& poses,
                        const CameraIntrinsics& intr);

}  // namespace nvf
