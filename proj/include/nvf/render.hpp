#pragma once

#include <cstdint>
#include <vector>

#include "nvf/field.hpp"
#include "nvf/geometry.hpp"
#include "nvf/image.hpp"
#include "nvf/rng.hpp"

namespace nvf {

// Samples along one ray: strictly increasing depths, positive spacings (the
// last spacing is capped at the bin width), and the queried field values.
struct RaySamples {
    std::vector<double> t;
    std::vector<double> s;
    std::vector<FieldSample> values;

    size_t size() const { return t.size(); }
};

struct RayWeights {
    std::vector<double> alpha;  // occlusion probability per sample
    std::vector<double> w;      // termination probability per sample
    double w_bg = 1.0;          // escape probability, prod(1 - alpha)
};

// N sample depths in [t_near, t_far]: bin midpoints, or one uniform draw per
// bin when `stratified` (rng must be non-null then).
std::vector<double> sample_ray(const Ray& ray, int n, Rng* rng, bool stratified);

// Query the field at the given depths and fill spacings.
RaySamples gather_samples(const VoxelField& field, const Ray& ray,
                          const std::vector<double>& depths);

// T_i = exp(-sum_{j<i} sigma_j s_j); T_0 = 1.
std::vector<double> transmittance(const RaySamples& samples);

// alpha_i = 1 - exp(-sigma_i s_i), w_i = alpha_i prod_{j<i}(1 - alpha_j).
RayWeights alpha_weights(const RaySamples& samples);

// Telescoping weights for an arbitrary alpha vector; sum(w) + w_bg = 1.
void weights_from_alphas(const std::vector<double>& alphas, std::vector<double>& w, double& w_bg);

// Visibility-blended occlusion probability:
// alpha*_i = (v + (1-v) beta)(1 - exp(-sigma_i s_i)) + (1-beta)(1-v)(1 - exp(-sigma0 s_i)).
std::vector<double> composite_alphas(const RaySamples& samples, double beta, double sigma0);

enum class DepthWeightMode { standard, composited };

// Expected color sum(w_i mu_i) + w_bg * background. The ray must carry its
// [t_near, t_far] (clip to the field bounds first).
Vec3 render_color(const VoxelField& field, const Ray& ray, int n, Rng* rng, bool stratified = false);

// Expected depth sum(w t)/sum(w); 0 when nearly all mass escapes. Composited
// mode weighs with alpha* (needs beta / sigma0).
double render_depth(const VoxelField& field, const Ray& ray, int n, Rng* rng,
                    DepthWeightMode mode, double beta = 1.0, double sigma0 = 0.0,
                    bool stratified = false);

// Full-frame render, parallel over pixels; `render_image_serial` is the
// plain-loop reference used by the tests and the benchmark.
Image render_image(const VoxelField& field, const Pose& pose, const CameraIntrinsics& intr,
                   int samples_per_ray, uint64_t seed, bool stratified = false);
Image render_image_serial(const VoxelField& field, const Pose& pose, const CameraIntrinsics& intr,
                          int samples_per_ray, uint64_t seed, bool stratified = false);

// Depth frame (standard weights) plus the per-pixel weight sum, used by
// point-cloud reconstruction.
void render_depth_image(const VoxelField& field, const Pose& pose, const CameraIntrinsics& intr,
                        int samples_per_ray, ScalarImage& depth_out, ScalarImage& wsum_out);

}  // namespace nvf
