#pragma once

#include <cstdint>
#include <vector>

#include "nvf/field.hpp"
#include "nvf/geometry.hpp"
#include "nvf/image.hpp"
#include "nvf/rng.hpp"

namespace nvf {

struct TrainingSet {
    CameraIntrinsics intr;
    std::vector<Pose> poses;
    std::vector<Image> images;  // one per pose, values in [0,1]

    size_t size() const { return poses.size(); }
};

struct TrainConfig {
    int backbone_iters = 1500;
    double backbone_lr = 0.01;
    int backbone_batch = 4096;
    int head_iters = 500;
    // Adam moves a raw grid value by about lr per iteration, and the sigmoid
    // / softplus raws must travel several units to saturate, so the heads
    // use larger steps than an MLP would.
    double variance_lr = 0.05;
    double visibility_lr = 0.05;
    int head_batch = 4096;    // rays per variance batch
    int vis_batch = 65536;    // points per visibility batch
    int vis_pool = 65536;     // precomputed label pool
    int samples_per_ray = 48;
    bool stratified = true;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
};

// One supervised ray; noise_seed drives its stratified jitter.
struct RayTask {
    Ray ray;
    Vec3 target;
    uint64_t noise_seed = 0;
};

struct PointTask {
    Vec3 x;
    double label = 0.0;
};

// Mean-over-rays, mean-over-channels squared photometric error; gradients
// (when requested) are scattered into dense per-node buffers for the raw
// density and color grids. Used directly by the finite-difference checks.
double mse_loss_and_grad(const VoxelField& field, const std::vector<RayTask>& rays,
                         int samples_per_ray, bool stratified, std::vector<double>* grad_density,
                         std::vector<double>* grad_color);

// Negative log-likelihood of the per-ray Gaussian mixture (frozen backbone
// weights, trainable diagonal variances), log-sum-exp stabilized. Rays whose
// weights all vanish are skipped and counted in `skipped`.
double nll_loss_and_grad(const VoxelField& field, const std::vector<RayTask>& rays,
                         int samples_per_ray, bool stratified, std::vector<double>* grad_variance,
                         int* skipped);

// Binary cross-entropy of the visibility head against soft labels.
double bce_loss_and_grad(const VoxelField& field, const std::vector<PointTask>& points,
                         std::vector<double>* grad_visibility);

// Phase 1: photometric training of the density and color grids.
std::vector<double> train_backbone(VoxelField& field, const TrainingSet& data,
                                   const TrainConfig& cfg, Rng rng);

// Phase 2: variance grid only; density/color stay bit-identical.
std::vector<double> train_variance_head(VoxelField& field, const TrainingSet& data,
                                        const TrainConfig& cfg, Rng rng, int* skipped_rays = nullptr);

// Phase 3: visibility grid only, labels from Eq.-9 transmittance through the
// field's own density against the training cameras.
std::vector<double> train_visibility_head(VoxelField& field, const std::vector<Pose>& poses,
                                          const CameraIntrinsics& intr, const TrainConfig& cfg,
                                          Rng rng);

// Label pool generation, exposed for tests and the benchmark; parallel over
// points with a serial reference.
std::vector<PointTask> visibility_label_pool(const VoxelField& field, const std::vector<Pose>& poses,
                                             const CameraIntrinsics& intr, int count, Rng rng);
std::vector<PointTask> visibility_label_pool_serial(const VoxelField& field,
                                                    const std::vector<Pose>& poses,
                                                    const CameraIntrinsics& intr, int count, Rng rng);

}  // namespace nvf
