#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nvf/field.hpp"
#include "nvf/image.hpp"
#include "nvf/scene.hpp"

namespace nvf {

// 10 log10(1 / MSE) for [0,1] images, capped at 99 dB for near-identical
// inputs.
double psnr(const Image& a, const Image& b);

// Gaussian-window SSIM (11x11, sigma 1.5, C1=0.01^2, C2=0.03^2), averaged
// over channels; the window shrinks for tiny images.
double ssim(const Image& a, const Image& b);

struct GeometryMetrics {
    double accuracy = 0.0;          // mean NN distance recon -> gt
    double completion = 0.0;        // mean NN distance gt -> recon
    double completion_ratio = 0.0;  // fraction of gt points within threshold
};

GeometryMetrics geometry_metrics(const std::vector<Vec3>& recon_points,
                                 const std::vector<Vec3>& gt_points, double threshold);

// Back-projected depth samples along the observation rays; pixels with
// weight sum below 0.5 are dropped.
std::vector<Vec3> reconstruct_points(const VoxelField& field, const std::vector<Pose>& poses,
                                     const CameraIntrinsics& intr, int samples_per_ray);

// Fraction of ground-truth surface elements seen unoccluded (transmittance
// above `tau`, front-facing, inside the frustum) by at least one pose.
double visual_coverage(const GroundTruthScene& scene, const std::vector<Pose>& poses,
                       const CameraIntrinsics& intr, double surface_threshold = 10.0,
                       double tau = 0.5);
double visual_coverage_serial(const GroundTruthScene& scene, const std::vector<Pose>& poses,
                              const CameraIntrinsics& intr, double surface_threshold = 10.0,
                              double tau = 0.5);

struct MetricsRecord {
    double psnr_db = 0.0;
    double ssim_value = 0.0;
    double rgb_mse = 0.0;
    double accuracy = 0.0;
    double completion = 0.0;
    double completion_ratio = 0.0;
    double cr_threshold = 0.0;
    double visual_coverage = 0.0;
};

struct EvalConfig {
    int test_views = 8;
    int eval_resolution = 64;
    int eval_samples = 96;
    double cr_threshold_frac = 0.02;  // of the scene diameter
    double coverage_tau = 0.5;
    double surface_threshold = 10.0;
    int max_gt_points = 40000;
    double fov = 1.0;
    int eval_every = 0;  // also evaluate every k-th mapping step (0 = final only)
};

// Deterministic test-pose set; interior scenes sample collision-free poses
// inside the bounds, object scenes sample the shell.
std::vector<Pose> make_test_poses(const GroundTruthScene& scene, int count, uint64_t seed);

// Renders the seeded test views against ground truth and assembles the full
// record (image metrics, point metrics, coverage of the trajectory).
MetricsRecord evaluate_field(const VoxelField& field, const GroundTruthScene& scene,
                             const std::vector<Pose>& trajectory, const EvalConfig& cfg,
                             uint64_t seed);

std::string metrics_csv_header();
std::string metrics_csv_row(int step, const MetricsRecord& rec);

}  // namespace nvf
