#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nvf/geometry.hpp"
#include "nvf/grid.hpp"
#include "nvf/image.hpp"

namespace nvf {

struct SceneSpec {
    std::string generator = "two-room";  // two-room | blocks | hubble
    int resolution = 48;
    uint64_t seed = 7;
    double sigma_solid = 300.0;          // density of solid voxels
    Vec3 background = {0.5, 0.5, 0.5};
    int blocks_count = 5;                // blocks generator only
};

struct SurfaceElement {
    Vec3 position;  // face center
    Vec3 normal;    // outward (occupied -> free), unit
    double area;
};

using SurfaceElementSet = std::vector<SurfaceElement>;

// Dense ground-truth scene on [0, 1]^3. Immutable after construction; all
// queries are read-only and safe to call concurrently.
struct GroundTruthScene {
    int resolution = 0;
    double voxel_size = 0.0;
    Aabb bounds;
    Grid3 density;  // 1 channel, sigma >= 0
    Grid3 color;    // 3 channels in [0,1]
    Vec3 background = {0.5, 0.5, 0.5};

    // Layout hints consumed by the planner/tests; zero boxes when a
    // generator has no notion of rooms.
    bool interior = false;   // candidates should be sampled inside the bounds
    Aabb init_box;           // where initial training poses go
    Aabb room_a, room_b, doorway;

    // (sigma, rgb): trilinear inside bounds, (0, background) outside.
    void query(const Vec3& x, double& sigma, Vec3& rgb) const;
    double density_at(const Vec3& x) const;
};

GroundTruthScene build_scene(const SceneSpec& spec);

// Reference renderer: stratified sampling, alpha compositing (deterministic
// per seed), depth = weight-averaged sample depth, 0 where the ray escapes.
void gt_render(const GroundTruthScene& scene, const Pose& pose, const CameraIntrinsics& intr,
               int samples_per_ray, uint64_t seed, Image& rgb_out, ScalarImage& depth_out);

// Probability that x is seen unoccluded by at least one camera;
// v = 1 - prod_p (1 - T_p(x)), with T_p = 0 outside the frustum.
double gt_visibility(const GroundTruthScene& scene, const Vec3& x,
                     const std::vector<Pose>& poses, const CameraIntrinsics& intr);

// Faces between voxels above/below the density threshold (grid boundary
// counts as free space).
SurfaceElementSet extract_surface(const GroundTruthScene& scene, double density_threshold);

// Flat binary grid file: "NVFS", u32 resolution x3, f32 voxel size, then
// row-major f32 sigma and f32 RGB triplets, little-endian.
void save_scene(const GroundTruthScene& scene, const std::string& path);
GroundTruthScene load_scene(const std::string& path);

}  // namespace nvf
