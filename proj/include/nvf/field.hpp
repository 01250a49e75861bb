#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nvf/geometry.hpp"
#include "nvf/grid.hpp"
#include "nvf/image.hpp"
#include "nvf/scene.hpp"

namespace nvf {

struct FieldSample {
    double sigma = 0.0;        // density, >= 0
    Vec3 mu_c = {0, 0, 0};     // color mean in [0,1]^3
    Vec3 q_c = {0, 0, 0};      // diagonal color variance, >= floor
    double vis = 0.0;          // visibility probability in [0,1]
};

// Explicit radiance field: four raw parameter grids queried by trilinear
// interpolation followed by the per-head activation. Queries are read-only
// and safe to run concurrently; training owns the single writer.
class VoxelField {
public:
    VoxelField() = default;
    VoxelField(int resolution, const Aabb& bounds, double variance_floor = 1e-6,
               const Vec3& background = {0.5, 0.5, 0.5});

    FieldSample query(const Vec3& x) const;
    double density_at(const Vec3& x) const;      // sigma only (cheap path)
    double visibility_at(const Vec3& x) const;   // v only

    int resolution() const { return resolution_; }
    const Aabb& bounds() const { return bounds_; }
    double variance_floor() const { return variance_floor_; }
    const Vec3& background() const { return background_; }
    double voxel_size() const { return (bounds_.max.x - bounds_.min.x) / resolution_; }

    Grid3& raw_density() { return raw_density_; }
    Grid3& raw_color() { return raw_color_; }
    Grid3& raw_variance() { return raw_variance_; }
    Grid3& raw_visibility() { return raw_visibility_; }
    const Grid3& raw_density() const { return raw_density_; }
    const Grid3& raw_color() const { return raw_color_; }
    const Grid3& raw_variance() const { return raw_variance_; }
    const Grid3& raw_visibility() const { return raw_visibility_; }

    // continuous grid coordinates of a world point (may be out of range)
    void grid_coords(const Vec3& x, double& gx, double& gy, double& gz) const;
    bool operator==(const VoxelField& o) const = default;

    // activations
    static double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
    static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

private:
    int resolution_ = 0;
    Aabb bounds_;
    double variance_floor_ = 1e-6;
    Vec3 background_ = {0.5, 0.5, 0.5};
    Grid3 raw_density_;     // 1 ch, softplus -> sigma
    Grid3 raw_color_;       // 3 ch, sigmoid -> mu_c
    Grid3 raw_variance_;    // 3 ch, softplus + floor -> Q_c
    Grid3 raw_visibility_;  // 1 ch, sigmoid -> v
};

// "NVFF" field file: version, resolution, bounds, variance floor,
// background, then the four f32 grids, little-endian. Round trips bit-exact.
void save_field(const VoxelField& field, const std::string& path);
VoxelField load_field(const std::string& path);

// Test helper: field whose density/color heads reproduce the ground truth
// scene (raw values via inverse activations); variance at the floor,
// visibility raw zero.
VoxelField field_from_scene(const GroundTruthScene& scene, int resolution);

}  // namespace nvf
