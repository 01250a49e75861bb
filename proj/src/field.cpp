#include "nvf/field.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "nvf/errors.hpp"

namespace nvf {

VoxelField::VoxelField(int resolution, const Aabb& bounds, double variance_floor,
                       const Vec3& background)
    : resolution_(resolution), bounds_(bounds), variance_floor_(variance_floor),
      background_(background),
      raw_density_(resolution, resolution, resolution, 1, 0.0f),
      raw_color_(resolution, resolution, resolution, 3, 0.0f),
      raw_variance_(resolution, resolution, resolution, 3, 0.0f),
      raw_visibility_(resolution, resolution, resolution, 1, 0.0f) {
    if (resolution < 2) throw ConfigError("field resolution must be >= 2");
}

void VoxelField::grid_coords(const Vec3& x, double& gx, double& gy, double& gz) const {
    Vec3 e = bounds_.extent();
    gx = (x.x - bounds_.min.x) / e.x * resolution_ - 0.5;
    gy = (x.y - bounds_.min.y) / e.y * resolution_ - 0.5;
    gz = (x.z - bounds_.min.z) / e.z * resolution_ - 0.5;
}

FieldSample VoxelField::query(const Vec3& x) const {
    FieldSample s;
    if (!bounds_.contains(x)) {
        s.sigma = 0.0;
        s.mu_c = background_;
        s.q_c = Vec3::all(variance_floor_);
        s.vis = 0.0;
        return s;
    }
    double gx, gy, gz;
    grid_coords(x, gx, gy, gz);
    s.sigma = softplus(raw_density_.sample(gx, gy, gz, 0));
    s.mu_c = {sigmoid(raw_color_.sample(gx, gy, gz, 0)),
              sigmoid(raw_color_.sample(gx, gy, gz, 1)),
              sigmoid(raw_color_.sample(gx, gy, gz, 2))};
    s.q_c = {softplus(raw_variance_.sample(gx, gy, gz, 0)) + variance_floor_,
             softplus(raw_variance_.sample(gx, gy, gz, 1)) + variance_floor_,
             softplus(raw_variance_.sample(gx, gy, gz, 2)) + variance_floor_};
    s.vis = sigmoid(raw_visibility_.sample(gx, gy, gz, 0));
    return s;
}

double VoxelField::density_at(const Vec3& x) const {
    if (!bounds_.contains(x)) return 0.0;
    double gx, gy, gz;
    grid_coords(x, gx, gy, gz);
    return softplus(raw_density_.sample(gx, gy, gz, 0));
}

double VoxelField::visibility_at(const Vec3& x) const {
    if (!bounds_.contains(x)) return 0.0;
    double gx, gy, gz;
    grid_coords(x, gx, gy, gz);
    return sigmoid(raw_visibility_.sample(gx, gy, gz, 0));
}

namespace {
constexpr char kFieldMagic[4] = {'N', 'V', 'F', 'F'};
constexpr uint32_t kFieldVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}
uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}
void write_f32(std::ostream& out, float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    write_u32(out, u);
}
float read_f32(std::istream& in) {
    uint32_t u = read_u32(in);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}
void write_f64(std::ostream& out, double v) {
    uint64_t u;
    std::memcpy(&u, &v, 8);
    write_u32(out, static_cast<uint32_t>(u));
    write_u32(out, static_cast<uint32_t>(u >> 32));
}
double read_f64(std::istream& in) {
    uint64_t lo = read_u32(in);
    uint64_t hi = read_u32(in);
    uint64_t u = lo | (hi << 32);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}
}  // namespace

void save_field(const VoxelField& field, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out.write(kFieldMagic, 4);
    write_u32(out, kFieldVersion);
    write_u32(out, static_cast<uint32_t>(field.resolution()));
    // metadata as f64 so load(save(f)) == f holds bit-exactly
    const Aabb& b = field.bounds();
    for (double v : {b.min.x, b.min.y, b.min.z, b.max.x, b.max.y, b.max.z}) write_f64(out, v);
    write_f64(out, field.variance_floor());
    const Vec3& bg = field.background();
    for (double v : {bg.x, bg.y, bg.z}) write_f64(out, v);
    for (const Grid3* g : {&field.raw_density(), &field.raw_color(), &field.raw_variance(),
                           &field.raw_visibility()})
        for (float x : g->data()) write_f32(out, x);
}

VoxelField load_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open field file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kFieldMagic, 4) != 0)
        throw FormatError("bad field magic in " + path);
    uint32_t version = read_u32(in);
    if (version != kFieldVersion)
        throw FormatError("unsupported field version " + std::to_string(version) + " in " + path);
    uint32_t res = read_u32(in);
    if (!in || res < 2 || res > 4096) throw FormatError("bad field resolution in " + path);
    double b[6];
    for (double& v : b) v = read_f64(in);
    Aabb bounds{{b[0], b[1], b[2]}, {b[3], b[4], b[5]}};
    double floor_v = read_f64(in);
    Vec3 bg{read_f64(in), read_f64(in), read_f64(in)};
    VoxelField field(static_cast<int>(res), bounds, floor_v, bg);
    for (Grid3* g : {&field.raw_density(), &field.raw_color(), &field.raw_variance(),
                     &field.raw_visibility()})
        for (float& x : g->data()) x = read_f32(in);
    if (!in) throw FormatError("truncated field file: " + path);
    return field;
}

VoxelField field_from_scene(const GroundTruthScene& scene, int resolution) {
    VoxelField field(resolution, scene.bounds, 1e-6, scene.background);
    auto inv_softplus = [](double y) {
        if (y <= 1e-9) return -20.0;
        return y > 30.0 ? y : std::log(std::expm1(y));
    };
    auto inv_sigmoid = [](double y) {
        double c = std::clamp(y, 1e-6, 1.0 - 1e-6);
        return std::log(c / (1.0 - c));
    };
    Vec3 e = scene.bounds.extent();
    for (int iz = 0; iz < resolution; ++iz)
        for (int iy = 0; iy < resolution; ++iy)
            for (int ix = 0; ix < resolution; ++ix) {
                Vec3 x = scene.bounds.min +
                         Vec3{(ix + 0.5) * e.x / resolution, (iy + 0.5) * e.y / resolution,
                              (iz + 0.5) * e.z / resolution};
                double sigma;
                Vec3 rgb;
                scene.query(x, sigma, rgb);
                field.raw_density().at(ix, iy, iz, 0) = static_cast<float>(inv_softplus(sigma));
                for (int c = 0; c < 3; ++c) {
                    field.raw_color().at(ix, iy, iz, c) = static_cast<float>(inv_sigmoid(rgb[c]));
                    field.raw_variance().at(ix, iy, iz, c) = -20.0f;  // Q ~ floor
                }
            }
    return field;
}

}  // namespace nvf
