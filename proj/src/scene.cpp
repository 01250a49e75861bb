#include "nvf/scene.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "nvf/errors.hpp"
#include "nvf/parallel.hpp"
#include "nvf/visibility.hpp"

namespace nvf {

void GroundTruthScene::query(const Vec3& x, double& sigma, Vec3& rgb) const {
    if (!bounds.contains(x)) {
        sigma = 0.0;
        rgb = background;
        return;
    }
    double gx = (x.x - bounds.min.x) / voxel_size - 0.5;
    double gy = (x.y - bounds.min.y) / voxel_size - 0.5;
    double gz = (x.z - bounds.min.z) / voxel_size - 0.5;
    Grid3::Stencil st = density.stencil(gx, gy, gz);
    sigma = 0.0;
    double weighted = 0.0;
    Vec3 premult{0, 0, 0}, plain{0, 0, 0};
    for (int k = 0; k < 8; ++k) {
        double w = st.weight[k];
        double d = density.data()[st.node[k]];
        size_t cbase = st.node[k] * 3;
        Vec3 c{color.data()[cbase], color.data()[cbase + 1], color.data()[cbase + 2]};
        sigma += w * d;
        weighted += w * d;
        premult += c * (w * d);
        plain += c * w;
    }
    // density-weighted color keeps empty (black) voxels from bleeding into
    // surface boundaries; plain mean where there is no density to weight by
    rgb = weighted > 1e-12 ? premult / weighted : plain;
}

double GroundTruthScene::density_at(const Vec3& x) const {
    if (!bounds.contains(x)) return 0.0;
    double gx = (x.x - bounds.min.x) / voxel_size - 0.5;
    double gy = (x.y - bounds.min.y) / voxel_size - 0.5;
    double gz = (x.z - bounds.min.z) / voxel_size - 0.5;
    return density.sample(gx, gy, gz, 0);
}

namespace {

struct Builder {
    GroundTruthScene scene;

    explicit Builder(const SceneSpec& spec) {
        int r = spec.resolution;
        if (r < 4) throw ConfigError("scene resolution must be >= 4");
        scene.resolution = r;
        scene.voxel_size = 1.0 / r;
        scene.bounds = {{0, 0, 0}, {1, 1, 1}};
        scene.density = Grid3(r, r, r, 1, 0.0f);
        scene.color = Grid3(r, r, r, 3, 0.0f);
        scene.background = spec.background;
        scene.init_box = scene.bounds;
    }

    Vec3 voxel_center(int ix, int iy, int iz) const {
        double h = scene.voxel_size;
        return {(ix + 0.5) * h, (iy + 0.5) * h, (iz + 0.5) * h};
    }

    void fill_box(const Aabb& box, double sigma, const Vec3& rgb) {
        int r = scene.resolution;
        for (int iz = 0; iz < r; ++iz)
            for (int iy = 0; iy < r; ++iy)
                for (int ix = 0; ix < r; ++ix) {
                    if (!box.contains(voxel_center(ix, iy, iz))) continue;
                    scene.density.at(ix, iy, iz, 0) = static_cast<float>(sigma);
                    scene.color.at(ix, iy, iz, 0) = static_cast<float>(rgb.x);
                    scene.color.at(ix, iy, iz, 1) = static_cast<float>(rgb.y);
                    scene.color.at(ix, iy, iz, 2) = static_cast<float>(rgb.z);
                }
    }

    void clear_box(const Aabb& box) { fill_box(box, 0.0, {0, 0, 0}); }
};

Vec3 random_color(Rng& rng) {
    return {0.15 + 0.7 * rng.uniform(), 0.15 + 0.7 * rng.uniform(), 0.15 + 0.7 * rng.uniform()};
}

GroundTruthScene build_blocks(const SceneSpec& spec) {
    Builder b(spec);
    Rng rng(spec.seed);
    for (int i = 0; i < spec.blocks_count; ++i) {
        Vec3 size{rng.uniform(0.08, 0.22), rng.uniform(0.08, 0.22), rng.uniform(0.08, 0.22)};
        Vec3 lo{rng.uniform(0.15, 0.85 - size.x), rng.uniform(0.15, 0.85 - size.y),
                rng.uniform(0.15, 0.85 - size.z)};
        b.fill_box({lo, lo + size}, spec.sigma_solid, random_color(rng));
    }
    return std::move(b.scene);
}

GroundTruthScene build_hubble(const SceneSpec& spec) {
    Builder b(spec);
    Rng rng(spec.seed);
    Vec3 c{0.5, 0.5, 0.5};
    double radius = 0.28;
    double thick = std::max(2.5 * b.scene.voxel_size, 0.04);
    // aperture direction (the open end of the tube)
    double az = rng.uniform(0.0, 6.283185307179586);
    Vec3 open_dir{std::cos(az), std::sin(az), rng.uniform(-0.3, 0.3)};
    open_dir = normalized(open_dir);
    Vec3 shell_col = random_color(rng);

    int r = spec.resolution;
    for (int iz = 0; iz < r; ++iz)
        for (int iy = 0; iy < r; ++iy)
            for (int ix = 0; ix < r; ++ix) {
                Vec3 p = b.voxel_center(ix, iy, iz) - c;
                double d = norm(p);
                bool on_shell = d > radius - thick && d < radius;
                bool in_aperture = d > 1e-9 && dot(p / d, open_dir) > 0.75;
                if (on_shell && !in_aperture) {
                    b.scene.density.at(ix, iy, iz, 0) = static_cast<float>(spec.sigma_solid);
                    b.scene.color.at(ix, iy, iz, 0) = static_cast<float>(shell_col.x);
                    b.scene.color.at(ix, iy, iz, 1) = static_cast<float>(shell_col.y);
                    b.scene.color.at(ix, iy, iz, 2) = static_cast<float>(shell_col.z);
                }
            }
    // two solar-panel slabs
    Vec3 side = normalized(cross(open_dir, Vec3{0, 0, 1}));
    Vec3 panel_col = random_color(rng);
    for (double s : {-1.0, 1.0}) {
        Vec3 pc = c + side * (s * (radius + 0.12));
        Aabb panel{pc - Vec3{0.10, 0.10, 0.015}, pc + Vec3{0.10, 0.10, 0.015}};
        b.fill_box(panel, spec.sigma_solid, panel_col);
    }
    return std::move(b.scene);
}

GroundTruthScene build_two_room(const SceneSpec& spec) {
    Builder b(spec);
    Rng rng(spec.seed);
    double w = std::max(3.0 * b.scene.voxel_size, 0.06);

    Vec3 floor_col = Vec3{0.45, 0.42, 0.38} + random_color(rng) * 0.15;
    Vec3 wall_a = Vec3{0.65, 0.45, 0.30} + random_color(rng) * 0.1;   // warm room A
    Vec3 wall_b = Vec3{0.25, 0.45, 0.65} + random_color(rng) * 0.1;   // cool room B
    Vec3 divider_col = Vec3{0.5, 0.55, 0.5} + random_color(rng) * 0.1;
    double sig = spec.sigma_solid;

    // shell: floor, ceiling, four outer walls
    b.fill_box({{0, 0, 0}, {1, 1, w}}, sig, clamp01(floor_col));
    b.fill_box({{0, 0, 1 - w}, {1, 1, 1}}, sig, clamp01(floor_col * 0.8));
    b.fill_box({{0, 0, 0}, {w, 1, 1}}, sig, clamp01(wall_a));
    b.fill_box({{1 - w, 0, 0}, {1, 1, 1}}, sig, clamp01(wall_b));
    b.fill_box({{0, 0, 0}, {1, w, 1}}, sig, clamp01(wall_a * 0.85 + wall_b * 0.15));
    b.fill_box({{0, 1 - w, 0}, {1, 1, 1}}, sig, clamp01(wall_a * 0.15 + wall_b * 0.85));

    // dividing wall with an off-center doorway (so the room-center segment
    // stays blocked)
    Aabb divider{{0.5 - w / 2, 0, 0}, {0.5 + w / 2, 1, 1}};
    b.fill_box(divider, sig, clamp01(divider_col));
    Aabb doorway{{0.5 - w / 2 - 1e-6, 0.64, w}, {0.5 + w / 2 + 1e-6, 0.82, 0.55}};
    b.clear_box(doorway);

    // furniture and a partition wall in room B: occlusion pockets keep
    // coverage from saturating by accident
    Vec3 box_col = random_color(rng);
    b.fill_box({{0.62, 0.18, w}, {0.78, 0.34, w + 0.16}}, sig, box_col);
    Vec3 box_col2 = random_color(rng);
    b.fill_box({{0.18, 0.62, w}, {0.30, 0.80, w + 0.22}}, sig, box_col2);
    Vec3 box_col3 = random_color(rng);
    b.fill_box({{0.33, 0.15, w}, {0.42, 0.24, w + 0.30}}, sig, box_col3);
    Vec3 partition_col = random_color(rng);
    b.fill_box({{0.64, 0.42, w}, {0.95, 0.48, 0.55}}, sig, partition_col);

    b.scene.interior = true;
    b.scene.room_a = {{w, w, w}, {0.5 - w / 2, 1 - w, 1 - w}};
    b.scene.room_b = {{0.5 + w / 2, w, w}, {1 - w, 1 - w, 1 - w}};
    b.scene.doorway = doorway;
    // initial observations live well inside room A
    b.scene.init_box = b.scene.room_a.scaled_about_center(0.55);
    return std::move(b.scene);
}

}  // namespace

GroundTruthScene build_scene(const SceneSpec& spec) {
    if (spec.generator == "blocks") return build_blocks(spec);
    if (spec.generator == "hubble") return build_hubble(spec);
    if (spec.generator == "two-room") return build_two_room(spec);
    throw ConfigError("unknown scene generator '" + spec.generator +
                      "' (expected two-room | blocks | hubble)");
}

void gt_render(const GroundTruthScene& scene, const Pose& pose, const CameraIntrinsics& intr,
               int samples_per_ray, uint64_t seed, Image& rgb_out, ScalarImage& depth_out) {
    if (samples_per_ray < 2) throw ConfigError("gt_render: samples_per_ray must be >= 2");
    rgb_out = Image(intr.width, intr.height, scene.background);
    depth_out = ScalarImage(intr.width, intr.height, 0.0);
    const int n = samples_per_ray;
    Rng base(seed);

    parallel_for(static_cast<int64_t>(intr.width) * intr.height, [&](int64_t idx) {
        int m = static_cast<int>(idx) / intr.width;
        int nn = static_cast<int>(idx) % intr.width;
        Ray ray = pixel_ray(pose, intr, m, nn);
        if (!clip_ray_to_box(ray, scene.bounds, scene.voxel_size)) return;
        Rng rng = base.substream(static_cast<uint64_t>(idx));

        double bin = (ray.t_far - ray.t_near) / n;
        double trans = 1.0;
        Vec3 c_acc{0, 0, 0};
        double depth_acc = 0.0, w_acc = 0.0;
        double t_prev = ray.t_near + rng.uniform() * bin;
        double sigma;
        Vec3 rgb;
        for (int i = 0; i < n; ++i) {
            double t_i = t_prev;
            double t_next = (i + 1 < n) ? ray.t_near + (i + 1 + rng.uniform()) * bin : 0.0;
            double s_i = (i + 1 < n) ? t_next - t_i : bin;
            scene.query(ray.at(t_i), sigma, rgb);
            double alpha = 1.0 - std::exp(-sigma * s_i);
            double wi = trans * alpha;
            c_acc += rgb * wi;
            depth_acc += wi * t_i;
            w_acc += wi;
            trans *= (1.0 - alpha);
            t_prev = t_next;
            if (trans < 1e-9) break;
        }
        c_acc += scene.background * trans;
        rgb_out.set(nn, m, c_acc);
        depth_out.set(nn, m, w_acc < 1e-6 ? 0.0 : depth_acc / w_acc);
    });
}

double gt_visibility(const GroundTruthScene& scene, const Vec3& x,
                     const std::vector<Pose>& poses, const CameraIntrinsics& intr) {
    double step = 0.5 * scene.voxel_size;
    auto sigma_at = [&](const Vec3& p) { return scene.density_at(p); };
    return visibility_to_cameras(sigma_at, x, poses, intr, step);
}

SurfaceElementSet extract_surface(const GroundTruthScene& scene, double density_threshold) {
    if (density_threshold <= 0.0) throw ConfigError("extract_surface: threshold must be > 0");
    SurfaceElementSet out;
    int r = scene.resolution;
    double h = scene.voxel_size;
    double area = h * h;
    auto occupied = [&](int ix, int iy, int iz) {
        if (ix < 0 || iy < 0 || iz < 0 || ix >= r || iy >= r || iz >= r) return false;
        return scene.density.at(ix, iy, iz, 0) > density_threshold;
    };
    const int dirs[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (int iz = 0; iz < r; ++iz)
        for (int iy = 0; iy < r; ++iy)
            for (int ix = 0; ix < r; ++ix) {
                if (!occupied(ix, iy, iz)) continue;
                Vec3 c{(ix + 0.5) * h, (iy + 0.5) * h, (iz + 0.5) * h};
                for (const auto& d : dirs) {
                    if (occupied(ix + d[0], iy + d[1], iz + d[2])) continue;
                    Vec3 nrm{static_cast<double>(d[0]), static_cast<double>(d[1]),
                             static_cast<double>(d[2])};
                    out.push_back({c + nrm * (0.5 * h), nrm, area});
                }
            }
    return out;
}

namespace {
constexpr char kSceneMagic[4] = {'N', 'V', 'F', 'S'};

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
void write_f32_block(std::ostream& out, const std::vector<float>& v) {
    for (float x : v) write_f32(out, x);
}
void read_f32_block(std::istream& in, std::vector<float>& v) {
    for (float& x : v) x = read_f32(in);
}
}  // namespace

void save_scene(const GroundTruthScene& scene, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out.write(kSceneMagic, 4);
    write_u32(out, static_cast<uint32_t>(scene.resolution));
    write_u32(out, static_cast<uint32_t>(scene.resolution));
    write_u32(out, static_cast<uint32_t>(scene.resolution));
    write_f32(out, static_cast<float>(scene.voxel_size));
    write_f32_block(out, scene.density.data());
    write_f32_block(out, scene.color.data());
}

GroundTruthScene load_scene(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open scene file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kSceneMagic, 4) != 0)
        throw FormatError("bad scene magic in " + path);
    uint32_t rx = read_u32(in), ry = read_u32(in), rz = read_u32(in);
    float h = read_f32(in);
    if (!in || rx != ry || ry != rz || rx < 4 || rx > 4096)
        throw FormatError("bad scene header in " + path);
    GroundTruthScene scene;
    scene.resolution = static_cast<int>(rx);
    scene.voxel_size = h;
    scene.bounds = {{0, 0, 0}, {rx * static_cast<double>(h), ry * static_cast<double>(h),
                                rz * static_cast<double>(h)}};
    scene.density = Grid3(static_cast<int>(rx), static_cast<int>(ry), static_cast<int>(rz), 1);
    scene.color = Grid3(static_cast<int>(rx), static_cast<int>(ry), static_cast<int>(rz), 3);
    read_f32_block(in, scene.density.data());
    read_f32_block(in, scene.color.data());
    if (!in) throw FormatError("truncated scene file: " + path);
    scene.init_box = scene.bounds;
    return scene;
}

}  // namespace nvf
