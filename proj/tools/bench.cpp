// Times the OpenMP kernels against their serial reference implementations.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "nvf/metrics.hpp"
#include "nvf/parallel.hpp"
#include "nvf/planner.hpp"
#include "nvf/render.hpp"
#include "nvf/train.hpp"
#include "nvf/uncertainty.hpp"

using namespace nvf;

namespace {

double time_of(const std::function<void()>& fn, int reps = 3) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        fn();
        best = std::min(best,
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void report(const char* name, double serial_s, double parallel_s) {
    std::printf("%-28s serial %8.3f ms   parallel %8.3f ms   speedup %.2fx\n", name,
                serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) set_num_threads(std::atoi(argv[1]));
    std::printf("threads: %d\n", num_threads());

    SceneSpec spec;
    spec.resolution = 48;
    GroundTruthScene scene = build_scene(spec);
    VoxelField field = field_from_scene(scene, 48);
    CameraIntrinsics intr{96, 96, 1.0};
    Rng rng(11);
    Pose pose = sample_pose_shell(scene.bounds, rng, 0.1);
    std::vector<Pose> poses;
    for (int i = 0; i < 8; ++i) poses.push_back(sample_pose_shell(scene.bounds, rng, 0.1));

    report("render_image 96x96x64",
           time_of([&] { render_image_serial(field, pose, intr, 64, 1); }),
           time_of([&] { render_image(field, pose, intr, 64, 1); }));

    UncertaintyPriors priors;
    priors.sigma0 = 12.0;
    EntropyConfig ecfg;
    CorrelationConfig corr;
    corr.scene_diameter = scene.bounds.diagonal();
    report("image_entropy nvf 96x96",
           time_of([&] { image_entropy_serial(field, pose, intr, Method::nvf, priors, ecfg, corr, true); }),
           time_of([&] { image_entropy(field, pose, intr, Method::nvf, priors, ecfg, corr, true); }));

    report("visibility labels 20k",
           time_of([&] { visibility_label_pool_serial(field, poses, intr, 20000, Rng(3)); }),
           time_of([&] { visibility_label_pool(field, poses, intr, 20000, Rng(3)); }));

    report("visual_coverage",
           time_of([&] { visual_coverage_serial(scene, poses, intr); }),
           time_of([&] { visual_coverage(scene, poses, intr); }));

    return 0;
}
