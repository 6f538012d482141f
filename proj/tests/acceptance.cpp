// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>

#include "cli.hpp"
#include "gsedit/depth_init.hpp"
#include "gsedit/pipeline.hpp"
#include "test_support.hpp"

using namespace gsedit;
namespace gt = gsedit::testing;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Verdict render_equivalence() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<int> count(1, 10);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int s = 0; s < 200; ++s) {
        const Camera cam = gt::random_camera(rng);
        const GaussianCloud cloud = gt::random_cloud(rng, count(rng));
        const Rgb bg(unit(rng), unit(rng), unit(rng));
        const RenderOutput out = render(cloud, cam, bg);
        const gt::OracleImages ref = gt::oracle_render(cloud, cam, bg);
        for (std::size_t i = 0; i < out.color.size(); ++i) {
            worst = std::max(worst, (out.color[i] - ref.color[i]).cwiseAbs().maxCoeff());
            worst = std::max(worst, std::abs(out.depth[i] - ref.depth[i]));
            worst = std::max(worst, std::abs(out.alpha[i] - ref.alpha[i]));
        }
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-6 && secs < 10.0, fmt("200 scenes, max abs error %.3g, %.2f s", worst, secs)};
}

Verdict gradient_correctness() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(777);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int s = 0; s < 20; ++s) {
        const Camera cam = gt::random_camera(rng);
        const GaussianCloud cloud = gt::random_cloud(rng, 5);
        const Rgb bg(0.5 + 0.5 * u(rng), 0.5 + 0.5 * u(rng), 0.5 + 0.5 * u(rng));
        RgbImage gc(cam.width(), cam.height());
        ScalarImage gd(cam.width(), cam.height());
        for (std::size_t i = 0; i < gc.size(); ++i) {
            gc[i] = Rgb(u(rng), u(rng), u(rng));
            gd[i] = u(rng);
        }
        auto loss = [&](const GaussianCloud& c) {
            const RenderOutput out = render(c, cam, bg);
            double l = 0.0;
            for (std::size_t i = 0; i < out.color.size(); ++i) l += gc[i].dot(out.color[i]) + gd[i] * out.depth[i];
            return l;
        };
        worst = std::max(worst, gt::max_gradient_error(cloud, backward(cloud, cam, gc, gd, bg), loss));
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-4 && secs < 60.0, fmt("20 scenes, max guarded relative error %.3g, %.2f s", worst, secs)};
}

Verdict calibration_exactness() {
    double worst = 0.0;
    auto check = [&](const DisparityMap& truth, double a0, double b0) {
        MockDepth mock(a0, b0);
        const RgbImage img(truth.values.width(), truth.values.height(), Rgb(0.5, 0.5, 0.5));
        mock.register_image(0, img, truth.values);
        const Calibration c = calibrate_disparity(monocular_disparity(mock.disparity(img, 0)), truth);
        worst = std::max({worst, std::abs(c.a - a0), std::abs(c.b - b0)});
    };
    const RenderOutput r = render(gt::synthetic_scene(), gt::synthetic_cameras()[2]);
    check(rendered_disparity(r.depth, r.alpha), 2.5, -0.3);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> a(0.2, 5.0), b(-1.0, 1.0), d(0.1, 2.0);
    for (int p = 0; p < 50; ++p) {
        ScalarImage t(24, 24);
        for (auto& v : t.data()) v = d(rng);
        DisparityMap truth = monocular_disparity(t);
        truth.source = DisparitySource::Rendered;
        check(truth, a(rng), b(rng));
    }
    bool degenerate = false;
    try {
        ScalarImage t(8, 8);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.1 + 0.01 * static_cast<double>(i);
        calibrate_disparity(monocular_disparity(ScalarImage(8, 8, 0.7)), monocular_disparity(t));
    } catch (const Error& e) {
        degenerate = e.kind() == ErrorKind::DegenerateCalibration;
    }
    return {worst < 1e-9 && degenerate,
            fmt("51 affine pairs, max |da|,|db| %.3g; constant input %s", worst,
                degenerate ? "raises degenerate calibration" : "NOT rejected")};
}

Verdict calibration_robustness() {
    std::mt19937_64 rng(4242);
    const std::size_t n = 1000;
    int wins = 0;
    double robust_sum = 0.0, ls_sum = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::uniform_real_distribution<double> td(0.3, 1.5);
        std::normal_distribution<double> noise(0.0, 0.002);
        ScalarImage truth(static_cast<int>(n), 1), mono(static_cast<int>(n), 1);
        for (std::size_t i = 0; i < n; ++i) {
            truth[i] = td(rng);
            mono[i] = (truth[i] + 0.3) / 2.5 + noise(rng);
        }
        // 10% gross errors spread over [0, 3·max].
        const double hi = *std::max_element(mono.data().begin(), mono.data().end());
        std::uniform_real_distribution<double> gross(0.0, 3.0 * hi);
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t i = 0; i < n / 10; ++i) mono[idx[i]] = gross(rng);

        const Calibration c = calibrate_disparity(monocular_disparity(mono), monocular_disparity(truth));
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < n; ++i) mx += mono[i], my += truth[i];
        mx /= n;
        my /= n;
        double sxy = 0, sxx = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sxy += (mono[i] - mx) * (truth[i] - my);
            sxx += (mono[i] - mx) * (mono[i] - mx);
        }
        const double robust_err = std::abs(c.a - 2.5), ls_err = std::abs(sxy / sxx - 2.5);
        wins += robust_err <= 0.5 * ls_err;
        robust_sum += robust_err / 2.5;
        ls_sum += ls_err / 2.5;
    }
    return {wins >= 90, fmt("%d/100 trials at most half the least-squares error (mean rel. error %.3f vs %.3f)", wins,
                            robust_sum / 100, ls_sum / 100)};
}

Verdict unprojection_round_trip() {
    std::mt19937_64 rng(5150);
    std::uniform_real_distribution<double> depth(0.05, 50.0), w(-2.0, 2.0);
    double worst = 0.0;
    for (int s = 0; s < 1000; ++s) {
        const int width = 16 + static_cast<int>(rng() % 64), height = 16 + static_cast<int>(rng() % 64);
        const Camera cam = gt::random_camera(rng, width, height);
        std::uniform_real_distribution<double> px(-0.5, width - 0.5), py(-0.5, height - 0.5);
        const Vec2 p(px(rng), py(rng));
        const double z = depth(rng);
        const Vec3 uvz = project_point(cam, unproject(cam, p, z));
        worst = std::max({worst, std::abs(uvz.x() - p.x()), std::abs(uvz.y() - p.y()), std::abs(uvz.z() - z)});
        Vec3 world(w(rng), w(rng), w(rng));
        const Vec3 proj = project_point(cam, world);
        if (proj.z() <= 0.0) continue;
        worst = std::max(worst, (unproject(cam, proj.head<2>(), proj.z()) - world).cwiseAbs().maxCoeff());
    }
    return {worst < 1e-6, fmt("1000 pinhole samples, max error %.3g", worst)};
}

Verdict localization_limits() {
    const GaussianCloud scene = gt::synthetic_scene();
    const auto cams = gt::synthetic_cameras();
    MockSuite suite(scene, cams, gt::recolor_recipe());
    PipelineConfig cfg;
    cfg.prompt = "turn the ball blue";
    cfg.localization.gamma = 0.0;
    const LocalizationResult all = localize_scene(scene, cams, cfg, suite.noise);
    std::size_t visible = 0, selected = 0;
    for (std::size_t i = 0; i < scene.size(); ++i)
        if (all.mask3d.vote_weights[i] > 0.0) {
            ++visible;
            selected += all.mask3d.values[i];
        }
    const bool all_one = visible > 0 && selected == visible;

    MockNoisePredictor flat;
    bool empty = true;
    for (double g : {1e-9, 0.25, 0.6, 1.0}) {
        LocalizationConfig lc;
        lc.gamma = g;
        for (int v = 0; v < static_cast<int>(cams.size()); ++v)
            empty = empty && locate_2d(suite.originals()[v], v, cfg.prompt, flat, lc, 5).pixel_sum() == 0;
    }

    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    bool monotone = true;
    for (int grid = 0; grid < 50; ++grid) {
        ScalarImage rel(8 + static_cast<int>(rng() % 40), 8 + static_cast<int>(rng() % 40));
        for (auto& v : rel.data()) v = unit(rng);
        rel = normalize_min_max(rel);
        std::vector<double> gammas(12);
        for (auto& g : gammas) g = unit(rng);
        std::sort(gammas.rbegin(), gammas.rend());
        LocalizationConfig lc;
        lc.filter_sigma = 0.5 + 3.0 * unit(rng);
        BinaryMask prev;
        for (double g : gammas) {
            lc.gamma = g;
            const Mask2D m = smooth_and_threshold(rel, lc);
            if (!prev.empty())
                for (std::size_t i = 0; i < prev.size(); ++i) monotone = monotone && m.values[i] >= prev[i];
            prev = m.values;
        }
    }
    return {all_one && empty && monotone,
            fmt("gamma 0 selects %zu/%zu visible Gaussians; equal predictions %s; monotone on 50 grids: %s", selected,
                visible, empty ? "give empty masks" : "give NON-empty masks", monotone ? "yes" : "no")};
}

Verdict end_to_end() {
    const auto t0 = std::chrono::steady_clock::now();
    const GaussianCloud scene = gt::synthetic_scene();
    const auto cams = gt::synthetic_cameras();
    MockSuite suite(scene, cams, gt::recolor_recipe());
    PipelineConfig cfg;  // three cycles of 500 iterations, t = 750, 500, 250
    cfg.prompt = "turn the red ball blue";
    cfg.seed = 1;
    const PipelineResult res = run_pipeline(scene, cams, cfg, suite.oracles());
    double min_psnr = 1e9, max_outside = 0.0;
    for (std::size_t v = 0; v < cams.size(); ++v) {
        const RgbImage r = render(res.cloud, cams[v]).color;
        const BinaryMask& region = suite.edit_regions()[v];
        BinaryMask outside = region;
        for (auto& x : outside.data()) x = !x;
        min_psnr = std::min(min_psnr, psnr(r, suite.targets()[v], region));
        max_outside = std::max(max_outside, max_abs_difference(r, suite.originals()[v], outside));
    }
    const double secs = seconds_since(t0);
    return {min_psnr > 30.0 && max_outside < 0.01 && secs < 300.0,
            fmt("6 views: worst in-region PSNR %.2f dB, worst outside error %.4f, %.1f s", min_psnr, max_outside, secs)};
}

Verdict initialization_ablation() {
    const GaussianCloud scene = gt::synthetic_scene();
    const auto cams = gt::synthetic_cameras();
    const int cap = 1500;
    bool ordered = true;
    double sum_with = 0.0, sum_without = 0.0;
    std::string per_seed;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        MockSuite suite(scene, cams, gt::add_shape_recipe(seed));
        int reached[2] = {cap + 1, cap + 1};
        for (int use = 0; use < 2; ++use) {
            PipelineConfig cfg;
            cfg.prompt = "add an orange cone";
            cfg.seed = seed;
            cfg.cycles = {{20, 750, cap}};
            cfg.use_depth_init = use == 1;
            int& hit = reached[use];
            PipelineObserver obs;
            obs.on_iteration = [&](int it, const LossValue&, const GaussianCloud& g) {
                if (hit <= cap || it % 10 != 0) return;
                double se = 0.0;
                std::size_t n = 0;
                for (std::size_t v = 0; v < cams.size(); ++v) {
                    const RgbImage r = render(g, cams[v], cfg.background).color;
                    const BinaryMask& region = suite.edit_regions()[v];
                    for (std::size_t i = 0; i < r.size(); ++i)
                        if (region[i]) {
                            se += (r[i] - suite.targets()[v][i]).squaredNorm();
                            n += 3;
                        }
                }
                if (n > 0 && 10.0 * std::log10(n / se) >= 25.0) hit = it;
            };
            run_pipeline(scene, cams, cfg, suite.oracles(), obs);
        }
        ordered = ordered && reached[1] <= reached[0];
        sum_with += reached[1];
        sum_without += reached[0];
        per_seed += fmt(" %d/%d", reached[1], reached[0]);
    }
    return {ordered, fmt("iterations to 25 dB with/without init:%s; mean ratio %.3f", per_seed.c_str(),
                         sum_with / sum_without)};
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

Verdict determinism() {
    const fs::path dir = gt::temp_dir("acceptance_determinism");
    gt::write_synthetic_inputs(dir);
    std::ofstream(dir / "mock.json") << R"({"recolor": [{"index": 4, "color": [0.1, 0.3, 0.95]}]})";
    auto run_once = [&](const std::string& out) {
        std::ostringstream o, e;
        return cli::run({"pipeline", "--scene", (dir / "scene.ply").string(), "--cameras",
                         (dir / "cameras.json").string(), "--out", (dir / out).string(), "--prompt",
                         "turn the red ball blue", "--mock-oracles", "--mock-spec", (dir / "mock.json").string(),
                         "--seed", "7", "--iters", "100"},
                        o, e);
    };
    const int a = run_once("a"), b = run_once("b");
    const std::string pa = file_bytes(dir / "a/final.ply"), pb = file_bytes(dir / "b/final.ply");
    const bool same = a == 0 && b == 0 && !pa.empty() && pa == pb;
    return {same, fmt("exit codes %d/%d, final.ply %zu bytes, %s", a, b, pa.size(),
                      same ? "bit-identical" : "DIFFERENT")};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"render-oracle-equivalence", render_equivalence},
        {"gradient-correctness", gradient_correctness},
        {"calibration-exactness", calibration_exactness},
        {"calibration-robustness", calibration_robustness},
        {"unprojection-round-trip", unprojection_round_trip},
        {"localization-limits", localization_limits},
        {"end-to-end-mock-pipeline", end_to_end},
        {"initialization-ablation", initialization_ablation},
        {"determinism", determinism},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Verdict v;
        try {
            v = run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failed += !v.pass;
        std::printf("%s  %-28s %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
