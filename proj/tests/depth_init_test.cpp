#include <gtest/gtest.h>

#include "gsedit/depth_init.hpp"
#include "test_support.hpp"

using namespace gsedit;
namespace gt = gsedit::testing;

namespace {

DisparityMap map_of(const std::vector<double>& v) {
    ScalarImage img(static_cast<int>(v.size()), 1);
    for (std::size_t i = 0; i < v.size(); ++i) img[i] = v[i];
    return monocular_disparity(img);
}

DisparityMap affine(const DisparityMap& d, double a, double b) {
    DisparityMap out = d;
    for (auto& v : out.values.data()) v = a * v + b;
    return out;
}

std::vector<double> random_values(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error";
    return ErrorKind::Input;
}

Camera tilted_camera(int size = 24) {
    Intrinsics k{26.0, 24.0, size / 2.0 - 0.3, size / 2.0 + 0.7};
    return Camera::look_at(k, Vec3(0.4, -0.6, -3.0), Vec3(0.1, 0.05, 0.0), Vec3(0.0, -1.0, 0.0), size, size);
}

}  // namespace

TEST(StatsTest, MedianAndMad) {
    EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
    EXPECT_DOUBLE_EQ(mean_absolute_deviation({1.0, 2.0, 3.0, 6.0}, 2.5), (1.5 + 0.5 + 0.5 + 3.5) / 4.0);
}

TEST(CalibrationTest, IdentityWhenInputsMatch) {
    std::mt19937_64 rng(1);
    const DisparityMap d = map_of(random_values(rng, 50, 0.2, 2.0));
    const Calibration c = calibrate_disparity(d, d);
    EXPECT_DOUBLE_EQ(c.a, 1.0);
    EXPECT_NEAR(c.b, 0.0, 1e-15);
}

TEST(CalibrationTest, RecoversPositiveAffineCorruption) {
    std::mt19937_64 rng(2);
    const DisparityMap truth = map_of(random_values(rng, 101, 0.3, 1.5));
    const DisparityMap mono = affine(truth, 1.0 / 2.5, 0.3 / 2.5);
    const Calibration c = calibrate_disparity(mono, truth);
    EXPECT_NEAR(c.a, 2.5, 1e-9);
    EXPECT_NEAR(c.b, -0.3, 1e-9);
}

TEST(CalibrationTest, EquivariantUnderAffineInput) {
    std::mt19937_64 rng(3);
    const DisparityMap mono = map_of(random_values(rng, 64, 0.1, 3.0));
    const DisparityMap rendered = map_of(random_values(rng, 64, 0.5, 1.0));
    const Calibration c = calibrate_disparity(mono, rendered);
    for (auto [alpha, beta] : {std::pair{2.0, 0.5}, {0.3, -0.1}, {7.0, 3.0}}) {
        const Calibration c2 = calibrate_disparity(affine(mono, alpha, beta), rendered);
        EXPECT_NEAR(c2.a, c.a / alpha, 1e-9);
        EXPECT_NEAR(c2.b, c.b - c2.a * beta, 1e-9);
    }
}

TEST(CalibrationTest, OnlyJointlyValidPixelsCount) {
    std::mt19937_64 rng(4);
    DisparityMap truth = map_of(random_values(rng, 40, 0.3, 1.5));
    DisparityMap mono = affine(truth, 0.5, 0.1);
    // Garbage at pixels invalid in either map must not matter.
    for (int i : {0, 7, 13}) {
        truth.valid[i] = 0;
        mono.values[i] = 1e6;
    }
    mono.valid[20] = 0;
    truth.values[20] = -5.0;
    const Calibration c = calibrate_disparity(mono, truth);
    EXPECT_NEAR(c.a, 2.0, 1e-9);
    EXPECT_NEAR(c.b, -0.2, 1e-9);
}

TEST(CalibrationTest, RobustToOutliersWhereLeastSquaresIsNot) {
    std::mt19937_64 rng(5);
    const std::size_t n = 400;
    const DisparityMap truth = map_of(random_values(rng, n, 0.3, 1.5));
    DisparityMap mono = affine(truth, 1.0 / 2.5, 0.3 / 2.5);
    std::normal_distribution<double> noise(0.0, 0.002);
    for (auto& v : mono.values.data()) v += noise(rng);
    const Calibration clean = calibrate_disparity(mono, truth);
    // Gross errors drawn over the clean disparity range.
    const auto [lo, hi] = std::minmax_element(mono.values.data().begin(), mono.values.data().end());
    std::uniform_real_distribution<double> gross(*lo, *hi);
    for (std::size_t i = 0; i < n; i += 10) mono.values[i] = gross(rng);
    const Calibration robust = calibrate_disparity(mono, truth);
    // Least-squares fit of truth ≈ a·mono + b.
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) mx += mono.values[i] / n, my += truth.values[i] / n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (mono.values[i] - mx) * (truth.values[i] - my);
        sxx += (mono.values[i] - mx) * (mono.values[i] - mx);
    }
    const double a_ls = sxy / sxx;
    const double robust_err = std::abs(robust.a - clean.a), ls_err = std::abs(a_ls - clean.a);
    EXPECT_LT(robust_err / clean.a, 0.15);
    EXPECT_GT(ls_err, 2.0 * robust_err);
}

TEST(CalibrationTest, DegenerateInputs) {
    const DisparityMap varied = map_of({0.2, 0.4, 0.9, 1.3});
    EXPECT_EQ(kind_of([&] { calibrate_disparity(map_of({0.5, 0.5, 0.5, 0.5}), varied); }),
              ErrorKind::DegenerateCalibration);
    EXPECT_EQ(kind_of([&] { calibrate_disparity(varied, map_of({2.0, 2.0, 2.0, 2.0})); }),
              ErrorKind::DegenerateCalibration);
    DisparityMap sparse = varied;
    sparse.valid = BinaryMask(4, 1, 0);
    sparse.valid[2] = 1;
    EXPECT_EQ(kind_of([&] { calibrate_disparity(sparse, varied); }), ErrorKind::DegenerateCalibration);
    EXPECT_THROW(calibrate_disparity(varied, map_of({0.2, 0.4, 0.9})), Error);
}

TEST(DisparityToDepthTest, Examples) {
    const DisparityMap d = map_of({0.5, 0.5, -2.0, 0.0});
    DepthImage out = disparity_to_depth(d, {1.0, 0.0});
    EXPECT_EQ(out.values[0], 2.0);
    EXPECT_EQ(out.valid[2], 0);
    EXPECT_EQ(out.valid[3], 0);
    out = disparity_to_depth(d, {2.0, 1.0});
    EXPECT_EQ(out.values[1], 0.5);
    EXPECT_EQ(out.valid[0], 1);
    EXPECT_EQ(out.valid[2], 0);
    EXPECT_EQ(out.valid[3], 1);
    EXPECT_EQ(out.values[3], 1.0);
}

TEST(DisparityToDepthTest, MatchesElementwiseReferenceAndInverts) {
    std::mt19937_64 rng(6);
    const DisparityMap d = map_of(random_values(rng, 200, 0.05, 4.0));
    const Calibration cal{1.7, 0.2};
    const DepthImage out = disparity_to_depth(d, cal);
    for (std::size_t i = 0; i < 200; ++i) {
        ASSERT_EQ(out.valid[i], 1);
        EXPECT_DOUBLE_EQ(out.values[i], 1.0 / (1.7 * d.values[i] + 0.2));
        const double back = (1.0 / out.values[i] - cal.b) / cal.a;
        EXPECT_NEAR(back, d.values[i], 1e-9);
    }
    DisparityMap invalid = d;
    invalid.valid[5] = 0;
    EXPECT_EQ(disparity_to_depth(invalid, cal).valid[5], 0);
}

TEST(UnprojectTest, PrincipalPointLiesOnOpticalAxis) {
    const Camera cam = tilted_camera();
    const Intrinsics& k = cam.intrinsics();
    const Vec3 p = unproject(cam, Vec2(k.cx, k.cy), 2.5);
    EXPECT_LT((cam.to_camera(p) - Vec3(0, 0, 2.5)).norm(), 1e-12);
    EXPECT_THROW(unproject(cam, Vec2(1, 1), 0.0), Error);
    EXPECT_THROW(unproject(cam, Vec2(1, 1), -1.0), Error);
}

TEST(UnprojectTest, RoundTrips) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> px(0.0, 23.0), depth(0.2, 20.0), w(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const Camera cam = gt::random_camera(rng, 24, 24);
        const Vec2 p(px(rng), px(rng));
        const double z = depth(rng);
        const Vec3 uvz = project_point(cam, unproject(cam, p, z));
        EXPECT_NEAR(uvz.x(), p.x(), 1e-6);
        EXPECT_NEAR(uvz.y(), p.y(), 1e-6);
        EXPECT_NEAR(uvz.z(), z, 1e-6);
        const Vec3 world(w(rng), w(rng), w(rng));
        const Vec3 proj = project_point(cam, world);
        EXPECT_LT((unproject(cam, proj.head<2>(), proj.z()) - world).norm(), 1e-6);
    }
}

namespace {

// Camera-frame depth where the ray through pixel (x, y) meets the plane n·X = c.
double plane_depth(const Camera& cam, const Vec3& n, double c, int x, int y) {
    const Intrinsics& k = cam.intrinsics();
    const Vec3 ray_cam((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
    const Vec3 ray_world = cam.rotation().transpose() * ray_cam;
    const Vec3 o = cam.position();
    return (c - n.dot(o)) / n.dot(ray_world);
}

struct DeltaFixture {
    Camera cam = tilted_camera();
    RgbImage edited{24, 24, Rgb(0.9, 0.5, 0.1)};
    BinaryMask mask{24, 24, 0};
    DisparityMap mono_u, mono_e;
    DepthImage rendered;
    Calibration cal{1.8, 0.25};

    // Mono maps for which the calibrated depths have the given per-pixel ratio.
    DeltaFixture(const Vec3& n, double c, const std::function<double(int, int)>& ratio) {
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> u(0.2, 1.2);
        ScalarImage du(24, 24), de(24, 24), depth(24, 24);
        for (int y = 0; y < 24; ++y)
            for (int x = 0; x < 24; ++x) {
                du.at(x, y) = u(rng);
                const double calibrated = cal.a * du.at(x, y) + cal.b;
                de.at(x, y) = (calibrated / ratio(x, y) - cal.b) / cal.a;
                depth.at(x, y) = plane_depth(cam, n, c, x, y);
            }
        mono_u = monocular_disparity(du);
        mono_e = monocular_disparity(de);
        rendered = {depth, BinaryMask(24, 24, 1)};
    }
};

}  // namespace

TEST(DeltaGaussiansTest, UnitRatioLandsOnExistingSurface) {
    const Vec3 n = Vec3(0.1, 0.2, 1.0).normalized();
    DeltaFixture f(n, 0.3, [](int, int) { return 1.0; });
    for (int y = 5; y < 15; ++y)
        for (int x = 6; x < 13; ++x) f.mask.at(x, y) = 1;
    const DeltaResult r = build_delta_gaussians(f.edited, f.mask, f.mono_e, f.mono_u, f.rendered, f.cam, f.cal);
    ASSERT_EQ(r.delta.size(), 70u);
    EXPECT_EQ(r.skipped, 0u);
    for (std::size_t i = 0; i < r.delta.size(); ++i) {
        const Gaussian& g = r.delta[i];
        EXPECT_NEAR(n.dot(g.mean), 0.3, 1e-9);
        EXPECT_TRUE(r.delta.is_added(i));
        EXPECT_EQ(g.color, Rgb(0.9, 0.5, 0.1));
        EXPECT_EQ(g.opacity, 0.9);
        EXPECT_EQ(g.rotation, identity_quat());
        const double z = f.cam.to_camera(g.mean).z();
        EXPECT_NEAR(g.scale.x(), z / f.cam.intrinsics().fx, 1e-12);
        EXPECT_EQ(g.scale.x(), g.scale.y());
        EXPECT_EQ(g.scale.x(), g.scale.z());
    }
}

TEST(DeltaGaussiansTest, HalvedDepthMovesHalfwayToCamera) {
    const Vec3 n(0, 0, 1);
    DeltaFixture f(n, 0.0, [](int, int) { return 0.5; });
    f.mask.at(12, 12) = 1;
    f.mask.at(3, 20) = 1;
    const DeltaResult r = build_delta_gaussians(f.edited, f.mask, f.mono_e, f.mono_u, f.rendered, f.cam, f.cal);
    ASSERT_EQ(r.delta.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        const std::size_t p = r.source_pixels[i];
        const double d3 = f.rendered.values[p];
        EXPECT_NEAR(f.cam.to_camera(r.delta[i].mean).z(), 0.5 * d3, 1e-9);
    }
}

TEST(DeltaGaussiansTest, PlaneSceneMatchesAnalyticSurface) {
    // Constant ratio r scales the plane about the camera center:
    // n·(X − C) = r·(c − n·C).
    const Vec3 n = Vec3(-0.3, 0.4, 1.0).normalized();
    const double c = 0.2, ratio = 0.8;
    DeltaFixture f(n, c, [&](int, int) { return ratio; });
    std::mt19937_64 rng(9);
    std::bernoulli_distribution on(0.3);
    std::size_t k = 0;
    for (auto& m : f.mask.data()) k += (m = on(rng) ? 1 : 0);
    const DeltaResult r = build_delta_gaussians(f.edited, f.mask, f.mono_e, f.mono_u, f.rendered, f.cam, f.cal);
    EXPECT_EQ(r.delta.size(), k);
    const Vec3 C = f.cam.position();
    for (std::size_t i = 0; i < r.delta.size(); ++i) {
        EXPECT_NEAR(n.dot(r.delta[i].mean - C), ratio * (c - n.dot(C)), 1e-5);
        const Vec3 uvz = project_point(f.cam, r.delta[i].mean);
        const int x = static_cast<int>(r.source_pixels[i] % 24), y = static_cast<int>(r.source_pixels[i] / 24);
        EXPECT_LT(std::hypot(uvz.x() - x, uvz.y() - y), 0.5);
    }
    // Row-major emission order.
    EXPECT_TRUE(std::is_sorted(r.source_pixels.begin(), r.source_pixels.end()));
}

TEST(DeltaGaussiansTest, InvalidPixelsAreSkippedAndCounted) {
    DeltaFixture f(Vec3(0, 0, 1), 0.0, [](int, int) { return 1.0; });
    for (int x = 0; x < 5; ++x) f.mask.at(x, 0) = 1;
    f.rendered.valid.at(1, 0) = 0;
    f.mono_u.valid.at(2, 0) = 0;
    f.mono_e.values.at(3, 0) = -10.0;  // calibrated disparity not positive
    const DeltaResult r = build_delta_gaussians(f.edited, f.mask, f.mono_e, f.mono_u, f.rendered, f.cam, f.cal);
    EXPECT_EQ(r.delta.size(), 2u);
    EXPECT_EQ(r.skipped, 3u);
    EXPECT_EQ(r.source_pixels, (std::vector<std::size_t>{0, 4}));
}

TEST(DeltaGaussiansTest, StrideSubsamplesAndWidens) {
    DeltaFixture f(Vec3(0, 0, 1), 0.0, [](int, int) { return 1.0; });
    for (auto& m : f.mask.data()) m = 1;
    DeltaConfig cfg;
    cfg.stride = 3;
    cfg.opacity = 0.5;
    const DeltaResult r = build_delta_gaussians(f.edited, f.mask, f.mono_e, f.mono_u, f.rendered, f.cam, f.cal, cfg);
    EXPECT_EQ(r.delta.size(), 64u);
    const double z = f.cam.to_camera(r.delta[0].mean).z();
    EXPECT_NEAR(r.delta[0].scale.x(), 3.0 * z / f.cam.intrinsics().fx, 1e-12);
    EXPECT_EQ(r.delta[0].opacity, 0.5);
}

TEST(DeltaGaussiansTest, EmptyResultIsInitializationFailure) {
    DeltaFixture f(Vec3(0, 0, 1), 0.0, [](int, int) { return 1.0; });
    EXPECT_EQ(kind_of([&] { build_delta_gaussians(f.edited, f.mask, f.mono_e, f.mono_u, f.rendered, f.cam, f.cal); }),
              ErrorKind::InitializationFailed);
    f.mask.at(0, 0) = 1;
    f.rendered.valid.at(0, 0) = 0;
    EXPECT_EQ(kind_of([&] { build_delta_gaussians(f.edited, f.mask, f.mono_e, f.mono_u, f.rendered, f.cam, f.cal); }),
              ErrorKind::InitializationFailed);
}

TEST(DeltaGaussiansTest, ResolutionMismatchRejected) {
    DeltaFixture f(Vec3(0, 0, 1), 0.0, [](int, int) { return 1.0; });
    f.mask = BinaryMask(23, 24, 1);
    EXPECT_THROW(build_delta_gaussians(f.edited, f.mask, f.mono_e, f.mono_u, f.rendered, f.cam, f.cal), Error);
}

TEST(InitializeFromDepthTest, MockEstimatorCalibratesExactly) {
    const GaussianCloud scene = gt::synthetic_scene();
    const auto cams = gt::synthetic_cameras();
    MockSuite suite(scene, cams, gt::add_shape_recipe(1));
    const int v = 2;
    const InitializationResult r = initialize_from_depth(scene, cams[v], v, suite.originals()[v], suite.targets()[v],
                                                         suite.edit_regions()[v], suite.depth);
    EXPECT_NEAR(r.calibration.a, 2.5, 1e-9);
    EXPECT_NEAR(r.calibration.b, -0.3, 1e-9);
    ASSERT_GT(r.delta.delta.size(), 0u);
    EXPECT_EQ(r.merged.size(), scene.size() + r.delta.delta.size());
    for (std::size_t i = 0; i < scene.size(); ++i) EXPECT_FALSE(r.merged.is_added(i));
    for (std::size_t i = scene.size(); i < r.merged.size(); ++i) EXPECT_TRUE(r.merged.is_added(i));
    // The added shape sits in front of the scene, so new points move toward the camera.
    const RenderOutput before = render(scene, cams[v]);
    double closer = 0;
    for (std::size_t i = 0; i < r.delta.delta.size(); ++i) {
        const std::size_t p = r.delta.source_pixels[i];
        const double z = cams[v].to_camera(r.delta.delta[i].mean).z();
        closer += z < before.depth[p] - 1e-6;
    }
    EXPECT_GT(closer / r.delta.delta.size(), 0.5);
}
