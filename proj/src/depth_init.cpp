#include "gsedit/depth_init.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gsedit {

DisparityMap monocular_disparity(ScalarImage values) {
    DisparityMap d;
    d.valid = BinaryMask(values.width(), values.height(), 0);
    for (std::size_t i = 0; i < values.size(); ++i) d.valid[i] = std::isfinite(values[i]) ? 1 : 0;
    d.values = std::move(values);
    d.source = DisparitySource::Monocular;
    return d;
}

DisparityMap rendered_disparity(const ScalarImage& depth, const ScalarImage& alpha) {
    require(depth.same_shape(alpha), "depth and alpha shapes differ");
    DisparityMap d;
    d.values = ScalarImage(depth.width(), depth.height(), 0.0);
    d.valid = BinaryMask(depth.width(), depth.height(), 0);
    d.source = DisparitySource::Rendered;
    for (std::size_t i = 0; i < depth.size(); ++i) {
        if (alpha[i] >= 0.5 && depth[i] > 0.0) {
            d.values[i] = 1.0 / depth[i];
            d.valid[i] = 1;
        }
    }
    return d;
}

double median(std::vector<double> v) {
    require(!v.empty(), "median of an empty set");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + mid);
    return 0.5 * (lower + upper);
}

double mean_absolute_deviation(const std::vector<double>& v, double center) {
    require(!v.empty(), "deviation of an empty set");
    double s = 0.0;
    for (double x : v) s += std::abs(x - center);
    return s / v.size();
}

Calibration calibrate_disparity(const DisparityMap& mono, const DisparityMap& rendered) {
    require(mono.values.same_shape(rendered.values), "disparity maps differ in shape");
    std::vector<double> m, r;
    for (std::size_t i = 0; i < mono.values.size(); ++i) {
        if (!mono.valid[i] || !rendered.valid[i]) continue;
        m.push_back(mono.values[i]);
        r.push_back(rendered.values[i]);
    }
    if (m.size() < 2)
        fail(ErrorKind::DegenerateCalibration,
             "calibration needs at least 2 jointly valid pixels, got " + std::to_string(m.size()));
    const double fm = median(m), fr = median(r);
    const double sm = mean_absolute_deviation(m, fm), sr = mean_absolute_deviation(r, fr);
    if (!(sm > 1e-12 * std::max(1.0, std::abs(fm))))
        fail(ErrorKind::DegenerateCalibration, "degenerate scale: monocular disparity has no spread");
    if (!(sr > 1e-12 * std::max(1.0, std::abs(fr))))
        fail(ErrorKind::DegenerateCalibration, "degenerate target: rendered disparity has no spread");
    Calibration cal;
    cal.a = sr / sm;
    cal.b = fr - cal.a * fm;
    return cal;
}

DepthImage disparity_to_depth(const DisparityMap& mono, const Calibration& cal) {
    DepthImage d;
    d.values = ScalarImage(mono.values.width(), mono.values.height(), 0.0);
    d.valid = BinaryMask(mono.values.width(), mono.values.height(), 0);
    for (std::size_t i = 0; i < mono.values.size(); ++i) {
        if (!mono.valid.empty() && !mono.valid[i]) continue;
        const double disp = cal.a * mono.values[i] + cal.b;
        if (!(disp > 0.0) || !std::isfinite(disp)) continue;
        d.values[i] = 1.0 / disp;
        d.valid[i] = 1;
    }
    return d;
}

Vec3 unproject(const Camera& camera, const Vec2& pixel, double depth) {
    require(depth > 0.0, "unproject needs a positive depth");
    const Intrinsics& k = camera.intrinsics();
    const Vec3 p((pixel.x() - k.cx) * depth / k.fx, (pixel.y() - k.cy) * depth / k.fy, depth);
    return camera.to_world(p);
}

Vec3 project_point(const Camera& camera, const Vec3& world) {
    const Vec3 p = camera.to_camera(world);
    const Intrinsics& k = camera.intrinsics();
    return Vec3(k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy, p.z());
}

DeltaResult build_delta_gaussians(const RgbImage& edited, const BinaryMask& mask, const DisparityMap& mono_edited,
                                  const DisparityMap& mono_unedited, const DepthImage& rendered_depth,
                                  const Camera& camera, const Calibration& cal, const DeltaConfig& cfg) {
    const int w = camera.width(), h = camera.height();
    require(edited.same_shape(w, h) && mask.same_shape(w, h) && mono_edited.values.same_shape(w, h) &&
                mono_unedited.values.same_shape(w, h) && rendered_depth.values.same_shape(w, h),
            "depth initialization inputs must share the frontal view's resolution");
    require(cfg.stride >= 1, "stride must be at least 1");
    const DepthImage d_edit = disparity_to_depth(mono_edited, cal);
    const DepthImage d_unedit = disparity_to_depth(mono_unedited, cal);

    DeltaResult out;
    for (int y = 0; y < h; y += cfg.stride) {
        for (int x = 0; x < w; x += cfg.stride) {
            const std::size_t i = mask.index(x, y);
            if (!mask[i]) continue;
            if (!d_edit.valid[i] || !d_unedit.valid[i] || !rendered_depth.valid[i] ||
                !(rendered_depth.values[i] > 0.0)) {
                ++out.skipped;
                continue;
            }
            const double target = d_edit.values[i] / d_unedit.values[i] * rendered_depth.values[i];
            if (!(target > 0.0) || !std::isfinite(target)) {
                ++out.skipped;
                continue;
            }
            Gaussian g;
            g.mean = unproject(camera, Vec2(x, y), target);
            g.scale = Vec3::Constant(target * cfg.stride / camera.intrinsics().fx);
            g.rotation = identity_quat();
            g.opacity = cfg.opacity;
            g.color = edited[i].cwiseMax(0.0).cwiseMin(1.0);
            out.delta.push_back(g, true);
            out.source_pixels.push_back(i);
        }
    }
    if (out.delta.empty())
        fail(ErrorKind::InitializationFailed, "depth initialization produced no Gaussians (" +
                                                  std::to_string(out.skipped) + " masked pixels lacked valid depth)");
    return out;
}

InitializationResult initialize_from_depth(const GaussianCloud& cloud, const Camera& camera, int view,
                                           const RgbImage& unedited, const RgbImage& edited, const BinaryMask& mask,
                                           DepthEstimator& estimator, const DeltaConfig& cfg,
                                           const RenderSettings& settings) {
    const RenderOutput r = render(cloud, camera, Rgb::Zero(), settings);
    const DisparityMap rendered = rendered_disparity(r.depth, r.alpha);
    DepthImage rendered_depth{r.depth, rendered.valid};

    DisparityMap mono_unedited, mono_edited;
    try {
        mono_unedited = monocular_disparity(estimator.disparity(unedited, view));
        mono_edited = monocular_disparity(estimator.disparity(edited, view));
    } catch (const Error& e) {
        throw Error(e.kind(), "depth estimate for view " + std::to_string(view) + ": " + e.what());
    }
    InitializationResult out;
    out.calibration = calibrate_disparity(mono_unedited, rendered);
    out.delta = build_delta_gaussians(edited, mask, mono_edited, mono_unedited, rendered_depth, camera,
                                      out.calibration, cfg);
    out.merged = merge(cloud, out.delta.delta);
    return out;
}

}  // namespace gsedit
