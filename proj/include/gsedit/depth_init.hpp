#pragma once

#include <vector>

#include "gsedit/oracle.hpp"
#include "gsedit/renderer.hpp"

namespace gsedit {

enum class DisparitySource { Monocular, Rendered };

struct DisparityMap {
    ScalarImage values;
    BinaryMask valid;
    DisparitySource source = DisparitySource::Monocular;
};

/// Every finite pixel is valid.
DisparityMap monocular_disparity(ScalarImage values);

/// 1/D where alpha ≥ 0.5 and D > 0; other pixels invalid.
DisparityMap rendered_disparity(const ScalarImage& depth, const ScalarImage& alpha);

struct Calibration {
    double a = 1.0;
    double b = 0.0;
};

struct DepthImage {
    ScalarImage values;
    BinaryMask valid;
};

/// Median of `values` (mean of the middle pair for even counts).
double median(std::vector<double> values);

/// (1/M) Σ |v − center|.
double mean_absolute_deviation(const std::vector<double>& values, double center);

/// a = s(rendered)/s(mono), b = f(rendered) − a·f(mono) with f the median and s
/// the mean absolute deviation from it, both over jointly valid pixels.
/// Throws DegenerateCalibration for constant inputs or fewer than two pixels.
Calibration calibrate_disparity(const DisparityMap& mono, const DisparityMap& rendered);

/// 1/(a·δ + b); pixels where that disparity is not positive become invalid.
DepthImage disparity_to_depth(const DisparityMap& mono, const Calibration& cal);

/// World point on the ray through `pixel` at camera-frame depth `depth` (> 0).
Vec3 unproject(const Camera& camera, const Vec2& pixel, double depth);

/// (u, v, z): pixel coordinates and camera-frame depth of a world point.
Vec3 project_point(const Camera& camera, const Vec3& world);

struct DeltaConfig {
    int stride = 1;        // use every stride-th masked pixel in x and y
    double opacity = 0.9;
};

struct DeltaResult {
    GaussianCloud delta;
    std::vector<std::size_t> source_pixels;  // row-major pixel index of each new Gaussian
    std::size_t skipped = 0;                 // masked pixels without valid depths
};

/// One Gaussian per masked pixel p with valid depths, placed at
/// unproject(p, d*) with d* = (d_mono_edited/d_mono_unedited)·d_rendered, both
/// mono depths calibrated with `cal_unedited`. Isotropic scale d*·stride/fx,
/// identity rotation, color of the edited image. Throws InitializationFailed
/// when nothing is emitted.
DeltaResult build_delta_gaussians(const RgbImage& edited_image, const BinaryMask& mask,
                                  const DisparityMap& mono_edited, const DisparityMap& mono_unedited,
                                  const DepthImage& rendered_depth, const Camera& camera,
                                  const Calibration& cal_unedited, const DeltaConfig& cfg = {});

struct InitializationResult {
    GaussianCloud merged;
    Calibration calibration;
    DeltaResult delta;
};

/// Renders the frontal view, calibrates the estimator's disparity of the
/// unedited render against it, builds ΔG from the edited image and merges it.
InitializationResult initialize_from_depth(const GaussianCloud& cloud, const Camera& camera, int view,
                                           const RgbImage& unedited, const RgbImage& edited, const BinaryMask& mask,
                                           DepthEstimator& estimator, const DeltaConfig& cfg = {},
                                           const RenderSettings& settings = {});

}  // namespace gsedit
