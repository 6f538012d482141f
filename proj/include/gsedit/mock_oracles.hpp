#pragma once

#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "gsedit/oracle.hpp"
#include "gsedit/scene.hpp"

namespace gsedit {

/// Blends toward a registered target inside a region, factor min(1, t/750);
/// returns the coarse image untouched outside it.
class MockEditor : public Editor {
public:
    static double blend_factor(int start_t);

    void register_view(int view, RgbImage target, BinaryMask region);
    RgbImage edit(const EditQuery& query) override;

private:
    std::map<int, std::pair<RgbImage, BinaryMask>> specs_;
};

/// Seeded Gaussian base tensor keyed by (seed, view, tau); a non-empty prompt
/// adds the view's registered blob to channel 0.
class MockNoisePredictor : public NoisePredictor {
public:
    explicit MockNoisePredictor(int channels = 4, int latent_stride = 1);

    int channels() const { return channels_; }
    int latent_stride() const { return stride_; }

    /// `blob` is at latent resolution.
    void register_view(int view, ScalarImage blob);
    Tensor predict_noise(const NoiseQuery& query) override;

private:
    int channels_;
    int stride_;
    std::map<int, ScalarImage> blobs_;
};

/// Returns (δ_true − b0)/a0 for the registered image of the view closest to
/// the queried one.
class MockDepth : public DepthEstimator {
public:
    MockDepth(double a0 = 1.0, double b0 = 0.0);

    double a0() const { return a0_; }
    double b0() const { return b0_; }

    void register_image(int view, RgbImage image, ScalarImage true_disparity);
    ScalarImage disparity(const RgbImage& image, int view) override;

private:
    double a0_, b0_;
    std::multimap<int, std::pair<RgbImage, ScalarImage>> entries_;
};

/// Mean squared error after 2×2 average pooling.
class MockPerceptual : public PerceptualMetric {
public:
    double distance(const RgbImage& rendered, const RgbImage& target, RgbImage* grad) override;
};

/// Scene-level description of the edit the mocks pretend to perform.
struct MockRecipe {
    std::vector<std::pair<std::size_t, Rgb>> recolor;  // (gaussian index, new color)
    std::vector<Gaussian> added;
    double depth_a0 = 2.5;
    double depth_b0 = -0.3;
    double blob_amplitude = 2.0;
    int latent_channels = 4;
    Rgb background = Rgb::Zero();
};

GaussianCloud apply_recipe(const GaussianCloud& cloud, const MockRecipe& recipe);

/// Mocks wired to one scene: per view, the editor target is the render of the
/// edited scene, its region is where that render differs from the original by
/// more than 1e-3, and the noise blob covers pixels differing by more than a
/// tenth of the view's largest difference.
class MockSuite {
public:
    MockSuite(const GaussianCloud& cloud, const std::vector<Camera>& cameras, const MockRecipe& recipe);
    MockSuite(const MockSuite&) = delete;
    MockSuite& operator=(const MockSuite&) = delete;

    Oracles oracles();

    const std::vector<RgbImage>& targets() const { return targets_; }
    const std::vector<RgbImage>& originals() const { return originals_; }
    const std::vector<BinaryMask>& edit_regions() const { return regions_; }

    MockEditor editor;
    MockNoisePredictor noise;
    MockDepth depth;
    MockPerceptual perceptual;

private:
    std::vector<RgbImage> originals_;
    std::vector<RgbImage> targets_;
    std::vector<BinaryMask> regions_;
};

/// Disparity 1/D where alpha ≥ 0.5 and D > 0, zero elsewhere.
ScalarImage disparity_from_render(const ScalarImage& depth, const ScalarImage& alpha);

}  // namespace gsedit
