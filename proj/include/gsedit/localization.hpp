#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gsedit/oracle.hpp"
#include "gsedit/renderer.hpp"

namespace gsedit {

struct LocalizationConfig {
    int tau = 600;
    double gamma = 0.6;
    double filter_sigma = 3.0;    // pixels
    double vote_threshold = 0.6;

    void validate() const;
};

struct Mask2D {
    BinaryMask values;
    int view_index = 0;
    ScalarImage raw_relevance;  // channel-mean difference at image resolution, before normalization

    std::size_t pixel_sum() const;
};

struct Mask3D {
    std::vector<std::uint8_t> values;  // binarized membership
    std::vector<double> scores;        // normalized votes in [0, 1]
    std::vector<double> vote_weights;  // Σ compositing weight over all views

    std::size_t count() const;
};

/// Per-cell mean over channels of |cond − uncond| at tensor resolution.
ScalarImage channel_mean_abs_difference(const Tensor& cond, const Tensor& uncond);

/// Bilinear resampling with half-pixel centers (edges clamped).
ScalarImage resize_bilinear(const ScalarImage& image, int width, int height);

/// Scales to [0, 1]; a constant grid maps to all zeros.
ScalarImage normalize_min_max(const ScalarImage& image);

/// Separable Gaussian blur truncated at ceil(3σ); each output is the weighted
/// mean over the in-bounds taps. σ ≤ 0 returns the input.
ScalarImage gaussian_blur(const ScalarImage& image, double sigma);

/// Channel-mean difference, upsampled to width×height, min-max normalized.
ScalarImage relevance_from_noise(const Tensor& cond, const Tensor& uncond, int width, int height);

/// Blurs with cfg.filter_sigma, then keeps cells with value ≥ cfg.gamma.
Mask2D smooth_and_threshold(const ScalarImage& relevance, const LocalizationConfig& cfg, int view_index = 0);

/// Conditional and unconditional predictions at τ sharing one noise sample,
/// then relevance and thresholding. Oracle failures are rethrown with the view.
Mask2D locate_2d(const RgbImage& image, int view_index, const std::string& prompt, NoisePredictor& oracle,
                 const LocalizationConfig& cfg, std::uint64_t seed);

/// Each Gaussian's score is Σ w·M_v(p) / Σ w over its compositing weights in
/// every masked view; binarized at cfg.vote_threshold. Invisible Gaussians
/// score 0.
Mask3D inverse_render_masks(const GaussianCloud& cloud, const std::vector<Camera>& cameras,
                            const std::vector<Mask2D>& masks, const LocalizationConfig& cfg,
                            const RenderSettings& settings = {});

/// Position in `masks` of the largest pixel sum; ties go to the lowest position.
/// Throws LocalizationFailed when every mask is empty.
std::size_t select_frontal(const std::vector<Mask2D>& masks);

// 1-bit PNG plus a JSON sidecar {view_index, gamma, tau} next to it.
void save_mask2d(const Mask2D& mask, const std::filesystem::path& png_path, const LocalizationConfig& cfg);
Mask2D load_mask2d(const std::filesystem::path& png_path);

// uint64 little-endian count followed by one byte per Gaussian.
void save_mask3d(const Mask3D& mask, const std::filesystem::path& path);
Mask3D load_mask3d(const std::filesystem::path& path);

}  // namespace gsedit
