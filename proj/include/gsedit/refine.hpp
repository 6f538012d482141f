#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gsedit/oracle.hpp"
#include "gsedit/renderer.hpp"

namespace gsedit {

struct CycleSpec {
    int m = 20;          // adjacent views
    int start_t = 750;   // denoising start for the cycle's view edits
    int iters = 500;     // fine-tuning iterations
};

/// Throws Input errors unless start timesteps are non-increasing, m ≥ 1 and
/// iters ≥ 1.
void validate_cycles(const std::vector<CycleSpec>& cycles);

struct LossConfig {
    double l1 = 1.0;
    double perceptual = 0.2;
    PerceptualMetric* perceptual_oracle = nullptr;  // term skipped when null

    void validate() const;
};

/// Adam learning rates per parameter group. Means move directly (scaled by
/// scene_scale), colors directly, opacity as a logit, scale as a log, and the
/// raw quaternion which is renormalized after each step.
struct OptimizerConfig {
    double lr_mean = 1.6e-4;
    double lr_color = 2.5e-3;
    double lr_opacity = 5e-2;
    double lr_scale = 5e-3;
    double lr_rotation = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-15;
    double scene_scale = 1.0;
};

/// 1.1 × the largest distance from a camera center to their mean (1 when zero).
double camera_extent(const std::vector<Camera>& cameras);

struct EditedView {
    int view = 0;
    RgbImage original;
    RgbImage coarse;
    RgbImage refined;
};

/// The m views whose camera centers are nearest the frontal one, nearest
/// first, ties by index. Throws Contract unless 1 ≤ m ≤ views − 1.
std::vector<int> select_adjacent(const std::vector<Camera>& cameras, int frontal, int m);

/// Editor call conditioned on both images; start_t = 0 returns the coarse image
/// without consulting the editor.
RgbImage refine_view(const RgbImage& original, const RgbImage& coarse, const std::string& prompt, int start_t,
                     double guidance, Editor& editor, int view, std::uint64_t seed);

struct LossValue {
    double total = 0.0;
    double l1 = 0.0;
    double perceptual = 0.0;
};

/// Weighted mean-absolute-error plus perceptual term; fills `grad` (same shape)
/// with the derivative w.r.t. `rendered`.
LossValue edit_loss(const RgbImage& rendered, const RgbImage& target, const LossConfig& cfg, RgbImage* grad);

/// Called after every iteration with the global iteration number (1-based).
using FinetuneObserver = std::function<void(int iteration, const LossValue& loss, const GaussianCloud& cloud)>;

/// Adam on every parameter of every Gaussian, visiting the views round-robin,
/// one view per iteration. The Gaussian count never changes. Throws Numeric
/// on a non-finite loss.
GaussianCloud finetune(const GaussianCloud& cloud, const std::vector<EditedView>& views,
                       const std::vector<Camera>& cameras, int iters, const LossConfig& loss,
                       const OptimizerConfig& optimizer, const Rgb& background = Rgb::Zero(),
                       const FinetuneObserver& observer = {}, int first_iteration = 1,
                       const RenderSettings& settings = {});

}  // namespace gsedit
