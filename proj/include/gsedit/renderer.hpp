#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "gsedit/image.hpp"
#include "gsedit/scene.hpp"

namespace gsedit {

struct RenderSettings {
    double near_plane = 0.01;
    double low_pass = 0.3;            // px², added to the 2D covariance diagonal
    double max_sigma = 0.99;          // per-splat opacity clamp
    double min_transmittance = 1e-4;  // stop compositing once transmittance falls below
    // Splats are ignored where the Mahalanobis power exceeds this (exp(-34.5) ~ 1e-15).
    double cutoff_power = 69.0;
};

/// A Gaussian projected into image space.
struct SplattedGaussian {
    std::size_t source = 0;  // index in the cloud
    Vec2 pixel_mean = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity();
    Mat2 conic = Mat2::Identity();  // cov2d⁻¹
    double view_depth = 0.0;        // camera-frame z
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
    // Inclusive pixel bounds of the region where the splat can contribute.
    int x_min = 0, x_max = -1, y_min = 0, y_max = -1;
};

/// EWA projection: pixel_mean = K·(camera point)/z, cov2d = J W Σ Wᵀ Jᵀ + low_pass·I.
/// Empty when the mean is not beyond the near plane or cov2d is degenerate.
std::optional<SplattedGaussian> project(const Camera& camera, const Gaussian& g,
                                        const RenderSettings& settings = {});

/// σ = α·exp(-½ Δᵀ cov2d⁻¹ Δ), clamped to max_sigma; zero beyond the cutoff.
double splat_sigma(const SplattedGaussian& splat, const Vec2& pixel, const RenderSettings& settings = {});

struct RenderOutput {
    RgbImage color;
    ScalarImage depth;  // Σ d_i σ_i T_i, no background term
    ScalarImage alpha;  // 1 - residual transmittance
};

/// Front-to-back alpha compositing of all splats sorted by view depth.
RenderOutput render(const GaussianCloud& cloud, const Camera& camera, const Rgb& background = Rgb::Zero(),
                    const RenderSettings& settings = {});

/// Calls `visit(pixel_index, gaussian_index, weight)` for every compositing
/// weight σ_i·T_i in front-to-back order per pixel; pixels are visited in
/// row-major order.
using ContributionVisitor = std::function<void(std::size_t, std::size_t, double)>;
void for_each_contribution(const GaussianCloud& cloud, const Camera& camera, const ContributionVisitor& visit,
                           const RenderSettings& settings = {});

/// Composites a per-Gaussian scalar in place of color (no background).
ScalarImage render_gaussian_values(const GaussianCloud& cloud, std::span<const double> values,
                                   const Camera& camera, const RenderSettings& settings = {});

struct GaussianGradients {
    std::vector<Vec3> mean;
    std::vector<Quat> rotation;  // w.r.t. the stored (unit) quaternion
    std::vector<Vec3> scale;
    std::vector<double> opacity;
    std::vector<Vec3> color;

    explicit GaussianGradients(std::size_t n = 0)
        : mean(n, Vec3::Zero()), rotation(n, Quat::Zero()), scale(n, Vec3::Zero()), opacity(n, 0.0),
          color(n, Vec3::Zero()) {}
};

/// Analytic gradients of Σ_p ⟨grad_color(p), C(p)⟩ + grad_depth(p)·D(p) with
/// respect to every Gaussian parameter. Recomputes the forward pass.
GaussianGradients backward(const GaussianCloud& cloud, const Camera& camera, const RgbImage& grad_color,
                           const ScalarImage& grad_depth, const Rgb& background = Rgb::Zero(),
                           const RenderSettings& settings = {});

}  // namespace gsedit
