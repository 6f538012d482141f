#include "gsedit/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gsedit {

namespace {

constexpr int kTileSize = 16;

// Projection Jacobian d(pixel)/d(camera point).
Eigen::Matrix<double, 2, 3> projection_jacobian(const Intrinsics& k, const Vec3& t) {
    const double z = t.z();
    Eigen::Matrix<double, 2, 3> j;
    j << k.fx / z, 0.0, -k.fx * t.x() / (z * z),
         0.0, k.fy / z, -k.fy * t.y() / (z * z);
    return j;
}

// Splats sorted front to back, binned into tiles.
struct Raster {
    std::vector<SplattedGaussian> splats;
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<std::vector<std::uint32_t>> tiles;  // indices into `splats`, depth order
};

Raster prepare(const GaussianCloud& cloud, const Camera& camera, const RenderSettings& settings) {
    Raster r;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (auto s = project(camera, cloud[i], settings)) {
            s->source = i;
            r.splats.push_back(*s);
        }
    }
    std::stable_sort(r.splats.begin(), r.splats.end(),
                     [](const SplattedGaussian& a, const SplattedGaussian& b) { return a.view_depth < b.view_depth; });

    r.tiles_x = (camera.width() + kTileSize - 1) / kTileSize;
    r.tiles_y = (camera.height() + kTileSize - 1) / kTileSize;
    r.tiles.resize(static_cast<std::size_t>(r.tiles_x) * r.tiles_y);
    for (std::size_t s = 0; s < r.splats.size(); ++s) {
        const SplattedGaussian& sp = r.splats[s];
        if (sp.x_min > sp.x_max || sp.y_min > sp.y_max) continue;
        for (int ty = sp.y_min / kTileSize; ty <= sp.y_max / kTileSize; ++ty)
            for (int tx = sp.x_min / kTileSize; tx <= sp.x_max / kTileSize; ++tx)
                r.tiles[static_cast<std::size_t>(ty) * r.tiles_x + tx].push_back(static_cast<std::uint32_t>(s));
    }
    return r;
}

struct Contribution {
    std::uint32_t splat;
    double sigma;
    double transmittance;  // T before this splat
    double gaussian;       // G(x'), unclamped falloff
    bool clamped;
};

// Front-to-back traversal of one pixel; returns the residual transmittance.
template <typename Visit>
double composite_pixel(const Raster& r, int x, int y, const RenderSettings& settings, Visit visit) {
    const auto& list = r.tiles[static_cast<std::size_t>(y / kTileSize) * r.tiles_x + x / kTileSize];
    const Vec2 pixel(x, y);
    double transmittance = 1.0;
    for (std::uint32_t s : list) {
        const SplattedGaussian& sp = r.splats[s];
        if (x < sp.x_min || x > sp.x_max || y < sp.y_min || y > sp.y_max) continue;
        const Vec2 d = pixel - sp.pixel_mean;
        const double power = d.dot(sp.conic * d);
        if (power > settings.cutoff_power) continue;
        if (transmittance < settings.min_transmittance) break;
        const double g = std::exp(-0.5 * power);
        const double raw = sp.opacity * g;
        const bool clamped = raw > settings.max_sigma;
        const double sigma = clamped ? settings.max_sigma : raw;
        visit(Contribution{s, sigma, transmittance, g, clamped});
        transmittance *= 1.0 - sigma;
    }
    return transmittance;
}

Mat3 rotation_derivative(const Quat& n, int k) {
    const double w = n[0], x = n[1], y = n[2], z = n[3];
    Mat3 d;
    switch (k) {
        case 0: d << 0, -z, y, z, 0, -x, -y, x, 0; break;
        case 1: d << 0, y, z, y, -2 * x, -w, z, w, -2 * x; break;
        case 2: d << -2 * y, x, w, x, 0, z, -w, z, -2 * y; break;
        default: d << -2 * z, -w, x, w, -2 * z, y, x, y, 0; break;
    }
    return 2.0 * d;
}

}  // namespace

std::optional<SplattedGaussian> project(const Camera& camera, const Gaussian& g, const RenderSettings& settings) {
    const Vec3 t = camera.to_camera(g.mean);
    if (t.z() <= settings.near_plane) return std::nullopt;

    const Intrinsics& k = camera.intrinsics();
    const auto j = projection_jacobian(k, t);
    const Mat3 w = camera.rotation();
    const Mat2 cov2d = j * w * covariance(g) * w.transpose() * j.transpose() + settings.low_pass * Mat2::Identity();
    const double det = cov2d.determinant();
    if (!(det > 0.0) || !std::isfinite(det)) return std::nullopt;

    SplattedGaussian s;
    s.pixel_mean = Vec2(k.fx * t.x() / t.z() + k.cx, k.fy * t.y() / t.z() + k.cy);
    s.cov2d = cov2d;
    s.conic = cov2d.inverse();
    s.view_depth = t.z();
    s.opacity = g.opacity;
    s.color = g.color;

    const double mid = 0.5 * (cov2d(0, 0) + cov2d(1, 1));
    const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
    const double radius = std::sqrt(settings.cutoff_power * lambda_max);
    const auto lo = [](double v) { return static_cast<int>(std::floor(std::max(v, -1e9))); };
    const auto hi = [](double v) { return static_cast<int>(std::ceil(std::min(v, 1e9))); };
    s.x_min = std::max(0, lo(s.pixel_mean.x() - radius));
    s.x_max = std::min(camera.width() - 1, hi(s.pixel_mean.x() + radius));
    s.y_min = std::max(0, lo(s.pixel_mean.y() - radius));
    s.y_max = std::min(camera.height() - 1, hi(s.pixel_mean.y() + radius));
    return s;
}

double splat_sigma(const SplattedGaussian& splat, const Vec2& pixel, const RenderSettings& settings) {
    const Vec2 d = pixel - splat.pixel_mean;
    const double power = d.dot(splat.conic * d);
    if (power > settings.cutoff_power) return 0.0;
    return std::min(splat.opacity * std::exp(-0.5 * power), settings.max_sigma);
}

RenderOutput render(const GaussianCloud& cloud, const Camera& camera, const Rgb& background,
                    const RenderSettings& settings) {
    const int w = camera.width(), h = camera.height();
    RenderOutput out{RgbImage(w, h, background), ScalarImage(w, h, 0.0), ScalarImage(w, h, 0.0)};
    const Raster r = prepare(cloud, camera, settings);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            Rgb color = Rgb::Zero();
            double depth = 0.0;
            const double t_final = composite_pixel(r, x, y, settings, [&](const Contribution& c) {
                const SplattedGaussian& sp = r.splats[c.splat];
                const double weight = c.sigma * c.transmittance;
                color += weight * sp.color;
                depth += weight * sp.view_depth;
            });
            out.color.at(x, y) = color + t_final * background;
            out.depth.at(x, y) = depth;
            out.alpha.at(x, y) = 1.0 - t_final;
        }
    }
    return out;
}

void for_each_contribution(const GaussianCloud& cloud, const Camera& camera, const ContributionVisitor& visit,
                           const RenderSettings& settings) {
    const Raster r = prepare(cloud, camera, settings);
    for (int y = 0; y < camera.height(); ++y) {
        for (int x = 0; x < camera.width(); ++x) {
            const std::size_t pixel = static_cast<std::size_t>(y) * camera.width() + x;
            composite_pixel(r, x, y, settings, [&](const Contribution& c) {
                visit(pixel, r.splats[c.splat].source, c.sigma * c.transmittance);
            });
        }
    }
}

ScalarImage render_gaussian_values(const GaussianCloud& cloud, std::span<const double> values, const Camera& camera,
                                   const RenderSettings& settings) {
    require(values.size() == cloud.size(), "per-Gaussian value count must equal cloud size");
    ScalarImage image(camera.width(), camera.height(), 0.0);
    for_each_contribution(
        cloud, camera, [&](std::size_t pixel, std::size_t gaussian, double weight) {
            image[pixel] += weight * values[gaussian];
        },
        settings);
    return image;
}

GaussianGradients backward(const GaussianCloud& cloud, const Camera& camera, const RgbImage& grad_color,
                           const ScalarImage& grad_depth, const Rgb& background, const RenderSettings& settings) {
    const int w = camera.width(), h = camera.height();
    require(grad_color.same_shape(w, h), "color gradient size does not match the camera resolution");
    require(grad_depth.empty() || grad_depth.same_shape(w, h),
            "depth gradient size does not match the camera resolution");
    const bool has_depth = !grad_depth.empty();

    const Raster r = prepare(cloud, camera, settings);
    const std::size_t n = r.splats.size();
    std::vector<Vec2> g_mean2d(n, Vec2::Zero());
    std::vector<Mat2> g_conic(n, Mat2::Zero());
    std::vector<double> g_depth(n, 0.0), g_opacity(n, 0.0);
    std::vector<Vec3> g_color(n, Vec3::Zero());

    std::vector<Contribution> chain;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Rgb& gc = grad_color.at(x, y);
            const double gd = has_depth ? grad_depth.at(x, y) : 0.0;
            if (gc.isZero(0.0) && gd == 0.0) continue;

            chain.clear();
            const double t_final =
                composite_pixel(r, x, y, settings, [&](const Contribution& c) { chain.push_back(c); });

            // Suffix sums of what lies behind each splat, including the background.
            Rgb behind_color = t_final * background;
            double behind_depth = 0.0;
            const Vec2 pixel(x, y);
            for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
                const Contribution& c = *it;
                const SplattedGaussian& sp = r.splats[c.splat];
                const double weight = c.sigma * c.transmittance;
                const double inv = 1.0 / (1.0 - c.sigma);

                g_color[c.splat] += weight * gc;
                g_depth[c.splat] += weight * gd;
                const double d_sigma = gc.dot(c.transmittance * sp.color - behind_color * inv) +
                                       gd * (c.transmittance * sp.view_depth - behind_depth * inv);
                behind_color += weight * sp.color;
                behind_depth += weight * sp.view_depth;

                if (c.clamped) continue;
                g_opacity[c.splat] += d_sigma * c.gaussian;
                const double d_g = d_sigma * sp.opacity;
                const Vec2 delta = pixel - sp.pixel_mean;
                // G = exp(-½ Δᵀ A Δ), Δ = p - μ
                g_mean2d[c.splat] += d_g * c.gaussian * (sp.conic * delta);
                g_conic[c.splat] += -0.5 * d_g * c.gaussian * (delta * delta.transpose());
            }
        }
    }

    GaussianGradients grads(cloud.size());
    const Intrinsics& k = camera.intrinsics();
    const Mat3 wr = camera.rotation();
    for (std::size_t s = 0; s < n; ++s) {
        const SplattedGaussian& sp = r.splats[s];
        const Gaussian& g = cloud[sp.source];
        const std::size_t i = sp.source;
        grads.color[i] = g_color[s];
        grads.opacity[i] = g_opacity[s];

        const Mat2 g_cov2d = -sp.conic * g_conic[s] * sp.conic;
        const Vec3 t = camera.to_camera(g.mean);
        const auto j = projection_jacobian(k, t);
        const Mat3 sigma3 = covariance(g);
        const Mat3 m = wr * sigma3 * wr.transpose();

        // cov2d = J M Jᵀ + λI
        const Mat3 g_m = j.transpose() * g_cov2d * j;
        const Eigen::Matrix<double, 2, 3> g_j = (g_cov2d + g_cov2d.transpose()) * j * m;

        const double z = t.z(), z2 = z * z, z3 = z2 * z;
        Vec3 g_t = j.transpose() * g_mean2d[s];
        g_t.z() += g_depth[s];
        g_t.x() += g_j(0, 2) * (-k.fx / z2);
        g_t.y() += g_j(1, 2) * (-k.fy / z2);
        g_t.z() += g_j(0, 0) * (-k.fx / z2) + g_j(0, 2) * (2.0 * k.fx * t.x() / z3) + g_j(1, 1) * (-k.fy / z2) +
                   g_j(1, 2) * (2.0 * k.fy * t.y() / z3);
        grads.mean[i] = wr.transpose() * g_t;

        // Σ = R D Rᵀ, D = diag(s²)
        const Mat3 g_sigma = wr.transpose() * g_m * wr;
        const Mat3 rot = rotation_matrix(g.rotation);
        const Vec3 s2 = g.scale.cwiseProduct(g.scale);
        const Mat3 g_d = rot.transpose() * g_sigma * rot;
        for (int a = 0; a < 3; ++a) grads.scale[i][a] = g_d(a, a) * 2.0 * g.scale[a];

        const Mat3 g_rot = (g_sigma + g_sigma.transpose()) * rot * s2.asDiagonal();
        const double qn = g.rotation.norm();
        const Quat unit = g.rotation / qn;
        Quat g_unit;
        for (int c = 0; c < 4; ++c) g_unit[c] = g_rot.cwiseProduct(rotation_derivative(unit, c)).sum();
        grads.rotation[i] = (g_unit - unit * unit.dot(g_unit)) / qn;
    }
    return grads;
}

}  // namespace gsedit
