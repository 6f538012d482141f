#include "gsedit/localization.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace gsedit {

namespace fs = std::filesystem;

void LocalizationConfig::validate() const {
    if (tau < 1 || tau > kNumTimesteps) fail(ErrorKind::Input, "tau must lie in [1, 1000]");
    if (!(gamma >= 0.0 && gamma <= 1.0)) fail(ErrorKind::Input, "gamma must lie in [0, 1]");
    if (!(filter_sigma >= 0.0)) fail(ErrorKind::Input, "filter sigma must be non-negative");
    if (!(vote_threshold > 0.0 && vote_threshold < 1.0)) fail(ErrorKind::Input, "vote threshold must lie in (0, 1)");
}

std::size_t Mask2D::pixel_sum() const {
    return static_cast<std::size_t>(std::count_if(values.data().begin(), values.data().end(), [](auto v) { return v != 0; }));
}

std::size_t Mask3D::count() const {
    return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](auto v) { return v != 0; }));
}

ScalarImage channel_mean_abs_difference(const Tensor& cond, const Tensor& uncond) {
    require(cond.same_shape(uncond), "noise predictions differ in shape");
    require(cond.channels > 0, "noise prediction has no channels");
    ScalarImage out(cond.width, cond.height, 0.0);
    for (int c = 0; c < cond.channels; ++c)
        for (int y = 0; y < cond.height; ++y)
            for (int x = 0; x < cond.width; ++x) out.at(x, y) += std::abs(cond.at(c, y, x) - uncond.at(c, y, x));
    for (double& v : out.data()) v /= cond.channels;
    return out;
}

ScalarImage resize_bilinear(const ScalarImage& in, int width, int height) {
    require(!in.empty(), "cannot resize an empty grid");
    if (in.same_shape(width, height)) return in;
    ScalarImage out(width, height);
    const double sx = static_cast<double>(in.width()) / width, sy = static_cast<double>(in.height()) / height;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, in.height() - 1.0);
        const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, in.height() - 1);
        const double ty = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, in.width() - 1.0);
            const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, in.width() - 1);
            const double tx = fx - x0;
            const double top = (1 - tx) * in.at(x0, y0) + tx * in.at(x1, y0);
            const double bottom = (1 - tx) * in.at(x0, y1) + tx * in.at(x1, y1);
            out.at(x, y) = (1 - ty) * top + ty * bottom;
        }
    }
    return out;
}

ScalarImage normalize_min_max(const ScalarImage& image) {
    ScalarImage out(image.width(), image.height(), 0.0);
    if (image.empty()) return out;
    const auto [lo, hi] = std::minmax_element(image.data().begin(), image.data().end());
    const double range = *hi - *lo;
    if (!(range > 0.0)) return out;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (image[i] - *lo) / range;
    return out;
}

ScalarImage gaussian_blur(const ScalarImage& image, double sigma) {
    if (!(sigma > 0.0) || image.empty()) return image;
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * r + 1);
    for (int k = -r; k <= r; ++k) kernel[k + r] = std::exp(-0.5 * k * k / (sigma * sigma));

    auto pass = [&](const ScalarImage& src, bool horizontal) {
        ScalarImage dst(src.width(), src.height());
        for (int y = 0; y < src.height(); ++y) {
            for (int x = 0; x < src.width(); ++x) {
                double acc = 0.0, norm = 0.0;
                for (int k = -r; k <= r; ++k) {
                    const int sx = horizontal ? x + k : x, sy = horizontal ? y : y + k;
                    if (sx < 0 || sy < 0 || sx >= src.width() || sy >= src.height()) continue;
                    acc += kernel[k + r] * src.at(sx, sy);
                    norm += kernel[k + r];
                }
                dst.at(x, y) = acc / norm;
            }
        }
        return dst;
    };
    return pass(pass(image, true), false);
}

ScalarImage relevance_from_noise(const Tensor& cond, const Tensor& uncond, int width, int height) {
    return normalize_min_max(resize_bilinear(channel_mean_abs_difference(cond, uncond), width, height));
}

Mask2D smooth_and_threshold(const ScalarImage& relevance, const LocalizationConfig& cfg, int view_index) {
    const ScalarImage blurred = gaussian_blur(relevance, cfg.filter_sigma);
    Mask2D m;
    m.view_index = view_index;
    m.raw_relevance = relevance;
    m.values = BinaryMask(relevance.width(), relevance.height(), 0);
    for (std::size_t i = 0; i < blurred.size(); ++i) m.values[i] = blurred[i] >= cfg.gamma ? 1 : 0;
    return m;
}

Mask2D locate_2d(const RgbImage& image, int view_index, const std::string& prompt, NoisePredictor& oracle,
                 const LocalizationConfig& cfg, std::uint64_t seed) {
    NoiseQuery q{&image, prompt, cfg.tau, seed, view_index};
    Tensor cond, uncond;
    try {
        cond = oracle.predict_noise(q);
        q.prompt.clear();
        uncond = oracle.predict_noise(q);
    } catch (const Error& e) {
        throw Error(e.kind(), "locate view " + std::to_string(view_index) + ": " + e.what());
    }
    if (!cond.same_shape(uncond))
        fail(ErrorKind::Oracle, "locate view " + std::to_string(view_index) + ": noise predictions differ in shape");
    const ScalarImage raw = resize_bilinear(channel_mean_abs_difference(cond, uncond), image.width(), image.height());
    Mask2D m = smooth_and_threshold(normalize_min_max(raw), cfg, view_index);
    m.raw_relevance = raw;
    return m;
}

Mask3D inverse_render_masks(const GaussianCloud& cloud, const std::vector<Camera>& cameras,
                            const std::vector<Mask2D>& masks, const LocalizationConfig& cfg,
                            const RenderSettings& settings) {
    require(!masks.empty(), "inverse rendering needs at least one mask");
    std::vector<double> num(cloud.size(), 0.0), den(cloud.size(), 0.0);
    for (const Mask2D& m : masks) {
        require(m.view_index >= 0 && static_cast<std::size_t>(m.view_index) < cameras.size(),
                "mask refers to unknown view " + std::to_string(m.view_index));
        const Camera& cam = cameras[m.view_index];
        require(m.values.same_shape(cam.width(), cam.height()),
                "mask of view " + std::to_string(m.view_index) + " does not match the camera resolution");
        for_each_contribution(
            cloud, cam,
            [&](std::size_t pixel, std::size_t g, double w) {
                den[g] += w;
                if (m.values[pixel]) num[g] += w;
            },
            settings);
    }
    Mask3D out;
    out.values.resize(cloud.size());
    out.scores.resize(cloud.size());
    out.vote_weights = den;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        out.scores[i] = den[i] > 0.0 ? num[i] / den[i] : 0.0;
        out.values[i] = out.scores[i] >= cfg.vote_threshold ? 1 : 0;
    }
    return out;
}

std::size_t select_frontal(const std::vector<Mask2D>& masks) {
    require(!masks.empty(), "select_frontal needs at least one mask");
    std::size_t best = 0, best_sum = 0;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        const std::size_t s = masks[i].pixel_sum();
        if (s > best_sum) {
            best = i;
            best_sum = s;
        }
    }
    if (best_sum == 0) fail(ErrorKind::LocalizationFailed, "localization found no edit region in any view");
    return best;
}

void save_mask2d(const Mask2D& mask, const fs::path& png_path, const LocalizationConfig& cfg) {
    write_mask_png(png_path, mask.values);
    fs::path sidecar = png_path;
    sidecar.replace_extension(".json");
    std::ofstream out(sidecar);
    if (!out) fail(ErrorKind::Input, "cannot write " + sidecar.string());
    out << nlohmann::json{{"view_index", mask.view_index}, {"gamma", cfg.gamma}, {"tau", cfg.tau}}.dump(2) << "\n";
}

Mask2D load_mask2d(const fs::path& png_path) {
    if (!fs::exists(png_path)) fail(ErrorKind::Input, "mask file not found: " + png_path.string());
    Mask2D m;
    m.values = read_mask_png(png_path);
    fs::path sidecar = png_path;
    sidecar.replace_extension(".json");
    std::ifstream in(sidecar);
    if (!in) fail(ErrorKind::Input, "mask sidecar not found: " + sidecar.string());
    try {
        m.view_index = nlohmann::json::parse(in).at("view_index").get<int>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, sidecar.string() + ": " + e.what());
    }
    return m;
}

void save_mask3d(const Mask3D& mask, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Input, "cannot write " + path.string());
    std::uint64_t n = mask.values.size();
    unsigned char header[8];
    for (int i = 0; i < 8; ++i) header[i] = static_cast<unsigned char>(n >> (8 * i));
    out.write(reinterpret_cast<const char*>(header), 8);
    out.write(reinterpret_cast<const char*>(mask.values.data()), static_cast<std::streamsize>(n));
    if (!out) fail(ErrorKind::Input, "failed writing " + path.string());
}

Mask3D load_mask3d(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Input, "3D mask file not found: " + path.string());
    unsigned char header[8];
    in.read(reinterpret_cast<char*>(header), 8);
    if (!in) fail(ErrorKind::Format, path.string() + ": truncated count header");
    std::uint64_t n = 0;
    for (int i = 0; i < 8; ++i) n |= static_cast<std::uint64_t>(header[i]) << (8 * i);
    if (n > fs::file_size(path) - 8) fail(ErrorKind::Format, path.string() + ": fewer bytes than the count header states");
    Mask3D m;
    m.values.resize(n);
    in.read(reinterpret_cast<char*>(m.values.data()), static_cast<std::streamsize>(n));
    if (!in) fail(ErrorKind::Format, path.string() + ": fewer bytes than the count header states");
    for (auto& v : m.values) v = v ? 1 : 0;
    m.scores.assign(m.values.begin(), m.values.end());
    return m;
}

}  // namespace gsedit
