#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gsedit/scene.hpp"

namespace gsedit {

/// Zeroth-order spherical harmonic constant; color = 0.5 + kShC0 * f_dc.
inline constexpr double kShC0 = 0.28209479177387814;

/// Loads the standard 3DGS binary little-endian PLY layout (x,y,z, f_dc_0..2,
/// opacity, scale_0..2, rot_0..3). Higher SH bands are ignored. Opacity goes
/// through a sigmoid, scales through exp, and quaternions are normalized.
/// An optional `edit_added` property restores the source markers.
GaussianCloud load_ply(const std::filesystem::path& path);

/// Writes the same layout with f_rest_* zeroed (degree-3 slot count) and an
/// `edit_added` property carrying the source markers.
void save_ply(const GaussianCloud& cloud, const std::filesystem::path& path);

/// Raw (pre-activation) encoding of a Gaussian as stored in the PLY file.
struct RawGaussian {
    float position[3];
    float f_dc[3];
    float opacity_logit;
    float log_scale[3];
    float rotation[4];
};

RawGaussian encode_raw(const Gaussian& g);
Gaussian decode_raw(const RawGaussian& raw);

/// Snaps every parameter to the value a save/load round trip would produce.
GaussianCloud quantize_to_storage(const GaussianCloud& cloud);

struct NamedCamera {
    std::string name;
    Camera camera;
};

/// Camera manifest: {"views":[{"name","fx","fy","cx","cy","width","height",
/// "c2w":[16 floats, row-major]}]}. Camera axes follow the renderer's
/// convention (x right, y down, z forward).
std::vector<NamedCamera> load_camera_manifest(const std::filesystem::path& path);
void save_camera_manifest(const std::vector<NamedCamera>& cameras, const std::filesystem::path& path);

std::vector<Camera> cameras_of(const std::vector<NamedCamera>& named);

}  // namespace gsedit
