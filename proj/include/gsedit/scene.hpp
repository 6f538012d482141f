#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <vector>

#include "gsedit/error.hpp"

namespace gsedit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Quaternion stored as (w, x, y, z).
using Quat = Eigen::Vector4d;

inline Quat identity_quat() { return Quat(1.0, 0.0, 0.0, 0.0); }

/// Rotation matrix of the normalized quaternion q / |q|.
Mat3 rotation_matrix(const Quat& q);

/// One 3D Gaussian with activated parameters.
struct Gaussian {
    Vec3 mean = Vec3::Zero();
    Quat rotation = identity_quat();  // unit quaternion
    Vec3 scale = Vec3::Ones();        // standard deviations along local axes, > 0
    double opacity = 1.0;             // in (0, 1]
    Vec3 color = Vec3::Zero();        // DC RGB in [0, 1]
};

/// Σ = R S Sᵀ Rᵀ with S = diag(scale).
Mat3 covariance(const Gaussian& g);

/// Throws Data errors naming `index` when a Gaussian violates its invariants.
void validate(const Gaussian& g, std::size_t index = 0);

/// Ordered set of Gaussians plus a per-point flag marking points created by
/// depth initialization.
class GaussianCloud {
public:
    GaussianCloud() = default;
    explicit GaussianCloud(std::vector<Gaussian> gaussians);
    GaussianCloud(std::vector<Gaussian> gaussians, std::vector<bool> added);

    std::size_t size() const { return gaussians_.size(); }
    bool empty() const { return gaussians_.empty(); }

    const Gaussian& operator[](std::size_t i) const { return gaussians_[i]; }
    Gaussian& operator[](std::size_t i) { return gaussians_[i]; }

    const std::vector<Gaussian>& gaussians() const { return gaussians_; }
    std::vector<Gaussian>& gaussians() { return gaussians_; }

    bool is_added(std::size_t i) const { return added_[i]; }
    const std::vector<bool>& added_flags() const { return added_; }

    void push_back(const Gaussian& g, bool added = false);

    void validate() const;

private:
    std::vector<Gaussian> gaussians_;
    std::vector<bool> added_;
};

/// Concatenation of `cloud` and `delta`; every delta point is flagged added.
GaussianCloud merge(const GaussianCloud& cloud, const GaussianCloud& delta);

struct Intrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
};

/// Pinhole camera: x right, y down, z forward. Pixel (u, v) has its center at
/// integer coordinates, so a point on the optical axis lands on (cx, cy).
class Camera {
public:
    Camera() = default;
    /// `world_to_camera` rotation must be orthonormal with det +1.
    Camera(const Intrinsics& intrinsics, const Mat3& world_to_camera, const Vec3& translation, int width,
           int height);

    static Camera from_camera_to_world(const Intrinsics& intrinsics, const Mat4& c2w, int width, int height);

    /// Camera at `eye` looking at `target`; `up` is the approximate world up.
    static Camera look_at(const Intrinsics& intrinsics, const Vec3& eye, const Vec3& target, const Vec3& up,
                          int width, int height);

    const Intrinsics& intrinsics() const { return intrinsics_; }
    const Mat3& rotation() const { return rotation_; }
    const Vec3& translation() const { return translation_; }
    int width() const { return width_; }
    int height() const { return height_; }

    /// Camera center in world coordinates.
    Vec3 position() const { return -rotation_.transpose() * translation_; }

    Vec3 to_camera(const Vec3& world) const { return rotation_ * world + translation_; }
    Vec3 to_world(const Vec3& camera_point) const {
        return rotation_.transpose() * (camera_point - translation_);
    }

    Mat4 camera_to_world() const;

private:
    Intrinsics intrinsics_;
    Mat3 rotation_ = Mat3::Identity();
    Vec3 translation_ = Vec3::Zero();
    int width_ = 1;
    int height_ = 1;
};

}  // namespace gsedit
