#include "gsedit/scene.hpp"

#include <cmath>
#include <string>

namespace gsedit {

Mat3 rotation_matrix(const Quat& q) {
    const Quat n = q / q.norm();
    const double w = n[0], x = n[1], y = n[2], z = n[3];
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

Mat3 covariance(const Gaussian& g) {
    const Mat3 rs = rotation_matrix(g.rotation) * g.scale.asDiagonal();
    return rs * rs.transpose();
}

void validate(const Gaussian& g, std::size_t index) {
    const std::string where = " (gaussian " + std::to_string(index) + ")";
    const bool finite = g.mean.allFinite() && g.rotation.allFinite() && g.scale.allFinite() &&
                        std::isfinite(g.opacity) && g.color.allFinite();
    if (!finite) fail(ErrorKind::Data, "non-finite parameter" + where);
    if (std::abs(g.rotation.norm() - 1.0) > 1e-6) fail(ErrorKind::Data, "quaternion is not unit length" + where);
    if ((g.scale.array() <= 0.0).any()) fail(ErrorKind::Data, "scale must be positive" + where);
    if (!(g.opacity > 0.0 && g.opacity <= 1.0)) fail(ErrorKind::Data, "opacity outside (0, 1]" + where);
    if ((g.color.array() < 0.0).any() || (g.color.array() > 1.0).any())
        fail(ErrorKind::Data, "color outside [0, 1]" + where);
}

GaussianCloud::GaussianCloud(std::vector<Gaussian> gaussians)
    : gaussians_(std::move(gaussians)), added_(gaussians_.size(), false) {}

GaussianCloud::GaussianCloud(std::vector<Gaussian> gaussians, std::vector<bool> added)
    : gaussians_(std::move(gaussians)), added_(std::move(added)) {
    require(added_.size() == gaussians_.size(), "source marker length must equal gaussian count");
}

void GaussianCloud::push_back(const Gaussian& g, bool added) {
    gaussians_.push_back(g);
    added_.push_back(added);
}

void GaussianCloud::validate() const {
    for (std::size_t i = 0; i < gaussians_.size(); ++i) gsedit::validate(gaussians_[i], i);
}

GaussianCloud merge(const GaussianCloud& cloud, const GaussianCloud& delta) {
    GaussianCloud out = cloud;
    for (const Gaussian& g : delta.gaussians()) out.push_back(g, true);
    return out;
}

Camera::Camera(const Intrinsics& intrinsics, const Mat3& world_to_camera, const Vec3& translation, int width,
               int height)
    : intrinsics_(intrinsics), rotation_(world_to_camera), translation_(translation), width_(width), height_(height) {
    if (!(intrinsics.fx > 0.0 && intrinsics.fy > 0.0)) fail(ErrorKind::Data, "focal lengths must be positive");
    if (width < 1 || height < 1) fail(ErrorKind::Data, "camera resolution must be at least 1x1");
    const double orthogonality = (rotation_ * rotation_.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (orthogonality > 1e-6 || std::abs(rotation_.determinant() - 1.0) > 1e-6)
        fail(ErrorKind::Data, "camera rotation is not a proper rotation");
}

Camera Camera::from_camera_to_world(const Intrinsics& intrinsics, const Mat4& c2w, int width, int height) {
    const Mat3 r_c2w = c2w.topLeftCorner<3, 3>();
    const Vec3 center = c2w.topRightCorner<3, 1>();
    const Mat3 r_w2c = r_c2w.transpose();
    return Camera(intrinsics, r_w2c, -r_w2c * center, width, height);
}

Camera Camera::look_at(const Intrinsics& intrinsics, const Vec3& eye, const Vec3& target, const Vec3& up,
                       int width, int height) {
    const Vec3 forward = (target - eye).normalized();
    // Image y points down: the camera y axis is -up made orthogonal to forward.
    const Vec3 down = (-up + up.dot(forward) * forward).normalized();
    const Vec3 right = down.cross(forward);
    Mat3 r_w2c;
    r_w2c.row(0) = right.transpose();
    r_w2c.row(1) = down.transpose();
    r_w2c.row(2) = forward.transpose();
    return Camera(intrinsics, r_w2c, -r_w2c * eye, width, height);
}

Mat4 Camera::camera_to_world() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation_.transpose();
    m.topRightCorner<3, 1>() = position();
    return m;
}

}  // namespace gsedit
