#include "softshadow/scene.hpp"

#include "softshadow/errors.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

namespace softshadow {

namespace {

float radians(double degrees)
{
    return static_cast<float>(degrees * std::numbers::pi / 180.0);
}

void validate(const CameraPose& pose)
{
    if (pose.width <= 0 || pose.height <= 0) {
        throw InvalidParameterError("camera image size must be positive");
    }
    if (!(pose.fov_y > 0.0 && pose.fov_y < 180.0)) {
        throw InvalidParameterError("fov_y must be in (0, 180) degrees");
    }
    if (!(pose.pitch >= 0.0 && pose.pitch < 90.0)) {
        throw InvalidParameterError("pitch must be in [0, 90) degrees");
    }
}

} // namespace

std::vector<CameraPose> canonical_poses(int width, int height)
{
    std::vector<CameraPose> poses;
    for (double yaw : {0.0, 45.0, -45.0, 90.0, -90.0}) {
        for (double pitch : {0.0, 15.0, 30.0}) {
            CameraPose pose;
            pose.yaw = yaw;
            pose.pitch = pitch;
            pose.width = width;
            pose.height = height;
            poses.push_back(pose);
        }
    }
    return poses;
}

GroundPlane resting_ground(const Mesh& mesh)
{
    if (mesh.empty()) {
        return GroundPlane{-0.5f};
    }
    return GroundPlane{mesh.bounds().lo.y()};
}

Camera::Camera(const CameraPose& pose, const Mesh& posed_mesh)
    : width_(pose.width), height_(pose.height)
{
    validate(pose);
    const float pitch = radians(pose.pitch);
    forward_ = Vec3(0.0f, -std::sin(pitch), -std::cos(pitch));
    up_ = Vec3(0.0f, std::cos(pitch), -std::sin(pitch));
    right_ = Vec3(1.0f, 0.0f, 0.0f);
    position_ = -kCameraDistance * forward_;
    tan_half_fov_ = std::tan(radians(pose.fov_y) * 0.5f);
    aspect_ = static_cast<float>(width_) / static_cast<float>(height_);

    // The silhouette's topmost point is a vertex, so aligning the highest
    // projected vertex with row 0 aligns the object with the image top.
    float top = std::numeric_limits<float>::infinity();
    for (const Triangle& tri : posed_mesh.triangles()) {
        for (auto idx : tri) {
            top = std::min(top, project(posed_mesh.vertices()[idx]).y());
        }
    }
    row_shift_ = std::isfinite(top) ? -top : 0.0f;
}

Eigen::Vector2f Camera::project(const Vec3& world) const
{
    const Vec3 d = world - position_;
    const float zc = d.dot(forward_);
    const float ndc_x = d.dot(right_) / (zc * tan_half_fov_ * aspect_);
    const float ndc_y = d.dot(up_) / (zc * tan_half_fov_);
    return {0.5f * (ndc_x + 1.0f) * width_, 0.5f * (1.0f - ndc_y) * height_ + row_shift_};
}

Ray Camera::primary_ray(int px, int py) const
{
    const float sx = static_cast<float>(px) + 0.5f;
    const float sy = static_cast<float>(py) + 0.5f - row_shift_;
    const float ndc_x = 2.0f * sx / width_ - 1.0f;
    const float ndc_y = 1.0f - 2.0f * sy / height_;
    Vec3 dir = forward_ + ndc_x * tan_half_fov_ * aspect_ * right_ + ndc_y * tan_half_fov_ * up_;
    return Ray{position_, dir.normalized()};
}

namespace {

Mesh pose_mesh(const Mesh& mesh, double yaw_degrees)
{
    const Eigen::Matrix3f rotation =
        Eigen::AngleAxisf(radians(yaw_degrees), Vec3::UnitY()).toRotationMatrix();
    return mesh.transformed(rotation, Vec3::Zero());
}

} // namespace

Scene::Scene(const Mesh& normalized_mesh, const CameraPose& pose, std::optional<GroundPlane> ground)
    : mesh_(pose_mesh(normalized_mesh, pose.yaw)),
      pose_(pose),
      ground_(ground.value_or(resting_ground(normalized_mesh))),
      camera_(pose, mesh_)
{
}

ImageBuffer GroundView::ground_mask() const
{
    ImageBuffer mask(width, height);
    for (std::size_t i = 0; i < kind.size(); ++i) {
        mask[i] = kind[i] == PixelKind::Ground ? 1.0f : 0.0f;
    }
    return mask;
}

GroundView view_ground(const Scene& scene)
{
    const Camera& camera = scene.camera();
    GroundView view;
    view.width = camera.width();
    view.height = camera.height();
    const std::size_t n = static_cast<std::size_t>(view.width) * view.height;
    view.kind.assign(n, PixelKind::Sky);
    view.point.assign(n, Vec3::Zero());
    const float ground = scene.ground().height;

#pragma omp parallel for schedule(dynamic, 4)
    for (int y = 0; y < view.height; ++y) {
        for (int x = 0; x < view.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * view.width + x;
            Ray ray = camera.primary_ray(x, y);
            float t_ground = std::numeric_limits<float>::infinity();
            if (ray.dir.y() < 0.0f) {
                t_ground = (ground - ray.origin.y()) / ray.dir.y();
            }
            const bool hits_ground = t_ground > 0.0f && std::isfinite(t_ground);
            if (hits_ground) {
                ray.tmax = t_ground;
            }
            if (scene.mesh().occluded(ray)) {
                view.kind[i] = PixelKind::Object;
            } else if (hits_ground) {
                view.kind[i] = PixelKind::Ground;
                Vec3 p = ray.origin + t_ground * ray.dir;
                p.y() = ground;
                view.point[i] = p;
            }
        }
    }
    return view;
}

ImageBuffer render_mask(const Scene& scene)
{
    const Camera& camera = scene.camera();
    ImageBuffer mask(camera.width(), camera.height());
#pragma omp parallel for schedule(dynamic, 4)
    for (int y = 0; y < camera.height(); ++y) {
        for (int x = 0; x < camera.width(); ++x) {
            mask(x, y) = scene.mesh().occluded(camera.primary_ray(x, y)) ? 1.0f : 0.0f;
        }
    }
    return mask;
}

ImageBuffer render_mask(const Mesh& normalized_mesh, const CameraPose& pose)
{
    return render_mask(Scene(normalized_mesh, pose));
}

} // namespace softshadow
