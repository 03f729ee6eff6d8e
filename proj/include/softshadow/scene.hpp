#pragma once

#include "softshadow/image.hpp"
#include "softshadow/mesh.hpp"

#include <optional>
#include <vector>

namespace softshadow {

/// Object yaw about the vertical axis plus camera elevation, in degrees.
struct CameraPose {
    double yaw = 0.0;
    double pitch = 0.0;
    double fov_y = 45.0;
    int width = 256;
    int height = 256;

    friend bool operator==(const CameraPose&, const CameraPose&) = default;
};

/// Horizontal receiver plane y = height.
struct GroundPlane {
    float height = 0.0f;
};

/// The 15 canonical views, yaw-major: yaw {0, 45, -45, 90, -90} x pitch {0, 15, 30}.
std::vector<CameraPose> canonical_poses(int width = 256, int height = 256);

/// Ground plane through the bottom face of the mesh's min-max box.
GroundPlane resting_ground(const Mesh& mesh);

/// Distance from the camera to the box center.
inline constexpr float kCameraDistance = 2.5f;

/// Pinhole camera looking at the origin from elevation `pitch`, with a vertical
/// lens shift that puts the topmost projected vertex on the image's top edge.
class Camera {
public:
    Camera(const CameraPose& pose, const Mesh& posed_mesh);

    Ray primary_ray(int px, int py) const;
    /// Projects to continuous pixel coordinates (x right, y down). No clipping.
    Eigen::Vector2f project(const Vec3& world) const;

    const Vec3& position() const { return position_; }
    int width() const { return width_; }
    int height() const { return height_; }

private:
    Vec3 position_;
    Vec3 right_, up_, forward_;
    float tan_half_fov_ = 0.0f;
    float aspect_ = 1.0f;
    float row_shift_ = 0.0f;
    int width_ = 0;
    int height_ = 0;
};

/// A mesh placed in the world for one pose: rotated by yaw, resting on the ground,
/// viewed by the pose camera.
class Scene {
public:
    Scene(const Mesh& normalized_mesh, const CameraPose& pose,
          std::optional<GroundPlane> ground = std::nullopt);

    const Mesh& mesh() const { return mesh_; }
    const CameraPose& pose() const { return pose_; }
    const GroundPlane& ground() const { return ground_; }
    const Camera& camera() const { return camera_; }

private:
    Mesh mesh_;
    CameraPose pose_;
    GroundPlane ground_;
    Camera camera_;
};

enum class PixelKind : std::uint8_t { Sky, Object, Ground };

/// Per-pixel classification of primary rays and the ground hit points.
struct GroundView {
    int width = 0;
    int height = 0;
    std::vector<PixelKind> kind;
    std::vector<Vec3> point;  // valid where kind == Ground

    bool is_ground(std::size_t i) const { return kind[i] == PixelKind::Ground; }
    ImageBuffer ground_mask() const;
};

GroundView view_ground(const Scene& scene);

/// Binary cutout mask: 1 where a primary ray hits the mesh.
ImageBuffer render_mask(const Scene& scene);
ImageBuffer render_mask(const Mesh& normalized_mesh, const CameraPose& pose);

} // namespace softshadow
