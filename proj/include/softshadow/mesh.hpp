#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

namespace softshadow {

using Vec3 = Eigen::Vector3f;
using Triangle = std::array<std::uint32_t, 3>;

struct Ray {
    Vec3 origin;
    Vec3 dir;
    float tmin = 0.0f;
    float tmax = std::numeric_limits<float>::infinity();
};

struct Hit {
    float t = 0.0f;
    std::uint32_t triangle = 0;
};

struct Aabb {
    Vec3 lo = Vec3::Constant(std::numeric_limits<float>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<float>::infinity());

    void extend(const Vec3& p)
    {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    void extend(const Aabb& b)
    {
        lo = lo.cwiseMin(b.lo);
        hi = hi.cwiseMax(b.hi);
    }
    bool valid() const { return (lo.array() <= hi.array()).all(); }
    Vec3 center() const { return 0.5f * (lo + hi); }
    Vec3 extent() const { return hi - lo; }
    float surface_area() const;
    /// Slab test; returns true when [tmin, tmax] overlaps the box.
    bool intersects(const Ray& ray, const Vec3& inv_dir) const;
};

/// Bounding volume hierarchy over a triangle soup (binned SAH build).
class Bvh {
public:
    Bvh() = default;
    Bvh(const std::vector<Vec3>& vertices, const std::vector<Triangle>& triangles);

    std::optional<Hit> intersect(const Ray& ray) const;
    bool occluded(const Ray& ray) const;

    std::size_t node_count() const { return nodes_.size(); }
    const Aabb& bounds() const { return root_bounds_; }

private:
    struct Node {
        Aabb box;
        // Leaf: first primitive index and count. Interior: right child index, count == 0.
        std::uint32_t offset = 0;
        std::uint32_t count = 0;
    };
    struct TriData {
        Vec3 v0, e1, e2;
    };

    template <bool AnyHit>
    std::optional<Hit> traverse(const Ray& ray) const;

    std::vector<Node> nodes_;
    std::vector<TriData> tris_;           // reordered to leaf order
    std::vector<std::uint32_t> tri_ids_;  // leaf order -> original triangle index
    Aabb root_bounds_;
};

/// Möller-Trumbore ray/triangle test shared by the BVH and brute-force paths.
std::optional<float> intersect_triangle(const Ray& ray, const Vec3& v0, const Vec3& e1,
                                        const Vec3& e2);

/// Immutable triangle mesh with its acceleration structure.
class Mesh {
public:
    Mesh() = default;
    Mesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles);

    const std::vector<Vec3>& vertices() const { return vertices_; }
    const std::vector<Triangle>& triangles() const { return triangles_; }
    std::size_t triangle_count() const { return triangles_.size(); }
    bool empty() const { return triangles_.empty(); }

    /// Axis-aligned min-max box of the referenced vertices.
    const Aabb& bounds() const { return bounds_; }

    std::optional<Hit> intersect(const Ray& ray) const;
    bool occluded(const Ray& ray) const;
    /// Reference path: tests every triangle.
    std::optional<Hit> intersect_brute_force(const Ray& ray) const;

    /// Applies p -> rotation * p + translation to every vertex.
    Mesh transformed(const Eigen::Matrix3f& rotation, const Vec3& translation) const;

private:
    std::vector<Vec3> vertices_;
    std::vector<Triangle> triangles_;
    Aabb bounds_;
    Bvh bvh_;
};

/// Centers the min-max box at the origin and scales its longest edge to 1.
Mesh normalize(const Mesh& mesh);

/// Parses the OBJ subset (v / f records, polygons fan-triangulated). No normalization.
Mesh parse_obj(std::istream& in, std::string_view source_name = "<obj>");
Mesh parse_obj(std::string_view text, std::string_view source_name = "<obj>");

/// Loads an OBJ file and normalizes it into the canonical pose.
Mesh load_mesh(const std::filesystem::path& path);

/// Concatenates meshes (used to build occluder unions).
Mesh merge(const std::vector<const Mesh*>& meshes);

std::string to_obj(const Mesh& mesh);

} // namespace softshadow
