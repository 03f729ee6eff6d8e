#include "softshadow/mesh.hpp"

#include "softshadow/errors.hpp"
#include "softshadow/image_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

namespace softshadow {

float Aabb::surface_area() const
{
    if (!valid()) {
        return 0.0f;
    }
    const Vec3 e = extent();
    return 2.0f * (e.x() * e.y() + e.y() * e.z() + e.z() * e.x());
}

bool Aabb::intersects(const Ray& ray, const Vec3& inv_dir) const
{
    float t0 = ray.tmin;
    float t1 = ray.tmax;
    for (int a = 0; a < 3; ++a) {
        float near = (lo[a] - ray.origin[a]) * inv_dir[a];
        float far = (hi[a] - ray.origin[a]) * inv_dir[a];
        if (near > far) {
            std::swap(near, far);
        }
        // NaN (0 * inf on a slab boundary) leaves the interval unchanged.
        t0 = near > t0 ? near : t0;
        t1 = far < t1 ? far : t1;
        if (t0 > t1) {
            return false;
        }
    }
    return true;
}

std::optional<float> intersect_triangle(const Ray& ray, const Vec3& v0, const Vec3& e1,
                                        const Vec3& e2)
{
    const Vec3 p = ray.dir.cross(e2);
    const float det = e1.dot(p);
    if (std::abs(det) < 1e-12f) {
        return std::nullopt;
    }
    const float inv_det = 1.0f / det;
    const Vec3 s = ray.origin - v0;
    const float u = s.dot(p) * inv_det;
    if (u < 0.0f || u > 1.0f) {
        return std::nullopt;
    }
    const Vec3 q = s.cross(e1);
    const float v = ray.dir.dot(q) * inv_det;
    if (v < 0.0f || u + v > 1.0f) {
        return std::nullopt;
    }
    const float t = e2.dot(q) * inv_det;
    if (t <= ray.tmin || t >= ray.tmax) {
        return std::nullopt;
    }
    return t;
}

// ---------------------------------------------------------------------------
// BVH

namespace {

constexpr int kBins = 12;
constexpr std::uint32_t kMaxLeafSize = 4;

Aabb padded(Aabb box)
{
    // Keeps slab tests conservative for triangles lying on a box face.
    const float pad = 1e-5f * std::max(1.0f, box.extent().maxCoeff());
    box.lo.array() -= pad;
    box.hi.array() += pad;
    return box;
}

struct BuildPrim {
    Aabb box;
    Vec3 centroid;
    std::uint32_t id;
};

} // namespace

Bvh::Bvh(const std::vector<Vec3>& vertices, const std::vector<Triangle>& triangles)
{
    if (triangles.empty()) {
        return;
    }
    std::vector<BuildPrim> prims(triangles.size());
    for (std::uint32_t i = 0; i < triangles.size(); ++i) {
        Aabb box;
        for (auto idx : triangles[i]) {
            box.extend(vertices[idx]);
        }
        prims[i] = {box, box.center(), i};
    }

    nodes_.reserve(2 * prims.size());
    struct Task {
        std::uint32_t node, begin, end;
    };
    std::vector<Task> stack;
    nodes_.push_back({});
    stack.push_back({0, 0, static_cast<std::uint32_t>(prims.size())});

    while (!stack.empty()) {
        const Task task = stack.back();
        stack.pop_back();

        Aabb box, centroid_box;
        for (std::uint32_t i = task.begin; i < task.end; ++i) {
            box.extend(prims[i].box);
            centroid_box.extend(prims[i].centroid);
        }
        nodes_[task.node].box = padded(box);
        const std::uint32_t count = task.end - task.begin;

        auto make_leaf = [&] {
            nodes_[task.node].offset = task.begin;
            nodes_[task.node].count = count;
        };
        if (count <= kMaxLeafSize) {
            make_leaf();
            continue;
        }

        int axis = 0;
        centroid_box.extent().maxCoeff(&axis);
        const float c_lo = centroid_box.lo[axis];
        const float c_extent = centroid_box.hi[axis] - c_lo;

        std::uint32_t mid = task.begin;
        if (c_extent <= 0.0f) {
            mid = task.begin + count / 2;
        } else {
            struct Bin {
                Aabb box;
                std::uint32_t count = 0;
            };
            std::array<Bin, kBins> bins{};
            auto bin_of = [&](const BuildPrim& p) {
                const int b = static_cast<int>(kBins * (p.centroid[axis] - c_lo) / c_extent);
                return std::clamp(b, 0, kBins - 1);
            };
            for (std::uint32_t i = task.begin; i < task.end; ++i) {
                Bin& bin = bins[bin_of(prims[i])];
                bin.box.extend(prims[i].box);
                ++bin.count;
            }
            std::array<float, kBins - 1> cost{};
            Aabb left;
            std::uint32_t left_count = 0;
            for (int i = 0; i < kBins - 1; ++i) {
                left.extend(bins[i].box);
                left_count += bins[i].count;
                cost[i] = left_count * left.surface_area();
            }
            Aabb right;
            std::uint32_t right_count = 0;
            for (int i = kBins - 1; i > 0; --i) {
                right.extend(bins[i].box);
                right_count += bins[i].count;
                cost[i - 1] += right_count * right.surface_area();
            }
            const int best = static_cast<int>(std::min_element(cost.begin(), cost.end()) - cost.begin());
            const float leaf_cost = count * box.surface_area();
            if (cost[best] >= leaf_cost && count <= 2 * kMaxLeafSize) {
                make_leaf();
                continue;
            }
            auto split = std::partition(prims.begin() + task.begin, prims.begin() + task.end,
                                        [&](const BuildPrim& p) { return bin_of(p) <= best; });
            mid = static_cast<std::uint32_t>(split - prims.begin());
            if (mid == task.begin || mid == task.end) {
                mid = task.begin + count / 2;
                std::nth_element(prims.begin() + task.begin, prims.begin() + mid,
                                 prims.begin() + task.end,
                                 [&](const BuildPrim& a, const BuildPrim& b) {
                                     return a.centroid[axis] < b.centroid[axis];
                                 });
            }
        }

        // Children are allocated as a pair: left at offset, right at offset + 1.
        const auto left_index = static_cast<std::uint32_t>(nodes_.size());
        const auto right_index = left_index + 1;
        nodes_.resize(nodes_.size() + 2);
        nodes_[task.node].offset = left_index;
        nodes_[task.node].count = 0;
        stack.push_back({right_index, mid, task.end});
        stack.push_back({left_index, task.begin, mid});
    }

    tris_.reserve(prims.size());
    tri_ids_.reserve(prims.size());
    for (const BuildPrim& p : prims) {
        const Triangle& t = triangles[p.id];
        const Vec3& v0 = vertices[t[0]];
        tris_.push_back({v0, vertices[t[1]] - v0, vertices[t[2]] - v0});
        tri_ids_.push_back(p.id);
    }
    root_bounds_ = nodes_.front().box;
}

template <bool AnyHit>
std::optional<Hit> Bvh::traverse(const Ray& ray) const
{
    if (nodes_.empty()) {
        return std::nullopt;
    }
    const Vec3 inv_dir = ray.dir.cwiseInverse();
    Ray r = ray;
    std::optional<Hit> best;

    std::array<std::uint32_t, 128> stack;
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        if (!node.box.intersects(r, inv_dir)) {
            continue;
        }
        if (node.count > 0) {
            for (std::uint32_t i = node.offset; i < node.offset + node.count; ++i) {
                const TriData& tri = tris_[i];
                if (auto t = intersect_triangle(r, tri.v0, tri.e1, tri.e2)) {
                    if constexpr (AnyHit) {
                        return Hit{*t, tri_ids_[i]};
                    }
                    if (!best || *t < best->t
                        || (*t == best->t && tri_ids_[i] < best->triangle)) {
                        best = Hit{*t, tri_ids_[i]};
                    }
                    // Keep equal-distance hits reachable so ties resolve by index.
                    r.tmax = std::nextafter(*t, std::numeric_limits<float>::infinity());
                }
            }
            continue;
        }
        if (top + 2 > static_cast<int>(stack.size())) {
            throw Error("BVH traversal stack overflow");
        }
        stack[top++] = node.offset + 1;
        stack[top++] = node.offset;
    }
    return best;
}

std::optional<Hit> Bvh::intersect(const Ray& ray) const
{
    return traverse<false>(ray);
}

bool Bvh::occluded(const Ray& ray) const
{
    return traverse<true>(ray).has_value();
}

// ---------------------------------------------------------------------------
// Mesh

Mesh::Mesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles))
{
    for (const Triangle& t : triangles_) {
        for (auto idx : t) {
            if (idx >= vertices_.size()) {
                throw FormatError("triangle references vertex " + std::to_string(idx + 1)
                                  + " but only " + std::to_string(vertices_.size()) + " exist");
            }
            bounds_.extend(vertices_[idx]);
        }
    }
    bvh_ = Bvh(vertices_, triangles_);
}

std::optional<Hit> Mesh::intersect(const Ray& ray) const
{
    return bvh_.intersect(ray);
}

bool Mesh::occluded(const Ray& ray) const
{
    return bvh_.occluded(ray);
}

std::optional<Hit> Mesh::intersect_brute_force(const Ray& ray) const
{
    std::optional<Hit> best;
    for (std::uint32_t i = 0; i < triangles_.size(); ++i) {
        const Triangle& t = triangles_[i];
        const Vec3& v0 = vertices_[t[0]];
        if (auto hit = intersect_triangle(ray, v0, vertices_[t[1]] - v0, vertices_[t[2]] - v0)) {
            if (!best || *hit < best->t) {
                best = Hit{*hit, i};
            }
        }
    }
    return best;
}

Mesh Mesh::transformed(const Eigen::Matrix3f& rotation, const Vec3& translation) const
{
    std::vector<Vec3> moved(vertices_.size());
    std::transform(vertices_.begin(), vertices_.end(), moved.begin(),
                   [&](const Vec3& v) -> Vec3 { return rotation * v + translation; });
    return Mesh(std::move(moved), triangles_);
}

Mesh normalize(const Mesh& mesh)
{
    if (mesh.empty()) {
        throw DegenerateInputError("cannot normalize a mesh without triangles");
    }
    const Aabb& box = mesh.bounds();
    const float longest = box.extent().maxCoeff();
    if (!(longest > 0.0f)) {
        throw DegenerateInputError("mesh has zero extent");
    }
    const Vec3 center = box.center();
    const float scale = 1.0f / longest;
    std::vector<Vec3> vertices(mesh.vertices().size());
    std::transform(mesh.vertices().begin(), mesh.vertices().end(), vertices.begin(),
                   [&](const Vec3& v) -> Vec3 { return (v - center) * scale; });
    return Mesh(std::move(vertices), mesh.triangles());
}

// ---------------------------------------------------------------------------
// OBJ

namespace {

[[noreturn]] void obj_error(std::string_view source, std::size_t line, const std::string& what)
{
    throw FormatError(std::string(source) + ":" + std::to_string(line) + ": " + what);
}

} // namespace

Mesh parse_obj(std::istream& in, std::string_view source_name)
{
    std::vector<Vec3> vertices;
    std::vector<Triangle> triangles;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.resize(hash);
        }
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) {
            continue;
        }
        if (tag == "v") {
            float x, y, z;
            if (!(ls >> x >> y >> z) || !std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
                obj_error(source_name, line_no, "malformed vertex record");
            }
            vertices.emplace_back(x, y, z);
        } else if (tag == "f") {
            std::vector<std::uint32_t> poly;
            std::string token;
            while (ls >> token) {
                // Only the position index before the first '/' matters.
                const std::string_view head = std::string_view(token).substr(0, token.find('/'));
                long long index = 0;
                auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), index);
                if (ec != std::errc() || ptr != head.data() + head.size() || index == 0) {
                    obj_error(source_name, line_no, "malformed face index '" + token + "'");
                }
                const long long resolved =
                    index > 0 ? index - 1 : static_cast<long long>(vertices.size()) + index;
                if (resolved < 0 || resolved >= static_cast<long long>(vertices.size())) {
                    obj_error(source_name, line_no, "face index " + token + " out of range");
                }
                poly.push_back(static_cast<std::uint32_t>(resolved));
            }
            if (poly.size() < 3) {
                obj_error(source_name, line_no, "face with fewer than 3 vertices");
            }
            for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
                triangles.push_back({poly[0], poly[k], poly[k + 1]});
            }
        }
        // vt, vn, g, o, s, usemtl, mtllib: ignored.
    }
    return Mesh(std::move(vertices), std::move(triangles));
}

Mesh parse_obj(std::string_view text, std::string_view source_name)
{
    std::istringstream in{std::string(text)};
    return parse_obj(in, source_name);
}

Mesh load_mesh(const std::filesystem::path& path)
{
    std::istringstream in(read_file(path));
    Mesh raw = parse_obj(in, path.string());
    if (raw.empty()) {
        throw DegenerateInputError(path.string() + ": mesh has no faces");
    }
    return normalize(raw);
}

Mesh merge(const std::vector<const Mesh*>& meshes)
{
    std::vector<Vec3> vertices;
    std::vector<Triangle> triangles;
    for (const Mesh* m : meshes) {
        const auto base = static_cast<std::uint32_t>(vertices.size());
        vertices.insert(vertices.end(), m->vertices().begin(), m->vertices().end());
        for (const Triangle& t : m->triangles()) {
            triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
        }
    }
    return Mesh(std::move(vertices), std::move(triangles));
}

std::string to_obj(const Mesh& mesh)
{
    std::ostringstream os;
    os.precision(9);
    for (const Vec3& v : mesh.vertices()) {
        os << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    }
    for (const Triangle& t : mesh.triangles()) {
        os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    }
    return os.str();
}

} // namespace softshadow
