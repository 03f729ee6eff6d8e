#include "softshadow/shadow_bases.hpp"

#include "softshadow/errors.hpp"
#include "softshadow/image_io.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>

namespace softshadow {

const char* to_string(ShadowDomain domain)
{
    return domain == ShadowDomain::Inverse ? "inverse" : "radiance";
}

ShadowDomain parse_domain(std::string_view text)
{
    if (text == "inverse") {
        return ShadowDomain::Inverse;
    }
    if (text == "radiance") {
        return ShadowDomain::Radiance;
    }
    throw InvalidParameterError("unknown shadow domain '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// ShadowBasisSet

ShadowBasisSet::ShadowBasisSet(int width, int height, BasisGeometry geometry,
                               std::vector<float> data, BasisProvenance provenance,
                               std::optional<ImageBuffer> ground_mask)
    : width_(width),
      height_(height),
      geometry_(geometry),
      data_(std::move(data)),
      provenance_(std::move(provenance)),
      ground_mask_(std::move(ground_mask))
{
    if (width <= 0 || height <= 0 || geometry.rows <= 0 || geometry.cols <= 0 || geometry.patch <= 0) {
        throw GeometryError("basis set dimensions must be positive");
    }
    if (data_.size() != pixels_per_basis() * geometry.count()) {
        throw GeometryError("basis data holds " + std::to_string(data_.size()) + " floats, expected "
                            + std::to_string(pixels_per_basis() * geometry.count()));
    }
    if (ground_mask_ && (ground_mask_->width() != width || ground_mask_->height() != height)) {
        throw GeometryError("ground mask size does not match the bases");
    }

    // One run per image row spanning its first to last nonzero pixel.
    run_begin_.reserve(geometry.count() + 1);
    for (int b = 0; b < geometry.count(); ++b) {
        run_begin_.push_back(runs_.size());
        const float* base = data_.data() + b * pixels_per_basis();
        for (int y = 0; y < height; ++y) {
            const float* row = base + static_cast<std::size_t>(y) * width;
            int first = 0;
            while (first < width && row[first] == 0.0f) {
                ++first;
            }
            if (first == width) {
                continue;
            }
            int last = width - 1;
            while (row[last] == 0.0f) {
                --last;
            }
            const auto offset = static_cast<std::uint32_t>(static_cast<std::size_t>(y) * width + first);
            // Merge with the previous run when rows are contiguous in memory.
            if (runs_.size() > run_begin_.back()
                && runs_.back().offset + runs_.back().length == offset) {
                runs_.back().length += static_cast<std::uint32_t>(last - first + 1);
            } else {
                runs_.push_back({offset, static_cast<std::uint32_t>(last - first + 1)});
            }
        }
    }
    run_begin_.push_back(runs_.size());
}

std::span<const float> ShadowBasisSet::basis(int row, int col) const
{
    if (row < 0 || row >= geometry_.rows || col < 0 || col >= geometry_.cols) {
        throw BoundsError("basis index (" + std::to_string(row) + ", " + std::to_string(col)
                          + ") outside the grid");
    }
    const std::size_t index = static_cast<std::size_t>(row) * geometry_.cols + col;
    return std::span<const float>(data_).subspan(index * pixels_per_basis(), pixels_per_basis());
}

ImageBuffer ShadowBasisSet::basis_image(int row, int col) const
{
    const auto span = basis(row, col);
    return ImageBuffer(width_, height_, std::vector<float>(span.begin(), span.end()));
}

float ShadowBasisSet::max_value() const
{
    return data_.empty() ? 0.0f : *std::max_element(data_.begin(), data_.end());
}

std::span<const ShadowBasisSet::Run> ShadowBasisSet::runs(int index) const
{
    return std::span<const Run>(runs_).subspan(run_begin_[index],
                                               run_begin_[index + 1] - run_begin_[index]);
}

// ---------------------------------------------------------------------------
// Hard shadows and basis construction

namespace {

void require_above_horizon(const Vec3& dir)
{
    if (!(dir.y() > 0.0f) || !dir.allFinite()) {
        throw InvalidParameterError("light direction must be above the horizon");
    }
}

Ray shadow_ray(const Vec3& ground_point, const Vec3& dir)
{
    return Ray{ground_point + Vec3(0.0f, kRayOffset, 0.0f), dir};
}

/// Range of top-half panorama pixels whose directions can reach `box` from `p`.
/// Conservative: every direction outside the window misses the box.
struct DirectionWindow {
    int v_begin = 0;  // rows [v_begin, top_rows)
    int u_begin = 0;  // columns u_begin .. u_begin + u_count - 1, modulo width
    int u_count = 0;
};

DirectionWindow direction_window(const Aabb& box, const Vec3& p, const BasisGeometry& g)
{
    const int width = g.elm_width();
    const int height = g.elm_height();
    DirectionWindow w;
    const float pad = 1e-4f;
    const float lo_x = box.lo.x() - pad, hi_x = box.hi.x() + pad;
    const float lo_z = box.lo.z() - pad, hi_z = box.hi.z() + pad;
    const float rise = box.hi.y() + pad - p.y();
    if (rise <= 0.0f) {
        w.v_begin = g.top_rows();
        return w;
    }

    const float dx = std::max({lo_x - p.x(), 0.0f, p.x() - hi_x});
    const float dz = std::max({lo_z - p.z(), 0.0f, p.z() - hi_z});
    const double horizontal = std::hypot(dx, dz);
    const double max_elevation = std::atan2(static_cast<double>(rise), horizontal);
    const double min_theta = std::numbers::pi / 2 - max_elevation;
    w.v_begin = std::clamp(static_cast<int>(std::floor(min_theta * height / std::numbers::pi - 0.5)) - 1,
                           0, g.top_rows());

    if (dx == 0.0f && dz == 0.0f) {
        w.u_count = width;
        return w;
    }
    // Seen from outside, a convex footprint spans less than pi in azimuth and
    // its angular extent is attained at the corners.
    const std::array<std::array<float, 2>, 4> corners{{{lo_x, lo_z}, {hi_x, lo_z}, {lo_x, hi_z}, {hi_x, hi_z}}};
    const double ref = std::atan2(corners[0][1] - p.z(), corners[0][0] - p.x());
    double lo = 0.0, hi = 0.0;
    for (const auto& c : corners) {
        double delta = std::atan2(c[1] - p.z(), c[0] - p.x()) - ref;
        delta = std::remainder(delta, 2.0 * std::numbers::pi);
        lo = std::min(lo, delta);
        hi = std::max(hi, delta);
    }
    const double scale = width / (2.0 * std::numbers::pi);
    const int u_lo = static_cast<int>(std::floor((ref + lo) * scale - 0.5)) - 1;
    const int u_hi = static_cast<int>(std::ceil((ref + hi) * scale - 0.5)) + 1;
    w.u_count = std::min(width, u_hi - u_lo + 1);
    w.u_begin = ((u_lo % width) + width) % width;
    return w;
}

std::vector<Vec3> top_half_directions(const BasisGeometry& g)
{
    std::vector<Vec3> dirs;
    dirs.reserve(static_cast<std::size_t>(g.top_rows()) * g.elm_width());
    for (int v = 0; v < g.top_rows(); ++v) {
        for (int u = 0; u < g.elm_width(); ++u) {
            dirs.push_back(pixel_direction(u, v, g.elm_width(), g.elm_height()));
        }
    }
    return dirs;
}

} // namespace

ImageBuffer hard_shadow(const Scene& scene, const GroundView& view, const Vec3& dir)
{
    require_above_horizon(dir);
    ImageBuffer out(view.width, view.height);
    if (scene.mesh().empty()) {
        return out;
    }
    const Vec3 d = dir.normalized();
    for (std::size_t i = 0; i < view.kind.size(); ++i) {
        if (view.is_ground(i) && scene.mesh().occluded(shadow_ray(view.point[i], d))) {
            out[i] = 1.0f;
        }
    }
    return out;
}

ImageBuffer hard_shadow(const Scene& scene, const Vec3& dir)
{
    return hard_shadow(scene, view_ground(scene), dir);
}

ImageBuffer hard_shadow(const Mesh& normalized_mesh, const CameraPose& pose,
                        const GroundPlane& ground, const Vec3& dir)
{
    return hard_shadow(Scene(normalized_mesh, pose, ground), dir);
}

ShadowBasisSet build_bases(const Scene& scene, const BuildOptions& options)
{
    const BasisGeometry& g = options.geometry;
    const GroundView view = view_ground(scene);
    const int width = view.width;
    const int height = view.height;
    const std::size_t plane = static_cast<std::size_t>(width) * height;
    std::vector<float> data(plane * g.count(), 0.0f);

    const Mesh& mesh = scene.mesh();
    const std::vector<Vec3> dirs = top_half_directions(g);
    const int elm_width = g.elm_width();

    std::atomic<int> rows_done{0};
    std::atomic<bool> stopped{false};
    std::mutex progress_mutex;

    if (!mesh.empty()) {
#pragma omp parallel for schedule(dynamic, 1)
        for (int y = 0; y < height; ++y) {
            // Exceptions cannot leave the parallel loop, so cancellation skips rows instead.
            if (stopped.load(std::memory_order_relaxed)) {
                continue;
            }
            if (options.cancelled && options.cancelled()) {
                stopped = true;
                continue;
            }
            std::vector<std::uint32_t> counts(g.count());
            for (int x = 0; x < width; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * width + x;
                if (!view.is_ground(i)) {
                    continue;
                }
                const DirectionWindow win = direction_window(mesh.bounds(), view.point[i], g);
                if (win.u_count == 0) {
                    continue;
                }
                std::fill(counts.begin(), counts.end(), 0u);
                bool any = false;
                for (int v = win.v_begin; v < g.top_rows(); ++v) {
                    const int patch_row = (v / g.patch) * g.cols;
                    const Vec3* row_dirs = dirs.data() + static_cast<std::size_t>(v) * elm_width;
                    for (int k = 0; k < win.u_count; ++k) {
                        int u = win.u_begin + k;
                        if (u >= elm_width) {
                            u -= elm_width;
                        }
                        if (mesh.occluded(shadow_ray(view.point[i], row_dirs[u]))) {
                            ++counts[patch_row + u / g.patch];
                            any = true;
                        }
                    }
                }
                if (any) {
                    for (int b = 0; b < g.count(); ++b) {
                        data[b * plane + i] = static_cast<float>(counts[b]);
                    }
                }
            }
            const int done = ++rows_done;
            if (options.progress) {
                std::lock_guard lock(progress_mutex);
                options.progress(static_cast<double>(done) / height);
            }
        }
    } else if (options.progress) {
        options.progress(1.0);
    }
    if (stopped) {
        throw CancelledError("basis build cancelled");
    }

    return ShadowBasisSet(width, height, g, std::move(data),
                          BasisProvenance{options.mesh_id, scene.pose()}, view.ground_mask());
}

ShadowBasisSet build_bases(const Mesh& normalized_mesh, const CameraPose& pose,
                           const GroundPlane& ground, const BuildOptions& options)
{
    return build_bases(Scene(normalized_mesh, pose, ground), options);
}

// ---------------------------------------------------------------------------
// Composition

std::vector<float> patch_weights(const ImageBuffer& elm_raster, const BasisGeometry& g)
{
    if (elm_raster.width() != g.elm_width() || elm_raster.height() != g.elm_height()) {
        throw GeometryError("light map is " + std::to_string(elm_raster.width()) + "x"
                            + std::to_string(elm_raster.height()) + " but the basis grid needs "
                            + std::to_string(g.elm_width()) + "x" + std::to_string(g.elm_height()));
    }
    std::vector<double> sums(g.count(), 0.0);
    for (int v = 0; v < g.top_rows(); ++v) {
        const auto row = elm_raster.row(v);
        double* patch_row = sums.data() + static_cast<std::size_t>(v / g.patch) * g.cols;
        for (int u = 0; u < g.elm_width(); ++u) {
            patch_row[u / g.patch] += row[u];
        }
    }
    const double area = static_cast<double>(g.patch) * g.patch;
    std::vector<float> weights(g.count());
    std::transform(sums.begin(), sums.end(), weights.begin(),
                   [&](double s) { return static_cast<float>(s / area); });
    return weights;
}

double unoccluded_total(std::span<const float> weights, const BasisGeometry& g)
{
    double total = 0.0;
    for (float w : weights) {
        total += w;
    }
    return total * g.patch * g.patch;
}

ShadowMap compose_weights(const ShadowBasisSet& bases, std::span<const float> weights)
{
    const BasisGeometry& g = bases.geometry();
    if (weights.size() != static_cast<std::size_t>(g.count())) {
        throw GeometryError("expected " + std::to_string(g.count()) + " patch weights, got "
                            + std::to_string(weights.size()));
    }
    ImageBuffer out(bases.width(), bases.height());
    float* dst = out.pixels().data();
    const float* src = bases.data().data();
    const std::size_t plane = bases.pixels_per_basis();
    for (int b = 0; b < g.count(); ++b) {
        const float w = weights[b];
        if (w == 0.0f) {
            continue;
        }
        const float* basis = src + b * plane;
        for (const auto& run : bases.runs(b)) {
            float* o = dst + run.offset;
            const float* s = basis + run.offset;
            for (std::uint32_t k = 0; k < run.length; ++k) {
                o[k] += w * s[k];
            }
        }
    }
    return ShadowMap{std::move(out), ShadowDomain::Inverse};
}

ShadowMap compose(const ShadowBasisSet& bases, const ImageBuffer& elm_raster)
{
    return compose_weights(bases, patch_weights(elm_raster, bases.geometry()));
}

ShadowMap compose(const ShadowBasisSet& bases, const EnvLightMap& elm)
{
    return compose(bases, rasterize_elm(elm, bases.geometry().top_rows()));
}

namespace {

ShadowMap flip_domain(const ShadowMap& in, ShadowDomain expected, const ImageBuffer& elm_raster,
                      const BasisGeometry& geometry, const ImageBuffer* ground_mask)
{
    if (in.domain != expected) {
        throw DomainError(std::string("expected a ") + to_string(expected) + "-domain shadow map, got "
                          + to_string(in.domain));
    }
    if (ground_mask && !ground_mask->same_shape(in.pixels)) {
        throw GeometryError("ground mask size does not match the shadow map");
    }
    const double total = unoccluded_total(patch_weights(elm_raster, geometry), geometry);
    ShadowMap out{ImageBuffer(in.pixels.width(), in.pixels.height()),
                  expected == ShadowDomain::Inverse ? ShadowDomain::Radiance : ShadowDomain::Inverse};
    for (std::size_t i = 0; i < in.pixels.size(); ++i) {
        if (!ground_mask || (*ground_mask)[i] > 0.5f) {
            out.pixels[i] = static_cast<float>(total - static_cast<double>(in.pixels[i]));
        }
    }
    return out;
}

} // namespace

ShadowMap to_radiance(const ShadowMap& inverse, const ImageBuffer& elm_raster,
                      const BasisGeometry& geometry, const ImageBuffer* ground_mask)
{
    return flip_domain(inverse, ShadowDomain::Inverse, elm_raster, geometry, ground_mask);
}

ShadowMap to_radiance(const ShadowMap& inverse, const EnvLightMap& elm,
                      const BasisGeometry& geometry, const ImageBuffer* ground_mask)
{
    return to_radiance(inverse, rasterize_elm(elm), geometry, ground_mask);
}

ShadowMap to_inverse(const ShadowMap& radiance, const ImageBuffer& elm_raster,
                     const BasisGeometry& geometry, const ImageBuffer* ground_mask)
{
    return flip_domain(radiance, ShadowDomain::Radiance, elm_raster, geometry, ground_mask);
}

// ---------------------------------------------------------------------------
// SSBB files

namespace {

constexpr char kMagic[4] = {'S', 'S', 'B', 'B'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v)
{
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    std::uint16_t u16(const char* field)
    {
        need(2, field);
        const auto lo = static_cast<unsigned char>(bytes_[pos_]);
        const auto hi = static_cast<unsigned char>(bytes_[pos_ + 1]);
        pos_ += 2;
        return static_cast<std::uint16_t>(lo | (hi << 8));
    }

    void need(std::size_t n, const char* field) const
    {
        if (bytes_.size() - pos_ < n) {
            throw FormatError(std::string("SSBB: truncated at field '") + field + "'");
        }
    }

    std::string_view take(std::size_t n, const char* field)
    {
        need(n, field);
        auto out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

std::uint16_t checked_u16(int value, const char* field)
{
    if (value < 0 || value > 0xffff) {
        throw GeometryError(std::string("SSBB: ") + field + " does not fit in 16 bits");
    }
    return static_cast<std::uint16_t>(value);
}

} // namespace

std::string encode_ssbb(const ShadowBasisSet& bases)
{
    const BasisGeometry& g = bases.geometry();
    std::string out(kMagic, 4);
    put_u16(out, kVersion);
    put_u16(out, checked_u16(bases.width(), "image_w"));
    put_u16(out, checked_u16(bases.height(), "image_h"));
    put_u16(out, checked_u16(g.rows, "grid_rows"));
    put_u16(out, checked_u16(g.cols, "grid_cols"));
    put_u16(out, checked_u16(g.patch, "patch"));
    const std::size_t header = out.size();
    out.resize(header + bases.data().size() * 4);
    char* p = out.data() + header;
    for (float v : bases.data()) {
        std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
        if constexpr (std::endian::native != std::endian::little) {
            bits = __builtin_bswap32(bits);
        }
        std::memcpy(p, &bits, 4);
        p += 4;
    }
    return out;
}

ShadowBasisSet decode_ssbb(std::string_view bytes)
{
    Reader in(bytes);
    if (in.take(4, "magic") != std::string_view(kMagic, 4)) {
        throw FormatError("SSBB: bad magic");
    }
    const std::uint16_t version = in.u16("version");
    if (version != kVersion) {
        throw FormatError("SSBB: unsupported version " + std::to_string(version));
    }
    const int width = in.u16("image_w");
    const int height = in.u16("image_h");
    BasisGeometry g;
    g.rows = in.u16("grid_rows");
    g.cols = in.u16("grid_cols");
    g.patch = in.u16("patch");
    if (width == 0 || height == 0 || g.rows == 0 || g.cols == 0 || g.patch == 0) {
        throw FormatError("SSBB: zero dimension in header");
    }
    const std::size_t count = static_cast<std::size_t>(width) * height * g.count();
    const std::string_view raw = in.take(count * 4, "pixels");
    if (in.remaining() != 0) {
        throw FormatError("SSBB: " + std::to_string(in.remaining()) + " trailing bytes");
    }
    std::vector<float> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, raw.data() + 4 * i, 4);
        if constexpr (std::endian::native != std::endian::little) {
            bits = __builtin_bswap32(bits);
        }
        data[i] = std::bit_cast<float>(bits);
    }
    return ShadowBasisSet(width, height, g, std::move(data));
}

void write_ssbb(const std::filesystem::path& path, const ShadowBasisSet& bases)
{
    write_file(path, encode_ssbb(bases));
}

ShadowBasisSet read_ssbb(const std::filesystem::path& path)
{
    try {
        return decode_ssbb(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

} // namespace softshadow
