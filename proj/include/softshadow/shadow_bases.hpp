#pragma once

#include "softshadow/elm.hpp"
#include "softshadow/image.hpp"
#include "softshadow/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace softshadow {

/// Patch grid over the upper hemisphere of the panorama. The default covers the
/// top half of a 512x256 map with 8x32 patches of 16x16 pixels.
struct BasisGeometry {
    int rows = 8;
    int cols = 32;
    int patch = 16;

    int count() const { return rows * cols; }
    int elm_width() const { return cols * patch; }
    int elm_height() const { return 2 * rows * patch; }
    /// Panorama rows that can cast shadows onto the ground.
    int top_rows() const { return rows * patch; }

    friend bool operator==(const BasisGeometry&, const BasisGeometry&) = default;
};

enum class ShadowDomain { Inverse, Radiance };

const char* to_string(ShadowDomain domain);
ShadowDomain parse_domain(std::string_view text);

/// A shadow image in the camera frame together with its value domain.
/// Inverse: blocked light (0 where fully lit). Radiance: light that arrives.
struct ShadowMap {
    ImageBuffer pixels;
    ShadowDomain domain = ShadowDomain::Inverse;
};

struct BasisProvenance {
    std::string mesh_id;
    CameraPose pose;
};

/// Grid of precomputed hard-shadow accumulations for one (mesh, view) pair.
/// Immutable after construction; safe to share across threads.
class ShadowBasisSet {
public:
    ShadowBasisSet(int width, int height, BasisGeometry geometry, std::vector<float> data,
                   BasisProvenance provenance = {},
                   std::optional<ImageBuffer> ground_mask = std::nullopt);

    int width() const { return width_; }
    int height() const { return height_; }
    const BasisGeometry& geometry() const { return geometry_; }
    const BasisProvenance& provenance() const { return provenance_; }
    /// Pixels that see the receiver plane. Absent for sets loaded from disk, in
    /// which case every pixel is treated as ground.
    const std::optional<ImageBuffer>& ground_mask() const { return ground_mask_; }

    std::size_t pixels_per_basis() const { return static_cast<std::size_t>(width_) * height_; }
    std::span<const float> basis(int row, int col) const;
    ImageBuffer basis_image(int row, int col) const;
    /// All bases, grid-row-major, each row-major.
    std::span<const float> data() const { return data_; }
    float max_value() const;

    /// Contiguous runs of possibly-nonzero pixels of one basis.
    struct Run {
        std::uint32_t offset;
        std::uint32_t length;
    };
    std::span<const Run> runs(int index) const;

private:
    int width_;
    int height_;
    BasisGeometry geometry_;
    std::vector<float> data_;
    BasisProvenance provenance_;
    std::optional<ImageBuffer> ground_mask_;
    std::vector<Run> runs_;
    std::vector<std::size_t> run_begin_;  // count() + 1 offsets into runs_
};

/// Binary hard shadow for a directional light: 1 on ground pixels whose ray
/// toward `dir` hits the mesh. Throws InvalidParameterError unless dir.y > 0.
ImageBuffer hard_shadow(const Scene& scene, const GroundView& view, const Vec3& dir);
ImageBuffer hard_shadow(const Scene& scene, const Vec3& dir);
ImageBuffer hard_shadow(const Mesh& normalized_mesh, const CameraPose& pose,
                        const GroundPlane& ground, const Vec3& dir);

/// Offset applied along the receiver normal to shadow and AO ray origins.
inline constexpr float kRayOffset = 1e-4f;

struct BuildOptions {
    BasisGeometry geometry;
    std::string mesh_id;
    /// Called with the completed fraction in [0, 1].
    std::function<void(double)> progress;
    /// Polled once per image row; returning true aborts with CancelledError.
    std::function<bool()> cancelled;
};

/// Sums, per patch, the hard shadows of every panorama pixel direction in the patch.
ShadowBasisSet build_bases(const Scene& scene, const BuildOptions& options = {});
ShadowBasisSet build_bases(const Mesh& normalized_mesh, const CameraPose& pose,
                           const GroundPlane& ground, const BuildOptions& options = {});

/// Mean panorama value over each top-half patch, grid-row-major.
std::vector<float> patch_weights(const ImageBuffer& elm_raster, const BasisGeometry& geometry);

/// Sum of weight * patch^2 over all patches: the unoccluded light total.
double unoccluded_total(std::span<const float> weights, const BasisGeometry& geometry);

/// Weighted basis sum, in the inverse domain.
ShadowMap compose(const ShadowBasisSet& bases, const ImageBuffer& elm_raster);
ShadowMap compose(const ShadowBasisSet& bases, const EnvLightMap& elm);
ShadowMap compose_weights(const ShadowBasisSet& bases, std::span<const float> weights);

/// radiance = T - inverse on ground pixels, 0 elsewhere; T = unoccluded_total.
ShadowMap to_radiance(const ShadowMap& inverse, const ImageBuffer& elm_raster,
                      const BasisGeometry& geometry = {}, const ImageBuffer* ground_mask = nullptr);
ShadowMap to_radiance(const ShadowMap& inverse, const EnvLightMap& elm,
                      const BasisGeometry& geometry = {}, const ImageBuffer* ground_mask = nullptr);
ShadowMap to_inverse(const ShadowMap& radiance, const ImageBuffer& elm_raster,
                     const BasisGeometry& geometry = {}, const ImageBuffer* ground_mask = nullptr);

// SSBB basis file: "SSBB", u16 version, u16 image_w, u16 image_h, u16 grid_rows,
// u16 grid_cols, u16 patch, then float32 pixels. Little-endian throughout.
std::string encode_ssbb(const ShadowBasisSet& bases);
ShadowBasisSet decode_ssbb(std::string_view bytes);
void write_ssbb(const std::filesystem::path& path, const ShadowBasisSet& bases);
ShadowBasisSet read_ssbb(const std::filesystem::path& path);

} // namespace softshadow
