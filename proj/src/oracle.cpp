#include "softshadow/oracle.hpp"

#include "softshadow/errors.hpp"

#include <bit>
#include <cmath>

namespace softshadow {

namespace {

/// Neumaier-compensated running sum.
struct CompensatedSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x)
    {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x)) {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    double value() const { return sum + carry; }
};

void check_raster(const ImageBuffer& raster, const BasisGeometry& g)
{
    if (raster.width() != g.elm_width() || raster.height() != g.elm_height()) {
        throw GeometryError("light map size does not match the panorama geometry");
    }
}

} // namespace

OracleRenderer::OracleRenderer(const Scene& scene, BasisGeometry geometry,
                               std::size_t cache_budget_bytes)
    : scene_(scene), geometry_(geometry), view_(view_ground(scene))
{
    const std::size_t pixels = static_cast<std::size_t>(view_.width) * view_.height;
    words_per_direction_ = (pixels + 63) / 64;
    const std::size_t directions = static_cast<std::size_t>(geometry_.top_rows()) * geometry_.elm_width();
    const std::size_t bytes = directions * words_per_direction_ * sizeof(std::uint64_t);
    if (bytes > cache_budget_bytes || scene.mesh().empty()) {
        return;
    }
    bits_.assign(directions * words_per_direction_, 0);
#pragma omp parallel for schedule(dynamic, 16)
    for (std::size_t d = 0; d < directions; ++d) {
        const int v = static_cast<int>(d / geometry_.elm_width());
        const int u = static_cast<int>(d % geometry_.elm_width());
        const ImageBuffer shadow = hard_shadow(
            scene_, view_, pixel_direction(u, v, geometry_.elm_width(), geometry_.elm_height()));
        std::uint64_t* words = bits_.data() + d * words_per_direction_;
        for (std::size_t p = 0; p < pixels; ++p) {
            if (shadow[p] != 0.0f) {
                words[p / 64] |= std::uint64_t{1} << (p % 64);
            }
        }
    }
}

ShadowMap OracleRenderer::render(const ImageBuffer& elm_raster) const
{
    check_raster(elm_raster, geometry_);
    const std::size_t pixels = static_cast<std::size_t>(view_.width) * view_.height;
    std::vector<CompensatedSum> acc(pixels);
    const int elm_width = geometry_.elm_width();

    if (!scene_.mesh().empty()) {
        for (int v = 0; v < geometry_.top_rows(); ++v) {
            for (int u = 0; u < elm_width; ++u) {
                const double weight = elm_raster(u, v);
                if (weight == 0.0) {
                    continue;
                }
                const std::size_t d = static_cast<std::size_t>(v) * elm_width + u;
                if (cached()) {
                    const std::uint64_t* words = bits_.data() + d * words_per_direction_;
                    for (std::size_t w = 0; w < words_per_direction_; ++w) {
                        std::uint64_t word = words[w];
                        while (word != 0) {
                            const int bit = std::countr_zero(word);
                            acc[w * 64 + bit].add(weight);
                            word &= word - 1;
                        }
                    }
                } else {
                    const ImageBuffer shadow = hard_shadow(
                        scene_, view_, pixel_direction(u, v, elm_width, geometry_.elm_height()));
                    for (std::size_t p = 0; p < pixels; ++p) {
                        if (shadow[p] != 0.0f) {
                            acc[p].add(weight);
                        }
                    }
                }
            }
        }
    }

    ImageBuffer out(view_.width, view_.height);
    for (std::size_t p = 0; p < pixels; ++p) {
        out[p] = static_cast<float>(acc[p].value());
    }
    return ShadowMap{std::move(out), ShadowDomain::Inverse};
}

ShadowMap OracleRenderer::render(const EnvLightMap& elm) const
{
    return render(rasterize_elm(elm));
}

ShadowMap render_oracle(const Scene& scene, const EnvLightMap& elm, BasisGeometry geometry)
{
    // A one-shot render gains nothing from the bitset cache.
    return OracleRenderer(scene, geometry, 0).render(elm);
}

ShadowMap render_oracle(const Mesh& normalized_mesh, const CameraPose& pose,
                        const GroundPlane& ground, const EnvLightMap& elm)
{
    return render_oracle(Scene(normalized_mesh, pose, ground), elm);
}

} // namespace softshadow
