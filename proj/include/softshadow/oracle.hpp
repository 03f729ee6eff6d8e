#pragma once

#include "softshadow/elm.hpp"
#include "softshadow/scene.hpp"
#include "softshadow/shadow_bases.hpp"

#include <cstdint>
#include <vector>

namespace softshadow {

/// Brute-force reference renderer: weights the hard shadow of every top-half
/// panorama pixel by that pixel's own value, with no patch aggregation.
///
/// Per-pixel sums run over directions in row-major panorama order with
/// compensated (Neumaier) double accumulation, so results are bit-stable.
/// When the per-direction shadow bitsets fit in `cache_budget_bytes` they are
/// computed once at construction and reused by every render() call.
class OracleRenderer {
public:
    explicit OracleRenderer(const Scene& scene, BasisGeometry geometry = {},
                            std::size_t cache_budget_bytes = std::size_t{768} << 20);

    ShadowMap render(const ImageBuffer& elm_raster) const;
    ShadowMap render(const EnvLightMap& elm) const;

    bool cached() const { return !bits_.empty(); }
    const GroundView& view() const { return view_; }

private:
    Scene scene_;
    BasisGeometry geometry_;
    GroundView view_;
    std::size_t words_per_direction_ = 0;
    std::vector<std::uint64_t> bits_;
};

ShadowMap render_oracle(const Scene& scene, const EnvLightMap& elm, BasisGeometry geometry = {});
ShadowMap render_oracle(const Mesh& normalized_mesh, const CameraPose& pose,
                        const GroundPlane& ground, const EnvLightMap& elm);

} // namespace softshadow
