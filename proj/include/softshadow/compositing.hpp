#pragma once

#include "softshadow/image.hpp"
#include "softshadow/shadow_bases.hpp"

#include "json.hpp"

#include <span>

namespace softshadow {

/// Soft disk stamp on an AO map. Darken strokes min-composite toward `value`,
/// lighten strokes max-composite toward it. Coverage is 1 up to radius - 0.5
/// and falls off linearly to 0 at radius + 0.5.
struct BrushStroke {
    float x = 0.0f;
    float y = 0.0f;
    float radius = 1.0f;
    float value = 0.0f;
    bool lighten = false;
};

void from_json(const nlohmann::json& j, BrushStroke& stroke);
void to_json(nlohmann::json& j, const BrushStroke& stroke);

/// Strokes are applied in order; parts outside the image are clipped.
ImageBuffer apply_strokes(const ImageBuffer& ao, std::span<const BrushStroke> strokes);

/// Where a layer of the shadow/cutout frame lands on the background.
struct Placement {
    float x = 0.0f;  // top-left, background pixels
    float y = 0.0f;
    float scale = 1.0f;
};

/// Cutout layer in the basis image frame: RGBA, alpha = coverage.
struct Cutout {
    ColorImage rgba;
    Placement placement;
};

/// Builds an RGBA cutout; RGB input takes alpha from `mask` when it matches in
/// size, otherwise it is opaque.
ColorImage make_cutout_rgba(const ColorImage& image, const ImageBuffer* mask);

/// Lit fraction (T - s) / T on ground pixels, 1 elsewhere and when T <= 0.
ImageBuffer lit_fraction(const ShadowMap& inverse, double unoccluded_total,
                         const ImageBuffer* ground_mask);

/// Darkens the background by the lit fraction of the placed shadow layer, then
/// alpha-blends the cutout on top at the same placement.
ColorImage composite(const ColorImage& background, const ImageBuffer& lit, const Cutout& cutout);

} // namespace softshadow
