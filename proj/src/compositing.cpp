#include "softshadow/compositing.hpp"

#include "softshadow/errors.hpp"

#include <algorithm>
#include <cmath>

namespace softshadow {

void from_json(const nlohmann::json& j, BrushStroke& s)
{
    j.at("x").get_to(s.x);
    j.at("y").get_to(s.y);
    j.at("radius").get_to(s.radius);
    j.at("value").get_to(s.value);
    const std::string mode = j.value("mode", std::string("darken"));
    if (mode != "darken" && mode != "lighten") {
        throw FormatError("stroke mode must be 'darken' or 'lighten'");
    }
    s.lighten = mode == "lighten";
    if (!(s.value >= 0.0f && s.value <= 1.0f)) {
        throw InvalidParameterError("stroke value must be in [0,1]");
    }
    if (!(s.radius >= 0.0f) || !std::isfinite(s.x) || !std::isfinite(s.y)) {
        throw InvalidParameterError("stroke geometry must be finite with radius >= 0");
    }
}

void to_json(nlohmann::json& j, const BrushStroke& s)
{
    j = nlohmann::json{{"x", s.x},         {"y", s.y},
                       {"radius", s.radius}, {"value", s.value},
                       {"mode", s.lighten ? "lighten" : "darken"}};
}

ImageBuffer apply_strokes(const ImageBuffer& ao, std::span<const BrushStroke> strokes)
{
    ImageBuffer out = ao;
    for (const BrushStroke& s : strokes) {
        const int x0 = std::max(0, static_cast<int>(std::floor(s.x - s.radius - 1)));
        const int x1 = std::min(out.width() - 1, static_cast<int>(std::ceil(s.x + s.radius + 1)));
        const int y0 = std::max(0, static_cast<int>(std::floor(s.y - s.radius - 1)));
        const int y1 = std::min(out.height() - 1, static_cast<int>(std::ceil(s.y + s.radius + 1)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const float d = std::hypot(x + 0.5f - s.x, y + 0.5f - s.y);
                const float coverage = std::clamp(s.radius + 0.5f - d, 0.0f, 1.0f);
                if (coverage <= 0.0f) {
                    continue;
                }
                float& px = out(x, y);
                if (s.lighten) {
                    px = std::max(px, coverage * s.value);
                } else {
                    px = std::min(px, coverage * s.value + (1.0f - coverage));
                }
            }
        }
    }
    return out;
}

ColorImage make_cutout_rgba(const ColorImage& image, const ImageBuffer* mask)
{
    if (image.channels() == 4) {
        return image;
    }
    if (image.channels() != 3 && image.channels() != 1) {
        throw FormatError("cutout must be a gray, RGB or RGBA image");
    }
    const bool use_mask = mask && mask->width() == image.width() && mask->height() == image.height();
    ColorImage out(image.width(), image.height(), 4);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                out.at(x, y, c) = image.at(x, y, image.channels() == 3 ? c : 0);
            }
            out.at(x, y, 3) = use_mask ? (*mask)(x, y) : 1.0f;
        }
    }
    return out;
}

ImageBuffer lit_fraction(const ShadowMap& inverse, double total, const ImageBuffer* ground_mask)
{
    if (inverse.domain != ShadowDomain::Inverse) {
        throw DomainError("lit_fraction expects an inverse-domain shadow");
    }
    ImageBuffer lit(inverse.pixels.width(), inverse.pixels.height(), 1.0f);
    if (total <= 0.0) {
        return lit;
    }
    for (std::size_t i = 0; i < lit.size(); ++i) {
        if (!ground_mask || (*ground_mask)[i] > 0.5f) {
            lit[i] = static_cast<float>(std::clamp((total - inverse.pixels[i]) / total, 0.0, 1.0));
        }
    }
    return lit;
}

ColorImage composite(const ColorImage& background, const ImageBuffer& lit, const Cutout& cutout)
{
    if (background.empty()) {
        throw PreconditionError("composite needs a background layer");
    }
    if (cutout.rgba.empty()) {
        throw PreconditionError("composite needs a cutout layer");
    }
    if (cutout.rgba.channels() != 4) {
        throw InvalidParameterError("cutout layer must be RGBA");
    }
    const Placement& place = cutout.placement;
    if (!(place.scale > 0.0f)) {
        throw InvalidParameterError("placement scale must be positive");
    }
    const int channels = std::min(background.channels(), 3);
    ColorImage out(background.width(), background.height(), 3);
    for (int y = 0; y < background.height(); ++y) {
        for (int x = 0; x < background.width(); ++x) {
            float rgb[3];
            for (int c = 0; c < 3; ++c) {
                rgb[c] = background.at(x, y, channels == 3 ? c : 0);
            }
            // Layer coordinates of this background pixel center.
            const float lx = (x + 0.5f - place.x) / place.scale;
            const float ly = (y + 0.5f - place.y) / place.scale;
            if (lx >= 0.0f && ly >= 0.0f && lx < lit.width() && ly < lit.height()) {
                const float factor = sample_bilinear(lit, lx, ly);
                for (float& v : rgb) {
                    v *= factor;
                }
            }
            if (lx >= 0.0f && ly >= 0.0f && lx < cutout.rgba.width() && ly < cutout.rgba.height()) {
                const float alpha = cutout.rgba.sample(lx, ly, 3);
                if (alpha > 0.0f) {
                    for (int c = 0; c < 3; ++c) {
                        rgb[c] = alpha * cutout.rgba.sample(lx, ly, c) + (1.0f - alpha) * rgb[c];
                    }
                }
            }
            for (int c = 0; c < 3; ++c) {
                out.at(x, y, c) = rgb[c];
            }
        }
    }
    return out;
}

} // namespace softshadow
