#include "softshadow/image.hpp"

#include "softshadow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace softshadow {

ImageBuffer::ImageBuffer(int width, int height, float fill)
    : width_(width), height_(height)
{
    if (width < 0 || height < 0) {
        throw InvalidParameterError("image dimensions must be non-negative");
    }
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

ImageBuffer::ImageBuffer(int width, int height, std::vector<float> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels))
{
    if (width < 0 || height < 0 || pixels_.size() != static_cast<std::size_t>(width) * height) {
        throw GeometryError("pixel count " + std::to_string(pixels_.size()) + " does not match "
                            + std::to_string(width) + "x" + std::to_string(height));
    }
}

float ImageBuffer::max_value() const
{
    if (pixels_.empty()) {
        return 0.0f;
    }
    return *std::max_element(pixels_.begin(), pixels_.end());
}

float ImageBuffer::min_value() const
{
    if (pixels_.empty()) {
        return 0.0f;
    }
    return *std::min_element(pixels_.begin(), pixels_.end());
}

double ImageBuffer::sum() const
{
    return std::accumulate(pixels_.begin(), pixels_.end(), 0.0);
}

ColorImage::ColorImage(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels)
{
    if (width < 0 || height < 0 || channels < 1 || channels > 4) {
        throw InvalidParameterError("invalid color image shape");
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

namespace {

template <typename Fetch>
float bilinear(int width, int height, float x, float y, Fetch fetch)
{
    // Pixel centers sit at integer + 0.5.
    const float fx = std::clamp(x - 0.5f, 0.0f, static_cast<float>(width - 1));
    const float fy = std::clamp(y - 0.5f, 0.0f, static_cast<float>(height - 1));
    const int x0 = static_cast<int>(fx);
    const int y0 = static_cast<int>(fy);
    const int x1 = std::min(x0 + 1, width - 1);
    const int y1 = std::min(y0 + 1, height - 1);
    const float tx = fx - x0;
    const float ty = fy - y0;
    const float top = fetch(x0, y0) * (1 - tx) + fetch(x1, y0) * tx;
    const float bottom = fetch(x0, y1) * (1 - tx) + fetch(x1, y1) * tx;
    return top * (1 - ty) + bottom * ty;
}

} // namespace

float ColorImage::sample(float x, float y, int c) const
{
    return bilinear(width_, height_, x, y, [&](int px, int py) { return at(px, py, c); });
}

float sample_bilinear(const ImageBuffer& image, float x, float y)
{
    return bilinear(image.width(), image.height(), x, y,
                    [&](int px, int py) { return image(px, py); });
}

} // namespace softshadow
