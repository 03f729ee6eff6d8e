#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace softshadow {

/// Single-channel float raster, row-major, row 0 at the top.
class ImageBuffer {
public:
    ImageBuffer() = default;
    ImageBuffer(int width, int height, float fill = 0.0f);
    ImageBuffer(int width, int height, std::vector<float> pixels);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return pixels_.size(); }
    bool empty() const { return pixels_.empty(); }

    float& operator()(int x, int y) { return pixels_[index(x, y)]; }
    float operator()(int x, int y) const { return pixels_[index(x, y)]; }
    float& operator[](std::size_t i) { return pixels_[i]; }
    float operator[](std::size_t i) const { return pixels_[i]; }

    std::span<float> pixels() { return pixels_; }
    std::span<const float> pixels() const { return pixels_; }
    std::span<const float> row(int y) const
    {
        return std::span<const float>(pixels_).subspan(static_cast<std::size_t>(y) * width_, width_);
    }

    float max_value() const;
    float min_value() const;
    double sum() const;

    bool same_shape(const ImageBuffer& other) const
    {
        return width_ == other.width_ && height_ == other.height_;
    }

    friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

private:
    std::size_t index(int x, int y) const
    {
        return static_cast<std::size_t>(y) * width_ + x;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<float> pixels_;
};

/// Interleaved multi-channel float image (RGB or RGBA), values nominally in [0,1].
class ColorImage {
public:
    ColorImage() = default;
    ColorImage(int width, int height, int channels, float fill = 0.0f);

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    bool empty() const { return data_.empty(); }

    float& at(int x, int y, int c) { return data_[index(x, y, c)]; }
    float at(int x, int y, int c) const { return data_[index(x, y, c)]; }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }

    /// Bilinear lookup with clamp-to-edge addressing.
    float sample(float x, float y, int c) const;

    friend bool operator==(const ColorImage&, const ColorImage&) = default;

private:
    std::size_t index(int x, int y, int c) const
    {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<float> data_;
};

/// Bilinear lookup on a single-channel image with clamp-to-edge addressing.
float sample_bilinear(const ImageBuffer& image, float x, float y);

} // namespace softshadow
