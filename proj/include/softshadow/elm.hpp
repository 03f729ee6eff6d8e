#pragma once

#include "softshadow/image.hpp"
#include "softshadow/mesh.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace softshadow {

inline constexpr int kElmWidth = 512;
inline constexpr int kElmHeight = 256;

/// One 2D Gaussian on the panorama. Position is in normalized [0,1]^2 map
/// coordinates (x = azimuth, y = polar angle from the zenith).
struct GaussianLight {
    double x = 0.5;
    double y = 0.25;
    double intensity = 1.0;
    double sigma2 = 0.01;

    friend bool operator==(const GaussianLight&, const GaussianLight&) = default;
};

/// Environment light map: a Gaussian mixture plus a constant ambient floor.
struct EnvLightMap {
    int width = kElmWidth;
    int height = kElmHeight;
    double ambient = 0.0;
    std::vector<GaussianLight> lights;

    friend bool operator==(const EnvLightMap&, const EnvLightMap&) = default;
};

/// Gaussians are truncated to zero beyond this many standard deviations.
inline constexpr double kTruncationSigmas = 3.0;

/// Mixture value at a continuous normalized coordinate (with azimuth wrap).
double evaluate_elm(const EnvLightMap& elm, double x, double y);

/// Samples the mixture at pixel centers ((u + 0.5) / width, (v + 0.5) / height).
ImageBuffer rasterize_elm(const EnvLightMap& elm);
/// Same, but only rows [0, rows) are filled; the rest stay zero.
ImageBuffer rasterize_elm(const EnvLightMap& elm, int rows);

/// Parameter ranges for random light maps.
struct ElmSampling {
    int max_lights = 50;
    double max_intensity = 3.0;
    double min_sigma2 = 0.0;  // exclusive lower bound
    double max_sigma2 = 0.1;
    double max_ambient = 0.05;
};

EnvLightMap sample_elm(std::uint64_t seed, const ElmSampling& ranges = {});

/// Unit direction for the center of panorama pixel (u, v); y is up.
/// Azimuth phi = 2pi (u + 0.5) / width, polar theta = pi (v + 0.5) / height,
/// direction = (sin theta cos phi, cos theta, sin theta sin phi).
Vec3 pixel_direction(int u, int v, int width = kElmWidth, int height = kElmHeight);

void to_json(nlohmann::json& j, const GaussianLight& light);
void from_json(const nlohmann::json& j, GaussianLight& light);
void to_json(nlohmann::json& j, const EnvLightMap& elm);
void from_json(const nlohmann::json& j, EnvLightMap& elm);

/// Parses and validates an ELM JSON document.
EnvLightMap parse_elm(std::string_view text);
std::string dump_elm(const EnvLightMap& elm);
EnvLightMap load_elm(const std::filesystem::path& path);
void save_elm(const std::filesystem::path& path, const EnvLightMap& elm);

/// Throws InvalidParameterError when a light is outside the supported ranges.
void validate(const EnvLightMap& elm);

} // namespace softshadow
