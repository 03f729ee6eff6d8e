#include "softshadow/elm.hpp"

#include "softshadow/errors.hpp"
#include "softshadow/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace softshadow {

namespace {

double wrapped_dx(double a, double b)
{
    double dx = std::abs(a - b);
    dx = std::fmod(dx, 1.0);
    return std::min(dx, 1.0 - dx);
}

double light_value(const GaussianLight& light, double x, double y)
{
    const double dx = wrapped_dx(x, light.x);
    const double dy = y - light.y;
    const double d2 = dx * dx + dy * dy;
    if (d2 > kTruncationSigmas * kTruncationSigmas * light.sigma2) {
        return 0.0;
    }
    return light.intensity * std::exp(-d2 / (2.0 * light.sigma2));
}

} // namespace

void validate(const EnvLightMap& elm)
{
    if (elm.width <= 0 || elm.height <= 0) {
        throw InvalidParameterError("ELM dimensions must be positive");
    }
    if (!std::isfinite(elm.ambient) || elm.ambient < 0.0) {
        throw InvalidParameterError("ELM ambient must be finite and >= 0");
    }
    for (std::size_t k = 0; k < elm.lights.size(); ++k) {
        const GaussianLight& l = elm.lights[k];
        const std::string which = "light " + std::to_string(k) + ": ";
        if (!(std::isfinite(l.sigma2) && l.sigma2 > 0.0)) {
            throw InvalidParameterError(which + "sigma2 must be > 0");
        }
        if (!(std::isfinite(l.intensity) && l.intensity >= 0.0)) {
            throw InvalidParameterError(which + "intensity must be >= 0");
        }
        if (!(l.x >= 0.0 && l.x <= 1.0 && l.y >= 0.0 && l.y <= 1.0)) {
            throw InvalidParameterError(which + "position must lie in [0,1]^2");
        }
    }
}

double evaluate_elm(const EnvLightMap& elm, double x, double y)
{
    double sum = 0.0;
    for (const GaussianLight& light : elm.lights) {
        sum += light_value(light, x, y);
    }
    return elm.ambient + sum;
}

ImageBuffer rasterize_elm(const EnvLightMap& elm)
{
    return rasterize_elm(elm, elm.height);
}

ImageBuffer rasterize_elm(const EnvLightMap& elm, int rows)
{
    validate(elm);
    const int w = elm.width;
    const int h = elm.height;
    rows = std::clamp(rows, 0, h);
    std::vector<double> acc(static_cast<std::size_t>(w) * rows, 0.0);
    std::vector<double> gx(w), dx2(w);

    for (const GaussianLight& light : elm.lights) {
        const double cutoff = kTruncationSigmas * kTruncationSigmas * light.sigma2;
        const double radius = std::sqrt(cutoff);
        const int v0 = std::max(0, static_cast<int>(std::floor((light.y - radius) * h - 0.5)));
        const int v1 = std::min(rows - 1, static_cast<int>(std::ceil((light.y + radius) * h - 0.5)));
        if (v0 > v1) {
            continue;
        }
        // exp(-(dx^2 + dy^2) / 2s^2) factors into a column and a row term.
        for (int u = 0; u < w; ++u) {
            const double dx = wrapped_dx((u + 0.5) / w, light.x);
            dx2[u] = dx * dx;
            gx[u] = dx2[u] <= cutoff ? std::exp(-dx2[u] / (2.0 * light.sigma2)) : 0.0;
        }
        for (int v = v0; v <= v1; ++v) {
            const double dy = (v + 0.5) / h - light.y;
            const double dy2 = dy * dy;
            if (dy2 > cutoff) {
                continue;
            }
            const double gy = light.intensity * std::exp(-dy2 / (2.0 * light.sigma2));
            const double limit = cutoff - dy2;
            double* row = acc.data() + static_cast<std::size_t>(v) * w;
            for (int u = 0; u < w; ++u) {
                if (dx2[u] <= limit) {
                    row[u] += gy * gx[u];
                }
            }
        }
    }

    ImageBuffer out(w, h);
    for (std::size_t i = 0; i < acc.size(); ++i) {
        out[i] = static_cast<float>(elm.ambient + acc[i]);
    }
    return out;
}

EnvLightMap sample_elm(std::uint64_t seed, const ElmSampling& ranges)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> count(1, ranges.max_lights);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    EnvLightMap elm;
    const int k = count(rng);
    elm.lights.reserve(k);
    for (int i = 0; i < k; ++i) {
        GaussianLight light;
        light.x = unit(rng);
        light.y = unit(rng);
        light.intensity = ranges.max_intensity * unit(rng);
        // 1 - U maps [0,1) onto (0,1], keeping sigma2 strictly above the lower bound.
        light.sigma2 = ranges.min_sigma2 + (ranges.max_sigma2 - ranges.min_sigma2) * (1.0 - unit(rng));
        elm.lights.push_back(light);
    }
    elm.ambient = ranges.max_ambient * unit(rng);
    return elm;
}

Vec3 pixel_direction(int u, int v, int width, int height)
{
    if (u < 0 || u >= width || v < 0 || v >= height) {
        throw BoundsError("panorama pixel (" + std::to_string(u) + ", " + std::to_string(v)
                          + ") outside " + std::to_string(width) + "x" + std::to_string(height));
    }
    const double phi = 2.0 * std::numbers::pi * (u + 0.5) / width;
    const double theta = std::numbers::pi * (v + 0.5) / height;
    return Vec3(static_cast<float>(std::sin(theta) * std::cos(phi)),
                static_cast<float>(std::cos(theta)),
                static_cast<float>(std::sin(theta) * std::sin(phi)));
}

void to_json(nlohmann::json& j, const GaussianLight& light)
{
    j = nlohmann::json{{"x", light.x}, {"y", light.y}, {"intensity", light.intensity},
                       {"sigma2", light.sigma2}};
}

void from_json(const nlohmann::json& j, GaussianLight& light)
{
    j.at("x").get_to(light.x);
    j.at("y").get_to(light.y);
    j.at("intensity").get_to(light.intensity);
    j.at("sigma2").get_to(light.sigma2);
}

void to_json(nlohmann::json& j, const EnvLightMap& elm)
{
    j = nlohmann::json{{"width", elm.width}, {"height", elm.height}, {"ambient", elm.ambient},
                       {"lights", elm.lights}};
}

void from_json(const nlohmann::json& j, EnvLightMap& elm)
{
    elm.width = j.value("width", kElmWidth);
    elm.height = j.value("height", kElmHeight);
    elm.ambient = j.value("ambient", 0.0);
    elm.lights = j.value("lights", std::vector<GaussianLight>{});
}

EnvLightMap parse_elm(std::string_view text)
{
    EnvLightMap elm;
    try {
        elm = nlohmann::json::parse(text).get<EnvLightMap>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("ELM JSON: ") + e.what());
    }
    validate(elm);
    return elm;
}

std::string dump_elm(const EnvLightMap& elm)
{
    return nlohmann::json(elm).dump();
}

EnvLightMap load_elm(const std::filesystem::path& path)
{
    try {
        return parse_elm(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void save_elm(const std::filesystem::path& path, const EnvLightMap& elm)
{
    write_file(path, nlohmann::json(elm).dump(2) + "\n");
}

} // namespace softshadow
