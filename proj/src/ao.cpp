#include "softshadow/ao.hpp"

#include "softshadow/errors.hpp"
#include "softshadow/shadow_bases.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace softshadow {

double boost_ao(double visibility)
{
    const double a = std::clamp(visibility, 0.0, 1.0);
    // glibc's cbrt is not correctly rounded (cbrt(0.125) misses 0.5 by an ulp), so
    // keep whichever neighbour has the cube closest to a.
    const double r = std::cbrt(a);
    double best = r;
    long double best_err = std::abs(static_cast<long double>(r) * r * r - a);
    for (double c : {std::nextafter(r, 0.0), std::nextafter(r, 2.0)}) {
        const long double err = std::abs(static_cast<long double>(c) * c * c - a);
        if (err < best_err) {
            best = c;
            best_err = err;
        }
    }
    return std::min(best, 1.0);
}

std::uint64_t pixel_seed(std::uint64_t seed, std::uint64_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

double ambient_visibility(const Mesh& mesh, const Vec3& point, const Vec3& normal, int spp,
                          std::uint64_t seed)
{
    if (spp < 1) {
        throw InvalidParameterError("spp must be >= 1");
    }
    if (mesh.empty()) {
        return 1.0;
    }
    const Vec3 n = normal.normalized();
    const Vec3 helper = std::abs(n.x()) < 0.9f ? Vec3::UnitX() : Vec3::UnitZ();
    const Vec3 t = n.cross(helper).normalized();
    const Vec3 b = t.cross(n);
    const Vec3 origin = point + kRayOffset * n;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int visible = 0;
    for (int i = 0; i < spp; ++i) {
        const double phi = 2.0 * std::numbers::pi * unit(rng);
        // Cosine-weighted: sin^2(theta) uniform on [0,1).
        const double s2 = unit(rng);
        const double sin_theta = std::sqrt(s2);
        const double cos_theta = std::sqrt(1.0 - s2);
        const Vec3 dir = (static_cast<float>(sin_theta * std::cos(phi)) * t
                          + static_cast<float>(cos_theta) * n
                          + static_cast<float>(sin_theta * std::sin(phi)) * b)
                             .normalized();
        if (!mesh.occluded(Ray{origin, dir})) {
            ++visible;
        }
    }
    return static_cast<double>(visible) / spp;
}

AOMap compute_ao(const Scene& scene, int spp, std::uint64_t seed)
{
    if (spp < 1) {
        throw InvalidParameterError("spp must be >= 1");
    }
    const GroundView view = view_ground(scene);
    AOMap ao{ImageBuffer(view.width, view.height, 1.0f), spp};
    const Vec3 up = Vec3::UnitY();
#pragma omp parallel for schedule(dynamic, 1)
    for (int y = 0; y < view.height; ++y) {
        for (int x = 0; x < view.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * view.width + x;
            if (!view.is_ground(i)) {
                continue;
            }
            const double a = ambient_visibility(scene.mesh(), view.point[i], up, spp, pixel_seed(seed, i));
            ao.pixels[i] = static_cast<float>(boost_ao(a));
        }
    }
    return ao;
}

AOMap compute_ao(const Mesh& normalized_mesh, const CameraPose& pose, const GroundPlane& ground,
                 int spp, std::uint64_t seed)
{
    return compute_ao(Scene(normalized_mesh, pose, ground), spp, seed);
}

namespace {

template <typename Pick>
ImageBuffer morphology(const ImageBuffer& image, int radius, Pick pick)
{
    if (radius < 0) {
        throw InvalidParameterError("morphology radius must be >= 0");
    }
    std::vector<std::pair<int, int>> offsets;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            if (dx * dx + dy * dy <= radius * radius) {
                offsets.emplace_back(dx, dy);
            }
        }
    }
    ImageBuffer out(image.width(), image.height());
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            float value = image(x, y);
            for (auto [dx, dy] : offsets) {
                const int sx = x + dx;
                const int sy = y + dy;
                if (sx >= 0 && sx < image.width() && sy >= 0 && sy < image.height()) {
                    value = pick(value, image(sx, sy));
                }
            }
            out(x, y) = value;
        }
    }
    return out;
}

} // namespace

ImageBuffer dilate(const ImageBuffer& image, int radius)
{
    return morphology(image, radius, [](float a, float b) { return std::max(a, b); });
}

ImageBuffer erode(const ImageBuffer& image, int radius)
{
    return morphology(image, radius, [](float a, float b) { return std::min(a, b); });
}

Perturbation perturbation_for_seed(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    std::uniform_int_distribution<int> radius(1, 5);
    Perturbation op;
    op.dilation = coin(rng);
    op.radius = radius(rng);
    return op;
}

AOMap apply_perturbation(const AOMap& ao, const Perturbation& op)
{
    ImageBuffer occlusion(ao.pixels.width(), ao.pixels.height());
    for (std::size_t i = 0; i < occlusion.size(); ++i) {
        occlusion[i] = 1.0f - ao.pixels[i];
    }
    const ImageBuffer morphed = op.dilation ? dilate(occlusion, op.radius) : erode(occlusion, op.radius);
    AOMap out{ImageBuffer(ao.pixels.width(), ao.pixels.height()), ao.samples_per_pixel};
    for (std::size_t i = 0; i < morphed.size(); ++i) {
        // Pixels the morphology left untouched keep their exact original value.
        out.pixels[i] = morphed[i] == occlusion[i] ? ao.pixels[i] : 1.0f - morphed[i];
    }
    return out;
}

AOMap perturb_ao(const AOMap& ao, std::uint64_t seed)
{
    return apply_perturbation(ao, perturbation_for_seed(seed));
}

} // namespace softshadow
