#pragma once

#include "softshadow/image.hpp"
#include "softshadow/scene.hpp"

#include <cstdint>

namespace softshadow {

/// Receiver-plane ambient occlusion in the camera frame. Values are the
/// contrast-boosted A^(1/3) in [0,1]: 0 occluded, 1 exposed.
struct AOMap {
    ImageBuffer pixels;
    int samples_per_pixel = 0;
};

inline constexpr double kAoExponent = 1.0 / 3.0;
inline constexpr int kDefaultSpp = 256;

/// A -> A^(1/3), correctly rounded so exact cubes map exactly (0.125 -> 0.5).
double boost_ao(double visibility);

/// Monte-Carlo estimate of the cosine-weighted visibility A at one point, before
/// the exponent. Directions are i.i.d. cosine-weighted, so an unoccluded point
/// yields exactly 1 and the estimator variance falls as 1/spp.
double ambient_visibility(const Mesh& mesh, const Vec3& point, const Vec3& normal, int spp,
                          std::uint64_t seed);

/// Per-pixel AO for every ground pixel; other pixels are 1. Each pixel draws
/// from its own generator derived from (seed, pixel index).
AOMap compute_ao(const Scene& scene, int spp = kDefaultSpp, std::uint64_t seed = 0);
AOMap compute_ao(const Mesh& normalized_mesh, const CameraPose& pose, const GroundPlane& ground,
                 int spp = kDefaultSpp, std::uint64_t seed = 0);

/// Generator seed used for pixel `index` of an AO render seeded with `seed`.
std::uint64_t pixel_seed(std::uint64_t seed, std::uint64_t index);

// Grayscale morphology with a disk of the given radius (offsets with
// dx^2 + dy^2 <= r^2); out-of-image neighbors are ignored.
ImageBuffer dilate(const ImageBuffer& image, int radius);
ImageBuffer erode(const ImageBuffer& image, int radius);

struct Perturbation {
    bool dilation = false;
    int radius = 1;
};

/// The operation perturb_ao() applies for a seed: erosion or dilation with
/// probability 1/2 each, radius uniform in {1..5}.
Perturbation perturbation_for_seed(std::uint64_t seed);

/// Applies the seeded morphology to the occlusion channel 1 - A'.
AOMap perturb_ao(const AOMap& ao, std::uint64_t seed);
AOMap apply_perturbation(const AOMap& ao, const Perturbation& op);

} // namespace softshadow
