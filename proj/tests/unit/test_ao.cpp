#include "doctest.h"

#include "shapes.hpp"
#include "softshadow/ao.hpp"
#include "softshadow/errors.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <set>

using namespace softshadow;

namespace {

CameraPose pose_of(double yaw, double pitch, int size)
{
    CameraPose p;
    p.yaw = yaw;
    p.pitch = pitch;
    p.width = size;
    p.height = size;
    return p;
}

bool hits_box(const Vec3& o, const Eigen::Vector3d& d, const Vec3& lo, const Vec3& hi)
{
    double t0 = 0.0, t1 = 1e30;
    for (int a = 0; a < 3; ++a) {
        if (d[a] == 0.0) {
            if (o[a] < lo[a] || o[a] > hi[a]) {
                return false;
            }
            continue;
        }
        double ta = (lo[a] - o[a]) / d[a];
        double tb = (hi[a] - o[a]) / d[a];
        if (ta > tb) {
            std::swap(ta, tb);
        }
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    return t0 <= t1;
}

// Deterministic 256 x 256 midpoint rule in (sin^2 theta, phi): 65,536 cosine-weighted
// directions against an analytic box.
double reference_visibility(const Vec3& p, const Vec3& lo, const Vec3& hi)
{
    constexpr int n = 256;
    int visible = 0;
    for (int i = 0; i < n; ++i) {
        const double s2 = (i + 0.5) / n;
        const double st = std::sqrt(s2), ct = std::sqrt(1.0 - s2);
        for (int j = 0; j < n; ++j) {
            const double phi = 2.0 * std::numbers::pi * (j + 0.5) / n;
            const Eigen::Vector3d d(st * std::cos(phi), ct, st * std::sin(phi));
            visible += hits_box(p, d, lo, hi) ? 0 : 1;
        }
    }
    return static_cast<double>(visible) / (n * n);
}

double variance_at(const Mesh& mesh, const Vec3& p, int spp, int trials)
{
    double sum = 0.0, sum2 = 0.0;
    for (int k = 0; k < trials; ++k) {
        const double a = ambient_visibility(mesh, p, Vec3::UnitY(), spp, pixel_seed(77, k));
        sum += a;
        sum2 += a * a;
    }
    const double mean = sum / trials;
    return (sum2 - trials * mean * mean) / (trials - 1);
}

} // namespace

TEST_CASE("unoccluded ground is fully exposed")
{
    const Mesh cube = normalize(testing::box(Vec3::Zero(), Vec3::Ones()));
    CHECK(ambient_visibility(cube, Vec3(5.0f, -0.5f, 5.0f), Vec3::UnitY(), 256, 3) >= 0.98);
    CHECK(ambient_visibility(cube, Vec3(0.0f, 0.5f, 0.0f), Vec3::UnitY(), 256, 3) == 1.0);
    CHECK(ambient_visibility(Mesh(), Vec3::Zero(), Vec3::UnitY(), 8, 0) == 1.0);
    // A thin plate blocks almost nothing a few pixels away from it.
    const Mesh plate = normalize(testing::box(Vec3::Zero(), Vec3(1.0f, 0.01f, 1.0f)));
    const AOMap ao = compute_ao(plate, pose_of(0, 30, 32), resting_ground(plate), 256, 1);
    CHECK(ao.samples_per_pixel == 256);
    CHECK(std::abs(ao.pixels(0, 31) - 1.0f) <= 0.02f);
    CHECK(ao.pixels.max_value() <= 1.0f);
    CHECK(ao.pixels.min_value() >= 0.0f);
}

TEST_CASE("one-third exponent")
{
    CHECK(boost_ao(0.125) == 0.5);
    CHECK(boost_ao(0.0) == 0.0);
    CHECK(boost_ao(1.0) == 1.0);
    CHECK(boost_ao(8.0 / 27.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double a = u(rng), b = u(rng);
        CHECK((a <= b) == (boost_ao(a) <= boost_ao(b)));
    }
}

TEST_CASE("points beside a resting cube match a deterministic quadrature")
{
    const Mesh cube = normalize(testing::box(Vec3::Zero(), Vec3::Ones()));
    const Vec3 lo = cube.bounds().lo, hi = cube.bounds().hi;
    const float y = lo.y();
    for (const Vec3& p : {Vec3(0.55f, y, 0.0f), Vec3(0.0f, y, 0.6f), Vec3(0.7f, y, 0.7f),
                          Vec3(-0.52f, y, 0.3f), Vec3(0.0f, y, -1.0f)}) {
        const double expect = boost_ao(reference_visibility(p, lo, hi));
        const double got = boost_ao(ambient_visibility(cube, p, Vec3::UnitY(), 4096, 11));
        CHECK(expect < 0.999);
        CHECK(std::abs(got - expect) <= 0.02);
    }
}

TEST_CASE("compute_ao uses the per-pixel seed stream")
{
    const Mesh cube = normalize(testing::box(Vec3::Zero(), Vec3::Ones()));
    const Scene scene(cube, pose_of(30, 30, 24), resting_ground(cube));
    const AOMap ao = compute_ao(scene, 16, 5);
    const GroundView view = view_ground(scene);
    int checked = 0;
    for (std::size_t i = 0; i < view.kind.size(); i += 37) {
        if (view.is_ground(i)) {
            const double a = ambient_visibility(scene.mesh(), view.point[i], Vec3::UnitY(), 16, pixel_seed(5, i));
            CHECK(ao.pixels[i] == static_cast<float>(boost_ao(a)));
            ++checked;
        } else {
            CHECK(ao.pixels[i] == 1.0f);
        }
    }
    CHECK(checked > 3);
    CHECK(compute_ao(scene, 16, 5).pixels == ao.pixels);
    CHECK_FALSE(compute_ao(scene, 16, 6).pixels == ao.pixels);
    CHECK_THROWS_AS(compute_ao(scene, 0, 5), InvalidParameterError);
}

TEST_CASE("estimator variance halves when spp doubles")
{
    // Just beside a cube face roughly half the hemisphere is blocked.
    const Mesh cube = normalize(testing::box(Vec3::Zero(), Vec3::Ones()));
    const Vec3 p(0.52f, -0.5f, 0.0f);
    const double v64 = variance_at(cube, p, 64, 4000);
    const double v128 = variance_at(cube, p, 128, 4000);
    MESSAGE("variance ratio ", v64 / v128);
    CHECK(v64 / v128 >= 1.6);
    CHECK(v64 / v128 <= 2.4);
}

TEST_CASE("adding geometry never raises visibility")
{
    const Mesh cube = normalize(testing::box(Vec3::Zero(), Vec3::Ones()));
    const Mesh post = testing::box(Vec3(0.7f, -0.5f, -0.1f), Vec3(0.9f, 0.5f, 0.1f));
    const Mesh both = merge({&cube, &post});
    std::mt19937 rng(8);
    std::uniform_real_distribution<float> pos(-1.5f, 1.5f);
    for (int i = 0; i < 100; ++i) {
        const Vec3 p(pos(rng), -0.5f, pos(rng));
        if (std::abs(p.x()) < 0.5f && std::abs(p.z()) < 0.5f) {
            continue;
        }
        // Same seed means the same directions, so occlusion can only grow.
        CHECK(ambient_visibility(both, p, Vec3::UnitY(), 128, i)
              <= ambient_visibility(cube, p, Vec3::UnitY(), 128, i));
    }
}

TEST_CASE("ao perturbation")
{
    SUBCASE("nothing occluded stays unchanged")
    {
        const AOMap ones{ImageBuffer(20, 20, 1.0f), 4};
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            CHECK(perturb_ao(ones, seed).pixels == ones.pixels);
        }
    }
    SUBCASE("seeded choices cover both operations and radii 1 to 5")
    {
        std::set<std::pair<bool, int>> seen;
        for (std::uint64_t seed = 0; seed < 400; ++seed) {
            const Perturbation op = perturbation_for_seed(seed);
            CHECK(op.radius >= 1);
            CHECK(op.radius <= 5);
            seen.insert({op.dilation, op.radius});
            CHECK(perturbation_for_seed(seed).radius == op.radius);
        }
        CHECK(seen.size() == 10);
    }
    SUBCASE("dilation grows the occluded area")
    {
        AOMap ao{ImageBuffer(40, 40, 1.0f), 4};
        ao.pixels(10, 10) = 0.2f;
        ao.pixels(30, 25) = 0.5f;
        std::size_t prev = 2;
        for (int r = 1; r <= 5; ++r) {
            const AOMap out = apply_perturbation(ao, {true, r});
            std::size_t area = 0;
            for (float v : out.pixels.pixels()) {
                area += v < 1.0f ? 1 : 0;
            }
            CHECK(area > prev);
            prev = area;
        }
    }
    SUBCASE("opening a disk keeps almost every pixel")
    {
        ImageBuffer occ(64, 64);
        for (int y = 0; y < 64; ++y) {
            for (int x = 0; x < 64; ++x) {
                occ(x, y) = (x - 32) * (x - 32) + (y - 32) * (y - 32) <= 400 ? 1.0f : 0.0f;
            }
        }
        for (int r = 1; r <= 5; ++r) {
            const ImageBuffer opened = dilate(erode(occ, r), r);
            int agree = 0;
            for (std::size_t i = 0; i < occ.size(); ++i) {
                agree += opened[i] == occ[i] ? 1 : 0;
            }
            CHECK(agree >= 0.95 * occ.size());
        }
    }
    SUBCASE("morphology matches a direct definition")
    {
        std::mt19937 rng(1);
        std::uniform_real_distribution<float> u(0.0f, 1.0f);
        ImageBuffer img(13, 9);
        for (auto& v : img.pixels()) {
            v = u(rng);
        }
        const int r = 2;
        const ImageBuffer d = dilate(img, r);
        const ImageBuffer e = erode(img, r);
        for (int y = 0; y < 9; ++y) {
            for (int x = 0; x < 13; ++x) {
                float hi = -1.0f, lo = 2.0f;
                for (int sy = 0; sy < 9; ++sy) {
                    for (int sx = 0; sx < 13; ++sx) {
                        if ((sx - x) * (sx - x) + (sy - y) * (sy - y) <= r * r) {
                            hi = std::max(hi, img(sx, sy));
                            lo = std::min(lo, img(sx, sy));
                        }
                    }
                }
                CHECK(d(x, y) == hi);
                CHECK(e(x, y) == lo);
            }
        }
    }
}
