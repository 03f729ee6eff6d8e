#include "doctest.h"

#include "shapes.hpp"
#include "softshadow/errors.hpp"
#include "softshadow/metrics.hpp"
#include "softshadow/shadow_bases.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

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

Mesh unit_cube()
{
    return normalize(testing::box(Vec3::Zero(), Vec3::Ones()));
}

// Slab test against an analytic box, independent of the triangle path.
bool ray_hits_box(const Vec3& origin, const Vec3& dir, const Vec3& lo, const Vec3& hi)
{
    double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        if (dir[a] == 0.0f) {
            if (origin[a] < lo[a] || origin[a] > hi[a]) {
                return false;
            }
            continue;
        }
        double ta = (lo[a] - origin[a]) / static_cast<double>(dir[a]);
        double tb = (hi[a] - origin[a]) / static_cast<double>(dir[a]);
        if (ta > tb) {
            std::swap(ta, tb);
        }
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    return t0 <= t1;
}

/// Every mismatch between a rendered and an analytic binary map must sit on the
/// analytic boundary (an 8-neighbour with the other analytic value).
int mismatches_off_boundary(const ImageBuffer& rendered, const ImageBuffer& analytic,
                            const GroundView& view)
{
    int bad = 0;
    for (int y = 0; y < rendered.height(); ++y) {
        for (int x = 0; x < rendered.width(); ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * rendered.width() + x;
            if (!view.is_ground(i) || rendered[i] == analytic[i]) {
                continue;
            }
            bool boundary = false;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx >= 0 && ny >= 0 && nx < rendered.width() && ny < rendered.height()
                        && analytic(nx, ny) != analytic[i]) {
                        boundary = true;
                    }
                }
            }
            bad += boundary ? 0 : 1;
        }
    }
    return bad;
}

ImageBuffer analytic_shadow(const GroundView& view, const Vec3& dir, const Vec3& lo, const Vec3& hi)
{
    ImageBuffer out(view.width, view.height);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (view.is_ground(i) && ray_hits_box(view.point[i], dir, lo, hi)) {
            out[i] = 1.0f;
        }
    }
    return out;
}

int nonzero_rows(const ImageBuffer& img)
{
    int first = -1, last = -1;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            if (img(x, y) != 0.0f) {
                if (first < 0) {
                    first = y;
                }
                last = y;
            }
        }
    }
    return first < 0 ? 0 : last - first + 1;
}

EnvLightMap single(double x, double y, double intensity, double sigma2)
{
    EnvLightMap elm;
    elm.lights.push_back({x, y, intensity, sigma2});
    return elm;
}

double shadow_angle(const ImageBuffer& s, const GroundView& view)
{
    double sx = 0.0, sz = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (view.is_ground(i)) {
            sx += s[i] * view.point[i].x();
            sz += s[i] * view.point[i].z();
            mass += s[i];
        }
    }
    REQUIRE(mass > 0.0);
    return std::atan2(sz / mass, sx / mass) * 180.0 / std::numbers::pi;
}

} // namespace

TEST_CASE("zenith hard shadow of a table is its footprint")
{
    const Mesh table = normalize(testing::table());
    const Scene scene(table, pose_of(0, 30, 64), resting_ground(table));
    const GroundView view = view_ground(scene);
    const Vec3 up(0.0f, 1.0f, 0.0f);
    const ImageBuffer s = hard_shadow(scene, view, up);
    const ImageBuffer expect = analytic_shadow(view, up, Vec3(-0.5f, -1.0f, -0.5f), Vec3(0.5f, 1.0f, 0.5f));
    CHECK(expect.sum() > 20.0);
    CHECK(mismatches_off_boundary(s, expect, view) == 0);
}

TEST_CASE("zenith hard shadow of a cube hides under the cube")
{
    const Mesh cube = unit_cube();
    const Scene scene(cube, pose_of(0, 30, 48), resting_ground(cube));
    const GroundView view = view_ground(scene);
    const ImageBuffer s = hard_shadow(scene, view, Vec3(0.0f, 1.0f, 0.0f));
    const ImageBuffer expect = analytic_shadow(view, Vec3(0, 1, 0), Vec3(-0.5f, -1.0f, -0.5f), Vec3(0.5f, 1.0f, 0.5f));
    CHECK(mismatches_off_boundary(s, expect, view) == 0);
}

TEST_CASE("45 degree shadow of a tall box extends its height beyond the footprint")
{
    const Mesh post = normalize(testing::box(Vec3(0, 0, 0), Vec3(0.4f, 1.0f, 0.4f)));
    const Scene scene(post, pose_of(0, 30, 64), resting_ground(post));
    const GroundView view = view_ground(scene);
    const Vec3 dir = Vec3(0.0f, 1.0f, -1.0f).normalized();
    const ImageBuffer s = hard_shadow(scene, view, dir);
    const Vec3 lo = post.bounds().lo, hi = post.bounds().hi;
    const ImageBuffer expect = analytic_shadow(view, dir, lo, hi);
    CHECK(mismatches_off_boundary(s, expect, view) == 0);

    float reach = -1e9f;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] > 0.0f) {
            reach = std::max(reach, view.point[i].z());
        }
    }
    const float height = hi.y() - lo.y();
    CHECK(std::abs(reach - (hi.z() + height)) < 0.06f);
}

TEST_CASE("hard shadow edge cases")
{
    const Mesh cube = unit_cube();
    CHECK_THROWS_AS(hard_shadow(cube, pose_of(0, 30, 16), GroundPlane{-0.5f}, Vec3(1, 0, 0)),
                    InvalidParameterError);
    CHECK_THROWS_AS(hard_shadow(cube, pose_of(0, 30, 16), GroundPlane{-0.5f}, Vec3(0, -1, 0)),
                    InvalidParameterError);
}

TEST_CASE("each basis is the sum of its directions' hard shadows")
{
    const Mesh chair = normalize(testing::chair());
    const Scene scene(chair, pose_of(45, 15, 24), resting_ground(chair));
    const GroundView view = view_ground(scene);
    const ShadowBasisSet bases = build_bases(scene);
    CHECK(bases.max_value() <= 256.0f);
    const BasisGeometry& g = bases.geometry();
    for (auto [r, c] : {std::pair{0, 0}, {3, 5}, {7, 31}, {7, 12}, {5, 20}, {6, 24}}) {
        ImageBuffer sum(24, 24);
        for (int v = r * g.patch; v < (r + 1) * g.patch; ++v) {
            for (int u = c * g.patch; u < (c + 1) * g.patch; ++u) {
                const ImageBuffer h = hard_shadow(scene, view, pixel_direction(u, v));
                for (std::size_t i = 0; i < sum.size(); ++i) {
                    sum[i] += h[i];
                }
            }
        }
        CHECK(bases.basis_image(r, c) == sum);
    }
}

TEST_CASE("patches that cast only hidden shadows give zero bases")
{
    // Frontal view: lights in the camera's azimuth put the shadow behind the cube.
    const Mesh cube = unit_cube();
    const ShadowBasisSet bases = build_bases(cube, pose_of(0, 0, 48), resting_ground(cube));
    for (int r = 0; r < 4; ++r) {
        for (int c : {7, 8}) {
            CHECK(bases.basis_image(r, c).max_value() == 0.0f);
        }
    }
    CHECK(bases.max_value() > 0.0f);
}

TEST_CASE("pole shadows lengthen toward the horizon")
{
    const Mesh pole = normalize(testing::box(Vec3(0, 0, 0), Vec3(0.04f, 1.0f, 0.04f)));
    const ShadowBasisSet bases = build_bases(pole, pose_of(0, 30, 64), resting_ground(pole));
    const int c = 24;  // light behind the pole, shadow toward the camera
    const int low = nonzero_rows(bases.basis_image(7, c));
    const int high = nonzero_rows(bases.basis_image(0, c));
    CHECK(high > 0);
    CHECK(low > high);
}

TEST_CASE("compose basics")
{
    const Mesh cube = unit_cube();
    const ShadowBasisSet bases = build_bases(cube, pose_of(20, 30, 32), resting_ground(cube));
    const BasisGeometry& g = bases.geometry();

    SUBCASE("zero light map gives a zero shadow")
    {
        const ShadowMap s = compose(bases, EnvLightMap{});
        CHECK(s.domain == ShadowDomain::Inverse);
        CHECK(s.pixels.max_value() == 0.0f);
        CHECK(s.pixels.min_value() == 0.0f);
    }
    SUBCASE("uniform light map scales the basis sum")
    {
        const float c = 0.37f;
        const ShadowMap s = compose(bases, ImageBuffer(512, 256, c));
        for (std::size_t i = 0; i < s.pixels.size(); ++i) {
            double total = 0.0;
            for (int b = 0; b < g.count(); ++b) {
                total += bases.data()[b * bases.pixels_per_basis() + i];
            }
            CHECK(s.pixels[i] == doctest::Approx(c * total).epsilon(1e-5));
        }
    }
    SUBCASE("sparse runs match a dense weighted sum")
    {
        std::mt19937 rng(2);
        std::uniform_real_distribution<float> w(0.0f, 2.0f);
        std::vector<float> weights(g.count());
        for (auto& x : weights) {
            x = w(rng);
        }
        const ShadowMap s = compose_weights(bases, weights);
        for (std::size_t i = 0; i < s.pixels.size(); ++i) {
            double total = 0.0;
            for (int b = 0; b < g.count(); ++b) {
                total += static_cast<double>(weights[b]) * bases.data()[b * bases.pixels_per_basis() + i];
            }
            CHECK(s.pixels[i] == doctest::Approx(total).epsilon(1e-5));
        }
    }
    SUBCASE("bottom half of the light map is ignored")
    {
        ImageBuffer raster(512, 256);
        for (int v = 128; v < 256; ++v) {
            for (int u = 0; u < 512; ++u) {
                raster(u, v) = 5.0f;
            }
        }
        CHECK(compose(bases, raster).pixels.max_value() == 0.0f);
    }
    SUBCASE("patch weights are patch means")
    {
        ImageBuffer raster(512, 256);
        raster(16 * 3 + 2, 16 * 2 + 5) = 256.0f;
        const auto weights = patch_weights(raster, g);
        CHECK(weights[2 * 32 + 3] == 1.0f);
        CHECK(std::accumulate(weights.begin(), weights.end(), 0.0f) == 1.0f);
        CHECK_THROWS_AS(patch_weights(ImageBuffer(256, 128), g), GeometryError);
        CHECK_THROWS_AS(compose_weights(bases, std::vector<float>(3)), GeometryError);
    }
}

TEST_CASE("compose is linear in the light map")
{
    const Mesh chair = normalize(testing::chair());
    const ShadowBasisSet bases = build_bases(chair, pose_of(-45, 30, 24), resting_ground(chair));
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    for (int trial = 0; trial < 10; ++trial) {
        const double a = coef(rng), b = coef(rng);
        const ImageBuffer e1 = rasterize_elm(sample_elm(100 + trial));
        const ImageBuffer e2 = rasterize_elm(sample_elm(200 + trial));
        ImageBuffer mix(512, 256);
        for (std::size_t i = 0; i < mix.size(); ++i) {
            mix[i] = static_cast<float>(a * e1[i] + b * e2[i]);
        }
        const ImageBuffer s = compose(bases, mix).pixels;
        const ImageBuffer s1 = compose(bases, e1).pixels;
        const ImageBuffer s2 = compose(bases, e2).pixels;
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            const double expect = a * s1[i] + b * s2[i];
            num = std::max(num, std::abs(s[i] - expect));
            den = std::max(den, std::abs(a) * std::abs(s1[i]) + std::abs(b) * std::abs(s2[i]));
        }
        CHECK(num <= 1e-5 * den);
    }
}

TEST_CASE("moving a light a quarter turn rotates the shadow by 90 degrees")
{
    const Mesh pole = normalize(testing::box(Vec3(0, 0, 0), Vec3(0.05f, 1.0f, 0.05f)));
    const Scene scene(pole, pose_of(0, 60, 64), resting_ground(pole));
    const GroundView view = view_ground(scene);
    const ShadowBasisSet bases = build_bases(scene);
    const double a0 = shadow_angle(compose(bases, single(0.5, 0.2, 1.0, 0.002)).pixels, view);
    const double a1 = shadow_angle(compose(bases, single(0.75, 0.2, 1.0, 0.002)).pixels, view);
    const double turn = std::remainder(a1 - a0, 360.0);
    CHECK(std::abs(std::abs(turn) - 90.0) <= 10.0);
}

TEST_CASE("wider lights soften the shadow")
{
    const Mesh cube = unit_cube();
    const ShadowBasisSet bases = build_bases(cube, pose_of(0, 30, 48), resting_ground(cube));
    double prev_peak = std::numeric_limits<double>::infinity();
    double prev_support = -1.0;
    for (double sigma2 : {0.005, 0.02, 0.08}) {
        const EnvLightMap elm = single(0.75, 0.3, 1.0, sigma2);
        const ImageBuffer raster = rasterize_elm(elm);
        const double total = unoccluded_total(patch_weights(raster, bases.geometry()), bases.geometry());
        const ImageBuffer s = compose(bases, raster).pixels;
        const double peak = s.max_value() / total;
        double support = 0.0;
        for (float v : s.pixels()) {
            support += v > 0.0f ? 1.0 : 0.0;
        }
        CHECK(peak <= prev_peak);
        CHECK(support >= prev_support);
        prev_peak = peak;
        prev_support = support;
    }
}

TEST_CASE("a light swept across azimuth changes the shadow continuously")
{
    const Mesh cube = unit_cube();
    const ShadowBasisSet bases = build_bases(cube, pose_of(0, 30, 32), resting_ground(cube));
    std::vector<ImageBuffer> frames;
    for (int k = 0; k < 40; ++k) {
        frames.push_back(compose(bases, single(0.6 + k / 512.0, 0.3, 1.0, 0.005)).pixels);
    }
    for (int k = 0; k + 10 < 40; ++k) {
        CHECK(rmse(frames[k], frames[k + 1]) < rmse(frames[k], frames[k + 10]));
    }
}

TEST_CASE("radiance conversion")
{
    const Mesh cube = unit_cube();
    const Scene scene(cube, pose_of(0, 30, 32), resting_ground(cube));
    const ShadowBasisSet bases = build_bases(scene);
    const EnvLightMap elm = sample_elm(4);
    const ImageBuffer raster = rasterize_elm(elm);
    const double total = unoccluded_total(patch_weights(raster, bases.geometry()), bases.geometry());
    const ImageBuffer ground = view_ground(scene).ground_mask();

    SUBCASE("fully lit is T, fully blocked is 0")
    {
        ImageBuffer s(32, 32);
        s(3, 3) = static_cast<float>(total);
        const ShadowMap r = to_radiance(ShadowMap{s, ShadowDomain::Inverse}, raster);
        CHECK(r.domain == ShadowDomain::Radiance);
        CHECK(r.pixels(0, 31) == static_cast<float>(total));
        // s holds T rounded to float, so the difference is at most half an ulp of T.
        const float ulp = std::nextafter(static_cast<float>(total), 1e30f) - static_cast<float>(total);
        CHECK(std::abs(r.pixels(3, 3)) <= 0.5f * ulp);
    }
    SUBCASE("round trip on ground pixels")
    {
        const ShadowMap s = compose(bases, raster);
        const ShadowMap r = to_radiance(s, raster, bases.geometry(), &ground);
        const ShadowMap back = to_inverse(r, raster, bases.geometry(), &ground);
        const float ulp = std::nextafter(static_cast<float>(total), 1e30f) - static_cast<float>(total);
        for (std::size_t i = 0; i < ground.size(); ++i) {
            if (ground[i] > 0.5f) {
                CHECK(std::abs(back.pixels[i] - s.pixels[i]) <= ulp);
            } else {
                CHECK(r.pixels[i] == 0.0f);
            }
        }
    }
    SUBCASE("domains are checked")
    {
        const ShadowMap r{ImageBuffer(32, 32), ShadowDomain::Radiance};
        CHECK_THROWS_AS(to_radiance(r, raster), DomainError);
        CHECK_THROWS_AS(to_inverse(ShadowMap{ImageBuffer(32, 32)}, raster), DomainError);
        CHECK(parse_domain("radiance") == ShadowDomain::Radiance);
        CHECK_THROWS_AS(parse_domain("linear"), InvalidParameterError);
    }
}

TEST_CASE("ssbb files")
{
    const Mesh cube = unit_cube();
    const ShadowBasisSet bases = build_bases(cube, pose_of(0, 15, 16), resting_ground(cube));
    const std::string bytes = encode_ssbb(bases);
    CHECK(bytes.size() == 16 + 4u * 16 * 16 * 256);
    CHECK(bytes.substr(0, 4) == "SSBB");

    SUBCASE("round trip is bit exact")
    {
        const ShadowBasisSet back = decode_ssbb(bytes);
        CHECK(back.width() == 16);
        CHECK(back.geometry() == bases.geometry());
        CHECK(std::equal(back.data().begin(), back.data().end(), bases.data().begin()));
    }
    SUBCASE("truncation names the field")
    {
        const std::vector<std::pair<std::size_t, std::string>> cuts = {
            {2, "magic"}, {5, "version"}, {7, "image_w"}, {9, "image_h"},
            {11, "grid_rows"}, {13, "grid_cols"}, {15, "patch"}, {100, "pixels"}};
        for (const auto& [n, field] : cuts) {
            try {
                decode_ssbb(std::string_view(bytes).substr(0, n));
                FAIL("expected a format error");
            } catch (const FormatError& e) {
                CHECK(std::string(e.what()).find("'" + field + "'") != std::string::npos);
            }
        }
    }
    SUBCASE("other corruption")
    {
        std::string bad = bytes;
        bad[0] = 'X';
        CHECK_THROWS_AS(decode_ssbb(bad), FormatError);
        bad = bytes;
        bad[4] = 9;
        CHECK_THROWS_AS(decode_ssbb(bad), FormatError);
        CHECK_THROWS_AS(decode_ssbb(bytes + "x"), FormatError);
    }
}
