#include "doctest.h"

#include "shapes.hpp"
#include "softshadow/errors.hpp"
#include "softshadow/metrics.hpp"
#include "softshadow/oracle.hpp"

#include <cstring>

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

EnvLightMap single(double x, double y, double intensity, double sigma2)
{
    EnvLightMap elm;
    elm.lights.push_back({x, y, intensity, sigma2});
    return elm;
}

bool bitwise_equal(const ImageBuffer& a, const ImageBuffer& b)
{
    return a.same_shape(b)
        && std::memcmp(a.pixels().data(), b.pixels().data(), a.size() * sizeof(float)) == 0;
}

ImageBuffer normalize_peak(const ImageBuffer& img)
{
    ImageBuffer out = img;
    const float peak = img.max_value();
    if (peak > 0.0f) {
        for (auto& v : out.pixels()) {
            v /= peak;
        }
    }
    return out;
}

} // namespace

TEST_CASE("oracle of an empty light map is zero")
{
    const Mesh cube = normalize(testing::box(Vec3::Zero(), Vec3::Ones()));
    const Scene scene(cube, pose_of(0, 30, 16), resting_ground(cube));
    CHECK(render_oracle(scene, EnvLightMap{}).pixels.max_value() == 0.0f);
}

TEST_CASE("light confined to one patch reproduces that basis exactly")
{
    const Mesh chair = normalize(testing::chair());
    const Scene scene(chair, pose_of(45, 30, 24), resting_ground(chair));
    const ShadowBasisSet bases = build_bases(scene);
    const OracleRenderer oracle(scene);
    for (auto [r, c] : {std::pair{2, 4}, {6, 17}, {7, 30}}) {
        ImageBuffer raster(512, 256);
        for (int v = r * 16; v < (r + 1) * 16; ++v) {
            for (int u = c * 16; u < (c + 1) * 16; ++u) {
                raster(u, v) = 0.75f;
            }
        }
        const ImageBuffer expect = oracle.render(raster).pixels;
        const ImageBuffer got = compose(bases, raster).pixels;
        CHECK(expect.max_value() > 0.0f);
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-6));
            CHECK(got[i] == doctest::Approx(0.75 * bases.basis(r, c)[i]).epsilon(1e-6));
        }
    }
}

TEST_CASE("cached and uncached oracle renders are bit identical")
{
    const Mesh cube = normalize(testing::box(Vec3::Zero(), Vec3::Ones()));
    const Scene scene(cube, pose_of(-45, 15, 16), resting_ground(cube));
    const OracleRenderer cached(scene);
    const OracleRenderer direct(scene, {}, 0);
    CHECK(cached.cached());
    CHECK_FALSE(direct.cached());
    const EnvLightMap elm = sample_elm(21);
    CHECK(bitwise_equal(cached.render(elm).pixels, direct.render(elm).pixels));
    CHECK(bitwise_equal(cached.render(elm).pixels, render_oracle(scene, elm).pixels));
}

TEST_CASE("oracle is linear")
{
    const Mesh cube = normalize(testing::box(Vec3::Zero(), Vec3::Ones()));
    const Scene scene(cube, pose_of(0, 30, 16), resting_ground(cube));
    const OracleRenderer oracle(scene);
    const ImageBuffer e1 = rasterize_elm(sample_elm(1));
    const ImageBuffer e2 = rasterize_elm(sample_elm(2));
    ImageBuffer mix(512, 256);
    for (std::size_t i = 0; i < mix.size(); ++i) {
        mix[i] = 2.0f * e1[i] + 0.5f * e2[i];
    }
    const ImageBuffer s = oracle.render(mix).pixels;
    const ImageBuffer s1 = oracle.render(e1).pixels;
    const ImageBuffer s2 = oracle.render(e2).pixels;
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(s[i] == doctest::Approx(2.0 * s1[i] + 0.5 * s2[i]).epsilon(1e-5));
    }
}

TEST_CASE("patch averaging error shrinks as lights widen")
{
    const Mesh cube = normalize(testing::box(Vec3::Zero(), Vec3::Ones()));
    const Scene scene(cube, pose_of(0, 30, 32), resting_ground(cube));
    const ShadowBasisSet bases = build_bases(scene);
    const OracleRenderer oracle(scene);
    double prev = std::numeric_limits<double>::infinity();
    for (double sigma2 : {0.002, 0.01, 0.05}) {
        const EnvLightMap elm = single(0.3, 0.3, 1.0, sigma2);
        const double err = rmse_s(normalize_peak(compose(bases, elm).pixels),
                                  normalize_peak(oracle.render(elm).pixels));
        CHECK(err < prev);
        prev = err;
    }
    const EnvLightMap elm = single(0.3, 0.3, 1.0, 0.01);
    CHECK(rmse_s(normalize_peak(compose(bases, elm).pixels),
                 normalize_peak(oracle.render(elm).pixels)) <= 0.02);
}

TEST_CASE("oracle rejects a mis-sized light map")
{
    const Mesh cube = normalize(testing::box(Vec3::Zero(), Vec3::Ones()));
    const OracleRenderer oracle(Scene(cube, pose_of(0, 0, 8), resting_ground(cube)), {}, 0);
    CHECK_THROWS_AS(oracle.render(ImageBuffer(64, 32)), GeometryError);
}
