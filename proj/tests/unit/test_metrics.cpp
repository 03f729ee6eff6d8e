#include "doctest.h"

#include "softshadow/errors.hpp"
#include "softshadow/metrics.hpp"

#include <cmath>
#include <random>

using namespace softshadow;

namespace {

ImageBuffer random_image(int w, int h, std::uint32_t seed)
{
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    ImageBuffer img(w, h);
    for (auto& v : img.pixels()) {
        v = u(rng);
    }
    return img;
}

ImageBuffer affine(const ImageBuffer& img, float a, float b)
{
    ImageBuffer out = img;
    for (auto& v : out.pixels()) {
        v = a * v + b;
    }
    return out;
}

// Direct windowed SSIM: every fully-inside 11x11 Gaussian window, no separable filtering.
double naive_ssim(const ImageBuffer& a, const ImageBuffer& b)
{
    const int n = 11;
    double kernel[n][n];
    double ksum = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            kernel[i][j] = std::exp(-((i - 5.0) * (i - 5.0) + (j - 5.0) * (j - 5.0)) / (2 * 1.5 * 1.5));
            ksum += kernel[i][j];
        }
    }
    const double range = std::max(a.max_value(), b.max_value()) - std::min(a.min_value(), b.min_value());
    const double c1 = std::pow(0.01 * range, 2), c2 = std::pow(0.03 * range, 2);
    double total = 0.0;
    int count = 0;
    for (int y = 0; y + n <= a.height(); ++y) {
        for (int x = 0; x + n <= a.width(); ++x) {
            double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    const double w = kernel[i][j] / ksum;
                    const double va = a(x + j, y + i), vb = b(x + j, y + i);
                    ma += w * va;
                    mb += w * vb;
                    aa += w * va * va;
                    bb += w * vb * vb;
                    ab += w * va * vb;
                }
            }
            const double sa = aa - ma * ma, sb = bb - mb * mb, sab = ab - ma * mb;
            total += (2 * ma * mb + c1) * (2 * sab + c2) / ((ma * ma + mb * mb + c1) * (sa + sb + c2));
            ++count;
        }
    }
    return total / count;
}

} // namespace

TEST_CASE("metric identities")
{
    const ImageBuffer x = random_image(32, 24, 1);
    CHECK(rmse(x, x) == 0.0);
    CHECK(rmse_s(affine(x, 2.0f, 0.0f), x) == doctest::Approx(0.0).scale(1.0).epsilon(1e-7));
    CHECK(zncc(x, affine(x, 3.0f, 7.0f)) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(zncc(x, affine(x, -2.0f, 1.0f)) == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(dssim(x, x) == 0.0);
    CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("hand-computed values")
{
    const ImageBuffer a(2, 1, std::vector<float>{0.0f, 0.0f});
    const ImageBuffer b(2, 1, std::vector<float>{3.0f, 4.0f});
    CHECK(rmse(a, b) == doctest::Approx(std::sqrt(12.5)));
    CHECK(mean_squared_error(a, b) == doctest::Approx(12.5));
    // Zero prediction: scale 0, so rmse_s equals the ground-truth RMS.
    CHECK(optimal_scale(a, b) == 0.0);
    CHECK(rmse_s(a, b) == doctest::Approx(std::sqrt(12.5)));
    const ImageBuffer p(2, 1, std::vector<float>{1.0f, 0.0f});
    CHECK(optimal_scale(p, b) == doctest::Approx(3.0));
    CHECK(rmse_s(p, b) == doctest::Approx(std::sqrt(8.0)));
}

TEST_CASE("rmse_s scales only the prediction")
{
    const ImageBuffer g = random_image(16, 16, 2);
    const ImageBuffer p = random_image(16, 16, 3);
    CHECK(rmse_s(p, g) <= rmse(p, g));
    CHECK(rmse_s(affine(p, 5.0f, 0.0f), g) == doctest::Approx(rmse_s(p, g)).epsilon(1e-6));
}

TEST_CASE("ssim matches a direct windowed evaluation")
{
    const ImageBuffer a = random_image(24, 20, 4);
    ImageBuffer b = a;
    for (std::size_t i = 0; i < b.size(); i += 3) {
        b[i] = 1.0f - b[i];
    }
    CHECK(ssim(a, b) == doctest::Approx(naive_ssim(a, b)).epsilon(1e-9));
    CHECK(dssim(a, b) > 0.0);
    CHECK(dssim(a, b) <= 1.0);
    CHECK_THROWS_AS(ssim(ImageBuffer(8, 8), ImageBuffer(8, 8)), GeometryError);
}

TEST_CASE("undefined and mismatched inputs")
{
    CHECK_THROWS_AS(zncc(ImageBuffer(4, 4, 1.0f), random_image(4, 4, 1)), UndefinedMetricError);
    CHECK_THROWS_AS(rmse(ImageBuffer(4, 4), ImageBuffer(4, 5)), GeometryError);
}

TEST_CASE("measure works in the inverse domain and refuses mixed pairs")
{
    const ImageBuffer g = random_image(16, 16, 5);
    const ShadowMap inv{g, ShadowDomain::Inverse};
    const ShadowMap rad{g, ShadowDomain::Radiance};
    CHECK_THROWS_AS(measure(inv, rad), DomainError);
    CHECK_THROWS_AS(measure(rad, inv), DomainError);

    const MetricReport same = measure(inv, inv);
    CHECK(same.rmse == 0.0);
    CHECK(same.dssim == 0.0);
    REQUIRE(same.zncc);
    CHECK(*same.zncc == doctest::Approx(1.0));

    // Radiance pairs are inverted against the ground-truth maximum first.
    const ImageBuffer p = random_image(16, 16, 6);
    const MetricReport r = measure(ShadowMap{p, ShadowDomain::Radiance}, rad);
    CHECK(r.rmse == doctest::Approx(rmse(p, g)).epsilon(1e-6));
    CHECK(r.l2_shadow == doctest::Approx(mean_squared_error(p, g)).epsilon(1e-6));

    const MetricReport flat = measure(ShadowMap{ImageBuffer(16, 16)}, ShadowMap{ImageBuffer(16, 16)});
    CHECK_FALSE(flat.zncc);
    const nlohmann::json j = flat;
    CHECK(j["zncc"].is_null());
    CHECK(j["domain"] == "inverse");
}

TEST_CASE("losses")
{
    const ImageBuffer a = random_image(16, 16, 7);
    const ImageBuffer b = random_image(16, 16, 8);
    const Losses l = losses(a, b, ShadowMap{a}, ShadowMap{a});
    CHECK(l.l2_ao == doctest::Approx(mean_squared_error(a, b)));
    CHECK(l.l2_shadow == 0.0);
    CHECK_THROWS_AS(losses(a, b, ShadowMap{a, ShadowDomain::Radiance}, ShadowMap{a}), DomainError);
    const MetricReport r = measure(ShadowMap{a}, ShadowMap{b}, &a, &b);
    CHECK(r.l2_ao == doctest::Approx(mean_squared_error(a, b)));
}
