#include "softshadow/metrics.hpp"

#include "softshadow/errors.hpp"
#include "softshadow/transform.hpp"

#include <algorithm>
#include <cmath>

namespace softshadow {

namespace {

void require_same_shape(const ImageBuffer& a, const ImageBuffer& b)
{
    if (!a.same_shape(b)) {
        throw GeometryError("metric inputs differ in size: " + std::to_string(a.width()) + "x"
                            + std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x"
                            + std::to_string(b.height()));
    }
    if (a.empty()) {
        throw GeometryError("metric inputs are empty");
    }
}

/// Separable "valid" Gaussian filter: output is (w - n + 1) x (h - n + 1).
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h,
                                 const std::vector<double>& kernel)
{
    const int n = static_cast<int>(kernel.size());
    const int ow = w - n + 1;
    const int oh = h - n + 1;
    std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) {
                s += kernel[k] * src[static_cast<std::size_t>(y) * w + x + k];
            }
            tmp[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) {
                s += kernel[k] * tmp[static_cast<std::size_t>(y + k) * ow + x];
            }
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    return out;
}

} // namespace

double mean_squared_error(const ImageBuffer& a, const ImageBuffer& b)
{
    require_same_shape(a, b);
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        sum += d * d;
    }
    return sum / static_cast<double>(a.size());
}

double rmse(const ImageBuffer& a, const ImageBuffer& b)
{
    return std::sqrt(mean_squared_error(a, b));
}

double optimal_scale(const ImageBuffer& pred, const ImageBuffer& gt)
{
    require_same_shape(pred, gt);
    double pg = 0.0;
    double pp = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        pg += static_cast<double>(pred[i]) * gt[i];
        pp += static_cast<double>(pred[i]) * pred[i];
    }
    return pp > 0.0 ? pg / pp : 0.0;
}

double rmse_s(const ImageBuffer& pred, const ImageBuffer& gt)
{
    const double s = optimal_scale(pred, gt);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = s * pred[i] - gt[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(pred.size()));
}

double zncc(const ImageBuffer& a, const ImageBuffer& b)
{
    require_same_shape(a, b);
    const double n = static_cast<double>(a.size());
    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        mean_a += a[i];
        mean_b += b[i];
    }
    mean_a /= n;
    mean_b /= n;
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a <= 0.0 || var_b <= 0.0) {
        throw UndefinedMetricError("ZNCC is undefined for a zero-variance image");
    }
    return std::clamp(cov / std::sqrt(var_a * var_b), -1.0, 1.0);
}

double ssim(const ImageBuffer& a, const ImageBuffer& b, const SsimParams& params)
{
    require_same_shape(a, b);
    const int n = params.window;
    if (a.width() < n || a.height() < n) {
        throw GeometryError("SSIM needs images of at least " + std::to_string(n) + "x"
                            + std::to_string(n) + " pixels");
    }
    std::vector<double> kernel(n);
    double ksum = 0.0;
    for (int k = 0; k < n; ++k) {
        const double d = k - (n - 1) / 2.0;
        kernel[k] = std::exp(-d * d / (2.0 * params.sigma * params.sigma));
        ksum += kernel[k];
    }
    for (double& k : kernel) {
        k /= ksum;
    }

    const float lo = std::min(a.min_value(), b.min_value());
    const float hi = std::max(a.max_value(), b.max_value());
    const double range = hi > lo ? static_cast<double>(hi) - lo : 1.0;
    const double c1 = (params.k1 * range) * (params.k1 * range);
    const double c2 = (params.k2 * range) * (params.k2 * range);

    const int w = a.width();
    const int h = a.height();
    const std::size_t size = a.size();
    std::vector<double> va(size), vb(size), vaa(size), vbb(size), vab(size);
    for (std::size_t i = 0; i < size; ++i) {
        va[i] = a[i];
        vb[i] = b[i];
        vaa[i] = va[i] * va[i];
        vbb[i] = vb[i] * vb[i];
        vab[i] = va[i] * vb[i];
    }
    const auto mu_a = filter_valid(va, w, h, kernel);
    const auto mu_b = filter_valid(vb, w, h, kernel);
    const auto e_aa = filter_valid(vaa, w, h, kernel);
    const auto e_bb = filter_valid(vbb, w, h, kernel);
    const auto e_ab = filter_valid(vab, w, h, kernel);

    double total = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double ma = mu_a[i], mb = mu_b[i];
        const double sa = e_aa[i] - ma * ma;
        const double sb = e_bb[i] - mb * mb;
        const double sab = e_ab[i] - ma * mb;
        total += ((2 * ma * mb + c1) * (2 * sab + c2)) / ((ma * ma + mb * mb + c1) * (sa + sb + c2));
    }
    return std::clamp(total / static_cast<double>(mu_a.size()), -1.0, 1.0);
}

double dssim(const ImageBuffer& a, const ImageBuffer& b, const SsimParams& params)
{
    return std::max(0.0, (1.0 - ssim(a, b, params)) / 2.0);
}

Losses losses(const ImageBuffer& pred_ao, const ImageBuffer& gt_ao, const ShadowMap& pred_shadow,
              const ShadowMap& gt_shadow)
{
    if (pred_shadow.domain != ShadowDomain::Inverse || gt_shadow.domain != ShadowDomain::Inverse) {
        throw DomainError("shadow loss requires both maps in the inverse domain");
    }
    return Losses{mean_squared_error(pred_ao, gt_ao),
                  mean_squared_error(pred_shadow.pixels, gt_shadow.pixels)};
}

void to_json(nlohmann::json& j, const MetricReport& report)
{
    j = nlohmann::json{{"rmse", report.rmse},
                       {"rmse_s", report.rmse_s},
                       {"zncc", report.zncc ? nlohmann::json(*report.zncc) : nlohmann::json(nullptr)},
                       {"dssim", report.dssim},
                       {"l2_ao", report.l2_ao},
                       {"l2_shadow", report.l2_shadow},
                       {"l2_reduction", "mean"},
                       {"domain", "inverse"}};
}

std::pair<ImageBuffer, ImageBuffer> inverse_pair(const ShadowMap& pred, const ShadowMap& gt)
{
    if (pred.domain != gt.domain) {
        throw DomainError(std::string("refusing mixed-domain pair: prediction is ")
                          + to_string(pred.domain) + ", ground truth is " + to_string(gt.domain));
    }
    if (pred.domain == ShadowDomain::Inverse) {
        return {pred.pixels, gt.pixels};
    }
    const float reference = gt.pixels.max_value();
    return {invert_shadow(pred.pixels, reference), invert_shadow(gt.pixels, reference)};
}

MetricReport measure(const ShadowMap& pred, const ShadowMap& gt, const ImageBuffer* pred_ao,
                     const ImageBuffer* gt_ao)
{
    const auto [p, g] = inverse_pair(pred, gt);
    MetricReport report;
    report.rmse = rmse(p, g);
    report.rmse_s = rmse_s(p, g);
    try {
        report.zncc = zncc(p, g);
    } catch (const UndefinedMetricError&) {
        report.zncc.reset();
    }
    report.dssim = dssim(p, g);
    report.l2_shadow = mean_squared_error(p, g);
    if (pred_ao && gt_ao) {
        report.l2_ao = mean_squared_error(*pred_ao, *gt_ao);
    }
    return report;
}

} // namespace softshadow
