#pragma once

#include "softshadow/image.hpp"
#include "softshadow/shadow_bases.hpp"

#include "json.hpp"

#include <optional>

namespace softshadow {

double rmse(const ImageBuffer& a, const ImageBuffer& b);

/// RMSE after scaling `pred` by the least-squares optimal scalar <pred,gt>/<pred,pred>
/// (0 when pred is all zero). Not symmetric: only the prediction is scaled.
double rmse_s(const ImageBuffer& pred, const ImageBuffer& gt);

/// Least-squares scale used by rmse_s.
double optimal_scale(const ImageBuffer& pred, const ImageBuffer& gt);

/// Zero-normalized cross-correlation (Pearson). Throws UndefinedMetricError on zero variance.
double zncc(const ImageBuffer& a, const ImageBuffer& b);

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

/// Mean SSIM over all fully-inside window positions. The dynamic range is the
/// spread of the two images' joint values (1 if both are one constant).
double ssim(const ImageBuffer& a, const ImageBuffer& b, const SsimParams& params = {});

/// (1 - SSIM) / 2.
double dssim(const ImageBuffer& a, const ImageBuffer& b, const SsimParams& params = {});

/// Mean of squared differences: the per-pixel L2 loss with mean reduction.
double mean_squared_error(const ImageBuffer& a, const ImageBuffer& b);

struct Losses {
    double l2_ao = 0.0;
    double l2_shadow = 0.0;
};

/// AO and shadow L2 losses. Both shadow maps must be in the inverse domain.
Losses losses(const ImageBuffer& pred_ao, const ImageBuffer& gt_ao, const ShadowMap& pred_shadow,
              const ShadowMap& gt_shadow);

struct MetricReport {
    double rmse = 0.0;
    double rmse_s = 0.0;
    std::optional<double> zncc;  // undefined for zero-variance inputs
    double dssim = 0.0;
    double l2_ao = 0.0;
    double l2_shadow = 0.0;
};

void to_json(nlohmann::json& j, const MetricReport& report);

/// Brings a pair into the inverse domain: inverse pairs pass through, radiance
/// pairs are inverted against the ground truth's maximum, mixed pairs throw DomainError.
std::pair<ImageBuffer, ImageBuffer> inverse_pair(const ShadowMap& pred, const ShadowMap& gt);

/// Every metric on the inverse-domain pair. ZNCC is left empty (JSON null)
/// when either image has zero variance. The AO loss is filled in only when an
/// AO pair is supplied.
MetricReport measure(const ShadowMap& pred, const ShadowMap& gt,
                     const ImageBuffer* pred_ao = nullptr, const ImageBuffer* gt_ao = nullptr);

} // namespace softshadow
