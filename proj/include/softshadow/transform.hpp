#pragma once

#include "softshadow/image.hpp"

namespace softshadow {

/// out = max(s) - s. Non-negative with at least one exact zero.
ImageBuffer invert_shadow(const ImageBuffer& s);

/// out = reference_max - s, for pairs that must share one reference.
ImageBuffer invert_shadow(const ImageBuffer& s, float reference_max);

} // namespace softshadow
