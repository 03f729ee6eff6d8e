#include "softshadow/transform.hpp"

#include "softshadow/errors.hpp"

#include <cmath>

namespace softshadow {

ImageBuffer invert_shadow(const ImageBuffer& s, float reference_max)
{
    ImageBuffer out(s.width(), s.height());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!std::isfinite(s[i])) {
            throw InvalidParameterError("shadow map contains non-finite values");
        }
        out[i] = reference_max - s[i];
    }
    return out;
}

ImageBuffer invert_shadow(const ImageBuffer& s)
{
    return invert_shadow(s, s.max_value());
}

} // namespace softshadow
