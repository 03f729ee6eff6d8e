#include "softshadow/image_io.hpp"

#include "softshadow/errors.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace softshadow {

namespace {

struct PfmHeader {
    int channels = 1;
    int width = 0;
    int height = 0;
    bool little_endian = true;
    std::size_t data_offset = 0;
};

std::string next_token(std::string_view bytes, std::size_t& pos)
{
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
    }
    return std::string(bytes.substr(start, pos - start));
}

PfmHeader parse_pfm_header(std::string_view bytes)
{
    PfmHeader header;
    std::size_t pos = 0;
    const std::string magic = next_token(bytes, pos);
    if (magic == "Pf") {
        header.channels = 1;
    } else if (magic == "PF") {
        header.channels = 3;
    } else {
        throw FormatError("PFM: bad magic '" + magic + "'");
    }
    try {
        header.width = std::stoi(next_token(bytes, pos));
        header.height = std::stoi(next_token(bytes, pos));
        const double scale = std::stod(next_token(bytes, pos));
        if (scale == 0.0) {
            throw FormatError("PFM: zero scale");
        }
        header.little_endian = scale < 0.0;
    } catch (const std::logic_error&) {
        throw FormatError("PFM: malformed header");
    }
    if (header.width <= 0 || header.height <= 0) {
        throw FormatError("PFM: non-positive dimensions");
    }
    // Exactly one whitespace byte separates the header from the raster.
    if (pos >= bytes.size()) {
        throw FormatError("PFM: missing raster");
    }
    header.data_offset = pos + 1;
    const std::size_t expected = static_cast<std::size_t>(header.width) * header.height
                                 * header.channels * sizeof(float);
    if (bytes.size() - header.data_offset < expected) {
        throw FormatError("PFM: truncated raster (expected " + std::to_string(expected) + " bytes)");
    }
    return header;
}

float load_float(const char* p, bool little_endian)
{
    std::uint32_t bits;
    std::memcpy(&bits, p, sizeof bits);
    if (little_endian != (std::endian::native == std::endian::little)) {
        bits = __builtin_bswap32(bits);
    }
    return std::bit_cast<float>(bits);
}

void append_float_le(std::string& out, float value)
{
    std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
    if constexpr (std::endian::native != std::endian::little) {
        bits = __builtin_bswap32(bits);
    }
    char raw[4];
    std::memcpy(raw, &bits, 4);
    out.append(raw, 4);
}

std::string pfm_header(const char* magic, int width, int height)
{
    std::ostringstream os;
    os << magic << '\n' << width << ' ' << height << "\n-1.0\n";
    return os.str();
}

std::uint8_t to_byte(float v)
{
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

std::string encode_png_raw(const std::vector<std::uint8_t>& pixels, int width, int height,
                           png_uint_32 format)
{
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = format;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
        throw FormatError(std::string("PNG encode failed: ") + image.message);
    }
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
        throw FormatError(std::string("PNG encode failed: ") + image.message);
    }
    out.resize(size);
    return out;
}

} // namespace

std::string encode_pfm(const ImageBuffer& image)
{
    std::string out = pfm_header("Pf", image.width(), image.height());
    out.reserve(out.size() + image.size() * 4);
    for (int y = image.height() - 1; y >= 0; --y) {
        for (float v : image.row(y)) {
            append_float_le(out, v);
        }
    }
    return out;
}

ImageBuffer decode_pfm(std::string_view bytes)
{
    const PfmHeader header = parse_pfm_header(bytes);
    if (header.channels != 1) {
        throw FormatError("PFM: expected single-channel 'Pf' image");
    }
    ImageBuffer image(header.width, header.height);
    const char* p = bytes.data() + header.data_offset;
    for (int y = header.height - 1; y >= 0; --y) {
        for (int x = 0; x < header.width; ++x, p += 4) {
            image(x, y) = load_float(p, header.little_endian);
        }
    }
    return image;
}

std::string encode_pfm(const ColorImage& image)
{
    if (image.channels() != 3) {
        throw InvalidParameterError("PFM color images must have 3 channels");
    }
    std::string out = pfm_header("PF", image.width(), image.height());
    for (int y = image.height() - 1; y >= 0; --y) {
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                append_float_le(out, image.at(x, y, c));
            }
        }
    }
    return out;
}

ColorImage decode_pfm_color(std::string_view bytes)
{
    const PfmHeader header = parse_pfm_header(bytes);
    ColorImage image(header.width, header.height, header.channels);
    const char* p = bytes.data() + header.data_offset;
    for (int y = header.height - 1; y >= 0; --y) {
        for (int x = 0; x < header.width; ++x) {
            for (int c = 0; c < header.channels; ++c, p += 4) {
                image.at(x, y, c) = load_float(p, header.little_endian);
            }
        }
    }
    return image;
}

void write_pfm(const std::filesystem::path& path, const ImageBuffer& image)
{
    write_file(path, encode_pfm(image));
}

ImageBuffer read_pfm(const std::filesystem::path& path)
{
    try {
        return decode_pfm(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::string encode_png_gray(const ImageBuffer& image)
{
    std::vector<std::uint8_t> bytes(image.size());
    std::transform(image.pixels().begin(), image.pixels().end(), bytes.begin(), to_byte);
    return encode_png_raw(bytes, image.width(), image.height(), PNG_FORMAT_GRAY);
}

std::string encode_png(const ColorImage& image)
{
    png_uint_32 format = 0;
    switch (image.channels()) {
    case 1: format = PNG_FORMAT_GRAY; break;
    case 2: format = PNG_FORMAT_GA; break;
    case 3: format = PNG_FORMAT_RGB; break;
    case 4: format = PNG_FORMAT_RGBA; break;
    default: throw InvalidParameterError("unsupported channel count");
    }
    std::vector<std::uint8_t> bytes(image.data().size());
    std::transform(image.data().begin(), image.data().end(), bytes.begin(), to_byte);
    return encode_png_raw(bytes, image.width(), image.height(), format);
}

ColorImage decode_png(std::string_view bytes)
{
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw FormatError(std::string("PNG decode failed: ") + image.message);
    }
    int channels = 1;
    if (image.format & PNG_FORMAT_FLAG_COLOR) {
        channels = (image.format & PNG_FORMAT_FLAG_ALPHA) ? 4 : 3;
        image.format = channels == 4 ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
    } else if (image.format & PNG_FORMAT_FLAG_ALPHA) {
        channels = 4;
        image.format = PNG_FORMAT_RGBA;
    } else {
        image.format = PNG_FORMAT_GRAY;
    }
    std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, raw.data(), 0, nullptr)) {
        png_image_free(&image);
        throw FormatError(std::string("PNG decode failed: ") + image.message);
    }
    ColorImage out(static_cast<int>(image.width), static_cast<int>(image.height), channels);
    std::transform(raw.begin(), raw.end(), out.data().begin(),
                   [](std::uint8_t b) { return static_cast<float>(b) / 255.0f; });
    return out;
}

ImageBuffer decode_png_gray(std::string_view bytes)
{
    const ColorImage color = decode_png(bytes);
    ImageBuffer out(color.width(), color.height());
    for (int y = 0; y < color.height(); ++y) {
        for (int x = 0; x < color.width(); ++x) {
            out(x, y) = color.at(x, y, 0);
        }
    }
    return out;
}

void write_png_gray(const std::filesystem::path& path, const ImageBuffer& image)
{
    write_file(path, encode_png_gray(image));
}

ImageBuffer read_png_gray(const std::filesystem::path& path)
{
    try {
        return decode_png_gray(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::string encode_png_preview(const ImageBuffer& image, float scale)
{
    if (scale <= 0.0f) {
        scale = image.max_value();
    }
    ImageBuffer normalized(image.width(), image.height());
    if (scale > 0.0f) {
        for (std::size_t i = 0; i < image.size(); ++i) {
            normalized[i] = image[i] / scale;
        }
    }
    return encode_png_gray(normalized);
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string() + " for reading");
    }
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::string_view bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

} // namespace softshadow
