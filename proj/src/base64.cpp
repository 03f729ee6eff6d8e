#include "softshadow/base64.hpp"

#include "softshadow/errors.hpp"

#include <openssl/evp.h>

namespace softshadow {

std::string base64_encode(std::string_view bytes)
{
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(bytes.data()),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::string base64_decode(std::string_view text)
{
    std::string clean;
    clean.reserve(text.size());
    for (char c : text) {
        if (c != ' ' && c != '\n' && c != '\r' && c != '\t') {
            clean.push_back(c);
        }
    }
    if (clean.size() % 4 != 0) {
        throw FormatError("base64: length is not a multiple of 4");
    }
    std::string out(clean.size() / 4 * 3, '\0');
    const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(clean.data()),
                                  static_cast<int>(clean.size()));
    if (n < 0) {
        throw FormatError("base64: invalid character");
    }
    // EVP_DecodeBlock keeps the bytes that padding stands for.
    std::size_t size = static_cast<std::size_t>(n);
    if (!clean.empty() && clean.back() == '=') {
        --size;
        if (clean[clean.size() - 2] == '=') {
            --size;
        }
    }
    out.resize(size);
    return out;
}

} // namespace softshadow
