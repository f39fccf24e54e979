#include "tlsaudit/types.hpp"

#include <openssl/evp.h>

namespace tlsaudit
{

std::string base64_encode(const Bytes& data)
{
    std::string out(4 * ((data.size() + 2) / 3) + 1, '\0');
    int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(), static_cast<int>(data.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

Bytes base64_decode(std::string_view text)
{
    std::string clean;
    clean.reserve(text.size());
    for (char c : text)
    {
        if (c != ' ' && c != '\n' && c != '\r' && c != '\t')
            clean.push_back(c);
    }
    if (clean.size() % 4 != 0)
        throw std::invalid_argument("base64 length is not a multiple of 4");
    if (clean.empty())
        return {};
    Bytes out(clean.size() / 4 * 3);
    int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                            static_cast<int>(clean.size()));
    if (n < 0)
        throw std::invalid_argument("invalid base64");
    // EVP_DecodeBlock counts padding as zero bytes
    std::size_t pad = 0;
    if (clean.back() == '=')
        ++pad;
    if (clean.size() > 1 && clean[clean.size() - 2] == '=')
        ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

} // namespace tlsaudit
