#include "tlsaudit/types.hpp"

#include <algorithm>
#include <cctype>

namespace tlsaudit
{

std::uint16_t wire_code(ProtocolVersion v)
{
    switch (v)
    {
    case ProtocolVersion::SSL2:
        return 0x0002;
    case ProtocolVersion::SSL3:
        return 0x0300;
    case ProtocolVersion::TLS1_0:
        return 0x0301;
    case ProtocolVersion::TLS1_1:
        return 0x0302;
    case ProtocolVersion::TLS1_2:
        return 0x0303;
    }
    return 0;
}

std::optional<ProtocolVersion> version_from_wire(std::uint16_t code)
{
    switch (code)
    {
    case 0x0002:
        return ProtocolVersion::SSL2;
    case 0x0300:
        return ProtocolVersion::SSL3;
    case 0x0301:
        return ProtocolVersion::TLS1_0;
    case 0x0302:
        return ProtocolVersion::TLS1_1;
    case 0x0303:
        return ProtocolVersion::TLS1_2;
    default:
        return std::nullopt;
    }
}

std::string_view to_string(ProtocolVersion v)
{
    switch (v)
    {
    case ProtocolVersion::SSL2:
        return "SSL2";
    case ProtocolVersion::SSL3:
        return "SSL3";
    case ProtocolVersion::TLS1_0:
        return "TLS1_0";
    case ProtocolVersion::TLS1_1:
        return "TLS1_1";
    case ProtocolVersion::TLS1_2:
        return "TLS1_2";
    }
    return "?";
}

std::optional<ProtocolVersion> parse_version(std::string_view token)
{
    for (auto v : kAllVersions)
    {
        if (to_string(v) == token)
            return v;
    }
    return std::nullopt;
}

std::string_view display_name(ProtocolVersion v)
{
    switch (v)
    {
    case ProtocolVersion::SSL2:
        return "SSLv2";
    case ProtocolVersion::SSL3:
        return "SSLv3";
    case ProtocolVersion::TLS1_0:
        return "TLSv1";
    case ProtocolVersion::TLS1_1:
        return "TLSv1.1";
    case ProtocolVersion::TLS1_2:
        return "TLSv1.2";
    }
    return "?";
}

std::string_view to_string(Severity s)
{
    switch (s)
    {
    case Severity::OK:
        return "OK";
    case Severity::INFO:
        return "INFO";
    case Severity::WARN:
        return "WARN";
    case Severity::FAIL:
        return "FAIL";
    }
    return "?";
}

std::string_view to_string(Verdict v)
{
    switch (v)
    {
    case Verdict::AFFECTED:
        return "AFFECTED";
    case Verdict::MITIGATED:
        return "MITIGATED";
    case Verdict::NOT_APPLICABLE:
        return "NOT_APPLICABLE";
    case Verdict::UNKNOWN:
        return "UNKNOWN";
    }
    return "?";
}

std::optional<Severity> parse_severity(std::string_view s)
{
    for (auto v : {Severity::OK, Severity::INFO, Severity::WARN, Severity::FAIL})
    {
        if (to_string(v) == s)
            return v;
    }
    return std::nullopt;
}

std::optional<Verdict> parse_verdict(std::string_view s)
{
    for (auto v : {Verdict::AFFECTED, Verdict::MITIGATED, Verdict::NOT_APPLICABLE, Verdict::UNKNOWN})
    {
        if (to_string(v) == s)
            return v;
    }
    return std::nullopt;
}

std::string to_lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s)
{
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && is_space(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && is_space(s.back()))
        s.remove_suffix(1);
    return std::string(s);
}

bool iequals(std::string_view a, std::string_view b)
{
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
               return std::tolower(x) == std::tolower(y);
           });
}

} // namespace tlsaudit
