#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tlsaudit
{

using Bytes = std::vector<std::uint8_t>;

enum class ProtocolVersion : std::uint8_t
{
    SSL2,
    SSL3,
    TLS1_0,
    TLS1_1,
    TLS1_2,
};

inline constexpr std::array<ProtocolVersion, 5> kAllVersions = {
    ProtocolVersion::SSL2, ProtocolVersion::SSL3, ProtocolVersion::TLS1_0,
    ProtocolVersion::TLS1_1, ProtocolVersion::TLS1_2};

/// Versions spoken with SSLv3-style record framing.
inline constexpr std::array<ProtocolVersion, 4> kRecordVersions = {
    ProtocolVersion::SSL3, ProtocolVersion::TLS1_0, ProtocolVersion::TLS1_1,
    ProtocolVersion::TLS1_2};

/// 0x0002 for SSLv2, 0x0300..0x0303 otherwise.
std::uint16_t wire_code(ProtocolVersion v);
std::optional<ProtocolVersion> version_from_wire(std::uint16_t code);

/// Canonical token used in data files and reports ("SSL3", "TLS1_2", ...).
std::string_view to_string(ProtocolVersion v);
std::optional<ProtocolVersion> parse_version(std::string_view token);

/// Reference-tool spelling ("SSLv3", "TLSv1", "TLSv1.2").
std::string_view display_name(ProtocolVersion v);

enum class Severity : std::uint8_t
{
    OK,
    INFO,
    WARN,
    FAIL,
};

enum class Verdict : std::uint8_t
{
    AFFECTED,
    MITIGATED,
    NOT_APPLICABLE,
    UNKNOWN,
};

std::string_view to_string(Severity s);
std::string_view to_string(Verdict v);
std::optional<Severity> parse_severity(std::string_view s);
std::optional<Verdict> parse_verdict(std::string_view s);

/// One rule verdict. Cert, app and profile rules all produce these.
struct Finding
{
    std::string rule_id;
    Severity severity = Severity::OK;
    std::optional<Verdict> verdict;
    std::string evidence;
    std::string remediation;

    bool operator==(const Finding&) const = default;
};

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

std::string base64_encode(const Bytes& data);
/// Ignores whitespace; throws std::invalid_argument on bad input.
Bytes base64_decode(std::string_view text);
bool iequals(std::string_view a, std::string_view b);

} // namespace tlsaudit
