#pragma once

#include "tlsaudit/probe.hpp"
#include "tlsaudit/types.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tlsaudit::app
{

struct HttpObservation
{
    int status = 200;
    /// In arrival order; lookups ignore case.
    std::vector<std::pair<std::string, std::string>> headers;
    std::size_t body_length = 0;
    std::optional<std::string> content_encoding;

    std::optional<std::string> header(std::string_view name) const;
    std::vector<std::string> header_values(std::string_view name) const;

    bool operator==(const HttpObservation&) const = default;
};

/// The peer did not answer with HTTP.
class HttpError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// TLS handshake with the peer failed.
class TlsError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

enum class Transport : std::uint8_t
{
    TLS,
    /// Unencrypted HTTP, for the mock responder's pre-TLS mode.
    PLAINTEXT,
};

inline constexpr std::size_t kMaxBody = 64 * 1024;
inline constexpr long kRecommendedMaxAge = 15768000;

/// One GET. Certificates are not verified; chain validation is not this
/// module's job.
HttpObservation fetch(const probe::Endpoint& e, const std::string& path, const std::optional<std::string>& referer,
                      bool accept_gzip, Transport t = Transport::TLS);

/// max-age of a Strict-Transport-Security value; nullopt when malformed.
std::optional<long> parse_hsts_max_age(std::string_view value);

Finding check_hsts(const HttpObservation& o);
std::vector<Finding> check_cookie_flags(const HttpObservation& o);

/// From whether the self- and foreign-referer fetches came back gzipped.
Verdict breach_verdict(bool self_gzip, bool foreign_gzip);
Finding breach_finding(bool self_gzip, bool foreign_gzip);
Finding check_breach(const probe::Endpoint& e, const std::string& path, const std::string& self_origin,
                     const std::string& foreign_origin, Transport t = Transport::TLS);

/// HSTS, cookies and BREACH for one path. Origins default to the
/// endpoint's host and an unrelated name.
std::vector<Finding> run_checks(const probe::Endpoint& e, const std::string& path, Transport t = Transport::TLS);

} // namespace tlsaudit::app
