#pragma once

#include "tlsaudit/net.hpp"
#include "tlsaudit/registry.hpp"
#include "tlsaudit/wire.hpp"

#include <chrono>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace tlsaudit::probe
{

enum class StartTls : std::uint8_t
{
    NONE,
    SMTP,
    IMAP,
    POP3,
    LDAP,
};

std::string_view to_string(StartTls s);
std::optional<StartTls> parse_starttls(std::string_view s); // case-insensitive

struct Endpoint
{
    std::string host;
    std::uint16_t port = 443;
    StartTls starttls = StartTls::NONE;
    net::Millis timeout{5000};
    std::optional<std::string> sni_name;
};

enum class OrderPreference : std::uint8_t
{
    ENFORCED,
    CLIENT_ORDER,
    INDETERMINATE,
};

enum class Renegotiation : std::uint8_t
{
    SECURE,
    LEGACY_ONLY,
    UNKNOWN,
};

std::string_view to_string(OrderPreference o);
std::string_view to_string(Renegotiation r);
std::optional<OrderPreference> parse_order_preference(std::string_view s);
std::optional<Renegotiation> parse_renegotiation(std::string_view s);

struct EndpointProfile
{
    std::set<ProtocolVersion> versions_supported; // SSL3 and up
    bool sslv2_accepted = false;
    std::map<ProtocolVersion, std::vector<std::uint16_t>> ciphers_by_version;
    std::map<ProtocolVersion, OrderPreference> server_order_preference;
    /// Unset when the probe could not run.
    std::optional<bool> tls_compression;
    Renegotiation secure_renegotiation = Renegotiation::UNKNOWN;
    wire::HeartbeatVerdict heartbeat = wire::HeartbeatVerdict::SAFE;
    bool heartbeat_extension_offered = false;
    std::optional<bool> ocsp_stapled;
    std::optional<int> dh_prime_bits;
    std::vector<Bytes> certificate_chain;
    bool pfs_available = false;
    std::vector<std::string> notes;

    bool operator==(const EndpointProfile&) const = default;
};

/// The endpoint could not be reached at all.
class UnreachableError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// The plaintext dialogue did not offer or accept the upgrade.
class StartTlsUnsupported : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Runs the plaintext preamble on a fresh connection. NONE is a no-op.
void starttls_negotiate(net::Socket& s, StartTls kind, net::Millis timeout);

/// Connect, upgrade if needed, send `hello`, read until the reply can be
/// classified, then send a fatal alert and hang up.
wire::ServerResponse exchange(const Endpoint& e, const Bytes& hello);

/// Hello with SNI filled in from the endpoint.
wire::HelloParams base_hello(const Endpoint& e, ProtocolVersion v, std::vector<std::uint16_t> ciphers);

/// All registry ids defined at or before `v`, in registry order.
std::vector<std::uint16_t> candidates_for(const registry::Registry& r, ProtocolVersion v);

struct ProtocolSupport
{
    std::set<ProtocolVersion> versions;
    bool sslv2_accepted = false;
    std::vector<Bytes> sslv2_certificate;
};

ProtocolSupport probe_protocols(const Endpoint& e, const registry::Registry& r);

std::vector<std::uint16_t> enumerate_ciphers(const Endpoint& e, ProtocolVersion v,
                                             const std::vector<std::uint16_t>& candidates, unsigned concurrency = 8);

OrderPreference detect_order_preference(const Endpoint& e, ProtocolVersion v, std::uint16_t a, std::uint16_t b);

/// Throws wire::WireError when the server picks a method that was not offered.
bool detect_tls_compression(const Endpoint& e, ProtocolVersion v, const std::vector<std::uint16_t>& ciphers);
Renegotiation detect_secure_renegotiation(const Endpoint& e, ProtocolVersion v,
                                          const std::vector<std::uint16_t>& ciphers);

struct HeartbleedResult
{
    bool extension_offered = false;
    wire::HeartbeatVerdict verdict = wire::HeartbeatVerdict::SAFE;
};

inline constexpr std::size_t kHeartbleedDeclaredLength = 0x4000;

HeartbleedResult probe_heartbleed(const Endpoint& e, ProtocolVersion v, const std::vector<std::uint16_t>& ciphers);
bool probe_ocsp_stapling(const Endpoint& e, ProtocolVersion v, const std::vector<std::uint16_t>& ciphers);
/// `dhe_ciphers` should hold only DHE suites; empty gives nullopt.
std::optional<int> measure_dh_strength(const Endpoint& e, ProtocolVersion v,
                                       const std::vector<std::uint16_t>& dhe_ciphers);

struct ScanOptions
{
    unsigned concurrency = 8;
    /// Overrides the registry-derived candidate list for every version.
    std::optional<std::vector<std::uint16_t>> candidates;
};

/// Throws UnreachableError, StartTlsUnsupported; every other failure ends
/// up in the profile as an unknown value plus a note.
EndpointProfile scan(const Endpoint& e, const registry::Registry& r, const ScanOptions& opts = {});

} // namespace tlsaudit::probe
