#pragma once

#include "tlsaudit/types.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tlsaudit::wire
{

using ByteView = std::span<const std::uint8_t>;

namespace content
{
inline constexpr std::uint8_t kChangeCipherSpec = 20;
inline constexpr std::uint8_t kAlert = 21;
inline constexpr std::uint8_t kHandshake = 22;
inline constexpr std::uint8_t kApplicationData = 23;
inline constexpr std::uint8_t kHeartbeat = 24;
} // namespace content

namespace hs
{
inline constexpr std::uint8_t kClientHello = 1;
inline constexpr std::uint8_t kServerHello = 2;
inline constexpr std::uint8_t kCertificate = 11;
inline constexpr std::uint8_t kServerKeyExchange = 12;
inline constexpr std::uint8_t kCertificateStatus = 22;
inline constexpr std::uint8_t kServerHelloDone = 14;
inline constexpr std::uint8_t kClientKeyExchange = 16;
} // namespace hs

namespace ext
{
inline constexpr std::uint16_t kServerName = 0x0000;
inline constexpr std::uint16_t kStatusRequest = 0x0005;
inline constexpr std::uint16_t kHeartbeat = 0x000f;
inline constexpr std::uint16_t kRenegotiationInfo = 0xff01;
} // namespace ext

inline constexpr std::uint16_t kRenegScsv = 0x00ff;
inline constexpr std::uint8_t kAlertFatal = 2;
inline constexpr std::uint8_t kAlertHandshakeFailure = 40;
inline constexpr std::uint8_t kAlertUnexpectedMessage = 10;
inline constexpr std::uint8_t kAlertProtocolVersion = 70;
inline constexpr std::size_t kMaxRecordBody = (1u << 14) + 2048;

struct Extension
{
    std::uint16_t type = 0;
    Bytes payload;
    bool operator==(const Extension&) const = default;
};

struct HelloParams
{
    ProtocolVersion version = ProtocolVersion::TLS1_2;
    std::vector<std::uint16_t> cipher_ids;
    std::vector<std::uint8_t> compression_methods{0};
    std::vector<Extension> extensions;
    std::optional<std::string> server_name;
    bool include_reneg_scsv = false;

    bool operator==(const HelloParams&) const = default;
};

enum class ResponseKind : std::uint8_t
{
    SERVER_HELLO,
    ALERT,
    SSL2_SERVER_HELLO,
    MALFORMED,
    TIMEOUT,
};

std::string_view to_string(ResponseKind k);

struct ServerResponse
{
    ResponseKind kind = ResponseKind::TIMEOUT;
    std::optional<ProtocolVersion> negotiated_version;
    std::optional<std::uint16_t> chosen_cipher_id;
    std::optional<std::uint8_t> chosen_compression;
    std::set<std::uint16_t> extensions_present;
    std::optional<std::uint8_t> alert_level;
    std::optional<std::uint8_t> alert_description;
    std::optional<std::vector<Bytes>> certificate_der;
    std::optional<int> dh_prime_bits;
    bool hello_done = false;
    bool ocsp_status = false;
    /// Short reason for MALFORMED.
    std::string note;
};

class WireError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Standard SSLv3+ ClientHello in one handshake record. Throws WireError for
/// SSL2 or when the params break their invariants.
Bytes encode_client_hello(const HelloParams& p);
Bytes encode_sslv2_client_hello();

/// Never throws; truncated input degrades to whatever was complete.
ServerResponse decode_server_response(ByteView data);

/// True once `data` holds enough to classify the reply: an alert, a
/// ServerHelloDone, a whole SSLv2 SERVER-HELLO, or bytes that can never
/// become valid.
bool response_complete(ByteView data);

Bytes encode_heartbeat_request(std::size_t declared_length, ByteView payload, ProtocolVersion version);

enum class HeartbeatVerdict : std::uint8_t
{
    VULNERABLE,
    SAFE,
    NO_RESPONSE,
};

std::string_view to_string(HeartbeatVerdict v);
std::optional<HeartbeatVerdict> parse_heartbeat_verdict(std::string_view s);

HeartbeatVerdict decode_heartbeat_response(ByteView data, std::size_t requested, std::size_t actual_payload = 1);

// Server side, used by the mock responder.

struct ClientHelloInfo
{
    bool sslv2 = false;
    HelloParams params;
    /// Set when the client sent heartbeat/status_request/reneg extensions.
    std::set<std::uint16_t> extension_types;
};

/// Parses a complete ClientHello (SSLv2 or record framed). Throws WireError.
ClientHelloInfo decode_client_hello(ByteView data);
/// How many bytes of `data` the first ClientHello needs; 0 while unknown.
std::size_t client_hello_size(ByteView data);

Bytes encode_record(std::uint8_t type, ProtocolVersion v, ByteView body);
Bytes encode_handshake(std::uint8_t msg_type, ByteView body);
Bytes encode_alert(std::uint8_t level, std::uint8_t description, ProtocolVersion v);

struct ServerHelloParams
{
    ProtocolVersion version = ProtocolVersion::TLS1_2;
    std::uint16_t cipher_id = 0;
    std::uint8_t compression = 0;
    std::vector<Extension> extensions;
};

Bytes encode_server_hello_body(const ServerHelloParams& p);
Bytes encode_certificate_body(const std::vector<Bytes>& chain);
/// DH ServerKeyExchange with an empty signature (nothing verifies it).
Bytes encode_dh_server_key_exchange_body(ByteView prime, ByteView generator, ByteView public_value,
                                         ProtocolVersion v, bool anonymous);
Bytes encode_sslv2_server_hello(const Bytes& certificate_der);

/// Number of significant bits in a big-endian unsigned integer.
int bit_length(ByteView big_endian);

} // namespace tlsaudit::wire
