#pragma once

#include "tlsaudit/registry.hpp"
#include "tlsaudit/types.hpp"

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace tlsaudit::mock
{

enum class Compression : std::uint8_t
{
    NULL_ONLY,
    DEFLATE_ALLOWED,
};

enum class HeartbeatMode : std::uint8_t
{
    DISABLED,
    PATCHED,
    VULNERABLE,
};

enum class Preamble : std::uint8_t
{
    NONE,
    SMTP,
    IMAP,
    POP3,
    LDAP,
    HTTP,
};

enum class HttpGzip : std::uint8_t
{
    ALWAYS,
    SELF_REFERER_ONLY,
    NEVER,
};

std::string_view to_string(Compression v);
std::string_view to_string(HeartbeatMode v);
std::string_view to_string(Preamble v);
std::string_view to_string(HttpGzip v);

struct ServerPolicy
{
    std::string name;
    std::set<ProtocolVersion> versions; // record-framed versions only
    bool sslv2_hello = false;
    std::vector<std::uint16_t> ciphers;
    bool honor_order = false;
    Compression compression = Compression::NULL_ONLY;
    bool reneg_info = true;
    HeartbeatMode heartbeat = HeartbeatMode::DISABLED;
    bool stapling = false;
    /// Prime size for DHE selections; 2048 when unset.
    std::optional<int> dh_bits;
    std::vector<std::string> certificate_chain; // PEM paths
    Preamble preamble = Preamble::NONE;
    HttpGzip http_gzip = HttpGzip::NEVER;
    /// STARTTLS capability advertised and accepted by mail/LDAP preambles.
    bool starttls_offered = true;
    /// Extra response headers in HTTP mode, in order.
    std::vector<std::pair<std::string, std::string>> http_headers;

    bool operator==(const ServerPolicy&) const = default;
};

class PolicyError : public std::runtime_error
{
public:
    PolicyError(const std::string& field, const std::string& msg)
        : std::runtime_error("policy field '" + field + "': " + msg)
        , field_(field)
    {
    }
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Parses and validates a JSON policy document. Relative certificate paths
/// are resolved against `base_dir`. Suites may be given by name or hex id.
ServerPolicy load_policy(std::string_view document, const std::filesystem::path& base_dir = {},
                         const registry::Registry& reg = registry::default_registry());
ServerPolicy load_policy_file(const std::filesystem::path& path,
                              const registry::Registry& reg = registry::default_registry());
std::string policy_to_json(const ServerPolicy& p, const registry::Registry& reg = registry::default_registry());

/// Sequential scripted responder on a background thread. Binding happens in
/// the constructor; port 0 picks a free port.
class MockServer
{
public:
    MockServer(ServerPolicy policy, std::uint16_t port = 0, std::string host = "127.0.0.1",
               const registry::Registry& reg = registry::default_registry());
    ~MockServer();
    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    std::uint16_t port() const noexcept;
    const ServerPolicy& policy() const noexcept;

    /// Safe to call from any thread, and more than once.
    void stop();
    /// Blocks until stop() is called elsewhere.
    void wait();

    /// Set when a client sent ClientKeyExchange.
    bool contract_violated() const;
    std::vector<std::string> violations() const;
    std::size_t connections_handled() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace tlsaudit::mock
