#pragma once

#include "tlsaudit/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tlsaudit::registry
{

enum class CipherMode : std::uint8_t
{
    NONE,
    STREAM,
    CBC,
    GCM,
};

enum class StrengthClass : std::uint8_t
{
    NULL_CLASS,
    LOW,
    MEDIUM,
    HIGH,
};

std::string_view to_string(CipherMode m);
std::string_view to_string(StrengthClass s);

/// One registry row.
///
/// Labels are kept as text so the data file can grow without a rebuild.
/// Key exchange uses "ECDHE"/"DHE" for ephemeral exchanges and
/// "ECDH/<signer>" for fixed ECDH; authentication "NONE" marks anonymous
/// suites; GCM rows carry mac "AEAD".
struct CipherSuite
{
    std::uint16_t id = 0;
    std::string name;
    std::string kx;
    std::string au;
    std::string enc;
    int enc_bits = 0;
    CipherMode mode = CipherMode::NONE;
    std::string mac;
    ProtocolVersion min_version = ProtocolVersion::SSL3;

    bool operator==(const CipherSuite&) const = default;
};

struct ClassificationFlags
{
    bool pfs = false;
    bool aead = false;
    bool anonymous = false;
    bool null_cipher = false;
    bool weak_hash = false;
    bool export_grade = false;
    StrengthClass strength_class = StrengthClass::NULL_CLASS;

    bool operator==(const ClassificationFlags&) const = default;
};

ClassificationFlags classify(const CipherSuite& c);

/// StrengthClass from symmetric key bits: >=128 HIGH, 112-127 MEDIUM,
/// 1-111 LOW, 0 NULL.
StrengthClass strength_for_bits(int enc_bits);

/// `openssl ciphers -v` style line, e.g.
/// "DES-CBC3-SHA SSLv3 Kx=RSA Au=RSA Enc=3DES(168) Mac=SHA1".
std::string describe(const CipherSuite& c);
/// Just the "Kx=..." / "Au=..." / "Enc=..." / "Mac=..." column values.
std::string kx_label(const CipherSuite& c);
std::string au_label(const CipherSuite& c);
std::string enc_label(const CipherSuite& c);
std::string mac_label(const CipherSuite& c);

class LoadError : public std::runtime_error
{
public:
    LoadError(const std::string& msg, std::size_t line)
        : std::runtime_error(line ? "registry line " + std::to_string(line) + ": " + msg : msg)
        , line_(line)
    {
    }

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Immutable after construction. Row order is file order, which doubles as
/// the default preference order for cipher-string evaluation.
class Registry
{
public:
    Registry() = default;
    explicit Registry(std::vector<CipherSuite> rows, std::string version = {});

    const std::vector<CipherSuite>& suites() const noexcept { return rows_; }
    std::size_t size() const noexcept { return rows_.size(); }
    bool empty() const noexcept { return rows_.empty(); }
    const std::string& version() const noexcept { return version_; }

    const CipherSuite* lookup_by_name(std::string_view name) const;
    const CipherSuite* lookup_by_id(std::uint16_t id) const;
    /// Position of a row in file order.
    std::size_t index_of(const CipherSuite& c) const;

private:
    std::vector<CipherSuite> rows_;
    std::string version_;
    std::map<std::string, std::size_t, std::less<>> by_name_;
    std::map<std::uint16_t, std::size_t> by_id_;
};

/// Parses the tab-separated registry document. A "# registry_version X"
/// comment sets the version string.
Registry load_registry(std::string_view document);
Registry load_registry_file(const std::filesystem::path& path);

/// The bundled registry: $TLSAUDIT_REGISTRY if set, else the installed data
/// file. Loaded once.
const Registry& default_registry();
std::filesystem::path default_registry_path();

} // namespace tlsaudit::registry
