#pragma once

#include "tlsaudit/types.hpp"

#include <chrono>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tlsaudit::cert
{

using Timestamp = std::chrono::sys_seconds;

enum class KeyAlgorithm : std::uint8_t
{
    RSA,
    DSA,
    EC,
    OTHER,
};

enum class SignatureAlgorithm : std::uint8_t
{
    MD5_RSA,
    SHA1_RSA,
    SHA256_RSA,
    SHA384_RSA,
    SHA512_RSA,
    ECDSA_SHA1,
    ECDSA_SHA256,
    ECDSA_SHA384,
    ECDSA_SHA512,
    DSA_SHA1,
    DSA_SHA256,
    OTHER,
};

std::string_view to_string(KeyAlgorithm a);
std::string_view to_string(SignatureAlgorithm a);

struct CertificateSummary
{
    std::optional<std::string> subject_cn;
    std::vector<std::string> san_dns_names;
    KeyAlgorithm public_key_algorithm = KeyAlgorithm::OTHER;
    int public_key_bits = 0;
    std::string curve; // named curve OID for EC keys
    SignatureAlgorithm signature_algorithm = SignatureAlgorithm::OTHER;
    std::string signature_oid;
    Timestamp not_before{};
    Timestamp not_after{};
    bool is_self_signed = false;
    int chain_position = 0;

    bool operator==(const CertificateSummary&) const = default;
};

class ParseError : public std::runtime_error
{
public:
    ParseError(const std::string& msg, std::size_t offset)
        : std::runtime_error("DER error at offset " + std::to_string(offset) + ": " + msg)
        , offset_(offset)
    {
    }
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Throws ParseError; never reads out of bounds.
CertificateSummary extract_summary(std::span<const std::uint8_t> der, int position = 0);

/// DER blobs from every CERTIFICATE block of a PEM document.
std::vector<Bytes> decode_pem(std::string_view pem);
std::vector<Bytes> load_pem_file(const std::string& path);

/// Hash family of a signature ("MD5", "SHA1", ...; empty if unknown).
std::string_view signature_hash(SignatureAlgorithm a);

/// Case-insensitive; a pattern may carry one '*' only as its whole
/// left-most label, which then stands for exactly one label.
bool hostname_matches(std::string_view pattern, std::string_view hostname);

std::vector<Finding> check_certificate(const CertificateSummary& s, std::string_view hostname, Timestamp now);

/// check_certificate over a whole served chain (leaf first). Blobs that do
/// not parse become CERT_PARSE warnings.
std::vector<Finding> check_chain(const std::vector<Bytes>& chain, std::string_view hostname, Timestamp now);

std::string format_time(Timestamp t);

} // namespace tlsaudit::cert
