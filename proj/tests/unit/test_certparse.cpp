#include "doctest.h"
#include "helpers.hpp"

#include "tlsaudit/certparse.hpp"

#include <map>
#include <random>
#include <sstream>

using namespace tlsaudit;
using namespace tlsaudit::cert;
using testutil::fixture;

namespace
{

Bytes der(const std::string& name)
{
    auto blobs = load_pem_file(fixture("certs/" + name).string());
    REQUIRE(blobs.size() == 1);
    return blobs.front();
}

CertificateSummary summary(const std::string& name)
{
    return extract_summary(der(name));
}

// Inside every fixture's validity window.
Timestamp when(const CertificateSummary& s)
{
    return s.not_before + std::chrono::hours(24);
}

std::vector<Finding> only(const std::vector<Finding>& f, std::string_view rule)
{
    std::vector<Finding> out;
    for (const auto& x : f)
    {
        if (x.rule_id == rule)
            out.push_back(x);
    }
    return out;
}

} // namespace

TEST_CASE("fixtures match the openssl x509 readings")
{
    for (const auto& line : testutil::lines(testutil::slurp(fixture("certs/expected.txt"))))
    {
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream in(line);
        std::string file, sig;
        int bits = 0;
        in >> file >> bits >> sig;
        CAPTURE(file);
        auto s = summary(file);
        CHECK(s.public_key_bits == bits);
        const std::map<std::string, SignatureAlgorithm> names = {
            {"sha256WithRSAEncryption", SignatureAlgorithm::SHA256_RSA},
            {"sha1WithRSAEncryption", SignatureAlgorithm::SHA1_RSA},
            {"md5WithRSAEncryption", SignatureAlgorithm::MD5_RSA},
            {"ecdsa-with-SHA256", SignatureAlgorithm::ECDSA_SHA256},
        };
        REQUIRE(names.contains(sig));
        CHECK(s.signature_algorithm == names.at(sig));
    }
}

TEST_CASE("summary fields")
{
    auto s = summary("rsa2048.pem");
    CHECK(s.subject_cn == "www.example.net");
    CHECK(s.san_dns_names == std::vector<std::string>{"www.example.net", "*.example.net"});
    CHECK(s.public_key_algorithm == KeyAlgorithm::RSA);
    CHECK(s.is_self_signed);
    CHECK(format_time(s.not_before) == "2014-01-01T00:00:00Z");
    CHECK(format_time(s.not_after) == "2034-01-01T00:00:00Z");
    CHECK(s.signature_oid == "1.2.840.113549.1.1.11");

    CHECK_FALSE(summary("rsa2048_issued.pem").is_self_signed);
    auto ec = summary("ec256.pem");
    CHECK(ec.public_key_algorithm == KeyAlgorithm::EC);
    CHECK(ec.curve == "1.2.840.10045.3.1.7");
    auto cn = summary("rsa2048_cn_only.pem");
    CHECK(cn.san_dns_names.empty());
    CHECK(cn.subject_cn == "mail.example.org");
}

TEST_CASE("key-size ladder")
{
    const std::vector<std::pair<std::string, std::optional<Severity>>> ladder = {
        {"rsa512.pem", Severity::FAIL},
        {"rsa1024.pem", Severity::WARN},
        {"rsa2048.pem", std::nullopt},
        {"rsa4096.pem", std::nullopt},
    };
    for (const auto& [file, want] : ladder)
    {
        CAPTURE(file);
        auto s = summary(file);
        auto f = only(check_certificate(s, "www.example.net", when(s)), "CERT_KEY");
        if (want)
        {
            REQUIRE(f.size() == 1);
            CHECK(f[0].severity == *want);
            CHECK(f[0].verdict == Verdict::AFFECTED);
        }
        else
            CHECK(f.empty());
    }
    auto ec = summary("ec256.pem");
    auto f = only(check_certificate(ec, "", when(ec)), "CERT_KEY");
    REQUIRE(f.size() == 1);
    CHECK(f[0].severity == Severity::INFO);
}

TEST_CASE("signature hash, validity, hostname, self-signed")
{
    auto md5 = summary("rsa2048_md5.pem");
    auto f = only(check_certificate(md5, "", when(md5)), "CERT_SIGNATURE");
    REQUIRE(f.size() == 1);
    CHECK(f[0].severity == Severity::FAIL);

    auto sha1 = summary("rsa2048_sha1.pem");
    f = only(check_certificate(sha1, "", when(sha1)), "CERT_SIGNATURE");
    REQUIRE(f.size() == 1);
    CHECK(f[0].severity == Severity::WARN);

    auto good = summary("rsa2048.pem");
    CHECK(only(check_certificate(good, "", when(good)), "CERT_SIGNATURE").empty());

    auto old = summary("rsa2048_expired.pem");
    f = only(check_certificate(old, "", when(good)), "CERT_VALIDITY");
    REQUIRE(f.size() == 1);
    CHECK(f[0].severity == Severity::FAIL);
    // before notBefore is just as invalid
    CHECK(only(check_certificate(good, "", good.not_before - std::chrono::seconds(1)), "CERT_VALIDITY").size() == 1);

    CHECK(only(check_certificate(good, "www.example.net", when(good)), "CERT_HOSTNAME").empty());
    CHECK(only(check_certificate(good, "mail.example.net", when(good)), "CERT_HOSTNAME").empty());
    CHECK(only(check_certificate(good, "example.net", when(good)), "CERT_HOSTNAME").size() == 1);
    auto cn = summary("rsa2048_cn_only.pem");
    CHECK(only(check_certificate(cn, "mail.example.org", when(cn)), "CERT_HOSTNAME").empty());
    CHECK(only(check_certificate(cn, "www.example.org", when(cn)), "CERT_HOSTNAME").size() == 1);
    // no hostname, no check
    CHECK(only(check_certificate(cn, "", when(cn)), "CERT_HOSTNAME").empty());

    CHECK(only(check_certificate(good, "", when(good)), "CERT_SELF_SIGNED").size() == 1);
    auto issued = summary("rsa2048_issued.pem");
    CHECK(only(check_certificate(issued, "", when(issued)), "CERT_SELF_SIGNED").empty());

    // intermediates are not checked against the host name
    good.chain_position = 1;
    CHECK(only(check_certificate(good, "nope.invalid", when(good)), "CERT_HOSTNAME").empty());
    CHECK(only(check_certificate(good, "", when(good)), "CERT_SELF_SIGNED").empty());
}

TEST_CASE("wildcard table")
{
    struct Case
    {
        const char* pattern;
        const char* host;
        bool match;
    };
    const Case cases[] = {
        {"*.example.net", "www.example.net", true},
        {"*.example.net", "WWW.Example.NET", true},
        {"*.example.net", "example.net", false},
        {"*.example.net", "a.b.example.net", false},
        {"*.example.net", ".example.net", false},
        {"*.net", "example.net", false},
        {"w*.example.net", "www.example.net", false},
        {"www.*.net", "www.example.net", false},
        {"*.*.example.net", "a.b.example.net", false},
        {"www.example.net", "www.example.net.", true},
        {"www.example.net", "mail.example.net", false},
        {"*", "localhost", false},
    };
    for (const auto& c : cases)
    {
        CAPTURE(c.pattern);
        CAPTURE(c.host);
        CHECK(hostname_matches(c.pattern, c.host) == c.match);
    }
}

TEST_CASE("PEM decoding")
{
    auto text = testutil::slurp(fixture("certs/rsa2048.pem")) + testutil::slurp(fixture("certs/ec256.pem"));
    auto blobs = decode_pem("junk before\n" + text);
    REQUIRE(blobs.size() == 2);
    CHECK(blobs[0] == der("rsa2048.pem"));
    CHECK(decode_pem("no blocks here").empty());
}

TEST_CASE("truncated DER reports an offset inside the input")
{
    auto d = der("rsa2048.pem");
    for (std::size_t n : {std::size_t{0}, std::size_t{1}, std::size_t{4}, d.size() / 2, d.size() - 1})
    {
        CAPTURE(n);
        try
        {
            (void)extract_summary(std::span(d.data(), n));
            FAIL("accepted truncated input");
        }
        catch (const ParseError& e)
        {
            CHECK(e.offset() <= n);
        }
    }
    auto f = check_chain({Bytes{0x30, 0x80}, d}, "", when(extract_summary(d)));
    REQUIRE_FALSE(f.empty());
    CHECK(f[0].rule_id == "CERT_PARSE");
    CHECK(f[0].severity == Severity::WARN);
}

TEST_CASE("DER extractor survives 10000 fuzzed inputs")
{
    std::mt19937 rng(1404);
    const std::vector<Bytes> seeds = {der("rsa2048.pem"), der("ec256.pem"), der("rsa2048_issued.pem")};
    std::size_t rejected = 0;
    for (int i = 0; i < 10000; ++i)
    {
        Bytes b = seeds[rng() % seeds.size()];
        switch (i % 3)
        {
        case 0:
            for (int k = 1 + rng() % 6; k > 0; --k)
                b[rng() % b.size()] = static_cast<std::uint8_t>(rng());
            break;
        case 1:
            b.resize(rng() % b.size());
            break;
        default:
            b.resize(rng() % 64);
            for (auto& x : b)
                x = static_cast<std::uint8_t>(rng());
        }
        try
        {
            auto s = extract_summary(b);
            CHECK(s.public_key_bits >= 0);
        }
        catch (const ParseError& e)
        {
            CHECK(e.offset() <= b.size());
            ++rejected;
        }
    }
    CHECK(rejected > 3000);
}
