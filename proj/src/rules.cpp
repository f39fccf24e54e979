#include "tlsaudit/rules.hpp"

#include <algorithm>

namespace tlsaudit::rules
{

using probe::EndpointProfile;
using probe::OrderPreference;
using probe::Renegotiation;
using registry::CipherMode;
using wire::HeartbeatVerdict;

namespace
{

constexpr std::string_view kProtocols = "SSLProtocol all -SSLv2 -SSLv3";

const std::vector<RuleInfo> kCatalogue = {
    {"PROTO_SSLV2", "SSLv2 hello answered", Severity::FAIL, "RFC 6176", kProtocols},
    {"PROTO_SSLV3", "SSLv3 accepted", Severity::WARN, "RFC 7568", kProtocols},
    {"NULL_ANON", "a NULL or anonymous suite accepted", Severity::FAIL, "RFC 5246 appendix A.5", kRecommendedSuites},
    {"CRIME", "server selects DEFLATE record compression", Severity::FAIL, "CVE-2012-4929", "SSLCompression off"},
    {"BEAST", "CBC under SSLv3/TLSv1 with no TLSv1.1 or later", Severity::WARN, "CVE-2011-3389",
     "SSLProtocol all -SSLv2 -SSLv3 (with OpenSSL 1.0.1 or later so TLSv1.1 and TLSv1.2 are offered)"},
    {"RC4", "an RC4 suite accepted", Severity::WARN, "CVE-2013-2566", kRecommendedSuites},
    {"LUCKY13", "a CBC suite accepted", Severity::INFO, "CVE-2013-0169", kRecommendedSuites},
    {"RENEG", "no renegotiation_info in ServerHello", Severity::FAIL, "RFC 5746",
     "Upgrade the TLS library to a release implementing secure renegotiation"},
    {"HEARTBLEED", "heartbeat answered beyond the payload sent", Severity::FAIL, "CVE-2014-0160",
     "Upgrade OpenSSL to 1.0.1g or later, then replace the private key and reissue the certificate"},
    {"DH_WEAK", "DHE prime shorter than 2048 bits", Severity::WARN, "CVE-2015-4000",
     "openssl dhparam 2048 > dh.pem and append it to the certificate file"},
    {"PFS", "no ECDHE or DHE suite accepted", Severity::WARN, "RFC 5246 section F.1.1.3", kRecommendedSuites},
    {"ORDER_PREF", "server follows client suite order", Severity::WARN, "RFC 5246 section 7.4.1.3",
     "SSLHonorCipherOrder On"},
    {"OCSP_STAPLE", "status_request not echoed", Severity::INFO, "RFC 6066 section 8", "SSLUseStapling on"},
    {"STARTTLS", "plaintext dialogue refused the upgrade", Severity::FAIL, "RFC 3207",
     "Enable STARTTLS in the mail or directory server"},
    {"CERT_KEY", "RSA/DSA key under 2048 bits", Severity::FAIL, "NIST SP 800-131A",
     "Reissue the certificate with a 2048-bit or larger RSA key"},
    {"CERT_SIGNATURE", "MD5 or SHA-1 signature", Severity::FAIL, "RFC 6151",
     "Have the certificate reissued with a SHA-256 signature"},
    {"CERT_VALIDITY", "outside notBefore..notAfter", Severity::FAIL, "RFC 5280 section 4.1.2.5",
     "Install a certificate that is currently valid"},
    {"CERT_HOSTNAME", "leaf names do not cover the host", Severity::FAIL, "RFC 6125",
     "Install a certificate whose CN or subjectAltName covers the host name"},
    {"CERT_SELF_SIGNED", "leaf issuer equals subject", Severity::WARN, "RFC 5280",
     "Use a certificate issued by a CA the clients trust"},
    {"CERT_PARSE", "served certificate not decodable", Severity::WARN, "RFC 5280", ""},
    {"HSTS", "Strict-Transport-Security absent, short or malformed", Severity::WARN, "RFC 6797",
     "Header set Strict-Transport-Security \"max-age=15768000\""},
    {"COOKIE", "Set-Cookie without secure or HttpOnly", Severity::FAIL, "RFC 6265 section 4.1.2",
     "Set the secure and HttpOnly attributes on session cookies"},
    {"BREACH", "gzip response to a cross-site Referer", Severity::WARN, "CVE-2013-3587",
     "SetEnvIfNoCase Referer ^https://www\\.example\\.net/ self_referer\nSetEnvIf self_referer ^$ no-gzip"},
};

struct Ctx
{
    const EndpointProfile& p;
    const registry::Registry& reg;

    std::vector<const registry::CipherSuite*> accepted_at(ProtocolVersion v) const
    {
        std::vector<const registry::CipherSuite*> out;
        auto it = p.ciphers_by_version.find(v);
        if (it == p.ciphers_by_version.end())
            return out;
        for (auto id : it->second)
        {
            if (const auto* c = reg.lookup_by_id(id))
                out.push_back(c);
        }
        return out;
    }

    template <class Pred>
    std::vector<std::string> names_where(Pred pred) const
    {
        std::vector<std::string> out;
        for (const auto& [v, ids] : p.ciphers_by_version)
        {
            for (const auto* c : accepted_at(v))
            {
                if (pred(*c) && std::find(out.begin(), out.end(), c->name) == out.end())
                    out.push_back(c->name);
            }
        }
        return out;
    }

    bool has(ProtocolVersion v) const { return p.versions_supported.contains(v); }
    bool speaks_tls() const { return !p.versions_supported.empty(); }
};

std::string join(const std::vector<std::string>& v, std::size_t limit = 6)
{
    std::string out;
    for (std::size_t i = 0; i < v.size() && i < limit; ++i)
        out += (i ? ", " : "") + v[i];
    if (v.size() > limit)
        out += " and " + std::to_string(v.size() - limit) + " more";
    return out;
}

Finding make(std::string_view id, Severity s, std::optional<Verdict> v, std::string evidence)
{
    Finding f{std::string(id), s, v, std::move(evidence), ""};
    if (s != Severity::OK)
        f.remediation = std::string(find_rule(id)->remediation);
    return f;
}

Finding unknown(std::string_view id, std::string evidence)
{
    return make(id, Severity::WARN, Verdict::UNKNOWN, std::move(evidence));
}

Finding sslv2(const Ctx& c)
{
    if (c.p.sslv2_accepted)
        return make("PROTO_SSLV2", Severity::FAIL, Verdict::AFFECTED, "server answers an SSLv2 CLIENT-HELLO");
    return make("PROTO_SSLV2", Severity::OK, Verdict::NOT_APPLICABLE, "SSLv2 refused");
}

Finding sslv3(const Ctx& c)
{
    if (c.has(ProtocolVersion::SSL3))
        return make("PROTO_SSLV3", Severity::WARN, Verdict::AFFECTED, "SSLv3 accepted");
    return make("PROTO_SSLV3", Severity::OK, Verdict::NOT_APPLICABLE, "SSLv3 refused");
}

Finding null_anon(const Ctx& c)
{
    auto bad = c.names_where([](const registry::CipherSuite& s) {
        auto f = registry::classify(s);
        return f.null_cipher || f.anonymous;
    });
    if (!bad.empty())
        return make("NULL_ANON", Severity::FAIL, Verdict::AFFECTED, "unencrypted or unauthenticated: " + join(bad));
    return make("NULL_ANON", Severity::OK, Verdict::NOT_APPLICABLE, "no NULL or anonymous suite accepted");
}

Finding crime(const Ctx& c)
{
    if (!c.p.tls_compression)
    {
        if (!c.speaks_tls())
            return make("CRIME", Severity::OK, Verdict::NOT_APPLICABLE, "no SSLv3/TLS version accepted");
        return unknown("CRIME", "compression probe did not complete");
    }
    if (*c.p.tls_compression)
        return make("CRIME", Severity::FAIL, Verdict::AFFECTED, "server selected DEFLATE compression");
    return make("CRIME", Severity::OK, Verdict::MITIGATED, "server declined DEFLATE compression");
}

bool cbc(const registry::CipherSuite& s)
{
    return s.mode == CipherMode::CBC;
}

Finding beast(const Ctx& c)
{
    std::vector<std::string> legacy_cbc;
    for (auto v : {ProtocolVersion::SSL3, ProtocolVersion::TLS1_0})
    {
        for (const auto* s : c.accepted_at(v))
        {
            if (cbc(*s))
                legacy_cbc.push_back(std::string(display_name(v)) + " " + s->name);
        }
    }
    const bool old = c.has(ProtocolVersion::SSL3) || c.has(ProtocolVersion::TLS1_0);
    const bool modern = c.has(ProtocolVersion::TLS1_1) || c.has(ProtocolVersion::TLS1_2);
    if (!old || legacy_cbc.empty())
        return make("BEAST", Severity::OK, Verdict::NOT_APPLICABLE, "no CBC suite under SSLv3/TLSv1");
    if (!modern)
        return make("BEAST", Severity::WARN, Verdict::AFFECTED,
                    "CBC under SSLv3/TLSv1 and no TLSv1.1 or TLSv1.2: " + join(legacy_cbc, 3));
    auto f = make("BEAST", Severity::INFO, Verdict::MITIGATED,
                  "CBC still offered under SSLv3/TLSv1 (" + join(legacy_cbc, 3) +
                      "); TLSv1.1+ available and current clients split records");
    return f;
}

Finding rc4(const Ctx& c)
{
    auto hits = c.names_where([](const registry::CipherSuite& s) { return s.enc == "RC4"; });
    if (!hits.empty())
        return make("RC4", Severity::WARN, Verdict::AFFECTED, "RC4 accepted: " + join(hits));
    return make("RC4", Severity::OK, Verdict::NOT_APPLICABLE, "no RC4 suite accepted");
}

Finding lucky13(const Ctx& c)
{
    auto hits = c.names_where(cbc);
    if (!hits.empty())
        return make("LUCKY13", Severity::INFO, Verdict::AFFECTED,
                    "CBC suites accepted (" + join(hits, 3) +
                        "); the timing attack needs a low-jitter network path to the victim");
    return make("LUCKY13", Severity::OK, Verdict::NOT_APPLICABLE, "no CBC suite accepted");
}

Finding reneg(const Ctx& c)
{
    switch (c.p.secure_renegotiation)
    {
    case Renegotiation::SECURE:
        return make("RENEG", Severity::OK, Verdict::NOT_APPLICABLE, "renegotiation_info echoed");
    case Renegotiation::LEGACY_ONLY:
        return make("RENEG", Severity::FAIL, Verdict::AFFECTED,
                    "handshake proceeds without renegotiation_info; only legacy renegotiation");
    case Renegotiation::UNKNOWN:
        break;
    }
    if (!c.speaks_tls())
        return make("RENEG", Severity::OK, Verdict::NOT_APPLICABLE, "no SSLv3/TLS version accepted");
    return unknown("RENEG", "renegotiation probe did not complete");
}

Finding heartbleed(const Ctx& c)
{
    if (c.p.heartbeat == HeartbeatVerdict::VULNERABLE)
        return make("HEARTBLEED", Severity::FAIL, Verdict::AFFECTED,
                    "heartbeat reply exceeded the 1-byte payload sent (memory over-read)");
    if (!c.p.heartbeat_extension_offered)
        return make("HEARTBLEED", Severity::OK, Verdict::NOT_APPLICABLE,
                    "heartbeat extension not negotiated");
    if (c.p.heartbeat == HeartbeatVerdict::NO_RESPONSE)
        return make("HEARTBLEED", Severity::OK, Verdict::NOT_APPLICABLE,
                    "over-length heartbeat went unanswered, as a fixed implementation does");
    return make("HEARTBLEED", Severity::OK, Verdict::NOT_APPLICABLE, "over-length heartbeat refused");
}

Finding dh_weak(const Ctx& c)
{
    if (!c.p.dh_prime_bits)
        return make("DH_WEAK", Severity::OK, Verdict::NOT_APPLICABLE, "no DHE suite accepted");
    const auto bits = std::to_string(*c.p.dh_prime_bits);
    if (*c.p.dh_prime_bits < 2048)
        return make("DH_WEAK", Severity::WARN, Verdict::AFFECTED, "DHE prime is " + bits + " bits");
    return make("DH_WEAK", Severity::OK, Verdict::NOT_APPLICABLE, "DHE prime is " + bits + " bits");
}

Finding pfs(const Ctx& c)
{
    if (c.p.pfs_available)
        return make("PFS", Severity::OK, Verdict::NOT_APPLICABLE, "ephemeral key exchange available");
    if (c.p.ciphers_by_version.empty() ||
        std::all_of(c.p.ciphers_by_version.begin(), c.p.ciphers_by_version.end(),
                    [](const auto& kv) { return kv.second.empty(); }))
        return make("PFS", Severity::OK, Verdict::NOT_APPLICABLE, "no suite enumerated");
    return make("PFS", Severity::WARN, Verdict::AFFECTED, "no ECDHE or DHE suite accepted");
}

Finding order_pref(const Ctx& c)
{
    std::vector<std::string> client, unknown_at;
    bool enforced = false;
    for (const auto& [v, pref] : c.p.server_order_preference)
    {
        auto it = c.p.ciphers_by_version.find(v);
        const bool several = it != c.p.ciphers_by_version.end() && it->second.size() >= 2;
        if (pref == OrderPreference::CLIENT_ORDER)
            client.emplace_back(display_name(v));
        else if (pref == OrderPreference::ENFORCED)
            enforced = true;
        else if (several)
            unknown_at.emplace_back(display_name(v));
    }
    if (!client.empty())
        return make("ORDER_PREF", Severity::WARN, Verdict::AFFECTED, "client suite order wins at " + join(client));
    if (!unknown_at.empty())
        return unknown("ORDER_PREF", "order preference undetermined at " + join(unknown_at));
    if (enforced)
        return make("ORDER_PREF", Severity::OK, Verdict::NOT_APPLICABLE, "server suite order enforced");
    return make("ORDER_PREF", Severity::OK, Verdict::NOT_APPLICABLE, "a single suite per version; nothing to order");
}

Finding ocsp(const Ctx& c)
{
    if (!c.p.ocsp_stapled)
    {
        if (!c.speaks_tls())
            return make("OCSP_STAPLE", Severity::OK, Verdict::NOT_APPLICABLE, "no SSLv3/TLS version accepted");
        return unknown("OCSP_STAPLE", "stapling probe did not complete");
    }
    if (*c.p.ocsp_stapled)
        return make("OCSP_STAPLE", Severity::OK, Verdict::NOT_APPLICABLE, "status_request echoed");
    return make("OCSP_STAPLE", Severity::INFO, std::nullopt,
                "status_request not echoed; no stapled OCSP response");
}

} // namespace

const std::vector<RuleInfo>& catalogue()
{
    return kCatalogue;
}

const RuleInfo* find_rule(std::string_view rule_id)
{
    for (const auto& r : kCatalogue)
    {
        if (r.rule_id == rule_id)
            return &r;
    }
    return nullptr;
}

std::vector<Finding> evaluate(const EndpointProfile& p, const std::vector<Finding>& cert,
                              const std::vector<Finding>& app, const registry::Registry& reg)
{
    const Ctx c{p, reg};
    std::vector<Finding> out{sslv2(c), sslv3(c), null_anon(c), crime(c), beast(c), rc4(c), lucky13(c),
                             reneg(c), heartbleed(c), dh_weak(c), pfs(c), order_pref(c), ocsp(c)};
    out.insert(out.end(), cert.begin(), cert.end());
    out.insert(out.end(), app.begin(), app.end());
    return out;
}

Grade grade(const std::vector<Finding>& findings)
{
    Grade g;
    bool fail = false, beast = false, warn = false;
    for (const auto& f : findings)
    {
        if (f.severity == Severity::FAIL)
            fail = true;
        else if (f.rule_id == "BEAST" && f.verdict == Verdict::AFFECTED)
            beast = true;
        else if (f.severity == Severity::WARN)
            warn = true;
        else
            continue;
        if (std::find(g.caps_applied.begin(), g.caps_applied.end(), f.rule_id) == g.caps_applied.end())
            g.caps_applied.push_back(f.rule_id);
    }
    g.letter = fail ? 'F' : beast ? 'C' : warn ? 'B' : 'A';
    return g;
}

std::vector<std::string> recommend(const std::vector<Finding>& findings)
{
    std::vector<std::string> out;
    for (const auto& f : findings)
    {
        if (f.severity == Severity::OK || f.remediation.empty())
            continue;
        if (std::find(out.begin(), out.end(), f.remediation) == out.end())
            out.push_back(f.remediation);
    }
    return out;
}

Severity max_severity(const std::vector<Finding>& findings)
{
    Severity s = Severity::OK;
    for (const auto& f : findings)
        s = std::max(s, f.severity);
    return s;
}

Finding starttls_refused(const std::string& why)
{
    return make("STARTTLS", Severity::FAIL, Verdict::AFFECTED, why);
}

} // namespace tlsaudit::rules
