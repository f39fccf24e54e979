#include "doctest.h"
#include "helpers.hpp"
#include "../support/expect.hpp"

#include "tlsaudit/rules.hpp"

#include <random>

using namespace tlsaudit;
using probe::EndpointProfile;
using V = ProtocolVersion;

namespace
{

const registry::Registry& reg()
{
    return registry::default_registry();
}

std::uint16_t id(const char* name)
{
    return reg().lookup_by_name(name)->id;
}

// A quiet TLS1.2 GCM profile; tests flip one thing at a time.
EndpointProfile clean()
{
    EndpointProfile p;
    p.versions_supported = {V::TLS1_2};
    p.ciphers_by_version[V::TLS1_2] = {id("ECDHE-RSA-AES256-GCM-SHA384"), id("ECDHE-RSA-AES128-GCM-SHA256")};
    p.server_order_preference[V::TLS1_2] = probe::OrderPreference::ENFORCED;
    p.tls_compression = false;
    p.secure_renegotiation = probe::Renegotiation::SECURE;
    p.ocsp_stapled = true;
    p.pfs_available = true;
    return p;
}

Finding rule(const EndpointProfile& p, std::string_view rid)
{
    for (auto& f : rules::evaluate(p, {}, {}))
    {
        if (f.rule_id == rid)
            return f;
    }
    FAIL("missing rule " << rid);
    return {};
}

} // namespace

TEST_CASE("clean profile: every rule present once, nothing above OK")
{
    auto f = rules::evaluate(clean(), {}, {});
    REQUIRE(f.size() == 13);
    std::size_t i = 0;
    for (const auto& r : rules::catalogue())
    {
        if (i == f.size())
            break;
        CHECK(f[i++].rule_id == r.rule_id);
    }
    for (const auto& x : f)
    {
        CAPTURE(x.rule_id);
        CHECK(x.severity == Severity::OK);
        CHECK(x.remediation.empty());
    }
    CHECK(rules::grade(f) == rules::Grade{'A', {}});
    CHECK(rules::recommend(f).empty());
    CHECK(rules::recommend({}).empty());
}

TEST_CASE("BEAST truth table")
{
    // {SSL3/TLS1_0 present} x {CBC accepted there} x {TLS1_1+ present}
    for (int mask = 0; mask < 8; ++mask)
    {
        const bool old = mask & 1, cbc = mask & 2, modern = mask & 4;
        CAPTURE(old);
        CAPTURE(cbc);
        CAPTURE(modern);
        EndpointProfile p = clean();
        p.versions_supported.clear();
        p.ciphers_by_version.clear();
        if (old)
        {
            p.versions_supported.insert(V::TLS1_0);
            p.ciphers_by_version[V::TLS1_0] = {cbc ? id("AES128-SHA") : id("RC4-SHA")};
        }
        if (modern)
        {
            p.versions_supported.insert(V::TLS1_2);
            // CBC at TLS1.2 must not count
            p.ciphers_by_version[V::TLS1_2] = {id("AES256-SHA"), id("ECDHE-RSA-AES128-GCM-SHA256")};
        }
        auto f = rule(p, "BEAST");
        if (old && cbc && !modern)
        {
            CHECK(f.verdict == Verdict::AFFECTED);
            CHECK(f.severity == Severity::WARN);
            CHECK(rules::grade({f}).letter == 'C');
        }
        else if (old && cbc && modern)
        {
            CHECK(f.verdict == Verdict::MITIGATED);
            CHECK(f.severity <= Severity::INFO);
        }
        else
        {
            CHECK(f.verdict == Verdict::NOT_APPLICABLE);
            CHECK(f.severity == Severity::OK);
        }
    }

    SUBCASE("SSL3 alone counts as legacy")
    {
        EndpointProfile p = clean();
        p.versions_supported = {V::SSL3};
        p.ciphers_by_version = {{V::SSL3, {id("DES-CBC3-SHA")}}};
        CHECK(rule(p, "BEAST").verdict == Verdict::AFFECTED);
    }
}

TEST_CASE("single-condition rules")
{
    SUBCASE("CRIME")
    {
        auto p = clean();
        p.tls_compression = true;
        auto f = rule(p, "CRIME");
        CHECK(f.severity == Severity::FAIL);
        CHECK(f.verdict == Verdict::AFFECTED);
        CHECK(rule(clean(), "CRIME").verdict == Verdict::MITIGATED);
        p.tls_compression.reset();
        CHECK(rule(p, "CRIME").severity == Severity::WARN);
        CHECK(rule(p, "CRIME").verdict == Verdict::UNKNOWN);
    }
    SUBCASE("RC4")
    {
        auto p = clean();
        p.versions_supported.insert(V::TLS1_0);
        p.ciphers_by_version[V::TLS1_0] = {id("RC4-MD5")};
        CHECK(rule(p, "RC4").severity == Severity::WARN);
        CHECK(rule(p, "RC4").verdict == Verdict::AFFECTED);
        CHECK(rule(clean(), "RC4").severity == Severity::OK);
    }
    SUBCASE("RENEG")
    {
        auto p = clean();
        p.secure_renegotiation = probe::Renegotiation::LEGACY_ONLY;
        CHECK(rule(p, "RENEG").severity == Severity::FAIL);
        CHECK(rule(p, "RENEG").verdict == Verdict::AFFECTED);
        CHECK(rule(clean(), "RENEG").severity == Severity::OK);
        p.secure_renegotiation = probe::Renegotiation::UNKNOWN;
        CHECK(rule(p, "RENEG").severity == Severity::WARN);
        CHECK(rule(p, "RENEG").verdict == Verdict::UNKNOWN);
    }
    SUBCASE("HEARTBLEED")
    {
        auto p = clean();
        p.heartbeat_extension_offered = true;
        p.heartbeat = wire::HeartbeatVerdict::VULNERABLE;
        CHECK(rule(p, "HEARTBLEED").severity == Severity::FAIL);
        p.heartbeat = wire::HeartbeatVerdict::SAFE;
        CHECK(rule(p, "HEARTBLEED").severity == Severity::OK);
        p.heartbeat = wire::HeartbeatVerdict::NO_RESPONSE;
        CHECK(rule(p, "HEARTBLEED").severity == Severity::OK);
        p.heartbeat_extension_offered = false;
        p.heartbeat = wire::HeartbeatVerdict::SAFE;
        auto f = rule(p, "HEARTBLEED");
        CHECK(f.severity == Severity::OK);
        CHECK(f.evidence.find("not negotiated") != std::string::npos);
    }
    SUBCASE("DH_WEAK")
    {
        auto p = clean();
        for (auto [bits, sev] : {std::pair{768, Severity::WARN}, {1024, Severity::WARN}, {2047, Severity::WARN},
                                 {2048, Severity::OK}, {4096, Severity::OK}})
        {
            p.dh_prime_bits = bits;
            CHECK(rule(p, "DH_WEAK").severity == sev);
        }
        p.dh_prime_bits.reset();
        CHECK(rule(p, "DH_WEAK").verdict == Verdict::NOT_APPLICABLE);
    }
    SUBCASE("the rest")
    {
        auto p = clean();
        p.sslv2_accepted = true;
        CHECK(rule(p, "PROTO_SSLV2").severity == Severity::FAIL);
        p.versions_supported.insert(V::SSL3);
        p.ciphers_by_version[V::SSL3] = {id("DES-CBC3-SHA")};
        CHECK(rule(p, "PROTO_SSLV3").severity == Severity::WARN);
        CHECK(rule(p, "LUCKY13").severity == Severity::INFO);
        CHECK(rule(p, "LUCKY13").verdict == Verdict::AFFECTED);
        CHECK(rule(clean(), "LUCKY13").verdict == Verdict::NOT_APPLICABLE);

        auto q = clean();
        q.pfs_available = false;
        CHECK(rule(q, "PFS").severity == Severity::WARN);
        q.server_order_preference[V::TLS1_2] = probe::OrderPreference::CLIENT_ORDER;
        CHECK(rule(q, "ORDER_PREF").severity == Severity::WARN);
        q.ocsp_stapled = false;
        CHECK(rule(q, "OCSP_STAPLE").severity == Severity::INFO);
        q.ciphers_by_version[V::TLS1_2].push_back(id("NULL-SHA"));
        CHECK(rule(q, "NULL_ANON").severity == Severity::FAIL);
        q.ciphers_by_version[V::TLS1_2] = {id("ADH-AES128-SHA")};
        CHECK(rule(q, "NULL_ANON").severity == Severity::FAIL);
    }
}

TEST_CASE("hardened mock policy evaluates without FAIL")
{
    auto pol = mock::load_policy_file(testutil::fixture("policies/hardened.json"));
    auto f = rules::evaluate(testutil::expected_profile(pol, reg()), {}, {});
    CHECK(rules::max_severity(f) < Severity::FAIL);
    CHECK(rules::grade(f).letter == 'A');
}

TEST_CASE("grade table and recommendations")
{
    auto p = clean();
    p.versions_supported.insert(V::TLS1_0);
    p.ciphers_by_version[V::TLS1_0] = {id("RC4-SHA")};
    auto f = rules::evaluate(p, {}, {});
    auto g = rules::grade(f);
    CHECK(g.letter == 'B');
    CHECK(g.caps_applied == std::vector<std::string>{"RC4"});
    auto rec = rules::recommend(f);
    REQUIRE(rec.size() == 1);
    CHECK(rec[0].find("!RC4") != std::string::npos);
    CHECK(rec[0] == rules::kRecommendedSuites);

    p.tls_compression = true;
    p.heartbeat_extension_offered = true;
    p.heartbeat = wire::HeartbeatVerdict::VULNERABLE;
    f = rules::evaluate(p, {}, {});
    g = rules::grade(f);
    CHECK(g.letter == 'F');
    CHECK(g.caps_applied == std::vector<std::string>{"CRIME", "RC4", "HEARTBLEED"});
    rec = rules::recommend(f);
    CHECK(std::find(rec.begin(), rec.end(), "SSLCompression off") != rec.end());
    CHECK(std::any_of(rec.begin(), rec.end(), [](auto& r) { return r.find("1.0.1g") != std::string::npos; }));

    Finding hsts{"HSTS", Severity::WARN, std::nullopt, "absent",
                 std::string(rules::find_rule("HSTS")->remediation)};
    rec = rules::recommend({hsts});
    CHECK(rec == std::vector<std::string>{"Header set Strict-Transport-Security \"max-age=15768000\""});

    // BEAST cap sits between B and F
    Finding beast{"BEAST", Severity::WARN, Verdict::AFFECTED, "", ""};
    Finding rc4{"RC4", Severity::WARN, Verdict::AFFECTED, "", ""};
    CHECK(rules::grade({rc4, beast}).letter == 'C');
    CHECK(rules::grade({beast, Finding{"RENEG", Severity::FAIL, Verdict::AFFECTED, "", ""}}).letter == 'F');
    CHECK(rules::grade({Finding{"OCSP_STAPLE", Severity::INFO, std::nullopt, "", ""}}).letter == 'A');
}

TEST_CASE("cert and app findings pass through unchanged, after the profile rules")
{
    std::vector<Finding> cert{{"CERT_KEY", Severity::WARN, Verdict::AFFECTED, "1024", "x"}};
    std::vector<Finding> app{{"HSTS", Severity::OK, std::nullopt, "ok", ""},
                             {"COOKIE", Severity::FAIL, Verdict::AFFECTED, "sid", "y"}};
    auto f = rules::evaluate(clean(), cert, app);
    REQUIRE(f.size() == 16);
    CHECK(f[13] == cert[0]);
    CHECK(f[14] == app[0]);
    CHECK(f[15] == app[1]);
    CHECK(rules::evaluate(clean(), cert, app) == f);
}

TEST_CASE("properties over random profiles")
{
    std::mt19937 rng(20140407);
    auto coin = [&] { return (rng() & 1) != 0; };
    const auto& suites = reg().suites();
    for (int iter = 0; iter < 300; ++iter)
    {
        EndpointProfile p;
        p.sslv2_accepted = coin();
        for (auto v : kRecordVersions)
        {
            if (!coin())
                continue;
            p.versions_supported.insert(v);
            auto& ids = p.ciphers_by_version[v];
            for (int k = rng() % 4; k > 0; --k)
                ids.push_back(suites[rng() % suites.size()].id);
            p.server_order_preference[v] = static_cast<probe::OrderPreference>(rng() % 3);
            for (auto i : ids)
                p.pfs_available = p.pfs_available || registry::classify(*reg().lookup_by_id(i)).pfs;
        }
        if (coin())
            p.tls_compression = coin();
        if (coin())
            p.ocsp_stapled = coin();
        p.secure_renegotiation = static_cast<probe::Renegotiation>(rng() % 3);
        p.heartbeat_extension_offered = coin();
        p.heartbeat = static_cast<wire::HeartbeatVerdict>(rng() % 3);
        if (coin())
            p.dh_prime_bits = 512 << (rng() % 4);

        auto f = rules::evaluate(p, {}, {});
        CHECK(f == rules::evaluate(p, {}, {}));
        for (const auto& x : f)
        {
            CAPTURE(x.rule_id);
            const auto* info = rules::find_rule(x.rule_id);
            REQUIRE(info != nullptr);
            if (x.verdict != Verdict::UNKNOWN)
                CHECK(x.severity <= info->worst);
            if (x.severity == Severity::FAIL)
                CHECK(x.verdict == Verdict::AFFECTED);
            if (x.verdict == Verdict::UNKNOWN)
                CHECK(x.severity == Severity::WARN);
            if (x.severity > Severity::OK)
                CHECK_FALSE(x.remediation.empty());
        }

        // adding any finding never improves the grade
        auto g = rules::grade(f);
        for (auto s : {Severity::OK, Severity::INFO, Severity::WARN, Severity::FAIL})
        {
            auto more = f;
            more.push_back({"BEAST", s, s == Severity::WARN ? Verdict::AFFECTED : Verdict::NOT_APPLICABLE, "", ""});
            CHECK(rules::grade(more).letter >= g.letter);
        }
    }
}

TEST_CASE("catalogue")
{
    std::set<std::string_view> ids;
    for (const auto& r : rules::catalogue())
    {
        CHECK(ids.insert(r.rule_id).second);
        CHECK_FALSE(r.reference.empty());
        if (r.rule_id != "CERT_PARSE")
            CHECK_FALSE(r.remediation.empty());
    }
    CHECK(rules::find_rule("NOPE") == nullptr);
    auto s = rules::starttls_refused("no STARTTLS");
    CHECK(s.severity == Severity::FAIL);
    CHECK(s.verdict == Verdict::AFFECTED);
}
