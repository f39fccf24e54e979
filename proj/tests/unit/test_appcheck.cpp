#include "doctest.h"
#include "helpers.hpp"

#include "tlsaudit/appcheck.hpp"
#include "tlsaudit/mocksrv.hpp"

using namespace tlsaudit;
using app::HttpObservation;
using app::Transport;

namespace
{

HttpObservation with(std::vector<std::pair<std::string, std::string>> headers)
{
    HttpObservation o;
    o.headers = std::move(headers);
    return o;
}

mock::ServerPolicy http_policy(mock::HttpGzip gz)
{
    auto p = mock::load_policy_file(testutil::fixture("policies/https_gzip_always.json"));
    p.http_gzip = gz;
    return p;
}

probe::Endpoint at(const mock::MockServer& m)
{
    probe::Endpoint e;
    e.host = "127.0.0.1";
    e.port = m.port();
    e.timeout = std::chrono::milliseconds(2000);
    return e;
}

std::string self_origin(const mock::MockServer& m)
{
    return "https://127.0.0.1:" + std::to_string(m.port()) + "/";
}

} // namespace

TEST_CASE("HSTS")
{
    auto f = app::check_hsts(with({{"Strict-Transport-Security", "max-age=15768000"}}));
    CHECK(f.severity == Severity::OK);
    CHECK(app::parse_hsts_max_age("max-age=15768000") == 15768000);
    CHECK(app::parse_hsts_max_age("max-age=31536000; includeSubDomains") == 31536000);
    CHECK(app::parse_hsts_max_age("includeSubDomains; MAX-AGE=\"600\"") == 600);
    CHECK_FALSE(app::parse_hsts_max_age("max-age=abc"));
    CHECK_FALSE(app::parse_hsts_max_age("max-age="));
    CHECK_FALSE(app::parse_hsts_max_age("max-age=1; max-age=2"));
    CHECK_FALSE(app::parse_hsts_max_age("includeSubDomains"));

    CHECK(app::check_hsts(with({})).severity == Severity::WARN);
    auto bad = app::check_hsts(with({{"strict-transport-security", "max-age=abc"}}));
    CHECK(bad.severity == Severity::WARN);
    CHECK(bad.evidence.find("malformed") != std::string::npos);
    auto low = app::check_hsts(with({{"Strict-Transport-Security", "max-age=300"}}));
    CHECK(low.severity == Severity::INFO);
    CHECK(low.evidence.find("15768000") != std::string::npos);
    CHECK(low.remediation.find("max-age=15768000") != std::string::npos);
}

TEST_CASE("cookie flags")
{
    CHECK(app::check_cookie_flags(with({{"Set-Cookie", "sid=1; Secure; HttpOnly"}})).empty());

    auto f = app::check_cookie_flags(with({{"Set-Cookie", "sid=1; HttpOnly"}}));
    REQUIRE(f.size() == 1);
    CHECK(f[0].severity == Severity::FAIL);
    CHECK(f[0].verdict == Verdict::AFFECTED);

    f = app::check_cookie_flags(with({{"Set-Cookie", "sid=1; secure"}}));
    REQUIRE(f.size() == 1);
    CHECK(f[0].severity == Severity::WARN);

    CHECK(app::check_cookie_flags(with({{"Content-Type", "text/html"}})).empty());

    // both missing, two cookies, and an attribute only inside a value
    f = app::check_cookie_flags(with({{"set-cookie", "a=secure"}, {"Set-Cookie", "b=2; Path=/; SECURE; httponly"}}));
    REQUIRE(f.size() == 2);
    CHECK(f[0].severity == Severity::FAIL);
    CHECK(f[1].severity == Severity::WARN);
}

TEST_CASE("BREACH truth table")
{
    CHECK(app::breach_verdict(false, false) == Verdict::NOT_APPLICABLE);
    CHECK(app::breach_verdict(true, false) == Verdict::MITIGATED);
    CHECK(app::breach_verdict(false, true) == Verdict::AFFECTED);
    CHECK(app::breach_verdict(true, true) == Verdict::AFFECTED);
    CHECK(app::breach_finding(true, true).evidence.find("compression precondition holds") != std::string::npos);
    CHECK(app::breach_finding(false, false).severity == Severity::OK);
}

TEST_CASE("BREACH against the mock's gzip modes")
{
    const std::string foreign = "https://attacker.invalid/";
    for (auto [mode, want] : {std::pair{mock::HttpGzip::ALWAYS, Verdict::AFFECTED},
                              {mock::HttpGzip::SELF_REFERER_ONLY, Verdict::MITIGATED},
                              {mock::HttpGzip::NEVER, Verdict::NOT_APPLICABLE}})
    {
        CAPTURE(to_string(mode));
        mock::MockServer m(http_policy(mode));
        auto f = app::check_breach(at(m), "/", self_origin(m), foreign, Transport::PLAINTEXT);
        CHECK(f.verdict == want);
    }
}

TEST_CASE("fetch")
{
    mock::MockServer m(http_policy(mock::HttpGzip::ALWAYS));
    auto o = app::fetch(at(m), "/", "https://attacker.invalid/", true, Transport::PLAINTEXT);
    CHECK(o.status == 200);
    CHECK(o.content_encoding == "gzip");
    CHECK(o.header("X-Echo-Referer") == "https://attacker.invalid/");
    CHECK(o.body_length > 0);

    auto plain = app::fetch(at(m), "/", std::nullopt, false, Transport::PLAINTEXT);
    CHECK_FALSE(plain.content_encoding);
    CHECK_FALSE(plain.header("X-Echo-Referer"));

    auto all = app::run_checks(at(m), "/", Transport::PLAINTEXT);
    REQUIRE(all.size() == 2);
    CHECK(all[0].rule_id == "HSTS");
    CHECK(all[0].severity == Severity::OK);
    CHECK(all[1].verdict == Verdict::AFFECTED);

    SUBCASE("non-HTTP peer")
    {
        mock::MockServer tls(mock::load_policy_file(testutil::fixture("policies/hardened.json")));
        CHECK_THROWS_AS(app::fetch(at(tls), "/", std::nullopt, false, Transport::PLAINTEXT), app::HttpError);
        // the mock cannot finish a real handshake
        CHECK_THROWS_AS(app::fetch(at(tls), "/", std::nullopt, false, Transport::TLS), app::TlsError);
    }

    SUBCASE("self-referer mode")
    {
        mock::MockServer self(mock::load_policy_file(testutil::fixture("policies/https_gzip_self.json")));
        auto r = app::run_checks(at(self), "/", Transport::PLAINTEXT);
        REQUIRE(r.size() == 3);
        CHECK(r[0].severity == Severity::INFO);
        CHECK(r[1].severity == Severity::FAIL);
        CHECK(r[2].verdict == Verdict::MITIGATED);
    }
}
