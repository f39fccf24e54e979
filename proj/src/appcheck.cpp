#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "tlsaudit/appcheck.hpp"

#include <charconv>

namespace tlsaudit::app
{

namespace
{

constexpr std::string_view kHstsFix = "Header set Strict-Transport-Security \"max-age=15768000\"";
constexpr std::string_view kForeignOrigin = "https://attacker.invalid/";

template <class Client>
HttpObservation get(Client& cli, const probe::Endpoint& e, const std::string& path,
                    const std::optional<std::string>& referer, bool accept_gzip)
{
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(e.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(e.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    cli.set_keep_alive(false);
    cli.set_decompress(false); // we only look at the encoding

    httplib::Headers h;
    if (referer)
        h.emplace("Referer", *referer);
    if (accept_gzip)
        h.emplace("Accept-Encoding", "gzip");

    HttpObservation o;
    httplib::Request req;
    req.method = "GET";
    req.path = path;
    req.headers = h;
    req.content_receiver = [&](const char*, std::size_t n, std::uint64_t, std::uint64_t) {
        o.body_length += n;
        return o.body_length < kMaxBody;
    };
    httplib::Response res;
    httplib::Error err = httplib::Error::Success;
    const bool ok = cli.send(req, res, err);
    // Stopping at the body cap surfaces as Canceled; the head is intact.
    if (!ok && err != httplib::Error::Canceled)
    {
        switch (err)
        {
        case httplib::Error::Connection:
            throw net::ConnectError("cannot connect to " + e.host + ":" + std::to_string(e.port));
        case httplib::Error::SSLConnection:
        case httplib::Error::SSLLoadingCerts:
        case httplib::Error::SSLServerVerification:
            throw TlsError("TLS handshake failed: " + httplib::to_string(err));
        default:
            throw HttpError("no HTTP response: " + httplib::to_string(err));
        }
    }
    if (res.status < 100 || res.status > 599)
        throw HttpError("bad status " + std::to_string(res.status));
    o.status = res.status;
    for (const auto& [n, v] : res.headers)
        o.headers.emplace_back(n, v);
    o.body_length = std::min(o.body_length, kMaxBody);
    if (auto ce = o.header("Content-Encoding"))
        o.content_encoding = to_lower(trim(*ce));
    return o;
}

bool has_attr(const std::string& cookie, std::string_view attr)
{
    std::size_t start = cookie.find(';');
    while (start != std::string::npos)
    {
        auto end = cookie.find(';', start + 1);
        auto part = trim(std::string_view(cookie).substr(start + 1, end == std::string::npos ? end : end - start - 1));
        auto eq = part.find('=');
        if (iequals(trim(part.substr(0, eq)), attr))
            return true;
        start = end;
    }
    return false;
}

} // namespace

std::optional<std::string> HttpObservation::header(std::string_view name) const
{
    for (const auto& [n, v] : headers)
    {
        if (iequals(n, name))
            return v;
    }
    return std::nullopt;
}

std::vector<std::string> HttpObservation::header_values(std::string_view name) const
{
    std::vector<std::string> out;
    for (const auto& [n, v] : headers)
    {
        if (iequals(n, name))
            out.push_back(v);
    }
    return out;
}

HttpObservation fetch(const probe::Endpoint& e, const std::string& path, const std::optional<std::string>& referer,
                      bool accept_gzip, Transport t)
{
    if (t == Transport::PLAINTEXT)
    {
        httplib::Client cli(e.host, e.port);
        return get(cli, e, path, referer, accept_gzip);
    }
    httplib::SSLClient cli(e.host, e.port);
    cli.enable_server_certificate_verification(false);
    return get(cli, e, path, referer, accept_gzip);
}

std::optional<long> parse_hsts_max_age(std::string_view value)
{
    std::optional<long> age;
    std::size_t pos = 0;
    while (pos <= value.size())
    {
        auto end = value.find(';', pos);
        auto part = trim(value.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
        pos = end == std::string_view::npos ? value.size() + 1 : end + 1;
        if (part.empty())
            continue;
        auto eq = part.find('=');
        auto key = trim(std::string_view(part).substr(0, eq));
        if (!iequals(key, "max-age"))
            continue;
        if (eq == std::string::npos || age)
            return std::nullopt; // no value, or given twice
        auto num = trim(std::string_view(part).substr(eq + 1));
        if (num.size() >= 2 && num.front() == '"' && num.back() == '"')
            num = num.substr(1, num.size() - 2);
        long v = 0;
        auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
        if (num.empty() || ec != std::errc{} || p != num.data() + num.size() || v < 0)
            return std::nullopt;
        age = v;
    }
    return age;
}

Finding check_hsts(const HttpObservation& o)
{
    Finding f{"HSTS", Severity::OK, std::nullopt, "", std::string(kHstsFix)};
    auto h = o.header("Strict-Transport-Security");
    if (!h)
    {
        f.severity = Severity::WARN;
        f.evidence = "no Strict-Transport-Security header";
        return f;
    }
    auto age = parse_hsts_max_age(*h);
    if (!age)
    {
        f.severity = Severity::WARN;
        f.evidence = "malformed HSTS header: " + *h;
        return f;
    }
    f.evidence = "max-age=" + std::to_string(*age);
    if (*age < kRecommendedMaxAge)
    {
        f.severity = Severity::INFO;
        f.evidence += ", below the recommended 15768000 (six months)";
    }
    else
        f.remediation.clear();
    return f;
}

std::vector<Finding> check_cookie_flags(const HttpObservation& o)
{
    std::vector<Finding> out;
    for (const auto& c : o.header_values("Set-Cookie"))
    {
        const auto name = trim(std::string_view(c).substr(0, c.find('=')));
        if (!has_attr(c, "secure"))
            out.push_back({"COOKIE", Severity::FAIL, Verdict::AFFECTED,
                           "cookie '" + name + "' lacks the secure flag and may travel in clear",
                           "set the secure attribute on every cookie issued over HTTPS"});
        if (!has_attr(c, "httponly"))
            out.push_back({"COOKIE", Severity::WARN, Verdict::AFFECTED,
                           "cookie '" + name + "' lacks HttpOnly and is readable from scripts",
                           "set the HttpOnly attribute on session cookies"});
    }
    return out;
}

Verdict breach_verdict(bool self_gzip, bool foreign_gzip)
{
    if (foreign_gzip)
        return Verdict::AFFECTED;
    return self_gzip ? Verdict::MITIGATED : Verdict::NOT_APPLICABLE;
}

Finding breach_finding(bool self_gzip, bool foreign_gzip)
{
    Finding f{"BREACH", Severity::OK, breach_verdict(self_gzip, foreign_gzip), "", ""};
    switch (*f.verdict)
    {
    case Verdict::AFFECTED:
        f.severity = Severity::WARN;
        f.evidence = "compression precondition holds: response to a cross-site Referer was gzip-compressed "
                     "(exploitability also needs reflected input, which is not tested)";
        f.remediation = "SetEnvIfNoCase Referer ^https://www\\.example\\.net/ self_referer\n"
                        "SetEnvIf self_referer ^$ no-gzip";
        break;
    case Verdict::MITIGATED:
        f.evidence = "HTTP compression only for same-site Referer";
        break;
    default:
        f.evidence = "HTTP compression not used";
        break;
    }
    return f;
}

Finding check_breach(const probe::Endpoint& e, const std::string& path, const std::string& self_origin,
                     const std::string& foreign_origin, Transport t)
{
    auto gz = [](const HttpObservation& o) { return o.content_encoding == "gzip"; };
    const bool self = gz(fetch(e, path, self_origin, true, t));
    const bool foreign = gz(fetch(e, path, foreign_origin, true, t));
    return breach_finding(self, foreign);
}

std::vector<Finding> run_checks(const probe::Endpoint& e, const std::string& path, Transport t)
{
    auto o = fetch(e, path, std::nullopt, false, t);
    std::vector<Finding> out{check_hsts(o)};
    for (auto& f : check_cookie_flags(o))
        out.push_back(std::move(f));
    auto self = "https://" + e.host + (e.port == 443 ? "" : ":" + std::to_string(e.port)) + "/";
    out.push_back(check_breach(e, path, self, std::string(kForeignOrigin), t));
    return out;
}

} // namespace tlsaudit::app
