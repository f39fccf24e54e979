#include "tlsaudit/probe.hpp"

#include <arpa/inet.h>

#include <atomic>
#include <thread>

namespace tlsaudit::probe
{

using wire::HeartbeatVerdict;
using wire::ResponseKind;
using wire::ServerResponse;

namespace
{

bool is_ip_literal(const std::string& host)
{
    in6_addr buf{};
    return ::inet_pton(AF_INET, host.c_str(), &buf) == 1 || ::inet_pton(AF_INET6, host.c_str(), &buf) == 1;
}

std::string expect_line(net::Socket& s, net::Millis t)
{
    try
    {
        return s.read_line(t);
    }
    catch (const net::NetError& err)
    {
        throw StartTlsUnsupported(std::string("STARTTLS dialogue broke off: ") + err.what());
    }
}

// Multi-line SMTP replies end with "NNN " (space after the code).
std::vector<std::string> smtp_reply(net::Socket& s, net::Millis t)
{
    std::vector<std::string> lines;
    for (;;)
    {
        auto line = expect_line(s, t);
        lines.push_back(line);
        if (line.size() < 4 || line[3] != '-')
            return lines;
    }
}

void smtp(net::Socket& s, net::Millis t)
{
    auto greet = smtp_reply(s, t);
    if (!greet.back().starts_with("220"))
        throw StartTlsUnsupported("SMTP greeting was '" + greet.back() + "'");
    s.send_all("EHLO tlsaudit\r\n", t);
    auto caps = smtp_reply(s, t);
    bool offered = false;
    for (const auto& l : caps)
    {
        if (!l.starts_with("250"))
            throw StartTlsUnsupported("EHLO refused: " + l);
        offered = offered || iequals(trim(l.substr(4)), "STARTTLS");
    }
    if (!offered)
        throw StartTlsUnsupported("server does not advertise STARTTLS");
    s.send_all("STARTTLS\r\n", t);
    auto reply = smtp_reply(s, t);
    if (!reply.back().starts_with("220"))
        throw StartTlsUnsupported("STARTTLS refused: " + reply.back());
}

void imap(net::Socket& s, net::Millis t)
{
    auto greet = expect_line(s, t);
    if (!greet.starts_with("* OK"))
        throw StartTlsUnsupported("IMAP greeting was '" + greet + "'");
    s.send_all("a1 STARTTLS\r\n", t);
    for (;;)
    {
        auto line = expect_line(s, t);
        if (line.starts_with("*"))
            continue;
        if (line.starts_with("a1 OK"))
            return;
        throw StartTlsUnsupported("STARTTLS refused: " + line);
    }
}

void pop3(net::Socket& s, net::Millis t)
{
    auto greet = expect_line(s, t);
    if (!greet.starts_with("+OK"))
        throw StartTlsUnsupported("POP3 greeting was '" + greet + "'");
    s.send_all("STLS\r\n", t);
    auto reply = expect_line(s, t);
    if (!reply.starts_with("+OK"))
        throw StartTlsUnsupported("STLS refused: " + reply);
}

void ldap(net::Socket& s, net::Millis t)
{
    // ExtendedRequest, messageID 1, requestName 1.3.6.1.4.1.1466.20037
    static const std::string oid = "1.3.6.1.4.1.1466.20037";
    Bytes req{0x30, 0x00, 0x02, 0x01, 0x01, 0x77, 0x00, 0x80, static_cast<std::uint8_t>(oid.size())};
    req.insert(req.end(), oid.begin(), oid.end());
    req[6] = static_cast<std::uint8_t>(2 + oid.size());
    req[1] = static_cast<std::uint8_t>(req.size() - 2);
    s.send_all(req, t);

    auto resp = s.recv_until([](const Bytes& b) { return b.size() >= 2 && b.size() >= 2u + b[1]; }, t, 4096);
    // 30 LL 02 01 01 78 LL 0a 01 <resultCode> ...
    if (resp.size() < 10 || resp[0] != 0x30 || resp[2] != 0x02)
        throw StartTlsUnsupported("LDAP StartTLS: unexpected response");
    const std::size_t at = 4 + resp[3];
    if (resp.size() < at + 5 || resp[at] != 0x78 || resp[at + 2] != 0x0a || resp[at + 3] != 0x01)
        throw StartTlsUnsupported("LDAP StartTLS: unexpected response");
    if (resp[at + 4] != 0)
        throw StartTlsUnsupported("LDAP StartTLS refused, resultCode " + std::to_string(resp[at + 4]));
}

net::Socket open(const Endpoint& e)
{
    auto s = net::Socket::connect(e.host, e.port, e.timeout);
    starttls_negotiate(s, e.starttls, e.timeout);
    return s;
}

// One retry on connection-level trouble; an alert is a real answer.
ServerResponse exchange_retry(const Endpoint& e, const Bytes& hello)
{
    for (int attempt = 0;; ++attempt)
    {
        try
        {
            auto r = exchange(e, hello);
            if (r.kind != ResponseKind::TIMEOUT || attempt == 1)
                return r;
        }
        catch (const net::NetError&)
        {
            if (attempt == 1)
                throw;
        }
    }
}

ServerResponse hello_exchange(const Endpoint& e, const wire::HelloParams& p)
{
    return exchange_retry(e, wire::encode_client_hello(p));
}

// Stops on an alert, or once the heartbeat message is whole according to
// its own length field (or long enough to settle the question).
bool heartbeat_reply_complete(const Bytes& b, std::size_t requested)
{
    std::size_t pos = 0, hb = 0;
    std::optional<std::size_t> want;
    while (pos + 5 <= b.size())
    {
        const std::size_t len = static_cast<std::size_t>(b[pos + 3] << 8 | b[pos + 4]);
        if (b[pos] == wire::content::kAlert)
            return true;
        if (b[pos] == wire::content::kHeartbeat)
        {
            if (!want && pos + 8 <= b.size())
                want = 3 + static_cast<std::size_t>(b[pos + 6] << 8 | b[pos + 7]);
            hb += std::min(len, b.size() - pos - 5);
            if (hb >= requested + 3 || (want && hb >= *want))
                return true;
        }
        pos += 5 + len;
    }
    return false;
}

} // namespace

std::string_view to_string(StartTls s)
{
    switch (s)
    {
    case StartTls::NONE:
        return "NONE";
    case StartTls::SMTP:
        return "SMTP";
    case StartTls::IMAP:
        return "IMAP";
    case StartTls::POP3:
        return "POP3";
    case StartTls::LDAP:
        return "LDAP";
    }
    return "?";
}

std::optional<StartTls> parse_starttls(std::string_view s)
{
    for (auto v : {StartTls::NONE, StartTls::SMTP, StartTls::IMAP, StartTls::POP3, StartTls::LDAP})
    {
        if (iequals(to_string(v), s))
            return v;
    }
    return std::nullopt;
}

std::string_view to_string(OrderPreference o)
{
    switch (o)
    {
    case OrderPreference::ENFORCED:
        return "ENFORCED";
    case OrderPreference::CLIENT_ORDER:
        return "CLIENT_ORDER";
    case OrderPreference::INDETERMINATE:
        return "INDETERMINATE";
    }
    return "?";
}

std::string_view to_string(Renegotiation r)
{
    switch (r)
    {
    case Renegotiation::SECURE:
        return "SECURE";
    case Renegotiation::LEGACY_ONLY:
        return "LEGACY_ONLY";
    case Renegotiation::UNKNOWN:
        return "UNKNOWN";
    }
    return "?";
}

std::optional<OrderPreference> parse_order_preference(std::string_view s)
{
    for (auto v : {OrderPreference::ENFORCED, OrderPreference::CLIENT_ORDER, OrderPreference::INDETERMINATE})
    {
        if (to_string(v) == s)
            return v;
    }
    return std::nullopt;
}

std::optional<Renegotiation> parse_renegotiation(std::string_view s)
{
    for (auto v : {Renegotiation::SECURE, Renegotiation::LEGACY_ONLY, Renegotiation::UNKNOWN})
    {
        if (to_string(v) == s)
            return v;
    }
    return std::nullopt;
}

void starttls_negotiate(net::Socket& s, StartTls kind, net::Millis timeout)
{
    switch (kind)
    {
    case StartTls::NONE:
        return;
    case StartTls::SMTP:
        return smtp(s, timeout);
    case StartTls::IMAP:
        return imap(s, timeout);
    case StartTls::POP3:
        return pop3(s, timeout);
    case StartTls::LDAP:
        return ldap(s, timeout);
    }
}

ServerResponse exchange(const Endpoint& e, const Bytes& hello)
{
    auto s = open(e);
    s.send_all(hello, e.timeout);
    auto data = s.recv_until([](const Bytes& b) { return wire::response_complete(b); }, e.timeout);
    auto r = wire::decode_server_response(data);
    if (r.kind == ResponseKind::SERVER_HELLO)
    {
        try
        {
            s.send_all(wire::encode_alert(wire::kAlertFatal, wire::kAlertHandshakeFailure, *r.negotiated_version),
                       e.timeout);
        }
        catch (const net::NetError&)
        {
        }
    }
    return r;
}

wire::HelloParams base_hello(const Endpoint& e, ProtocolVersion v, std::vector<std::uint16_t> ciphers)
{
    wire::HelloParams p;
    p.version = v;
    p.cipher_ids = std::move(ciphers);
    if (e.sni_name)
        p.server_name = e.sni_name;
    else if (!is_ip_literal(e.host))
        p.server_name = e.host;
    return p;
}

std::vector<std::uint16_t> candidates_for(const registry::Registry& r, ProtocolVersion v)
{
    std::vector<std::uint16_t> out;
    for (const auto& c : r.suites())
    {
        if (c.min_version <= v)
            out.push_back(c.id);
    }
    return out;
}

ProtocolSupport probe_protocols(const Endpoint& e, const registry::Registry& r)
{
    ProtocolSupport out;
    for (auto v : kRecordVersions)
    {
        auto resp = hello_exchange(e, base_hello(e, v, candidates_for(r, v)));
        if (resp.kind == ResponseKind::SERVER_HELLO && resp.negotiated_version == v)
            out.versions.insert(v);
    }
    auto v2 = exchange_retry(e, wire::encode_sslv2_client_hello());
    if (v2.kind == ResponseKind::SSL2_SERVER_HELLO)
    {
        out.sslv2_accepted = true;
        if (v2.certificate_der)
            out.sslv2_certificate = *v2.certificate_der;
    }
    return out;
}

std::vector<std::uint16_t> enumerate_ciphers(const Endpoint& e, ProtocolVersion v,
                                             const std::vector<std::uint16_t>& candidates, unsigned concurrency)
{
    std::vector<char> accepted(candidates.size(), 0);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next++) < candidates.size();)
        {
            try
            {
                auto r = hello_exchange(e, base_hello(e, v, {candidates[i]}));
                accepted[i] = r.kind == ResponseKind::SERVER_HELLO && r.negotiated_version == v &&
                              r.chosen_cipher_id == candidates[i];
            }
            catch (const net::NetError&)
            {
                // retried already; counts as rejected
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(concurrency, static_cast<unsigned>(candidates.size())));
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < n; ++i)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();

    std::vector<std::uint16_t> out;
    for (std::size_t i = 0; i < candidates.size(); ++i)
    {
        if (accepted[i])
            out.push_back(candidates[i]);
    }
    return out;
}

OrderPreference detect_order_preference(const Endpoint& e, ProtocolVersion v, std::uint16_t a, std::uint16_t b)
{
    if (a == b)
        return OrderPreference::INDETERMINATE;
    auto first = hello_exchange(e, base_hello(e, v, {a, b}));
    auto second = hello_exchange(e, base_hello(e, v, {b, a}));
    if (first.kind != ResponseKind::SERVER_HELLO || second.kind != ResponseKind::SERVER_HELLO)
        return OrderPreference::INDETERMINATE;
    if (first.chosen_cipher_id == second.chosen_cipher_id)
        return OrderPreference::ENFORCED;
    if (first.chosen_cipher_id == a && second.chosen_cipher_id == b)
        return OrderPreference::CLIENT_ORDER;
    return OrderPreference::INDETERMINATE;
}

bool detect_tls_compression(const Endpoint& e, ProtocolVersion v, const std::vector<std::uint16_t>& ciphers)
{
    auto p = base_hello(e, v, ciphers);
    p.compression_methods = {1, 0};
    auto r = hello_exchange(e, p);
    if (r.kind != ResponseKind::SERVER_HELLO)
        return false;
    if (r.chosen_compression != 0 && r.chosen_compression != 1)
        throw wire::WireError("server chose compression method " + std::to_string(*r.chosen_compression) +
                              " which was not offered");
    return r.chosen_compression == 1;
}

Renegotiation detect_secure_renegotiation(const Endpoint& e, ProtocolVersion v,
                                          const std::vector<std::uint16_t>& ciphers)
{
    auto p = base_hello(e, v, ciphers);
    p.include_reneg_scsv = true;
    p.extensions.push_back({wire::ext::kRenegotiationInfo, {0x00}});
    auto r = hello_exchange(e, p);
    if (r.kind != ResponseKind::SERVER_HELLO)
        return Renegotiation::UNKNOWN;
    return r.extensions_present.contains(wire::ext::kRenegotiationInfo) ? Renegotiation::SECURE
                                                                        : Renegotiation::LEGACY_ONLY;
}

HeartbleedResult probe_heartbleed(const Endpoint& e, ProtocolVersion v, const std::vector<std::uint16_t>& ciphers)
{
    auto p = base_hello(e, v, ciphers);
    p.extensions.push_back({wire::ext::kHeartbeat, {0x01}}); // peer_allowed_to_send

    HeartbleedResult out;
    for (int attempt = 0; attempt < 2; ++attempt)
    {
        try
        {
            auto s = open(e);
            s.send_all(wire::encode_client_hello(p), e.timeout);
            auto data = s.recv_until([](const Bytes& b) { return wire::response_complete(b); }, e.timeout);
            auto r = wire::decode_server_response(data);
            if (r.kind == ResponseKind::TIMEOUT && attempt == 0)
                continue;
            if (r.kind != ResponseKind::SERVER_HELLO || !r.extensions_present.contains(wire::ext::kHeartbeat))
                return out;
            out.extension_offered = true;

            const std::uint8_t payload[] = {0x41};
            s.send_all(wire::encode_heartbeat_request(kHeartbleedDeclaredLength, payload, *r.negotiated_version),
                       e.timeout);
            auto reply = s.recv_until(
                [](const Bytes& b) { return heartbeat_reply_complete(b, kHeartbleedDeclaredLength); }, e.timeout,
                kHeartbleedDeclaredLength + 4096);
            out.verdict = wire::decode_heartbeat_response(reply, kHeartbleedDeclaredLength, sizeof payload);
            return out;
        }
        catch (const net::NetError&)
        {
            if (attempt == 1)
                throw;
        }
    }
    return out;
}

bool probe_ocsp_stapling(const Endpoint& e, ProtocolVersion v, const std::vector<std::uint16_t>& ciphers)
{
    auto p = base_hello(e, v, ciphers);
    // status_type ocsp, empty responder list and extensions
    p.extensions.push_back({wire::ext::kStatusRequest, {0x01, 0x00, 0x00, 0x00, 0x00}});
    auto r = hello_exchange(e, p);
    return r.kind == ResponseKind::SERVER_HELLO && r.extensions_present.contains(wire::ext::kStatusRequest);
}

std::optional<int> measure_dh_strength(const Endpoint& e, ProtocolVersion v,
                                       const std::vector<std::uint16_t>& dhe_ciphers)
{
    if (dhe_ciphers.empty())
        return std::nullopt;
    auto r = hello_exchange(e, base_hello(e, v, dhe_ciphers));
    if (r.kind != ResponseKind::SERVER_HELLO)
        return std::nullopt;
    return r.dh_prime_bits;
}

EndpointProfile scan(const Endpoint& e, const registry::Registry& r, const ScanOptions& opts)
{
    if (e.port == 0)
        throw std::invalid_argument("port must be in 1..65535");
    try
    {
        auto s = net::Socket::connect(e.host, e.port, e.timeout);
        starttls_negotiate(s, e.starttls, e.timeout);
    }
    catch (const net::ConnectError& err)
    {
        throw UnreachableError(err.what());
    }

    EndpointProfile p;
    auto note = [&](const std::string& what, const std::exception& err) {
        p.notes.push_back(what + ": " + err.what());
    };

    ProtocolSupport support;
    try
    {
        support = probe_protocols(e, r);
    }
    catch (const net::NetError& err)
    {
        note("protocol probe", err);
    }
    p.versions_supported = support.versions;
    p.sslv2_accepted = support.sslv2_accepted;

    for (auto v : p.versions_supported)
    {
        auto cands = opts.candidates ? *opts.candidates : candidates_for(r, v);
        p.ciphers_by_version[v] = enumerate_ciphers(e, v, cands, opts.concurrency);
    }

    for (const auto& [v, ids] : p.ciphers_by_version)
    {
        try
        {
            p.server_order_preference[v] = ids.size() >= 2 ? detect_order_preference(e, v, ids[0], ids[1])
                                                            : OrderPreference::INDETERMINATE;
        }
        catch (const net::NetError& err)
        {
            p.server_order_preference[v] = OrderPreference::INDETERMINATE;
            note("order preference at " + std::string(to_string(v)), err);
        }
        for (auto id : ids)
        {
            const auto* c = r.lookup_by_id(id);
            p.pfs_available = p.pfs_available || (c && registry::classify(*c).pfs);
        }
    }

    // Feature probes run at the best version with a known-good suite list.
    std::optional<ProtocolVersion> top;
    for (auto it = p.ciphers_by_version.rbegin(); it != p.ciphers_by_version.rend(); ++it)
    {
        if (!it->second.empty())
        {
            top = it->first;
            break;
        }
    }
    if (!top)
    {
        p.heartbeat = HeartbeatVerdict::SAFE;
        p.certificate_chain = support.sslv2_certificate;
        if (!p.versions_supported.empty() || !p.sslv2_accepted)
            p.notes.push_back("no suite accepted; feature probes skipped");
        return p;
    }
    const auto& ids = p.ciphers_by_version[*top];

    try
    {
        p.tls_compression = detect_tls_compression(e, *top, ids);
    }
    catch (const wire::WireError& err)
    {
        p.tls_compression = false;
        note("compression probe MALFORMED", err);
    }
    catch (const net::NetError& err)
    {
        note("compression probe", err);
    }

    try
    {
        p.secure_renegotiation = detect_secure_renegotiation(e, *top, ids);
    }
    catch (const net::NetError& err)
    {
        note("renegotiation probe", err);
    }

    if (*top >= ProtocolVersion::TLS1_0)
    {
        try
        {
            auto hb = probe_heartbleed(e, *top, ids);
            p.heartbeat = hb.verdict;
            p.heartbeat_extension_offered = hb.extension_offered;
        }
        catch (const net::NetError& err)
        {
            p.heartbeat = HeartbeatVerdict::NO_RESPONSE;
            note("heartbeat probe", err);
        }
    }

    try
    {
        p.ocsp_stapled = probe_ocsp_stapling(e, *top, ids);
    }
    catch (const net::NetError& err)
    {
        note("stapling probe", err);
    }

    std::vector<std::uint16_t> dhe;
    for (auto id : ids)
    {
        const auto* c = r.lookup_by_id(id);
        if (c && c->kx == "DHE")
            dhe.push_back(id);
    }
    try
    {
        p.dh_prime_bits = measure_dh_strength(e, *top, dhe);
    }
    catch (const net::NetError& err)
    {
        note("DH probe", err);
    }

    // Certificate from a hello that prefers authenticated suites.
    std::vector<std::uint16_t> authed;
    for (auto id : ids)
    {
        const auto* c = r.lookup_by_id(id);
        if (!c || c->au != "NONE")
            authed.push_back(id);
    }
    if (!authed.empty())
    {
        try
        {
            auto resp = hello_exchange(e, base_hello(e, *top, authed));
            if (resp.certificate_der)
                p.certificate_chain = *resp.certificate_der;
        }
        catch (const net::NetError& err)
        {
            note("certificate fetch", err);
        }
    }
    if (p.certificate_chain.empty())
        p.certificate_chain = support.sslv2_certificate;
    return p;
}

} // namespace tlsaudit::probe
