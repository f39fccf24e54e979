#include "tlsaudit/mocksrv.hpp"

#include "dh_groups.hpp"
#include "tlsaudit/certparse.hpp"
#include "tlsaudit/net.hpp"
#include "tlsaudit/wire.hpp"

#include <json.hpp>
#include <zlib.h>

#include <array>
#include <condition_variable>
#include <fstream>
#include <sstream>

namespace tlsaudit::mock
{

using json = nlohmann::json;
using namespace std::chrono_literals;

namespace
{

template <typename E, std::size_t N>
std::optional<E> enum_from(std::string_view s, const std::array<E, N>& all)
{
    for (auto v : all)
    {
        if (to_string(v) == s)
            return v;
    }
    return std::nullopt;
}

constexpr std::array kCompressions = {Compression::NULL_ONLY, Compression::DEFLATE_ALLOWED};
constexpr std::array kHeartbeats = {HeartbeatMode::DISABLED, HeartbeatMode::PATCHED, HeartbeatMode::VULNERABLE};
constexpr std::array kPreambles = {Preamble::NONE, Preamble::SMTP, Preamble::IMAP,
                                   Preamble::POP3, Preamble::LDAP, Preamble::HTTP};
constexpr std::array kGzips = {HttpGzip::ALWAYS, HttpGzip::SELF_REFERER_ONLY, HttpGzip::NEVER};

bool get_bool(const json& j, const char* field)
{
    if (!j.is_boolean())
        throw PolicyError(field, "expected true or false");
    return j.get<bool>();
}

template <typename E, std::size_t N>
E get_enum(const json& j, const char* field, const std::array<E, N>& all)
{
    if (!j.is_string())
        throw PolicyError(field, "expected a string");
    auto v = enum_from(j.get<std::string>(), all);
    if (!v)
        throw PolicyError(field, "unknown value '" + j.get<std::string>() + "'");
    return *v;
}

std::uint16_t parse_suite(const json& j, const registry::Registry& reg)
{
    if (!j.is_string())
        throw PolicyError("ciphers", "entries must be suite names or hex ids");
    auto s = j.get<std::string>();
    if (const auto* c = reg.lookup_by_name(s))
        return c->id;
    std::string_view hex = s;
    if (hex.starts_with("0x") || hex.starts_with("0X"))
        hex.remove_prefix(2);
    if (hex.size() == 4 && hex.find_first_not_of("0123456789abcdefABCDEF") == std::string_view::npos)
        return static_cast<std::uint16_t>(std::stoul(std::string(hex), nullptr, 16));
    throw PolicyError("ciphers", "unknown suite '" + s + "'");
}

Bytes hex_bytes(std::string_view hex)
{
    Bytes out;
    for (std::size_t i = 0; i + 1 < hex.size(); i += 2)
        out.push_back(static_cast<std::uint8_t>(std::stoul(std::string(hex.substr(i, 2)), nullptr, 16)));
    return out;
}

std::string html_body()
{
    std::string body = "<!DOCTYPE html>\n<html><head><title>mock</title></head><body>\n";
    for (int i = 0; i < 64; ++i)
        body += "<p>Lorem ipsum dolor sit amet, consectetur adipiscing elit " + std::to_string(i) + ".</p>\n";
    body += "</body></html>\n";
    return body;
}

std::string gzip(const std::string& in)
{
    z_stream zs{};
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw std::runtime_error("deflateInit2 failed");
    std::string out(deflateBound(&zs, static_cast<uLong>(in.size())) + 32, '\0');
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
    zs.avail_in = static_cast<uInt>(in.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    deflate(&zs, Z_FINISH);
    out.resize(zs.total_out);
    deflateEnd(&zs);
    return out;
}

} // namespace

std::string_view to_string(Compression v)
{
    return v == Compression::NULL_ONLY ? "NULL_ONLY" : "DEFLATE_ALLOWED";
}

std::string_view to_string(HeartbeatMode v)
{
    switch (v)
    {
    case HeartbeatMode::DISABLED:
        return "DISABLED";
    case HeartbeatMode::PATCHED:
        return "PATCHED";
    case HeartbeatMode::VULNERABLE:
        return "VULNERABLE";
    }
    return "?";
}

std::string_view to_string(Preamble v)
{
    switch (v)
    {
    case Preamble::NONE:
        return "NONE";
    case Preamble::SMTP:
        return "SMTP";
    case Preamble::IMAP:
        return "IMAP";
    case Preamble::POP3:
        return "POP3";
    case Preamble::LDAP:
        return "LDAP";
    case Preamble::HTTP:
        return "HTTP";
    }
    return "?";
}

std::string_view to_string(HttpGzip v)
{
    switch (v)
    {
    case HttpGzip::ALWAYS:
        return "ALWAYS";
    case HttpGzip::SELF_REFERER_ONLY:
        return "SELF_REFERER_ONLY";
    case HttpGzip::NEVER:
        return "NEVER";
    }
    return "?";
}

ServerPolicy load_policy(std::string_view document, const std::filesystem::path& base_dir,
                         const registry::Registry& reg)
{
    json j;
    try
    {
        j = json::parse(document);
    }
    catch (const json::parse_error& e)
    {
        throw PolicyError("<document>", e.what());
    }
    if (!j.is_object())
        throw PolicyError("<document>", "expected a JSON object");

    ServerPolicy p;
    bool have_versions = false;
    bool have_ciphers = false;
    for (auto it = j.begin(); it != j.end(); ++it)
    {
        const auto& key = it.key();
        const auto& v = it.value();
        if (key == "name")
        {
            if (!v.is_string())
                throw PolicyError(key, "expected a string");
            p.name = v.get<std::string>();
        }
        else if (key == "versions")
        {
            if (!v.is_array())
                throw PolicyError(key, "expected a list of versions");
            for (const auto& e : v)
            {
                auto ver = e.is_string() ? parse_version(e.get<std::string>()) : std::nullopt;
                if (!ver)
                    throw PolicyError(key, "unknown version " + e.dump());
                if (*ver == ProtocolVersion::SSL2)
                    throw PolicyError(key, "SSL2 is controlled by sslv2_hello");
                p.versions.insert(*ver);
            }
            have_versions = true;
        }
        else if (key == "sslv2_hello")
            p.sslv2_hello = get_bool(v, "sslv2_hello");
        else if (key == "ciphers")
        {
            if (!v.is_array())
                throw PolicyError(key, "expected a list of suites");
            for (const auto& e : v)
            {
                auto id = parse_suite(e, reg);
                if (std::find(p.ciphers.begin(), p.ciphers.end(), id) != p.ciphers.end())
                    throw PolicyError(key, "suite listed twice: " + e.get<std::string>());
                p.ciphers.push_back(id);
            }
            have_ciphers = true;
        }
        else if (key == "honor_order")
            p.honor_order = get_bool(v, "honor_order");
        else if (key == "compression")
            p.compression = get_enum(v, "compression", kCompressions);
        else if (key == "reneg_info")
            p.reneg_info = get_bool(v, "reneg_info");
        else if (key == "heartbeat")
            p.heartbeat = get_enum(v, "heartbeat", kHeartbeats);
        else if (key == "stapling")
            p.stapling = get_bool(v, "stapling");
        else if (key == "dh_bits")
        {
            if (v.is_null())
                p.dh_bits.reset();
            else if (!v.is_number_integer())
                throw PolicyError(key, "expected an integer or null");
            else
                p.dh_bits = v.get<int>();
        }
        else if (key == "certificate_chain")
        {
            if (!v.is_array())
                throw PolicyError(key, "expected a list of PEM paths");
            for (const auto& e : v)
            {
                if (!e.is_string())
                    throw PolicyError(key, "expected a list of PEM paths");
                std::filesystem::path path = e.get<std::string>();
                if (path.is_relative() && !base_dir.empty())
                    path = base_dir / path;
                p.certificate_chain.push_back(path.lexically_normal().string());
            }
        }
        else if (key == "preamble")
            p.preamble = get_enum(v, "preamble", kPreambles);
        else if (key == "http_gzip")
            p.http_gzip = get_enum(v, "http_gzip", kGzips);
        else if (key == "starttls_offered")
            p.starttls_offered = get_bool(v, "starttls_offered");
        else if (key == "http_headers")
        {
            if (!v.is_array())
                throw PolicyError(key, "expected a list of {name, value} objects");
            for (const auto& e : v)
            {
                if (!e.is_object() || !e.contains("name") || !e.contains("value") || !e["name"].is_string() ||
                    !e["value"].is_string())
                    throw PolicyError(key, "expected a list of {name, value} objects");
                p.http_headers.emplace_back(e["name"].get<std::string>(), e["value"].get<std::string>());
            }
        }
        else
            throw PolicyError(key, "unknown field");
    }

    if (!have_versions)
        throw PolicyError("versions", "required");
    if (!have_ciphers)
        throw PolicyError("ciphers", "required");
    if (p.ciphers.empty())
        throw PolicyError("ciphers", "must not be empty");
    if (p.heartbeat == HeartbeatMode::VULNERABLE &&
        !(p.versions.contains(ProtocolVersion::TLS1_0) || p.versions.contains(ProtocolVersion::TLS1_1) ||
          p.versions.contains(ProtocolVersion::TLS1_2)))
        throw PolicyError("heartbeat", "VULNERABLE needs at least one TLS version");
    if (p.dh_bits && !modp_prime_hex(*p.dh_bits))
    {
        std::string sizes;
        for (int s : modp_sizes())
            sizes += (sizes.empty() ? "" : ", ") + std::to_string(s);
        throw PolicyError("dh_bits", "supported sizes are " + sizes);
    }
    for (const auto& path : p.certificate_chain)
    {
        if (!std::filesystem::exists(path))
            throw PolicyError("certificate_chain", "no such file " + path);
    }
    if (p.http_gzip != HttpGzip::NEVER && p.preamble != Preamble::HTTP)
        throw PolicyError("http_gzip", "only meaningful with preamble HTTP");
    return p;
}

ServerPolicy load_policy_file(const std::filesystem::path& path, const registry::Registry& reg)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw PolicyError("<document>", "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_policy(ss.str(), path.parent_path(), reg);
}

std::string policy_to_json(const ServerPolicy& p, const registry::Registry& reg)
{
    json j;
    j["name"] = p.name;
    j["versions"] = json::array();
    for (auto v : p.versions)
        j["versions"].push_back(to_string(v));
    j["sslv2_hello"] = p.sslv2_hello;
    j["ciphers"] = json::array();
    for (auto id : p.ciphers)
    {
        if (const auto* c = reg.lookup_by_id(id))
            j["ciphers"].push_back(c->name);
        else
        {
            char hex[8];
            std::snprintf(hex, sizeof hex, "%04x", id);
            j["ciphers"].push_back(hex);
        }
    }
    j["honor_order"] = p.honor_order;
    j["compression"] = to_string(p.compression);
    j["reneg_info"] = p.reneg_info;
    j["heartbeat"] = to_string(p.heartbeat);
    j["stapling"] = p.stapling;
    j["dh_bits"] = p.dh_bits ? json(*p.dh_bits) : json(nullptr);
    j["certificate_chain"] = p.certificate_chain;
    j["preamble"] = to_string(p.preamble);
    j["http_gzip"] = to_string(p.http_gzip);
    j["starttls_offered"] = p.starttls_offered;
    j["http_headers"] = json::array();
    for (const auto& [n, v] : p.http_headers)
        j["http_headers"].push_back({{"name", n}, {"value", v}});
    return j.dump(2);
}

struct MockServer::Impl
{
    ServerPolicy policy;
    const registry::Registry& reg;
    net::Listener listener;
    std::vector<Bytes> chain;
    std::atomic<bool> stopping{false};
    std::atomic<std::size_t> handled{0};
    mutable std::mutex mu; // violations
    std::mutex stop_mu;
    std::condition_variable stopped_cv;
    std::vector<std::string> violations;
    std::thread worker;

    static constexpr net::Millis kIo = 3000ms;

    Impl(ServerPolicy p, std::uint16_t port, const std::string& host, const registry::Registry& r)
        : policy(std::move(p))
        , reg(r)
        , listener(host, port)
    {
        for (const auto& path : policy.certificate_chain)
        {
            auto certs = cert::load_pem_file(path);
            chain.insert(chain.end(), certs.begin(), certs.end());
        }
    }

    void flag(const std::string& what)
    {
        std::lock_guard lock(mu);
        violations.push_back(what);
    }

    void run()
    {
        while (!stopping)
        {
            auto s = listener.accept(100ms);
            if (!s.valid())
                continue;
            try
            {
                handle(s);
            }
            catch (const std::exception&)
            {
                // a misbehaving client only costs its own connection
            }
            ++handled;
        }
    }

    void handle(net::Socket& s)
    {
        switch (policy.preamble)
        {
        case Preamble::NONE:
            tls(s, {});
            return;
        case Preamble::SMTP:
            if (smtp(s))
                tls(s, {});
            return;
        case Preamble::IMAP:
            if (imap(s))
                tls(s, {});
            return;
        case Preamble::POP3:
            if (pop3(s))
                tls(s, {});
            return;
        case Preamble::LDAP:
            if (ldap(s))
                tls(s, {});
            return;
        case Preamble::HTTP: {
            Bytes first;
            if (s.recv_some(first, kIo) == 0)
                return;
            if (first[0] == wire::content::kHandshake || (first[0] & 0x80))
                tls(s, std::move(first));
            else
                http(s, std::move(first));
            return;
        }
        }
    }

    // ---- plaintext preambles

    bool smtp(net::Socket& s)
    {
        s.send_all("220 mock.tlsaudit ESMTP ready\r\n", kIo);
        for (;;)
        {
            auto line = s.read_line(kIo);
            auto verb = to_lower(line.substr(0, line.find(' ')));
            if (verb == "ehlo")
            {
                std::string reply = "250-mock.tlsaudit\r\n";
                if (policy.starttls_offered)
                    reply += "250-STARTTLS\r\n";
                reply += "250 8BITMIME\r\n";
                s.send_all(reply, kIo);
            }
            else if (verb == "helo")
                s.send_all("250 mock.tlsaudit\r\n", kIo);
            else if (verb == "starttls")
            {
                if (!policy.starttls_offered)
                {
                    s.send_all("502 5.5.1 STARTTLS not available\r\n", kIo);
                    continue;
                }
                s.send_all("220 2.0.0 Ready to start TLS\r\n", kIo);
                return true;
            }
            else if (verb == "quit")
            {
                s.send_all("221 2.0.0 bye\r\n", kIo);
                return false;
            }
            else
                s.send_all("500 5.5.2 unrecognized command\r\n", kIo);
        }
    }

    bool imap(net::Socket& s)
    {
        s.send_all(policy.starttls_offered ? "* OK [CAPABILITY IMAP4rev1 STARTTLS] mock ready\r\n"
                                           : "* OK [CAPABILITY IMAP4rev1] mock ready\r\n",
                   kIo);
        for (;;)
        {
            auto line = s.read_line(kIo);
            auto sp = line.find(' ');
            auto tag = line.substr(0, sp);
            auto cmd = sp == std::string::npos ? std::string() : to_lower(trim(line.substr(sp + 1)));
            if (cmd == "capability")
            {
                s.send_all(std::string("* CAPABILITY IMAP4rev1") + (policy.starttls_offered ? " STARTTLS" : "") +
                               "\r\n" + tag + " OK CAPABILITY completed\r\n",
                           kIo);
            }
            else if (cmd == "starttls")
            {
                if (!policy.starttls_offered)
                {
                    s.send_all(tag + " BAD STARTTLS not available\r\n", kIo);
                    continue;
                }
                s.send_all(tag + " OK Begin TLS negotiation now\r\n", kIo);
                return true;
            }
            else if (cmd == "logout")
            {
                s.send_all("* BYE\r\n" + tag + " OK LOGOUT completed\r\n", kIo);
                return false;
            }
            else
                s.send_all(tag + " BAD unknown command\r\n", kIo);
        }
    }

    bool pop3(net::Socket& s)
    {
        s.send_all("+OK mock POP3 ready\r\n", kIo);
        for (;;)
        {
            auto cmd = to_lower(trim(s.read_line(kIo)));
            if (cmd == "capa")
                s.send_all(std::string("+OK\r\n") + (policy.starttls_offered ? "STLS\r\n" : "") + "USER\r\n.\r\n", kIo);
            else if (cmd == "stls")
            {
                if (!policy.starttls_offered)
                {
                    s.send_all("-ERR STLS not available\r\n", kIo);
                    continue;
                }
                s.send_all("+OK Begin TLS negotiation\r\n", kIo);
                return true;
            }
            else if (cmd == "quit")
            {
                s.send_all("+OK bye\r\n", kIo);
                return false;
            }
            else
                s.send_all("-ERR unknown command\r\n", kIo);
        }
    }

    bool ldap(net::Socket& s)
    {
        // one BER-framed LDAPMessage
        auto msg = s.recv_until(
            [](const Bytes& b) {
                if (b.size() < 2)
                    return false;
                std::size_t len = b[1], hdr = 2;
                if (b[1] & 0x80)
                {
                    const std::size_t n = b[1] & 0x7f;
                    if (n == 0 || n > 3 || b.size() < 2 + n)
                        return n == 0 || n > 3;
                    len = 0;
                    for (std::size_t i = 0; i < n; ++i)
                        len = len << 8 | b[2 + i];
                    hdr = 2 + n;
                }
                return b.size() >= hdr + len;
            },
            kIo, 4096);
        // 30 LL 02 01 id 77 ...: only short-form, as sent by STARTTLS clients
        if (msg.size() < 7 || msg[0] != 0x30 || msg[2] != 0x02 || msg[3] < 1 || msg[3] > 4)
            return false;
        const std::size_t id_len = msg[3];
        if (msg.size() < 4 + id_len + 1)
            return false;
        Bytes id(msg.begin() + 4, msg.begin() + 4 + static_cast<std::ptrdiff_t>(id_len));
        const bool is_extended = msg[4 + id_len] == 0x77;
        const std::string oid = "1.3.6.1.4.1.1466.20037";
        const bool is_starttls =
            is_extended && std::search(msg.begin(), msg.end(), oid.begin(), oid.end()) != msg.end();
        const std::uint8_t rc = is_starttls && policy.starttls_offered ? 0 : 2; // protocolError
        Bytes body{0x02, static_cast<std::uint8_t>(id_len)};
        body.insert(body.end(), id.begin(), id.end());
        const std::uint8_t ext_resp[] = {0x78, 0x07, 0x0a, 0x01, rc, 0x04, 0x00, 0x04, 0x00};
        body.insert(body.end(), std::begin(ext_resp), std::end(ext_resp));
        Bytes out{0x30, static_cast<std::uint8_t>(body.size())};
        out.insert(out.end(), body.begin(), body.end());
        s.send_all(out, kIo);
        return rc == 0;
    }

    void http(net::Socket& s, Bytes buf)
    {
        auto head_done = [](const Bytes& b) {
            static const std::string end = "\r\n\r\n";
            return std::search(b.begin(), b.end(), end.begin(), end.end()) != b.end();
        };
        while (!head_done(buf) && buf.size() < 16384)
        {
            if (s.recv_some(buf, kIo) == 0)
                return;
        }
        std::string head(buf.begin(), buf.end());
        head = head.substr(0, head.find("\r\n\r\n"));
        std::istringstream in(head);
        std::string request_line;
        std::getline(in, request_line);
        std::vector<std::pair<std::string, std::string>> req;
        std::string line;
        while (std::getline(in, line))
        {
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            auto colon = line.find(':');
            if (colon == std::string::npos)
                continue;
            req.emplace_back(trim(line.substr(0, colon)), trim(line.substr(colon + 1)));
        }
        auto header = [&](std::string_view name) -> std::optional<std::string> {
            for (const auto& [n, v] : req)
            {
                if (iequals(n, name))
                    return v;
            }
            return std::nullopt;
        };

        const bool wants_gzip = header("Accept-Encoding").value_or("").find("gzip") != std::string::npos;
        bool compress = false;
        switch (policy.http_gzip)
        {
        case HttpGzip::ALWAYS:
            compress = wants_gzip;
            break;
        case HttpGzip::NEVER:
            break;
        case HttpGzip::SELF_REFERER_ONLY: {
            auto ref = header("Referer");
            auto self = "https://" + to_lower(header("Host").value_or("")) + "/";
            compress = wants_gzip && (!ref || to_lower(*ref).starts_with(self));
            break;
        }
        }

        std::string body = html_body();
        if (compress)
            body = gzip(body);
        std::string resp = "HTTP/1.1 200 OK\r\nContent-Type: text/html\r\n";
        for (const auto& [n, v] : policy.http_headers)
            resp += n + ": " + v + "\r\n";
        for (const auto& [n, v] : req)
            resp += "X-Echo-" + n + ": " + v + "\r\n";
        if (compress)
            resp += "Content-Encoding: gzip\r\n";
        if (policy.http_gzip != HttpGzip::NEVER)
            resp += "Vary: Accept-Encoding\r\n";
        resp += "Content-Length: " + std::to_string(body.size()) + "\r\nConnection: close\r\n\r\n";
        resp += body;
        s.send_all(resp, kIo);
    }

    // ---- handshake

    bool allowed_at(std::uint16_t id, ProtocolVersion v) const
    {
        const auto* c = reg.lookup_by_id(id);
        return !c || c->min_version <= v;
    }

    void send_flight(net::Socket& s, ProtocolVersion v, const Bytes& handshake)
    {
        Bytes out;
        for (std::size_t off = 0; off < handshake.size(); off += 16384)
        {
            const auto n = std::min<std::size_t>(16384, handshake.size() - off);
            auto rec = wire::encode_record(wire::content::kHandshake, v,
                                           std::span(handshake.data() + off, n));
            out.insert(out.end(), rec.begin(), rec.end());
        }
        s.send_all(out, kIo);
    }

    void tls(net::Socket& s, Bytes buf)
    {
        for (;;)
        {
            auto need = wire::client_hello_size(buf);
            if (need && buf.size() >= need)
                break;
            if (buf.size() > 65536 || s.recv_some(buf, kIo) == 0)
                return;
        }

        wire::ClientHelloInfo hello;
        try
        {
            hello = wire::decode_client_hello(buf);
        }
        catch (const wire::WireError&)
        {
            s.send_all(wire::encode_alert(wire::kAlertFatal, 50, ProtocolVersion::TLS1_0), kIo);
            return;
        }

        if (hello.sslv2)
        {
            if (!policy.sslv2_hello)
                return; // just hang up
            s.send_all(wire::encode_sslv2_server_hello(chain.empty() ? Bytes{} : chain.front()), kIo);
            drain(s, ProtocolVersion::SSL2, false);
            return;
        }

        const auto v = hello.params.version;
        auto refuse = [&] {
            s.send_all(wire::encode_alert(wire::kAlertFatal, wire::kAlertHandshakeFailure, v), kIo);
        };
        if (!policy.versions.contains(v))
            return refuse();

        const auto& offered = hello.params.cipher_ids;
        std::optional<std::uint16_t> chosen;
        if (policy.honor_order)
        {
            for (auto id : policy.ciphers)
            {
                if (allowed_at(id, v) && std::find(offered.begin(), offered.end(), id) != offered.end())
                {
                    chosen = id;
                    break;
                }
            }
        }
        else
        {
            for (auto id : offered)
            {
                if (allowed_at(id, v) && std::find(policy.ciphers.begin(), policy.ciphers.end(), id) !=
                                             policy.ciphers.end())
                {
                    chosen = id;
                    break;
                }
            }
        }
        if (!chosen)
            return refuse();

        const auto& comp = hello.params.compression_methods;
        const bool deflate = policy.compression == Compression::DEFLATE_ALLOWED &&
                             std::find(comp.begin(), comp.end(), 1) != comp.end();

        wire::ServerHelloParams sh;
        sh.version = v;
        sh.cipher_id = *chosen;
        sh.compression = deflate ? 1 : 0;
        const bool reneg_signalled =
            hello.params.include_reneg_scsv || hello.extension_types.contains(wire::ext::kRenegotiationInfo);
        if (policy.reneg_info && reneg_signalled)
            sh.extensions.push_back({wire::ext::kRenegotiationInfo, {0x00}});
        if (policy.stapling && hello.extension_types.contains(wire::ext::kStatusRequest))
            sh.extensions.push_back({wire::ext::kStatusRequest, {}});
        const bool heartbeat = policy.heartbeat != HeartbeatMode::DISABLED && v >= ProtocolVersion::TLS1_0 &&
                               hello.extension_types.contains(wire::ext::kHeartbeat);
        if (heartbeat)
            sh.extensions.push_back({wire::ext::kHeartbeat, {0x01}});

        const auto* suite = reg.lookup_by_id(*chosen);
        const bool anonymous = suite && suite->au == "NONE";
        Bytes flight = wire::encode_handshake(wire::hs::kServerHello, wire::encode_server_hello_body(sh));
        auto add = [&](std::uint8_t type, const Bytes& body) {
            auto m = wire::encode_handshake(type, body);
            flight.insert(flight.end(), m.begin(), m.end());
        };
        if (!chain.empty() && !anonymous)
            add(wire::hs::kCertificate, wire::encode_certificate_body(chain));
        if (suite && suite->kx == "DHE")
        {
            const auto prime = hex_bytes(*modp_prime_hex(policy.dh_bits.value_or(2048)));
            Bytes ys(prime.size(), 0x5a);
            const std::uint8_t g[] = {0x02};
            add(wire::hs::kServerKeyExchange, wire::encode_dh_server_key_exchange_body(prime, g, ys, v, anonymous));
        }
        add(wire::hs::kServerHelloDone, {});
        send_flight(s, v, flight);
        drain(s, v, heartbeat);
    }

    // Reads what the client sends after our flight until it hangs up.
    void drain(net::Socket& s, ProtocolVersion v, bool heartbeat_negotiated)
    {
        Bytes buf;
        for (;;)
        {
            while (buf.size() >= 5)
            {
                const std::size_t len = static_cast<std::size_t>(buf[3] << 8 | buf[4]);
                if (buf.size() < 5 + len)
                    break;
                const auto type = buf[0];
                Bytes body(buf.begin() + 5, buf.begin() + 5 + static_cast<std::ptrdiff_t>(len));
                buf.erase(buf.begin(), buf.begin() + 5 + static_cast<std::ptrdiff_t>(len));
                if (type == wire::content::kAlert)
                    return;
                if (type == wire::content::kHandshake && !body.empty() && body[0] == wire::hs::kClientKeyExchange)
                    flag("ClientKeyExchange received");
                if (type == wire::content::kHeartbeat)
                {
                    if (!on_heartbeat(s, v, body, heartbeat_negotiated))
                        return;
                }
            }
            if (buf.size() > 1 << 20 || s.recv_some(buf, kIo) == 0)
                return;
        }
    }

    bool on_heartbeat(net::Socket& s, ProtocolVersion v, const Bytes& body, bool negotiated)
    {
        if (!negotiated || policy.heartbeat == HeartbeatMode::DISABLED || body.size() < 3 || body[0] != 1)
        {
            s.send_all(wire::encode_alert(wire::kAlertFatal, wire::kAlertUnexpectedMessage, v), kIo);
            return false;
        }
        const std::size_t declared = static_cast<std::size_t>(body[1] << 8 | body[2]);
        const std::size_t actual = body.size() - 3 >= 16 ? body.size() - 3 - 16 : 0;
        if (declared > actual && policy.heartbeat == HeartbeatMode::PATCHED)
        {
            s.send_all(wire::encode_alert(wire::kAlertFatal, 50, v), kIo); // decode_error
            return false;
        }
        // heartbeat_response echoing `declared` bytes; zeros stand in for memory
        Bytes resp{2, static_cast<std::uint8_t>(declared >> 8), static_cast<std::uint8_t>(declared)};
        resp.insert(resp.end(), body.begin() + 3, body.begin() + 3 + static_cast<std::ptrdiff_t>(std::min(declared, actual)));
        resp.resize(3 + declared + 16, 0);
        Bytes out;
        for (std::size_t off = 0; off < resp.size(); off += wire::kMaxRecordBody)
        {
            const auto n = std::min<std::size_t>(wire::kMaxRecordBody, resp.size() - off);
            auto rec = wire::encode_record(wire::content::kHeartbeat, v, std::span(resp.data() + off, n));
            out.insert(out.end(), rec.begin(), rec.end());
        }
        s.send_all(out, kIo);
        return true;
    }
};

MockServer::MockServer(ServerPolicy policy, std::uint16_t port, std::string host, const registry::Registry& reg)
    : impl_(std::make_unique<Impl>(std::move(policy), port, host, reg))
{
    impl_->worker = std::thread([this] { impl_->run(); });
}

MockServer::~MockServer()
{
    stop();
}

std::uint16_t MockServer::port() const noexcept
{
    return impl_->listener.port();
}

const ServerPolicy& MockServer::policy() const noexcept
{
    return impl_->policy;
}

void MockServer::stop()
{
    std::lock_guard lock(impl_->stop_mu);
    impl_->stopping = true;
    if (impl_->worker.joinable() && impl_->worker.get_id() != std::this_thread::get_id())
        impl_->worker.join();
    impl_->listener.close();
    impl_->stopped_cv.notify_all();
}

void MockServer::wait()
{
    std::unique_lock lock(impl_->stop_mu);
    impl_->stopped_cv.wait(lock, [this] { return impl_->stopping.load() && !impl_->worker.joinable(); });
}

bool MockServer::contract_violated() const
{
    std::lock_guard lock(impl_->mu);
    return !impl_->violations.empty();
}

std::vector<std::string> MockServer::violations() const
{
    std::lock_guard lock(impl_->mu);
    return impl_->violations;
}

std::size_t MockServer::connections_handled() const
{
    return impl_->handled;
}

} // namespace tlsaudit::mock
