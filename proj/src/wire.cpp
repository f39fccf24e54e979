#include "tlsaudit/wire.hpp"

#include <algorithm>
#include <random>

namespace tlsaudit::wire
{

namespace
{

struct Truncated
{
};

struct Bad
{
    std::string why;
};

// Bounds-checked big-endian cursor. Runs off the end by throwing Truncated.
class Reader
{
public:
    explicit Reader(ByteView d)
        : d_(d)
    {
    }

    std::size_t remaining() const { return d_.size() - pos_; }
    std::size_t pos() const { return pos_; }
    bool done() const { return pos_ == d_.size(); }

    std::uint8_t u8()
    {
        need(1);
        return d_[pos_++];
    }
    std::uint16_t u16()
    {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(d_[pos_] << 8 | d_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    std::uint32_t u24()
    {
        need(3);
        std::uint32_t v = static_cast<std::uint32_t>(d_[pos_]) << 16 | d_[pos_ + 1] << 8 | d_[pos_ + 2];
        pos_ += 3;
        return v;
    }
    ByteView take(std::size_t n)
    {
        need(n);
        auto v = d_.subspan(pos_, n);
        pos_ += n;
        return v;
    }

private:
    void need(std::size_t n) const
    {
        if (remaining() < n)
            throw Truncated{};
    }

    ByteView d_;
    std::size_t pos_ = 0;
};

void put16(Bytes& out, std::size_t v)
{
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put24(Bytes& out, std::size_t v)
{
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void append(Bytes& out, ByteView v)
{
    out.insert(out.end(), v.begin(), v.end());
}

void random_bytes(std::uint8_t* p, std::size_t n)
{
    thread_local std::mt19937_64 rng{std::random_device{}()};
    for (std::size_t i = 0; i < n; ++i)
        p[i] = static_cast<std::uint8_t>(rng());
}

bool plausible_record_header(ByteView d)
{
    // type, major 3 (or 0x03 minor anything), length sane
    if (d.empty())
        return true;
    if (d[0] < content::kChangeCipherSpec || d[0] > content::kHeartbeat)
        return false;
    if (d.size() >= 2 && d[1] != 3)
        return false;
    if (d.size() >= 5 && static_cast<std::size_t>(d[3] << 8 | d[4]) > kMaxRecordBody)
        return false;
    return true;
}

bool looks_sslv2(ByteView d)
{
    return !d.empty() && (d[0] & 0x80) != 0;
}

struct Records
{
    Bytes handshake;
    std::optional<std::pair<std::uint8_t, std::uint8_t>> first_alert;
    std::size_t handshake_before_alert = 0;
    bool truncated = false;
    bool bad = false;
    std::string why;
};

Records split_records(ByteView data)
{
    Records r;
    Reader in(data);
    while (!in.done())
    {
        if (!plausible_record_header(data.subspan(in.pos(), std::min<std::size_t>(5, in.remaining()))))
        {
            r.bad = true;
            r.why = "invalid record header";
            return r;
        }
        if (in.remaining() < 5)
        {
            r.truncated = true;
            return r;
        }
        const auto type = in.u8();
        in.u16();
        const auto len = in.u16();
        if (in.remaining() < len)
        {
            // keep the partial handshake fragment, messages decode as far as they go
            if (type == content::kHandshake)
                append(r.handshake, in.take(in.remaining()));
            r.truncated = true;
            return r;
        }
        auto body = in.take(len);
        if (type == content::kHandshake)
        {
            append(r.handshake, body);
        }
        else if (type == content::kAlert && !r.first_alert)
        {
            if (body.size() < 2)
            {
                r.bad = true;
                r.why = "short alert";
                return r;
            }
            r.first_alert = std::make_pair(body[0], body[1]);
            r.handshake_before_alert = r.handshake.size();
        }
    }
    return r;
}

void parse_server_hello(ByteView body, ServerResponse& out)
{
    Reader in(body);
    const auto ver = version_from_wire(in.u16());
    if (!ver || *ver == ProtocolVersion::SSL2)
        throw Bad{"unknown ServerHello version"};
    in.take(32);
    const auto sid_len = in.u8();
    if (sid_len > 32)
        throw Bad{"session id too long"};
    in.take(sid_len);
    out.negotiated_version = ver;
    out.chosen_cipher_id = in.u16();
    out.chosen_compression = in.u8();
    if (in.done())
        return;
    const auto ext_total = in.u16();
    if (ext_total != in.remaining())
        throw Bad{"extension block length mismatch"};
    while (!in.done())
    {
        const auto type = in.u16();
        const auto len = in.u16();
        in.take(len);
        out.extensions_present.insert(type);
    }
}

std::vector<Bytes> parse_certificate(ByteView body)
{
    Reader in(body);
    const auto total = in.u24();
    if (total != in.remaining())
        throw Bad{"certificate list length mismatch"};
    std::vector<Bytes> chain;
    while (!in.done())
    {
        const auto len = in.u24();
        auto der = in.take(len);
        chain.emplace_back(der.begin(), der.end());
    }
    return chain;
}

// DH params, then either nothing (anonymous) or a signature block. ECDHE
// bodies fail the shape check and yield nothing.
std::optional<int> parse_dh_ske(ByteView body)
{
    try
    {
        Reader in(body);
        auto p = in.take(in.u16());
        in.take(in.u16()); // g
        in.take(in.u16()); // Ys
        const auto rest = in.remaining();
        if (rest != 0)
        {
            Reader sig(body.subspan(in.pos()));
            const auto first = sig.u16();
            bool ok = first == sig.remaining();
            if (!ok && rest >= 4)
            {
                Reader sig12(body.subspan(in.pos() + 2));
                ok = sig12.u16() == sig12.remaining();
            }
            if (!ok)
                return std::nullopt;
        }
        if (p.empty())
            return std::nullopt;
        return bit_length(p);
    }
    catch (const Truncated&)
    {
        return std::nullopt;
    }
}

struct Decoded
{
    ServerResponse resp;
    bool need_more = false;
};

Decoded decode_sslv2(ByteView data)
{
    Decoded d;
    auto& out = d.resp;
    if (data.size() < 2)
    {
        d.need_more = true;
        out.kind = ResponseKind::MALFORMED;
        out.note = "truncated SSLv2 header";
        return d;
    }
    const std::size_t len = static_cast<std::size_t>((data[0] & 0x7f) << 8 | data[1]);
    if (data.size() < 2 + len)
    {
        d.need_more = true;
        out.kind = ResponseKind::MALFORMED;
        out.note = "truncated SSLv2 message";
        return d;
    }
    try
    {
        Reader in(data.subspan(2, len));
        const auto type = in.u8();
        if (type != 4)
        {
            // SSLv2 ERROR (0) or anything else is a refusal
            out.kind = ResponseKind::MALFORMED;
            out.note = "SSLv2 message type " + std::to_string(type);
            return d;
        }
        in.u8(); // session id hit
        in.u8(); // certificate type
        const auto ver = in.u16();
        const auto cert_len = in.u16();
        const auto specs_len = in.u16();
        const auto conn_len = in.u16();
        auto cert = in.take(cert_len);
        in.take(specs_len);
        in.take(conn_len);
        if (ver != 0x0002 || specs_len % 3 != 0 || specs_len == 0)
        {
            out.kind = ResponseKind::MALFORMED;
            out.note = "bad SSLv2 SERVER-HELLO";
            return d;
        }
        out.kind = ResponseKind::SSL2_SERVER_HELLO;
        out.negotiated_version = ProtocolVersion::SSL2;
        if (cert_len)
            out.certificate_der = std::vector<Bytes>{Bytes(cert.begin(), cert.end())};
    }
    catch (const Truncated&)
    {
        out = {};
        out.kind = ResponseKind::MALFORMED;
        out.note = "truncated SSLv2 SERVER-HELLO";
    }
    return d;
}

Decoded decode(ByteView data)
{
    Decoded d;
    auto& out = d.resp;
    if (data.empty())
    {
        out.kind = ResponseKind::TIMEOUT;
        d.need_more = true;
        return d;
    }
    if (looks_sslv2(data))
        return decode_sslv2(data);

    auto recs = split_records(data);
    if (recs.bad)
    {
        out.kind = ResponseKind::MALFORMED;
        out.note = recs.why;
        return d;
    }

    // Alert before any handshake bytes: plain refusal.
    if (recs.first_alert && recs.handshake_before_alert == 0)
    {
        out.kind = ResponseKind::ALERT;
        out.alert_level = recs.first_alert->first;
        out.alert_description = recs.first_alert->second;
        return d;
    }

    Reader in(recs.handshake);
    bool saw_hello = false;
    try
    {
        while (!in.done())
        {
            const auto type = in.u8();
            const auto len = in.u24();
            auto body = in.take(len);
            if (!saw_hello)
            {
                if (type != hs::kServerHello)
                    throw Bad{"first handshake message is not ServerHello"};
                try
                {
                    parse_server_hello(body, out);
                }
                catch (const Truncated&)
                {
                    throw Bad{"short ServerHello body"};
                }
                saw_hello = true;
                out.kind = ResponseKind::SERVER_HELLO;
                continue;
            }
            switch (type)
            {
            case hs::kCertificate:
                try
                {
                    out.certificate_der = parse_certificate(body);
                }
                catch (const Truncated&)
                {
                    throw Bad{"short Certificate body"};
                }
                break;
            case hs::kServerKeyExchange:
                out.dh_prime_bits = parse_dh_ske(body);
                break;
            case hs::kCertificateStatus:
                out.ocsp_status = true;
                break;
            case hs::kServerHelloDone:
                out.hello_done = true;
                break;
            default:
                break;
            }
        }
        if (!saw_hello)
        {
            out.kind = ResponseKind::MALFORMED;
            out.note = "no handshake data";
            d.need_more = recs.truncated;
        }
        else
        {
            d.need_more = !out.hello_done && !recs.first_alert;
        }
    }
    catch (const Truncated&)
    {
        if (!saw_hello)
        {
            out = {};
            out.kind = ResponseKind::MALFORMED;
            out.note = "truncated ServerHello";
        }
        d.need_more = !recs.first_alert;
    }
    catch (const Bad& b)
    {
        auto kept = out.kind;
        if (!saw_hello)
        {
            out = {};
            kept = ResponseKind::MALFORMED;
        }
        out.kind = kept;
        out.note = b.why;
        d.need_more = false;
    }
    return d;
}

} // namespace

std::string_view to_string(ResponseKind k)
{
    switch (k)
    {
    case ResponseKind::SERVER_HELLO:
        return "SERVER_HELLO";
    case ResponseKind::ALERT:
        return "ALERT";
    case ResponseKind::SSL2_SERVER_HELLO:
        return "SSL2_SERVER_HELLO";
    case ResponseKind::MALFORMED:
        return "MALFORMED";
    case ResponseKind::TIMEOUT:
        return "TIMEOUT";
    }
    return "?";
}

std::string_view to_string(HeartbeatVerdict v)
{
    switch (v)
    {
    case HeartbeatVerdict::VULNERABLE:
        return "VULNERABLE";
    case HeartbeatVerdict::SAFE:
        return "SAFE";
    case HeartbeatVerdict::NO_RESPONSE:
        return "NO_RESPONSE";
    }
    return "?";
}

std::optional<HeartbeatVerdict> parse_heartbeat_verdict(std::string_view s)
{
    for (auto v : {HeartbeatVerdict::VULNERABLE, HeartbeatVerdict::SAFE, HeartbeatVerdict::NO_RESPONSE})
    {
        if (to_string(v) == s)
            return v;
    }
    return std::nullopt;
}

int bit_length(ByteView v)
{
    std::size_t i = 0;
    while (i < v.size() && v[i] == 0)
        ++i;
    if (i == v.size())
        return 0;
    int bits = static_cast<int>((v.size() - i - 1) * 8);
    for (auto b = v[i]; b; b >>= 1)
        ++bits;
    return bits;
}

Bytes encode_record(std::uint8_t type, ProtocolVersion v, ByteView body)
{
    Bytes out;
    out.reserve(body.size() + 5);
    out.push_back(type);
    put16(out, wire_code(v));
    put16(out, body.size());
    append(out, body);
    return out;
}

Bytes encode_handshake(std::uint8_t msg_type, ByteView body)
{
    Bytes out;
    out.reserve(body.size() + 4);
    out.push_back(msg_type);
    put24(out, body.size());
    append(out, body);
    return out;
}

Bytes encode_alert(std::uint8_t level, std::uint8_t description, ProtocolVersion v)
{
    const std::uint8_t body[2] = {level, description};
    return encode_record(content::kAlert, v, body);
}

Bytes encode_client_hello(const HelloParams& p)
{
    if (p.version == ProtocolVersion::SSL2)
        throw WireError("SSLv2 hellos use encode_sslv2_client_hello");
    if (p.cipher_ids.empty())
        throw WireError("ClientHello needs at least one cipher suite");
    if (std::find(p.compression_methods.begin(), p.compression_methods.end(), 0) == p.compression_methods.end())
        throw WireError("compression methods must include null (0)");

    Bytes body;
    put16(body, wire_code(p.version));
    body.resize(body.size() + 32);
    random_bytes(body.data() + 2, 32);
    body.push_back(0); // no session id

    const std::size_t n_ciphers = p.cipher_ids.size() + (p.include_reneg_scsv ? 1 : 0);
    put16(body, n_ciphers * 2);
    for (auto id : p.cipher_ids)
        put16(body, id);
    if (p.include_reneg_scsv)
        put16(body, kRenegScsv);

    body.push_back(static_cast<std::uint8_t>(p.compression_methods.size()));
    append(body, p.compression_methods);

    Bytes exts;
    if (p.server_name && !p.server_name->empty())
    {
        const auto& name = *p.server_name;
        put16(exts, ext::kServerName);
        put16(exts, name.size() + 5);
        put16(exts, name.size() + 3);
        exts.push_back(0); // host_name
        put16(exts, name.size());
        exts.insert(exts.end(), name.begin(), name.end());
    }
    for (const auto& e : p.extensions)
    {
        put16(exts, e.type);
        put16(exts, e.payload.size());
        append(exts, e.payload);
    }
    if (!exts.empty())
    {
        put16(body, exts.size());
        append(body, exts);
    }
    return encode_record(content::kHandshake, p.version, encode_handshake(hs::kClientHello, body));
}

Bytes encode_sslv2_client_hello()
{
    // RC4, RC4-EXP, RC2, RC2-EXP, IDEA, DES, 3DES
    static constexpr std::uint8_t specs[] = {0x01, 0x00, 0x80, 0x02, 0x00, 0x80, 0x03, 0x00, 0x80, 0x04, 0x00,
                                             0x80, 0x05, 0x00, 0x80, 0x06, 0x00, 0x40, 0x07, 0x00, 0xc0};
    Bytes body;
    body.push_back(1); // CLIENT-HELLO
    put16(body, 0x0002);
    put16(body, sizeof specs);
    put16(body, 0);  // session id
    put16(body, 16); // challenge
    body.insert(body.end(), std::begin(specs), std::end(specs));
    body.resize(body.size() + 16);
    random_bytes(body.data() + body.size() - 16, 16);

    Bytes out;
    out.push_back(static_cast<std::uint8_t>(0x80 | (body.size() >> 8)));
    out.push_back(static_cast<std::uint8_t>(body.size()));
    append(out, body);
    return out;
}

ServerResponse decode_server_response(ByteView data)
{
    try
    {
        return decode(data).resp;
    }
    catch (...)
    {
        ServerResponse r;
        r.kind = ResponseKind::MALFORMED;
        r.note = "decoder failure";
        return r;
    }
}

bool response_complete(ByteView data)
{
    try
    {
        return !decode(data).need_more;
    }
    catch (...)
    {
        return true;
    }
}

Bytes encode_heartbeat_request(std::size_t declared_length, ByteView payload, ProtocolVersion version)
{
    if (declared_length > 0xffff)
        throw WireError("heartbeat declared length exceeds 16 bits");
    Bytes body;
    body.push_back(1); // heartbeat_request
    put16(body, declared_length);
    append(body, payload);
    // 16 bytes of padding, as required of senders
    body.resize(body.size() + 16);
    random_bytes(body.data() + body.size() - 16, 16);
    return encode_record(content::kHeartbeat, version, body);
}

HeartbeatVerdict decode_heartbeat_response(ByteView data, std::size_t requested, std::size_t actual_payload)
{
    if (data.empty())
        return HeartbeatVerdict::NO_RESPONSE;
    Reader in(data);
    std::size_t hb_bytes = 0;
    bool saw_hb = false;
    try
    {
        while (!in.done())
        {
            if (in.remaining() < 5)
                break;
            const auto type = in.u8();
            in.u16();
            const auto len = in.u16();
            auto body = in.take(std::min<std::size_t>(len, in.remaining()));
            if (type == content::kAlert)
                return HeartbeatVerdict::SAFE;
            if (type == content::kHeartbeat)
            {
                saw_hb = true;
                hb_bytes += body.size();
            }
        }
    }
    catch (const Truncated&)
    {
    }
    if (!saw_hb)
        return HeartbeatVerdict::NO_RESPONSE;
    // type byte and length field precede the echoed payload
    const std::size_t echoed = hb_bytes >= 3 ? hb_bytes - 3 : 0;
    if (actual_payload < requested && echoed >= requested)
        return HeartbeatVerdict::VULNERABLE;
    return HeartbeatVerdict::SAFE;
}

std::size_t client_hello_size(ByteView data)
{
    if (data.size() < 2)
        return 0;
    if (looks_sslv2(data))
        return 2 + static_cast<std::size_t>((data[0] & 0x7f) << 8 | data[1]);
    if (data.size() < 5)
        return 0;
    if (data[0] != content::kHandshake)
        return 5;
    // The hello may span records; walk them until the handshake message length is known.
    std::size_t pos = 0;
    std::size_t hs_bytes = 0;
    std::optional<std::size_t> need;
    while (pos + 5 <= data.size())
    {
        const std::size_t len = static_cast<std::size_t>(data[pos + 3] << 8 | data[pos + 4]);
        const std::size_t end = pos + 5 + len;
        if (!need && data.size() >= pos + 9)
            need = 4 + (static_cast<std::size_t>(data[pos + 6]) << 16 | data[pos + 7] << 8 | data[pos + 8]);
        hs_bytes += len;
        if (end > data.size())
            return end;
        if (need && hs_bytes >= *need)
            return end;
        pos = end;
    }
    return pos + 5;
}

ClientHelloInfo decode_client_hello(ByteView data)
{
    ClientHelloInfo info;
    try
    {
        if (looks_sslv2(data))
        {
            Reader in(data);
            const std::size_t len = static_cast<std::size_t>((in.u8() & 0x7f) << 8 | in.u8());
            Reader msg(in.take(len));
            if (msg.u8() != 1)
                throw WireError("not an SSLv2 CLIENT-HELLO");
            const auto ver = msg.u16();
            const auto specs_len = msg.u16();
            const auto sid_len = msg.u16();
            const auto chal_len = msg.u16();
            auto specs = msg.take(specs_len);
            msg.take(sid_len);
            msg.take(chal_len);
            info.sslv2 = true;
            info.params.version = ver == 0x0002 ? ProtocolVersion::SSL2
                                                : version_from_wire(ver).value_or(ProtocolVersion::SSL2);
            for (std::size_t i = 0; i + 3 <= specs.size(); i += 3)
            {
                // only the TLS-compatible (first byte zero) kinds map onto suite ids
                if (specs[i] == 0)
                    info.params.cipher_ids.push_back(static_cast<std::uint16_t>(specs[i + 1] << 8 | specs[i + 2]));
            }
            return info;
        }

        auto recs = split_records(data);
        if (recs.bad || recs.handshake.empty())
            throw WireError("no handshake record");
        Reader in(recs.handshake);
        if (in.u8() != hs::kClientHello)
            throw WireError("first handshake message is not ClientHello");
        Reader body(in.take(in.u24()));
        auto ver = version_from_wire(body.u16());
        if (!ver)
            throw WireError("unknown client version");
        info.params.version = *ver;
        body.take(32);
        body.take(body.u8());
        const auto cs_len = body.u16();
        if (cs_len % 2)
            throw WireError("odd cipher suite vector");
        Reader cs(body.take(cs_len));
        while (!cs.done())
        {
            const auto id = cs.u16();
            if (id == kRenegScsv)
                info.params.include_reneg_scsv = true;
            else
                info.params.cipher_ids.push_back(id);
        }
        auto comp = body.take(body.u8());
        info.params.compression_methods.assign(comp.begin(), comp.end());
        if (!body.done())
        {
            Reader exts(body.take(body.u16()));
            while (!exts.done())
            {
                const auto type = exts.u16();
                auto payload = exts.take(exts.u16());
                info.extension_types.insert(type);
                if (type == ext::kServerName)
                {
                    Reader sni(payload);
                    Reader list(sni.take(sni.u16()));
                    if (list.u8() == 0)
                    {
                        auto name = list.take(list.u16());
                        info.params.server_name = std::string(name.begin(), name.end());
                    }
                    continue;
                }
                info.params.extensions.push_back({type, Bytes(payload.begin(), payload.end())});
            }
        }
    }
    catch (const Truncated&)
    {
        throw WireError("truncated ClientHello");
    }
    return info;
}

Bytes encode_server_hello_body(const ServerHelloParams& p)
{
    Bytes body;
    put16(body, wire_code(p.version));
    body.resize(body.size() + 32);
    random_bytes(body.data() + 2, 32);
    body.push_back(0);
    put16(body, p.cipher_id);
    body.push_back(p.compression);
    if (!p.extensions.empty())
    {
        Bytes exts;
        for (const auto& e : p.extensions)
        {
            put16(exts, e.type);
            put16(exts, e.payload.size());
            append(exts, e.payload);
        }
        put16(body, exts.size());
        append(body, exts);
    }
    return body;
}

Bytes encode_certificate_body(const std::vector<Bytes>& chain)
{
    Bytes list;
    for (const auto& der : chain)
    {
        put24(list, der.size());
        append(list, der);
    }
    Bytes body;
    put24(body, list.size());
    append(body, list);
    return body;
}

Bytes encode_dh_server_key_exchange_body(ByteView prime, ByteView generator, ByteView public_value,
                                         ProtocolVersion v, bool anonymous)
{
    Bytes body;
    for (auto part : {prime, generator, public_value})
    {
        put16(body, part.size());
        append(body, part);
    }
    if (!anonymous)
    {
        if (v == ProtocolVersion::TLS1_2)
        {
            body.push_back(4); // sha256
            body.push_back(1); // rsa
        }
        put16(body, 0);
    }
    return body;
}

Bytes encode_sslv2_server_hello(const Bytes& certificate_der)
{
    if (certificate_der.size() > 0x7000)
        throw WireError("certificate too large for an SSLv2 record");
    static constexpr std::uint8_t spec_3des[] = {0x07, 0x00, 0xc0};
    Bytes body;
    body.push_back(4);    // SERVER-HELLO
    body.push_back(0);    // session id hit
    body.push_back(1);    // X.509
    put16(body, 0x0002);
    put16(body, certificate_der.size());
    put16(body, sizeof spec_3des);
    put16(body, 16);
    append(body, certificate_der);
    body.insert(body.end(), std::begin(spec_3des), std::end(spec_3des));
    body.resize(body.size() + 16);
    random_bytes(body.data() + body.size() - 16, 16);

    Bytes out;
    out.push_back(static_cast<std::uint8_t>(0x80 | (body.size() >> 8)));
    out.push_back(static_cast<std::uint8_t>(body.size()));
    append(out, body);
    return out;
}

} // namespace tlsaudit::wire
