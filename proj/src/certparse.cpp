#include "tlsaudit/certparse.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace tlsaudit::cert
{

namespace
{

namespace tag
{
constexpr std::uint8_t kBoolean = 0x01;
constexpr std::uint8_t kInteger = 0x02;
constexpr std::uint8_t kBitString = 0x03;
constexpr std::uint8_t kOctetString = 0x04;
constexpr std::uint8_t kOid = 0x06;
constexpr std::uint8_t kUtcTime = 0x17;
constexpr std::uint8_t kGeneralizedTime = 0x18;
constexpr std::uint8_t kSequence = 0x30;
constexpr std::uint8_t kSet = 0x31;
} // namespace tag

struct Tlv
{
    std::uint8_t tag = 0;
    std::size_t offset = 0; // of the tag byte, absolute
    std::size_t body = 0;   // absolute
    std::size_t length = 0;

    std::size_t end() const { return body + length; }
};

// Walks one constructed value. Offsets are absolute into the whole DER blob
// so errors point at the right byte.
class Der
{
public:
    Der(std::span<const std::uint8_t> all, std::size_t begin, std::size_t end)
        : all_(all)
        , pos_(begin)
        , end_(end)
    {
    }

    bool done() const { return pos_ >= end_; }

    Tlv next()
    {
        Tlv t;
        t.offset = pos_;
        if (pos_ >= end_)
            throw ParseError("unexpected end of data", pos_);
        t.tag = all_[pos_++];
        if ((t.tag & 0x1f) == 0x1f)
            throw ParseError("high tag numbers are not supported", t.offset);
        if (pos_ >= end_)
            throw ParseError("missing length", pos_);
        std::uint8_t first = all_[pos_++];
        if (first < 0x80)
        {
            t.length = first;
        }
        else
        {
            const std::size_t n = first & 0x7f;
            if (n == 0)
                throw ParseError("indefinite length", pos_ - 1);
            if (n > 4)
                throw ParseError("length field too wide", pos_ - 1);
            if (end_ - pos_ < n)
                throw ParseError("truncated length", pos_);
            std::size_t len = 0;
            for (std::size_t i = 0; i < n; ++i)
                len = len << 8 | all_[pos_++];
            t.length = len;
        }
        t.body = pos_;
        if (t.length > end_ - pos_)
            throw ParseError("value runs past its container", t.offset);
        pos_ += t.length;
        return t;
    }

    Tlv expect(std::uint8_t want, const char* what)
    {
        auto t = next();
        if (t.tag != want)
            throw ParseError(std::string("expected ") + what, t.offset);
        return t;
    }

    std::optional<Tlv> peek_tag(std::uint8_t want)
    {
        if (done() || all_[pos_] != want)
            return std::nullopt;
        return next();
    }

    Der inner(const Tlv& t) const { return Der(all_, t.body, t.end()); }
    std::span<const std::uint8_t> bytes(const Tlv& t) const { return all_.subspan(t.body, t.length); }

private:
    std::span<const std::uint8_t> all_;
    std::size_t pos_;
    std::size_t end_;
};

std::string decode_oid(std::span<const std::uint8_t> b, std::size_t offset)
{
    if (b.empty())
        throw ParseError("empty OID", offset);
    std::string out;
    std::uint64_t v = 0;
    bool first = true;
    for (std::size_t i = 0; i < b.size(); ++i)
    {
        if (v > (std::uint64_t{1} << 56))
            throw ParseError("OID arc too large", offset + i);
        v = v << 7 | (b[i] & 0x7f);
        if (b[i] & 0x80)
            continue;
        if (first)
        {
            const std::uint64_t a = v < 80 ? v / 40 : 2;
            out = std::to_string(a) + "." + std::to_string(v - a * 40);
            first = false;
        }
        else
        {
            out += "." + std::to_string(v);
        }
        v = 0;
    }
    if (b.back() & 0x80)
        throw ParseError("unterminated OID arc", offset + b.size() - 1);
    return out;
}

int integer_bits(std::span<const std::uint8_t> b)
{
    std::size_t i = 0;
    while (i < b.size() && b[i] == 0)
        ++i;
    if (i == b.size())
        return 0;
    int bits = static_cast<int>((b.size() - i - 1) * 8);
    for (auto c = b[i]; c; c >>= 1)
        ++bits;
    return bits;
}

int two_digits(std::span<const std::uint8_t> b, std::size_t at, std::size_t offset)
{
    if (at + 2 > b.size() || b[at] < '0' || b[at] > '9' || b[at + 1] < '0' || b[at + 1] > '9')
        throw ParseError("bad time digits", offset + at);
    return (b[at] - '0') * 10 + (b[at + 1] - '0');
}

Timestamp decode_time(const Tlv& t, std::span<const std::uint8_t> b)
{
    using namespace std::chrono;
    std::size_t i = 0;
    int yr = 0;
    if (t.tag == tag::kUtcTime)
    {
        if (b.size() != 13 || b[12] != 'Z')
            throw ParseError("UTCTime must be YYMMDDHHMMSSZ", t.offset);
        yr = two_digits(b, 0, t.body);
        yr += yr < 50 ? 2000 : 1900;
        i = 2;
    }
    else if (t.tag == tag::kGeneralizedTime)
    {
        if (b.size() != 15 || b[14] != 'Z')
            throw ParseError("GeneralizedTime must be YYYYMMDDHHMMSSZ", t.offset);
        yr = two_digits(b, 0, t.body) * 100 + two_digits(b, 2, t.body);
        i = 4;
    }
    else
    {
        throw ParseError("expected a time value", t.offset);
    }
    const int mo = two_digits(b, i, t.body);
    const int dd = two_digits(b, i + 2, t.body);
    const int hh = two_digits(b, i + 4, t.body);
    const int mi = two_digits(b, i + 6, t.body);
    const int ss = two_digits(b, i + 8, t.body);
    const year_month_day ymd{year{yr}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(dd)}};
    if (!ymd.ok() || hh > 23 || mi > 59 || ss > 60)
        throw ParseError("time out of range", t.offset);
    return sys_days{ymd} + hours{hh} + minutes{mi} + seconds{ss};
}

std::string decode_string(std::uint8_t t, std::span<const std::uint8_t> b)
{
    if (t == 0x1e) // BMPString, keep the low byte of each code unit
    {
        std::string s;
        for (std::size_t i = 1; i < b.size(); i += 2)
            s.push_back(static_cast<char>(b[i]));
        return s;
    }
    return std::string(b.begin(), b.end());
}

std::optional<std::string> find_cn(Der name)
{
    std::optional<std::string> cn;
    while (!name.done())
    {
        auto rdn = name.expect(tag::kSet, "RDN set");
        auto set = name.inner(rdn);
        while (!set.done())
        {
            auto atv = set.expect(tag::kSequence, "attribute");
            auto in = set.inner(atv);
            auto oid_tlv = in.expect(tag::kOid, "attribute type");
            auto value = in.next();
            if (decode_oid(in.bytes(oid_tlv), oid_tlv.body) == "2.5.4.3" && !cn)
                cn = decode_string(value.tag, in.bytes(value));
        }
    }
    return cn;
}

SignatureAlgorithm signature_from_oid(const std::string& oid)
{
    static const std::pair<const char*, SignatureAlgorithm> table[] = {
        {"1.2.840.113549.1.1.4", SignatureAlgorithm::MD5_RSA},
        {"1.2.840.113549.1.1.5", SignatureAlgorithm::SHA1_RSA},
        {"1.2.840.113549.1.1.11", SignatureAlgorithm::SHA256_RSA},
        {"1.2.840.113549.1.1.12", SignatureAlgorithm::SHA384_RSA},
        {"1.2.840.113549.1.1.13", SignatureAlgorithm::SHA512_RSA},
        {"1.2.840.10045.4.1", SignatureAlgorithm::ECDSA_SHA1},
        {"1.2.840.10045.4.3.2", SignatureAlgorithm::ECDSA_SHA256},
        {"1.2.840.10045.4.3.3", SignatureAlgorithm::ECDSA_SHA384},
        {"1.2.840.10045.4.3.4", SignatureAlgorithm::ECDSA_SHA512},
        {"1.2.840.10040.4.3", SignatureAlgorithm::DSA_SHA1},
        {"2.16.840.1.101.3.4.3.2", SignatureAlgorithm::DSA_SHA256},
    };
    for (const auto& [o, a] : table)
    {
        if (oid == o)
            return a;
    }
    return SignatureAlgorithm::OTHER;
}

int curve_bits(const std::string& oid)
{
    if (oid == "1.2.840.10045.3.1.7" || oid == "1.3.132.0.10")
        return 256;
    if (oid == "1.3.132.0.34")
        return 384;
    if (oid == "1.3.132.0.35")
        return 521;
    if (oid == "1.3.132.0.33")
        return 224;
    if (oid == "1.2.840.10045.3.1.1")
        return 192;
    return 0;
}

void parse_spki(Der& tbs, CertificateSummary& s)
{
    auto spki = tbs.expect(tag::kSequence, "SubjectPublicKeyInfo");
    auto in = tbs.inner(spki);
    auto alg = in.expect(tag::kSequence, "key AlgorithmIdentifier");
    auto alg_in = in.inner(alg);
    auto oid_tlv = alg_in.expect(tag::kOid, "key algorithm OID");
    const auto oid = decode_oid(alg_in.bytes(oid_tlv), oid_tlv.body);
    std::optional<Tlv> params;
    if (!alg_in.done())
        params = alg_in.next();
    auto key = in.expect(tag::kBitString, "subjectPublicKey");
    auto key_bytes = in.bytes(key);
    if (key_bytes.empty())
        throw ParseError("empty key bit string", key.offset);

    if (oid == "1.2.840.113549.1.1.1")
    {
        s.public_key_algorithm = KeyAlgorithm::RSA;
        Der rsa(in.bytes(key).subspan(1), 0, key_bytes.size() - 1);
        // offsets inside the bit string are relative; rebase for messages
        try
        {
            auto seq = rsa.expect(tag::kSequence, "RSAPublicKey");
            auto rin = rsa.inner(seq);
            auto n = rin.expect(tag::kInteger, "modulus");
            s.public_key_bits = integer_bits(rin.bytes(n));
        }
        catch (const ParseError& e)
        {
            throw ParseError(std::string("in RSA key: ") + e.what(), key.body + 1 + e.offset());
        }
    }
    else if (oid == "1.2.840.10040.4.1")
    {
        s.public_key_algorithm = KeyAlgorithm::DSA;
        if (!params || params->tag != tag::kSequence)
            throw ParseError("DSA key without domain parameters", alg.offset);
        auto p_in = alg_in.inner(*params);
        auto p = p_in.expect(tag::kInteger, "DSA p");
        s.public_key_bits = integer_bits(p_in.bytes(p));
    }
    else if (oid == "1.2.840.10045.2.1")
    {
        s.public_key_algorithm = KeyAlgorithm::EC;
        if (params && params->tag == tag::kOid)
        {
            s.curve = decode_oid(alg_in.bytes(*params), params->body);
            s.public_key_bits = curve_bits(s.curve);
        }
        if (s.public_key_bits == 0 && key_bytes.size() > 2 && key_bytes[1] == 0x04)
            s.public_key_bits = static_cast<int>((key_bytes.size() - 2) / 2 * 8);
    }
    else
    {
        s.public_key_algorithm = KeyAlgorithm::OTHER;
        s.public_key_bits = static_cast<int>((key_bytes.size() - 1) * 8);
    }
    if (s.public_key_algorithm != KeyAlgorithm::OTHER && s.public_key_bits <= 0)
        throw ParseError("public key has no size", key.offset);
}

void parse_extensions(Der& outer, const Tlv& wrapper, CertificateSummary& s)
{
    auto w = outer.inner(wrapper);
    auto list = w.expect(tag::kSequence, "Extensions");
    auto exts = w.inner(list);
    while (!exts.done())
    {
        auto e = exts.expect(tag::kSequence, "Extension");
        auto in = exts.inner(e);
        auto oid_tlv = in.expect(tag::kOid, "extension OID");
        in.peek_tag(tag::kBoolean);
        auto value = in.expect(tag::kOctetString, "extension value");
        if (decode_oid(in.bytes(oid_tlv), oid_tlv.body) != "2.5.29.17")
            continue;
        auto v = in.inner(value);
        auto names_tlv = v.expect(tag::kSequence, "GeneralNames");
        auto names = v.inner(names_tlv);
        while (!names.done())
        {
            auto gn = names.next();
            if (gn.tag == 0x82) // dNSName
            {
                auto b = names.bytes(gn);
                s.san_dns_names.emplace_back(b.begin(), b.end());
            }
        }
    }
}

} // namespace

std::string_view to_string(KeyAlgorithm a)
{
    switch (a)
    {
    case KeyAlgorithm::RSA:
        return "RSA";
    case KeyAlgorithm::DSA:
        return "DSA";
    case KeyAlgorithm::EC:
        return "EC";
    case KeyAlgorithm::OTHER:
        return "OTHER";
    }
    return "?";
}

std::string_view to_string(SignatureAlgorithm a)
{
    switch (a)
    {
    case SignatureAlgorithm::MD5_RSA:
        return "MD5_RSA";
    case SignatureAlgorithm::SHA1_RSA:
        return "SHA1_RSA";
    case SignatureAlgorithm::SHA256_RSA:
        return "SHA256_RSA";
    case SignatureAlgorithm::SHA384_RSA:
        return "SHA384_RSA";
    case SignatureAlgorithm::SHA512_RSA:
        return "SHA512_RSA";
    case SignatureAlgorithm::ECDSA_SHA1:
        return "ECDSA_SHA1";
    case SignatureAlgorithm::ECDSA_SHA256:
        return "ECDSA_SHA256";
    case SignatureAlgorithm::ECDSA_SHA384:
        return "ECDSA_SHA384";
    case SignatureAlgorithm::ECDSA_SHA512:
        return "ECDSA_SHA512";
    case SignatureAlgorithm::DSA_SHA1:
        return "DSA_SHA1";
    case SignatureAlgorithm::DSA_SHA256:
        return "DSA_SHA256";
    case SignatureAlgorithm::OTHER:
        return "OTHER";
    }
    return "?";
}

std::string_view signature_hash(SignatureAlgorithm a)
{
    switch (a)
    {
    case SignatureAlgorithm::MD5_RSA:
        return "MD5";
    case SignatureAlgorithm::SHA1_RSA:
    case SignatureAlgorithm::ECDSA_SHA1:
    case SignatureAlgorithm::DSA_SHA1:
        return "SHA1";
    case SignatureAlgorithm::SHA256_RSA:
    case SignatureAlgorithm::ECDSA_SHA256:
    case SignatureAlgorithm::DSA_SHA256:
        return "SHA256";
    case SignatureAlgorithm::SHA384_RSA:
    case SignatureAlgorithm::ECDSA_SHA384:
        return "SHA384";
    case SignatureAlgorithm::SHA512_RSA:
    case SignatureAlgorithm::ECDSA_SHA512:
        return "SHA512";
    case SignatureAlgorithm::OTHER:
        break;
    }
    return "";
}

CertificateSummary extract_summary(std::span<const std::uint8_t> der, int position)
{
    if (der.empty())
        throw ParseError("empty input", 0);
    CertificateSummary s;
    s.chain_position = position;

    Der top(der, 0, der.size());
    auto cert = top.expect(tag::kSequence, "Certificate");
    if (!top.done())
        throw ParseError("trailing data after Certificate", cert.end());
    auto c = top.inner(cert);
    auto tbs_tlv = c.expect(tag::kSequence, "TBSCertificate");
    auto tbs = c.inner(tbs_tlv);

    tbs.peek_tag(0xa0); // version
    tbs.expect(tag::kInteger, "serialNumber");
    tbs.expect(tag::kSequence, "signature AlgorithmIdentifier");
    auto issuer = tbs.expect(tag::kSequence, "issuer Name");
    auto validity = tbs.expect(tag::kSequence, "Validity");
    auto subject = tbs.expect(tag::kSequence, "subject Name");

    {
        auto v = tbs.inner(validity);
        auto nb = v.next();
        s.not_before = decode_time(nb, v.bytes(nb));
        auto na = v.next();
        s.not_after = decode_time(na, v.bytes(na));
        if (s.not_before > s.not_after)
            throw ParseError("notBefore is after notAfter", validity.offset);
    }
    s.subject_cn = find_cn(tbs.inner(subject));
    auto ib = tbs.bytes(issuer);
    auto sb = tbs.bytes(subject);
    s.is_self_signed = std::equal(ib.begin(), ib.end(), sb.begin(), sb.end());

    parse_spki(tbs, s);

    while (!tbs.done())
    {
        auto t = tbs.next();
        if (t.tag == 0xa3)
            parse_extensions(tbs, t, s);
    }

    auto sig_alg = c.expect(tag::kSequence, "signatureAlgorithm");
    auto sa = c.inner(sig_alg);
    auto oid_tlv = sa.expect(tag::kOid, "signature OID");
    s.signature_oid = decode_oid(sa.bytes(oid_tlv), oid_tlv.body);
    s.signature_algorithm = signature_from_oid(s.signature_oid);
    c.expect(tag::kBitString, "signatureValue");
    return s;
}

std::vector<Bytes> decode_pem(std::string_view pem)
{
    constexpr std::string_view begin = "-----BEGIN CERTIFICATE-----";
    constexpr std::string_view end = "-----END CERTIFICATE-----";
    std::vector<Bytes> out;
    std::size_t pos = 0;
    while ((pos = pem.find(begin, pos)) != std::string_view::npos)
    {
        pos += begin.size();
        auto stop = pem.find(end, pos);
        if (stop == std::string_view::npos)
            throw std::invalid_argument("unterminated PEM certificate block");
        out.push_back(base64_decode(pem.substr(pos, stop - pos)));
        pos = stop + end.size();
    }
    return out;
}

std::vector<Bytes> load_pem_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    auto certs = decode_pem(ss.str());
    if (certs.empty())
        throw std::runtime_error(path + ": no CERTIFICATE blocks");
    return certs;
}

bool hostname_matches(std::string_view pattern, std::string_view hostname)
{
    auto strip_dot = [](std::string_view v) {
        if (!v.empty() && v.back() == '.')
            v.remove_suffix(1);
        return v;
    };
    const auto pat = to_lower(strip_dot(pattern));
    const auto host = to_lower(strip_dot(hostname));
    if (pat.empty() || host.empty())
        return false;

    const auto stars = std::count(pat.begin(), pat.end(), '*');
    if (stars == 0)
        return pat == host;
    if (stars > 1 || !pat.starts_with("*."))
        return false;

    const std::string_view rest = std::string_view(pat).substr(1); // ".example.net"
    // the wildcard must leave at least two labels fixed
    if (std::count(rest.begin(), rest.end(), '.') < 2)
        return false;
    if (host.size() <= rest.size() || !host.ends_with(rest))
        return false;
    const auto label = std::string_view(host).substr(0, host.size() - rest.size());
    return !label.empty() && label.find('.') == std::string_view::npos;
}

std::string format_time(Timestamp t)
{
    const auto days = std::chrono::floor<std::chrono::days>(t);
    const std::chrono::year_month_day ymd{days};
    const std::chrono::hh_mm_ss hms{t - days};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                  static_cast<long>(hms.seconds().count()));
    return buf;
}

std::vector<Finding> check_certificate(const CertificateSummary& s, std::string_view hostname, Timestamp now)
{
    std::vector<Finding> out;
    const std::string where = s.chain_position == 0 ? "leaf" : "chain[" + std::to_string(s.chain_position) + "]";
    const std::string reissue = "Reissue the certificate with a 2048-bit or larger RSA key";

    const bool rsa_like = s.public_key_algorithm == KeyAlgorithm::RSA || s.public_key_algorithm == KeyAlgorithm::DSA;
    if (rsa_like && s.public_key_bits < 1024)
    {
        out.push_back({"CERT_KEY", Severity::FAIL, Verdict::AFFECTED,
                       where + " " + std::string(to_string(s.public_key_algorithm)) + " key is " +
                           std::to_string(s.public_key_bits) + " bits; keys this short can be factored",
                       reissue});
    }
    else if (rsa_like && s.public_key_bits < 2048)
    {
        out.push_back({"CERT_KEY", Severity::WARN, Verdict::AFFECTED,
                       where + " " + std::string(to_string(s.public_key_algorithm)) + " key is " +
                           std::to_string(s.public_key_bits) + " bits; 1024-bit keys are within reach",
                       reissue});
    }
    else if (s.public_key_algorithm == KeyAlgorithm::EC)
    {
        out.push_back({"CERT_KEY", Severity::INFO, std::nullopt,
                       where + " EC key, " + std::to_string(s.public_key_bits) + " bits (no size threshold applied)",
                       ""});
    }

    const auto hash = signature_hash(s.signature_algorithm);
    if (hash == "MD5")
    {
        out.push_back({"CERT_SIGNATURE", Severity::FAIL, Verdict::AFFECTED,
                       where + " is signed with MD5 (" + s.signature_oid + ")",
                       "Have the certificate reissued with a SHA-256 signature"});
    }
    else if (hash == "SHA1")
    {
        out.push_back({"CERT_SIGNATURE", Severity::WARN, Verdict::AFFECTED,
                       where + " is signed with SHA-1 (" + s.signature_oid + ")",
                       "Have the certificate reissued with a SHA-256 signature"});
    }

    if (now < s.not_before)
    {
        out.push_back({"CERT_VALIDITY", Severity::FAIL, Verdict::AFFECTED,
                       where + " is not valid before " + format_time(s.not_before),
                       "Install a certificate that is currently valid"});
    }
    else if (now > s.not_after)
    {
        out.push_back({"CERT_VALIDITY", Severity::FAIL, Verdict::AFFECTED,
                       where + " expired " + format_time(s.not_after), "Install a certificate that is currently valid"});
    }

    if (s.chain_position == 0 && !hostname.empty())
    {
        bool ok = s.subject_cn && hostname_matches(*s.subject_cn, hostname);
        for (const auto& n : s.san_dns_names)
            ok = ok || hostname_matches(n, hostname);
        if (!ok)
        {
            std::string names = s.subject_cn ? "CN=" + *s.subject_cn : "no CN";
            for (const auto& n : s.san_dns_names)
                names += ", DNS:" + n;
            out.push_back({"CERT_HOSTNAME", Severity::FAIL, Verdict::AFFECTED,
                           "'" + std::string(hostname) + "' matches none of " + names,
                           "Install a certificate whose CN or subjectAltName covers the host name"});
        }
    }

    if (s.chain_position == 0 && s.is_self_signed)
    {
        out.push_back({"CERT_SELF_SIGNED", Severity::WARN, Verdict::AFFECTED,
                       "leaf certificate is self-signed; clients that accept it are open to interception",
                       "Use a certificate issued by a CA the clients trust"});
    }
    return out;
}

std::vector<Finding> check_chain(const std::vector<Bytes>& chain, std::string_view hostname, Timestamp now)
{
    std::vector<Finding> out;
    for (std::size_t i = 0; i < chain.size(); ++i)
    {
        try
        {
            for (auto& f : check_certificate(extract_summary(chain[i], static_cast<int>(i)), hostname, now))
                out.push_back(std::move(f));
        }
        catch (const ParseError& err)
        {
            out.push_back({"CERT_PARSE", Severity::WARN, Verdict::UNKNOWN,
                           "certificate " + std::to_string(i) + " could not be read: " + err.what(), ""});
        }
    }
    return out;
}

} // namespace tlsaudit::cert
