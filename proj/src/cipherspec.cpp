#include "tlsaudit/cipherspec.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <unordered_set>

namespace tlsaudit::cipherspec
{

using registry::CipherMode;
using registry::CipherSuite;
using registry::StrengthClass;

namespace
{

using Predicate = bool (*)(const CipherSuite&);

struct Alias
{
    std::string_view name;
    Predicate match;
};

bool is_fixed_ecdh(const CipherSuite& c)
{
    return c.kx.starts_with("ECDH/");
}

bool is_fixed_dh(const CipherSuite& c)
{
    return c.kx.starts_with("DH/");
}

bool export_bits(const CipherSuite& c)
{
    return c.enc_bits > 0 && c.enc_bits < 56;
}

// Field-level meaning follows the reference cipher-string engine; "ECDH" and
// "DH" cover fixed, ephemeral and anonymous exchanges alike.
constexpr Alias kAliases[] = {
    {"ALL", [](const CipherSuite& c) { return c.enc != "NULL"; }},
    {"COMPLEMENTOFALL", [](const CipherSuite& c) { return c.enc == "NULL"; }},

    {"kRSA", [](const CipherSuite& c) { return c.kx == "RSA"; }},
    {"kDHr", [](const CipherSuite& c) { return c.kx == "DH/RSA"; }},
    {"kDHd", [](const CipherSuite& c) { return c.kx == "DH/DSS"; }},
    {"kEDH", [](const CipherSuite& c) { return c.kx == "DHE"; }},
    {"kECDHr", [](const CipherSuite& c) { return c.kx == "ECDH/RSA"; }},
    {"kECDHe", [](const CipherSuite& c) { return c.kx == "ECDH/ECDSA"; }},
    {"kECDH", is_fixed_ecdh},
    {"kEECDH", [](const CipherSuite& c) { return c.kx == "ECDHE"; }},
    {"kPSK", [](const CipherSuite& c) { return c.kx == "PSK"; }},
    {"kSRP", [](const CipherSuite& c) { return c.kx == "SRP"; }},

    {"aRSA", [](const CipherSuite& c) { return c.au == "RSA"; }},
    {"aDSS", [](const CipherSuite& c) { return c.au == "DSS"; }},
    {"aNULL", [](const CipherSuite& c) { return c.au == "NONE"; }},
    {"aECDH", [](const CipherSuite& c) { return c.au == "ECDH"; }},
    {"aECDSA", [](const CipherSuite& c) { return c.au == "ECDSA"; }},
    {"aPSK", [](const CipherSuite& c) { return c.au == "PSK"; }},
    {"aSRP", [](const CipherSuite& c) { return c.au == "SRP"; }},
    {"DSS", [](const CipherSuite& c) { return c.au == "DSS"; }},
    {"ECDSA", [](const CipherSuite& c) { return c.au == "ECDSA"; }},

    {"EDH", [](const CipherSuite& c) { return c.kx == "DHE" && c.au != "NONE"; }},
    {"DHE", [](const CipherSuite& c) { return c.kx == "DHE" && c.au != "NONE"; }},
    {"DH", [](const CipherSuite& c) { return c.kx == "DHE" || is_fixed_dh(c); }},
    {"ADH", [](const CipherSuite& c) { return c.kx == "DHE" && c.au == "NONE"; }},
    {"EECDH", [](const CipherSuite& c) { return c.kx == "ECDHE" && c.au != "NONE"; }},
    {"ECDHE", [](const CipherSuite& c) { return c.kx == "ECDHE" && c.au != "NONE"; }},
    {"ECDH", [](const CipherSuite& c) { return c.kx == "ECDHE" || is_fixed_ecdh(c); }},
    {"AECDH", [](const CipherSuite& c) { return c.kx == "ECDHE" && c.au == "NONE"; }},
    {"RSA", [](const CipherSuite& c) { return c.kx == "RSA" && c.au == "RSA"; }},
    {"PSK", [](const CipherSuite& c) { return c.kx == "PSK" && c.au == "PSK"; }},
    {"SRP", [](const CipherSuite& c) { return c.kx == "SRP"; }},

    {"NULL", [](const CipherSuite& c) { return c.enc == "NULL"; }},
    {"eNULL", [](const CipherSuite& c) { return c.enc == "NULL"; }},
    {"DES", [](const CipherSuite& c) { return c.enc == "DES"; }},
    {"3DES", [](const CipherSuite& c) { return c.enc == "3DES"; }},
    {"RC4", [](const CipherSuite& c) { return c.enc == "RC4"; }},
    {"RC2", [](const CipherSuite& c) { return c.enc == "RC2"; }},
    {"IDEA", [](const CipherSuite& c) { return c.enc == "IDEA"; }},
    {"SEED", [](const CipherSuite& c) { return c.enc == "SEED"; }},
    {"AES", [](const CipherSuite& c) { return c.enc == "AES"; }},
    {"AES128", [](const CipherSuite& c) { return c.enc == "AES" && c.enc_bits == 128; }},
    {"AES256", [](const CipherSuite& c) { return c.enc == "AES" && c.enc_bits == 256; }},
    {"AESGCM", [](const CipherSuite& c) { return c.enc == "AES" && c.mode == CipherMode::GCM; }},
    {"CAMELLIA", [](const CipherSuite& c) { return c.enc == "CAMELLIA"; }},
    {"CAMELLIA128", [](const CipherSuite& c) { return c.enc == "CAMELLIA" && c.enc_bits == 128; }},
    {"CAMELLIA256", [](const CipherSuite& c) { return c.enc == "CAMELLIA" && c.enc_bits == 256; }},

    {"MD5", [](const CipherSuite& c) { return c.mac == "MD5"; }},
    {"SHA1", [](const CipherSuite& c) { return c.mac == "SHA1"; }},
    {"SHA", [](const CipherSuite& c) { return c.mac == "SHA1"; }},
    {"SHA256", [](const CipherSuite& c) { return c.mac == "SHA256"; }},
    {"SHA384", [](const CipherSuite& c) { return c.mac == "SHA384"; }},

    {"SSLv3", [](const CipherSuite& c) { return c.min_version != ProtocolVersion::TLS1_2; }},
    {"TLSv1", [](const CipherSuite& c) { return c.min_version != ProtocolVersion::TLS1_2; }},
    {"TLSv1.2", [](const CipherSuite& c) { return c.min_version == ProtocolVersion::TLS1_2; }},

    {"EXP", export_bits},
    {"EXPORT", export_bits},
    {"EXPORT40", export_bits},
    {"EXPORT56", [](const CipherSuite&) { return false; }},
    {"LOW",
     [](const CipherSuite& c) { return registry::strength_for_bits(c.enc_bits) == StrengthClass::LOW; }},
    {"MEDIUM",
     [](const CipherSuite& c) { return registry::strength_for_bits(c.enc_bits) == StrengthClass::MEDIUM; }},
    {"HIGH",
     [](const CipherSuite& c) { return registry::strength_for_bits(c.enc_bits) == StrengthClass::HIGH; }},
};

const Alias* find_alias(std::string_view name)
{
    for (const auto& a : kAliases)
    {
        if (a.name == name)
            return &a;
    }
    return nullptr;
}

bool is_separator(char c)
{
    return c == ':' || c == ',' || c == ' ';
}

bool is_name_char(char c)
{
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '.';
}

std::string describe_char(char c)
{
    if (static_cast<unsigned char>(c) < 0x20 || static_cast<unsigned char>(c) >= 0x7f)
    {
        char buf[8];
        std::snprintf(buf, sizeof buf, "0x%02x", static_cast<unsigned char>(c));
        return buf;
    }
    return std::string("'") + c + "'";
}

using SuiteSet = std::unordered_set<const CipherSuite*>;

SuiteSet match_token(const registry::Registry& r, const SpecToken& tok)
{
    SuiteSet result;
    bool first = true;
    for (const auto& term : tok.terms())
    {
        auto matched = match_keyword(r, term);
        SuiteSet next(matched.begin(), matched.end());
        if (first)
        {
            result = std::move(next);
            first = false;
        }
        else
        {
            std::erase_if(result, [&](const CipherSuite* c) { return !next.contains(c); });
        }
    }
    return result;
}

struct Entry
{
    const CipherSuite* suite;
    bool active;
};

} // namespace

std::string_view to_string(SpecOp op)
{
    switch (op)
    {
    case SpecOp::INCLUDE:
        return "INCLUDE";
    case SpecOp::PERMANENT_DELETE:
        return "PERMANENT_DELETE";
    case SpecOp::DELETE:
        return "DELETE";
    case SpecOp::MOVE_TO_END:
        return "MOVE_TO_END";
    case SpecOp::SORT_BY_STRENGTH:
        return "SORT_BY_STRENGTH";
    }
    return "?";
}

std::vector<std::string> SpecToken::terms() const
{
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;)
    {
        auto pos = body.find('+', start);
        out.emplace_back(body.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        if (pos == std::string::npos)
            return out;
        start = pos + 1;
    }
}

std::vector<SpecToken> tokenize(std::string_view spec)
{
    if (spec.empty())
        throw SpecError("empty specification");

    std::vector<SpecToken> tokens;
    std::size_t pos = 0;
    const std::size_t n = spec.size();

    auto read_name = [&]() {
        std::size_t start = pos;
        while (pos < n && is_name_char(spec[pos]))
            ++pos;
        if (pos == start)
        {
            if (pos < n)
                throw SpecError("unexpected character " + describe_char(spec[pos]) + " at offset " +
                                std::to_string(pos));
            throw SpecError("missing cipher name at end of specification");
        }
        return std::string(spec.substr(start, pos - start));
    };

    while (pos < n)
    {
        const char ch = spec[pos];
        if (is_separator(ch))
        {
            ++pos;
            continue;
        }

        SpecOp op = SpecOp::INCLUDE;
        switch (ch)
        {
        case '!':
            op = SpecOp::PERMANENT_DELETE;
            ++pos;
            break;
        case '-':
            op = SpecOp::DELETE;
            ++pos;
            break;
        case '+':
            op = SpecOp::MOVE_TO_END;
            ++pos;
            break;
        case '@':
            op = SpecOp::SORT_BY_STRENGTH;
            ++pos;
            break;
        default:
            break;
        }

        if (op == SpecOp::SORT_BY_STRENGTH)
        {
            auto word = read_name();
            if (word != "STRENGTH")
                throw SpecError("unknown special command '@" + word + "'");
            if (pos < n && !is_separator(spec[pos]) && spec[pos] != '@')
                throw SpecError("unexpected text after @STRENGTH at offset " + std::to_string(pos));
            tokens.push_back({op, "STRENGTH"});
            continue;
        }

        std::string body = read_name();
        while (pos < n && spec[pos] == '+')
        {
            ++pos;
            body += '+';
            body += read_name();
        }
        tokens.push_back({op, std::move(body)});
    }
    return tokens;
}

bool is_keyword(std::string_view keyword)
{
    return find_alias(keyword) != nullptr;
}

std::vector<std::string_view> keywords()
{
    std::vector<std::string_view> out;
    for (const auto& a : kAliases)
        out.push_back(a.name);
    return out;
}

std::vector<const CipherSuite*> match_keyword(const registry::Registry& r, std::string_view keyword)
{
    std::vector<const CipherSuite*> out;
    if (const auto* exact = r.lookup_by_name(keyword))
    {
        out.push_back(exact);
        return out;
    }
    if (keyword == "DEFAULT" || keyword == "COMPLEMENTOFDEFAULT")
        throw SpecError("keyword '" + std::string(keyword) + "' is not supported (tool-version dependent)");
    const auto* alias = find_alias(keyword);
    if (!alias)
        throw SpecError("unknown cipher keyword '" + std::string(keyword) + "'");
    for (const auto& c : r.suites())
    {
        if (alias->match(c))
            out.push_back(&c);
    }
    return out;
}

std::vector<const CipherSuite*> expand(const registry::Registry& r, std::string_view spec)
{
    auto tokens = tokenize(spec);

    // Every live suite keeps a position; inactive ones form the pool that
    // INCLUDE draws from, in their current relative order.
    std::vector<Entry> list;
    list.reserve(r.size());
    for (const auto& c : r.suites())
        list.push_back({&c, false});

    for (const auto& tok : tokens)
    {
        if (tok.op == SpecOp::SORT_BY_STRENGTH)
        {
            auto mid = std::stable_partition(list.begin(), list.end(), [](const Entry& e) { return !e.active; });
            std::stable_sort(mid, list.end(), [](const Entry& a, const Entry& b) {
                return a.suite->enc_bits > b.suite->enc_bits;
            });
            continue;
        }

        const auto matched = match_token(r, tok);
        auto hit = [&](const Entry& e) { return matched.contains(e.suite); };

        switch (tok.op)
        {
        case SpecOp::INCLUDE: {
            auto mid = std::stable_partition(list.begin(), list.end(),
                                             [&](const Entry& e) { return e.active || !hit(e); });
            for (auto it = mid; it != list.end(); ++it)
                it->active = true;
            break;
        }
        case SpecOp::DELETE: {
            auto mid = std::stable_partition(list.begin(), list.end(),
                                             [&](const Entry& e) { return e.active && hit(e); });
            for (auto it = list.begin(); it != mid; ++it)
                it->active = false;
            break;
        }
        case SpecOp::MOVE_TO_END:
            std::stable_partition(list.begin(), list.end(), [&](const Entry& e) { return !(e.active && hit(e)); });
            break;
        case SpecOp::PERMANENT_DELETE:
            std::erase_if(list, hit);
            break;
        case SpecOp::SORT_BY_STRENGTH:
            break;
        }
    }

    std::vector<const CipherSuite*> out;
    for (const auto& e : list)
    {
        if (e.active)
            out.push_back(e.suite);
    }
    return out;
}

SpecDiff diff_specs(const registry::Registry& r, std::string_view a, std::string_view b)
{
    auto ea = expand(r, a);
    auto eb = expand(r, b);
    const std::set<const CipherSuite*> sa(ea.begin(), ea.end());
    const std::set<const CipherSuite*> sb(eb.begin(), eb.end());
    SpecDiff d;
    for (const auto* c : ea)
    {
        if (!sb.contains(c))
            d.only_in_a.push_back(c);
    }
    for (const auto* c : eb)
    {
        if (!sa.contains(c))
            d.only_in_b.push_back(c);
    }
    return d;
}

} // namespace tlsaudit::cipherspec
