#include "tlsaudit/registry.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#ifndef TLSAUDIT_DATA_DIR
#define TLSAUDIT_DATA_DIR "data"
#endif

namespace tlsaudit::registry
{

namespace
{

std::vector<std::string_view> split_tabs(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;)
    {
        auto pos = line.find('\t', start);
        if (pos == std::string_view::npos)
        {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::optional<CipherMode> parse_mode(std::string_view s)
{
    if (s == "NONE")
        return CipherMode::NONE;
    if (s == "STREAM")
        return CipherMode::STREAM;
    if (s == "CBC")
        return CipherMode::CBC;
    if (s == "GCM")
        return CipherMode::GCM;
    return std::nullopt;
}

bool is_lower_hex(std::string_view s)
{
    for (char c : s)
    {
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f')))
            return false;
    }
    return true;
}

CipherSuite parse_row(std::string_view line, std::size_t lineno)
{
    auto cols = split_tabs(line);
    if (cols.size() != 9)
        throw LoadError("expected 9 tab-separated columns, got " + std::to_string(cols.size()), lineno);

    CipherSuite c;
    if (cols[0].size() != 4 || !is_lower_hex(cols[0]))
        throw LoadError("hex_id must be four lowercase hex digits", lineno);
    c.id = static_cast<std::uint16_t>(std::stoul(std::string(cols[0]), nullptr, 16));

    for (std::size_t i = 1; i < 9; ++i)
    {
        if (cols[i].empty())
            throw LoadError("empty column " + std::to_string(i + 1), lineno);
    }
    c.name = cols[1];
    c.kx = cols[2];
    c.au = cols[3];
    c.enc = cols[4];

    try
    {
        std::size_t used = 0;
        c.enc_bits = std::stoi(std::string(cols[5]), &used);
        if (used != cols[5].size() || c.enc_bits < 0)
            throw std::invalid_argument("bits");
    }
    catch (const std::exception&)
    {
        throw LoadError("enc_bits is not a non-negative integer", lineno);
    }

    auto mode = parse_mode(cols[6]);
    if (!mode)
        throw LoadError("unknown mode '" + std::string(cols[6]) + "'", lineno);
    c.mode = *mode;
    c.mac = cols[7];

    auto minv = parse_version(cols[8]);
    if (!minv || *minv == ProtocolVersion::SSL2)
        throw LoadError("unknown min_version '" + std::string(cols[8]) + "'", lineno);
    c.min_version = *minv;

    if ((c.enc == "NULL") != (c.enc_bits == 0))
        throw LoadError("enc NULL must coincide with enc_bits 0", lineno);
    if (c.mode == CipherMode::GCM && c.min_version != ProtocolVersion::TLS1_2)
        throw LoadError("GCM suites require min_version TLS1_2", lineno);
    return c;
}

} // namespace

std::string_view to_string(CipherMode m)
{
    switch (m)
    {
    case CipherMode::NONE:
        return "NONE";
    case CipherMode::STREAM:
        return "STREAM";
    case CipherMode::CBC:
        return "CBC";
    case CipherMode::GCM:
        return "GCM";
    }
    return "?";
}

std::string_view to_string(StrengthClass s)
{
    switch (s)
    {
    case StrengthClass::NULL_CLASS:
        return "NULL";
    case StrengthClass::LOW:
        return "LOW";
    case StrengthClass::MEDIUM:
        return "MEDIUM";
    case StrengthClass::HIGH:
        return "HIGH";
    }
    return "?";
}

StrengthClass strength_for_bits(int enc_bits)
{
    if (enc_bits >= 128)
        return StrengthClass::HIGH;
    if (enc_bits >= 112)
        return StrengthClass::MEDIUM;
    if (enc_bits >= 1)
        return StrengthClass::LOW;
    return StrengthClass::NULL_CLASS;
}

ClassificationFlags classify(const CipherSuite& c)
{
    ClassificationFlags f;
    f.pfs = c.kx == "DHE" || c.kx == "ECDHE";
    f.aead = c.mode == CipherMode::GCM;
    f.anonymous = c.au == "NONE";
    f.null_cipher = c.enc == "NULL";
    f.weak_hash = c.mac == "MD5";
    f.export_grade = c.enc_bits < 56;
    f.strength_class = strength_for_bits(c.enc_bits);
    return f;
}

std::string kx_label(const CipherSuite& c)
{
    const bool exp = !c.enc.empty() && c.enc != "NULL" && c.enc_bits < 56;
    if (c.kx == "ECDHE")
        return "ECDH";
    if (c.kx == "DHE")
        return exp ? "DH(512)" : "DH";
    if (c.kx == "RSA" && exp)
        return "RSA(512)";
    return c.kx;
}

std::string au_label(const CipherSuite& c)
{
    return c.au == "NONE" ? "None" : c.au;
}

std::string enc_label(const CipherSuite& c)
{
    if (c.enc == "NULL")
        return "None";
    std::string name = c.enc;
    if (c.enc == "AES" && c.mode == CipherMode::GCM)
        name = "AESGCM";
    else if (c.enc == "CAMELLIA")
        name = "Camellia";
    return name + "(" + std::to_string(c.enc_bits) + ")";
}

std::string mac_label(const CipherSuite& c)
{
    return c.mac;
}

std::string describe(const CipherSuite& c)
{
    const bool exp = c.enc != "NULL" && c.enc_bits < 56;
    const char* proto = c.min_version == ProtocolVersion::TLS1_2 ? "TLSv1.2" : "SSLv3";
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-23s %s Kx=%-8s Au=%-4s Enc=%-9s Mac=%-4s%s", c.name.c_str(), proto,
                  kx_label(c).c_str(), au_label(c).c_str(), enc_label(c).c_str(), mac_label(c).c_str(),
                  exp ? " export" : "");
    return buf;
}

Registry::Registry(std::vector<CipherSuite> rows, std::string version)
    : rows_(std::move(rows))
    , version_(std::move(version))
{
    for (std::size_t i = 0; i < rows_.size(); ++i)
    {
        if (!by_id_.emplace(rows_[i].id, i).second)
        {
            char hex[8];
            std::snprintf(hex, sizeof hex, "%04x", rows_[i].id);
            throw LoadError(std::string("duplicate suite id 0x") + hex, 0);
        }
        if (!by_name_.emplace(rows_[i].name, i).second)
            throw LoadError("duplicate suite name " + rows_[i].name, 0);
    }
}

const CipherSuite* Registry::lookup_by_name(std::string_view name) const
{
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : &rows_[it->second];
}

const CipherSuite* Registry::lookup_by_id(std::uint16_t id) const
{
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &rows_[it->second];
}

std::size_t Registry::index_of(const CipherSuite& c) const
{
    return by_id_.at(c.id);
}

Registry load_registry(std::string_view document)
{
    std::vector<CipherSuite> rows;
    std::string version;
    std::map<std::uint16_t, std::size_t> seen_ids;
    std::map<std::string, std::size_t, std::less<>> seen_names;

    std::size_t lineno = 0;
    std::size_t start = 0;
    while (start <= document.size())
    {
        auto end = document.find('\n', start);
        if (end == std::string_view::npos)
            end = document.size();
        auto line = document.substr(start, end - start);
        start = end + 1;
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (line.empty())
        {
            if (end == document.size())
                break;
            continue;
        }
        if (line.front() == '#')
        {
            constexpr std::string_view tag = "# registry_version ";
            if (line.starts_with(tag))
                version = line.substr(tag.size());
            continue;
        }
        auto row = parse_row(line, lineno);
        if (auto [it, ok] = seen_ids.emplace(row.id, lineno); !ok)
            throw LoadError("duplicate suite id (first defined on line " + std::to_string(it->second) + ")",
                            lineno);
        if (auto [it, ok] = seen_names.emplace(row.name, lineno); !ok)
            throw LoadError("duplicate suite name '" + row.name + "' (first defined on line " +
                                std::to_string(it->second) + ")",
                            lineno);
        rows.push_back(std::move(row));
    }
    return Registry(std::move(rows), std::move(version));
}

Registry load_registry_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw LoadError("cannot open registry file " + path.string(), 0);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_registry(ss.str());
}

std::filesystem::path default_registry_path()
{
    if (const char* env = std::getenv("TLSAUDIT_REGISTRY"); env && *env)
        return env;
    return std::filesystem::path(TLSAUDIT_DATA_DIR) / "registry.tsv";
}

const Registry& default_registry()
{
    static const Registry reg = load_registry_file(default_registry_path());
    return reg;
}

} // namespace tlsaudit::registry
