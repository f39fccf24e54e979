#include "tlsaudit/report.hpp"

#include "tlsaudit/certparse.hpp"

#include "json.hpp"

#include <cstdio>
#include <sstream>

namespace tlsaudit::report
{

using nlohmann::json;

namespace
{

std::string hex_id(std::uint16_t id)
{
    char buf[8];
    std::snprintf(buf, sizeof buf, "0x%04X", id);
    return buf;
}

json opt(const auto& v)
{
    return v ? json(*v) : json(nullptr);
}

json profile_json(const probe::EndpointProfile& p, const registry::Registry& reg)
{
    json j;
    j["versions_supported"] = json::array();
    for (auto v : p.versions_supported)
        j["versions_supported"].push_back(to_string(v));
    j["sslv2_accepted"] = p.sslv2_accepted;
    j["ciphers_by_version"] = json::object();
    for (const auto& [v, ids] : p.ciphers_by_version)
    {
        auto& arr = j["ciphers_by_version"][std::string(to_string(v))] = json::array();
        for (auto id : ids)
        {
            const auto* c = reg.lookup_by_id(id);
            arr.push_back({{"id", hex_id(id)}, {"name", c ? json(c->name) : json(nullptr)}});
        }
    }
    j["server_order_preference"] = json::object();
    for (const auto& [v, o] : p.server_order_preference)
        j["server_order_preference"][std::string(to_string(v))] = to_string(o);
    j["tls_compression"] = opt(p.tls_compression);
    j["secure_renegotiation"] = to_string(p.secure_renegotiation);
    j["heartbeat"] = {{"verdict", to_string(p.heartbeat)}, {"extension_offered", p.heartbeat_extension_offered}};
    j["ocsp_stapled"] = opt(p.ocsp_stapled);
    j["dh_prime_bits"] = opt(p.dh_prime_bits);
    j["certificate_chain"] = json::array();
    for (const auto& der : p.certificate_chain)
        j["certificate_chain"].push_back(base64_encode(der));
    j["pfs_available"] = p.pfs_available;
    j["notes"] = p.notes;
    return j;
}

template <class T>
T need(std::optional<T> v, const std::string& what)
{
    if (!v)
        throw ReportError("bad value for " + what);
    return *v;
}

ProtocolVersion version_key(const std::string& s)
{
    auto v = need(parse_version(s), "version '" + s + "'");
    if (v == ProtocolVersion::SSL2)
        throw ReportError("SSL2 is reported through sslv2_accepted");
    return v;
}

std::uint16_t parse_hex_id(const std::string& s)
{
    unsigned v = 0;
    char tail = 0;
    if (s.size() != 6 || std::sscanf(s.c_str(), "0x%4x%c", &v, &tail) != 1)
        throw ReportError("bad suite id '" + s + "'");
    return static_cast<std::uint16_t>(v);
}

probe::EndpointProfile profile_from(const json& j)
{
    probe::EndpointProfile p;
    for (const auto& v : j.at("versions_supported"))
        p.versions_supported.insert(version_key(v.get<std::string>()));
    p.sslv2_accepted = j.at("sslv2_accepted").get<bool>();
    for (const auto& [k, arr] : j.at("ciphers_by_version").items())
    {
        auto& ids = p.ciphers_by_version[version_key(k)];
        for (const auto& e : arr)
            ids.push_back(parse_hex_id(e.at("id").get<std::string>()));
    }
    for (const auto& [k, o] : j.at("server_order_preference").items())
        p.server_order_preference[version_key(k)] =
            need(probe::parse_order_preference(o.get<std::string>()), "server_order_preference");
    if (!j.at("tls_compression").is_null())
        p.tls_compression = j["tls_compression"].get<bool>();
    p.secure_renegotiation =
        need(probe::parse_renegotiation(j.at("secure_renegotiation").get<std::string>()), "secure_renegotiation");
    const auto& hb = j.at("heartbeat");
    p.heartbeat = need(wire::parse_heartbeat_verdict(hb.at("verdict").get<std::string>()), "heartbeat.verdict");
    p.heartbeat_extension_offered = hb.at("extension_offered").get<bool>();
    if (!j.at("ocsp_stapled").is_null())
        p.ocsp_stapled = j["ocsp_stapled"].get<bool>();
    if (!j.at("dh_prime_bits").is_null())
        p.dh_prime_bits = j["dh_prime_bits"].get<int>();
    for (const auto& c : j.at("certificate_chain"))
        p.certificate_chain.push_back(base64_decode(c.get<std::string>()));
    p.pfs_available = j.at("pfs_available").get<bool>();
    p.notes = j.at("notes").get<std::vector<std::string>>();
    return p;
}

const char* mark(Severity s)
{
    switch (s)
    {
    case Severity::FAIL:
        return "[FAIL]";
    case Severity::WARN:
        return "[WARN]";
    case Severity::INFO:
        return "[INFO]";
    case Severity::OK:
        return "[ OK ]";
    }
    return "[????]";
}

std::string yes_no(const std::optional<bool>& b)
{
    return b ? (*b ? "yes" : "no") : "unknown";
}

} // namespace

Report make_report(const probe::Endpoint& e, probe::EndpointProfile profile, std::vector<Finding> findings,
                   const registry::Registry& reg, std::chrono::system_clock::time_point now)
{
    Report r;
    r.registry_version = reg.version();
    r.timestamp = cert::format_time(std::chrono::floor<std::chrono::seconds>(now));
    r.endpoint = {e.host, e.port, e.starttls, e.sni_name};
    r.profile = std::move(profile);
    r.grade = rules::grade(findings);
    r.recommendations = rules::recommend(findings);
    r.findings = std::move(findings);
    return r;
}

std::string to_json(const Report& r, const registry::Registry& reg)
{
    json j;
    j["schema_version"] = r.schema_version;
    j["tool_version"] = r.tool_version;
    j["registry_version"] = r.registry_version;
    j["timestamp"] = r.timestamp;
    j["endpoint"] = {{"host", r.endpoint.host},
                     {"port", r.endpoint.port},
                     {"starttls", to_string(r.endpoint.starttls)},
                     {"sni_name", opt(r.endpoint.sni_name)}};
    j["profile"] = profile_json(r.profile, reg);
    j["findings"] = json::array();
    for (const auto& f : r.findings)
    {
        j["findings"].push_back({{"rule_id", f.rule_id},
                                 {"severity", to_string(f.severity)},
                                 {"verdict", f.verdict ? json(to_string(*f.verdict)) : json(nullptr)},
                                 {"evidence", f.evidence},
                                 {"remediation", f.remediation}});
    }
    j["grade"] = {{"letter", std::string(1, r.grade.letter)}, {"caps_applied", r.grade.caps_applied}};
    j["recommendations"] = r.recommendations;
    j["chain_validation"] = r.chain_validation;
    return j.dump(2);
}

Report from_json(std::string_view text)
{
    try
    {
        auto j = json::parse(text);
        Report r;
        r.schema_version = j.at("schema_version").get<std::string>();
        if (r.schema_version != kSchemaVersion)
            throw ReportError("unsupported schema_version " + r.schema_version);
        r.tool_version = j.at("tool_version").get<std::string>();
        r.registry_version = j.at("registry_version").get<std::string>();
        r.timestamp = j.at("timestamp").get<std::string>();
        const auto& e = j.at("endpoint");
        r.endpoint.host = e.at("host").get<std::string>();
        r.endpoint.port = e.at("port").get<std::uint16_t>();
        r.endpoint.starttls = need(probe::parse_starttls(e.at("starttls").get<std::string>()), "starttls");
        if (!e.at("sni_name").is_null())
            r.endpoint.sni_name = e["sni_name"].get<std::string>();
        r.profile = profile_from(j.at("profile"));
        for (const auto& f : j.at("findings"))
        {
            Finding x;
            x.rule_id = f.at("rule_id").get<std::string>();
            x.severity = need(parse_severity(f.at("severity").get<std::string>()), "severity");
            if (!f.at("verdict").is_null())
                x.verdict = need(parse_verdict(f["verdict"].get<std::string>()), "verdict");
            x.evidence = f.at("evidence").get<std::string>();
            x.remediation = f.at("remediation").get<std::string>();
            r.findings.push_back(std::move(x));
        }
        const auto letter = j.at("grade").at("letter").get<std::string>();
        if (letter.size() != 1 || std::string_view("ABCF").find(letter[0]) == std::string_view::npos)
            throw ReportError("bad grade letter '" + letter + "'");
        r.grade.letter = letter[0];
        r.grade.caps_applied = j["grade"].at("caps_applied").get<std::vector<std::string>>();
        r.recommendations = j.at("recommendations").get<std::vector<std::string>>();
        r.chain_validation = j.at("chain_validation").get<std::string>();
        return r;
    }
    catch (const json::exception& err)
    {
        throw ReportError(std::string("report JSON: ") + err.what());
    }
    catch (const std::invalid_argument& err)
    {
        throw ReportError(std::string("report JSON: ") + err.what());
    }
}

std::string to_text(const Report& r, const registry::Registry& reg)
{
    std::ostringstream out;
    const auto& p = r.profile;
    out << "tlsaudit " << r.tool_version << "  registry " << r.registry_version << "  " << r.timestamp << "\n";
    out << "endpoint " << r.endpoint.host << ":" << r.endpoint.port;
    if (r.endpoint.starttls != probe::StartTls::NONE)
        out << " (STARTTLS " << to_string(r.endpoint.starttls) << ")";
    if (r.endpoint.sni_name)
        out << " sni=" << *r.endpoint.sni_name;
    out << "\n\n";

    out << "Protocols:";
    if (p.sslv2_accepted)
        out << " " << display_name(ProtocolVersion::SSL2);
    for (auto v : p.versions_supported)
        out << " " << display_name(v);
    if (!p.sslv2_accepted && p.versions_supported.empty())
        out << " none";
    out << "\n";
    for (const auto& [v, ids] : p.ciphers_by_version)
    {
        out << "  " << display_name(v) << " (" << ids.size() << " suites";
        if (auto it = p.server_order_preference.find(v); it != p.server_order_preference.end())
            out << ", order " << to_string(it->second);
        out << ")\n";
        for (auto id : ids)
        {
            const auto* c = reg.lookup_by_id(id);
            out << "    " << hex_id(id) << "  " << (c ? registry::describe(*c) : std::string("(not in registry)"))
                << "\n";
        }
    }
    out << "TLS compression: " << yes_no(p.tls_compression) << "\n";
    out << "Secure renegotiation: " << to_string(p.secure_renegotiation) << "\n";
    out << "Heartbeat: " << (p.heartbeat_extension_offered ? "offered" : "not offered") << ", "
        << to_string(p.heartbeat) << "\n";
    out << "OCSP stapling: " << yes_no(p.ocsp_stapled) << "\n";
    out << "DH prime: " << (p.dh_prime_bits ? std::to_string(*p.dh_prime_bits) + " bits" : "n/a") << "\n";
    out << "Forward secrecy: " << (p.pfs_available ? "yes" : "no") << "\n";
    out << "Certificates: " << p.certificate_chain.size() << " (chain validation " << r.chain_validation << ")\n";
    for (const auto& n : p.notes)
        out << "note: " << n << "\n";

    out << "\nFindings:\n";
    for (auto s : {Severity::FAIL, Severity::WARN, Severity::INFO, Severity::OK})
    {
        for (const auto& f : r.findings)
        {
            if (f.severity != s)
                continue;
            out << mark(s) << " " << f.rule_id;
            if (f.verdict)
                out << " (" << to_string(*f.verdict) << ")";
            out << ": " << f.evidence << "\n";
            if (s != Severity::OK && !f.remediation.empty())
            {
                std::istringstream lines(f.remediation);
                for (std::string l; std::getline(lines, l);)
                    out << "         fix: " << l << "\n";
            }
        }
    }

    out << "\nGrade: " << r.grade.letter;
    if (!r.grade.caps_applied.empty())
    {
        out << " (capped by";
        for (const auto& c : r.grade.caps_applied)
            out << " " << c;
        out << ")";
    }
    out << "\n";
    if (!r.recommendations.empty())
    {
        out << "\nRecommended configuration:\n";
        for (const auto& rec : r.recommendations)
        {
            std::istringstream lines(rec);
            for (std::string l; std::getline(lines, l);)
                out << "  " << l << "\n";
        }
    }
    return out.str();
}

} // namespace tlsaudit::report
