#include "tlsaudit/cli.hpp"

#include "tlsaudit/appcheck.hpp"
#include "tlsaudit/certparse.hpp"
#include "tlsaudit/cipherspec.hpp"
#include "tlsaudit/mocksrv.hpp"
#include "tlsaudit/probe.hpp"
#include "tlsaudit/report.hpp"
#include "tlsaudit/rules.hpp"

#include "CLI11.hpp"

#include <arpa/inet.h>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <thread>

namespace tlsaudit::cli
{

namespace
{

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int)
{
    g_stop = true;
}

struct Options
{
    std::string target;
    std::string starttls = "none";
    std::string sni;
    bool json = false;
    double timeout = 5.0;
    unsigned concurrency = 8;
    std::string registry_file;
    std::string http_path;
    bool http_plaintext = false;
    std::string hostname;

    std::string spec, spec_b;
    bool verbose = false;
    std::string lookup;

    std::string policy;
    int port = 0;
    std::string host = "127.0.0.1";

    std::string pem;
    std::string now;
};

bool ip_literal(const std::string& h)
{
    in6_addr buf{};
    return ::inet_pton(AF_INET, h.c_str(), &buf) == 1 || ::inet_pton(AF_INET6, h.c_str(), &buf) == 1;
}

registry::Registry load_registry(const Options& o)
{
    if (o.registry_file.empty())
        return registry::default_registry();
    return registry::load_registry_file(o.registry_file);
}

int cmd_scan(const Options& o, std::ostream& out, std::ostream& err)
{
    const auto reg = load_registry(o);
    probe::Endpoint e;
    auto [host, port] = net::split_host_port(o.target);
    e.host = host;
    e.port = port;
    e.starttls = *probe::parse_starttls(o.starttls);
    e.timeout = std::chrono::milliseconds(static_cast<long>(o.timeout * 1000));
    if (!o.sni.empty())
        e.sni_name = o.sni;

    const auto now = std::chrono::system_clock::now();
    probe::EndpointProfile profile;
    std::vector<Finding> findings;
    try
    {
        probe::ScanOptions so;
        so.concurrency = o.concurrency;
        profile = probe::scan(e, reg, so);
    }
    catch (const probe::UnreachableError& ex)
    {
        err << "error: " << o.target << " unreachable: " << ex.what() << "\n";
        return kExitError;
    }
    catch (const probe::StartTlsUnsupported& ex)
    {
        findings.push_back(rules::starttls_refused(ex.what()));
        auto r = report::make_report(e, profile, std::move(findings), reg, now);
        out << (o.json ? report::to_json(r, reg) + "\n" : report::to_text(r, reg));
        return kExitFindings;
    }

    std::string name = o.hostname;
    if (name.empty())
        name = e.sni_name.value_or(ip_literal(e.host) ? "" : e.host);
    auto cert_findings =
        cert::check_chain(profile.certificate_chain, name, std::chrono::floor<std::chrono::seconds>(now));

    std::vector<Finding> app_findings;
    if (!o.http_path.empty())
    {
        try
        {
            app_findings = app::run_checks(e, o.http_path,
                                           o.http_plaintext ? app::Transport::PLAINTEXT : app::Transport::TLS);
        }
        catch (const std::exception& ex)
        {
            profile.notes.push_back(std::string("HTTP checks NOT_EVALUATED: ") + ex.what());
        }
    }

    findings = rules::evaluate(profile, cert_findings, app_findings, reg);
    auto r = report::make_report(e, std::move(profile), std::move(findings), reg, now);
    out << (o.json ? report::to_json(r, reg) + "\n" : report::to_text(r, reg));
    return rules::max_severity(r.findings) == Severity::FAIL ? kExitFindings : kExitOk;
}

int cmd_expand(const Options& o, std::ostream& out)
{
    const auto reg = load_registry(o);
    for (const auto* c : cipherspec::expand(reg, o.spec))
        out << (o.verbose ? registry::describe(*c) : c->name) << "\n";
    return kExitOk;
}

int cmd_diff(const Options& o, std::ostream& out)
{
    const auto reg = load_registry(o);
    auto d = cipherspec::diff_specs(reg, o.spec, o.spec_b);
    for (const auto* c : d.only_in_a)
        out << "- " << c->name << "\n";
    for (const auto* c : d.only_in_b)
        out << "+ " << c->name << "\n";
    return kExitOk;
}

void print_suite(const registry::CipherSuite& c, std::ostream& out)
{
    const auto f = registry::classify(c);
    char id[8];
    std::snprintf(id, sizeof id, "0x%04X", c.id);
    out << id << "  " << registry::describe(c) << "\n";
    out << "        strength=" << to_string(f.strength_class) << " pfs=" << f.pfs << " aead=" << f.aead
        << " anonymous=" << f.anonymous << " null=" << f.null_cipher << " weak_hash=" << f.weak_hash
        << " export=" << f.export_grade << " min_version=" << to_string(c.min_version) << "\n";
}

int cmd_registry(const Options& o, std::ostream& out, std::ostream& err)
{
    const auto reg = load_registry(o);
    if (o.lookup.empty())
    {
        out << "# registry_version " << reg.version() << ", " << reg.size() << " suites\n";
        for (const auto& c : reg.suites())
            out << registry::describe(c) << "\n";
        return kExitOk;
    }
    const registry::CipherSuite* c = reg.lookup_by_name(o.lookup);
    if (!c)
    {
        try
        {
            std::size_t used = 0;
            const auto v = std::stoul(o.lookup, &used, 16);
            if (used == o.lookup.size() && v <= 0xFFFF)
                c = reg.lookup_by_id(static_cast<std::uint16_t>(v));
        }
        catch (const std::exception&)
        {
        }
    }
    if (!c)
    {
        err << "error: no suite named or numbered '" << o.lookup << "'\n";
        return kExitError;
    }
    print_suite(*c, out);
    return kExitOk;
}

int cmd_mock(const Options& o, std::ostream& out)
{
    auto policy = mock::load_policy_file(o.policy);
    mock::MockServer srv(policy, static_cast<std::uint16_t>(o.port), o.host);
    g_stop = false;
    auto old_int = std::signal(SIGINT, on_signal);
    auto old_term = std::signal(SIGTERM, on_signal);
    out << "listening on " << o.host << ":" << srv.port() << " policy "
        << (policy.name.empty() ? o.policy : policy.name) << std::endl;
    while (!g_stop)
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    srv.stop();
    std::signal(SIGINT, old_int);
    std::signal(SIGTERM, old_term);
    out << "stopped after " << srv.connections_handled() << " connections\n";
    for (const auto& v : srv.violations())
        out << "contract violation: " << v << "\n";
    return srv.contract_violated() ? kExitError : kExitOk;
}

cert::Timestamp parse_now(const std::string& s)
{
    if (s.empty())
        return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
    std::istringstream in(s);
    std::tm tm{};
    in >> std::get_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    if (in.fail())
        throw std::invalid_argument("--now expects YYYY-MM-DDTHH:MM:SSZ");
    return cert::Timestamp{std::chrono::seconds{::timegm(&tm)}};
}

int cmd_cert(const Options& o, std::ostream& out)
{
    auto chain = cert::load_pem_file(o.pem);
    if (chain.empty())
        throw std::invalid_argument("no CERTIFICATE block in " + o.pem);
    const auto now = parse_now(o.now);
    for (std::size_t i = 0; i < chain.size(); ++i)
    {
        auto s = cert::extract_summary(chain[i], static_cast<int>(i));
        out << "certificate " << i << "\n";
        out << "  subject CN: " << s.subject_cn.value_or("(none)") << "\n";
        for (const auto& n : s.san_dns_names)
            out << "  DNS: " << n << "\n";
        out << "  key: " << to_string(s.public_key_algorithm) << " " << s.public_key_bits << " bits\n";
        out << "  signature: " << to_string(s.signature_algorithm) << " (" << s.signature_oid << ")\n";
        out << "  valid: " << cert::format_time(s.not_before) << " .. " << cert::format_time(s.not_after) << "\n";
        out << "  self-signed: " << (s.is_self_signed ? "yes" : "no") << "\n";
    }
    auto findings = cert::check_chain(chain, o.hostname, now);
    if (findings.empty())
        out << "no findings\n";
    for (const auto& f : findings)
        out << to_string(f.severity) << " " << f.rule_id << ": " << f.evidence << "\n";
    return rules::max_severity(findings) == Severity::FAIL ? kExitFindings : kExitOk;
}

int cmd_catalogue(std::ostream& out)
{
    out << "# Rule catalogue (version " << rules::kCatalogueVersion << ")\n\n";
    out << "| rule_id | trigger | worst severity | reference | remediation |\n";
    out << "|---|---|---|---|---|\n";
    for (const auto& r : rules::catalogue())
    {
        std::string fix(r.remediation);
        for (std::size_t p; (p = fix.find('\n')) != std::string::npos;)
            fix.replace(p, 1, "<br>");
        for (std::size_t p = 0; (p = fix.find('|', p)) != std::string::npos; p += 2)
            fix.replace(p, 1, "\\|");
        out << "| " << r.rule_id << " | " << r.trigger << " | " << to_string(r.worst) << " | " << r.reference
            << " | " << (fix.empty() ? "" : "`" + fix + "`") << " |\n";
    }
    out << "\nGrade: A, capped at B by any WARN, at C by BEAST AFFECTED, at F by any FAIL.\n";
    out << "Missing evidence gives WARN with verdict UNKNOWN, never FAIL.\n";
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"TLS endpoint auditor", "tlsaudit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(report::kToolVersion));
    Options o;

    auto* scan = app.add_subcommand("scan", "probe a TLS endpoint and report findings");
    scan->add_option("target", o.target, "host:port")->required();
    scan->add_option("--starttls", o.starttls, "plaintext upgrade before TLS")
        ->check(CLI::IsMember({"none", "smtp", "imap", "pop3", "ldap"}, CLI::ignore_case));
    scan->add_option("--sni", o.sni, "server_name to send (default: the host, unless an address)");
    scan->add_flag("--json", o.json, "JSON report instead of text");
    scan->add_option("--timeout", o.timeout, "per-connection timeout in seconds")->check(CLI::Range(0.1, 600.0));
    scan->add_option("--concurrency", o.concurrency, "parallel probe connections")->check(CLI::Range(1u, 64u));
    scan->add_option("--registry", o.registry_file, "cipher registry TSV")->check(CLI::ExistingFile);
    scan->add_option("--http-path", o.http_path, "also run HSTS/cookie/BREACH checks on this path");
    scan->add_flag("--http-plaintext", o.http_plaintext, "HTTP checks without TLS (mock responder)");
    scan->add_option("--hostname", o.hostname, "name the certificate must cover");

    auto* expand = app.add_subcommand("expand", "list the suites a cipher string selects");
    expand->add_option("spec", o.spec, "cipher string")->required();
    expand->add_flag("-v,--verbose", o.verbose, "Kx/Au/Enc/Mac columns");
    expand->add_option("--registry", o.registry_file)->check(CLI::ExistingFile);

    auto* diff = app.add_subcommand("diff", "suites selected by one cipher string but not the other");
    diff->add_option("spec_a", o.spec)->required();
    diff->add_option("spec_b", o.spec_b)->required();
    diff->add_option("--registry", o.registry_file)->check(CLI::ExistingFile);

    auto* reg = app.add_subcommand("registry", "print the cipher registry or one entry");
    reg->add_option("--lookup", o.lookup, "suite name or hex id");
    reg->add_option("--registry", o.registry_file)->check(CLI::ExistingFile);

    auto* mock = app.add_subcommand("mock", "run the scripted responder until interrupted");
    mock->add_option("--policy", o.policy, "policy JSON")->required()->check(CLI::ExistingFile);
    mock->add_option("--port", o.port, "0 picks a free port")->check(CLI::Range(0, 65535));
    mock->add_option("--host", o.host, "bind address");

    auto* cert = app.add_subcommand("cert", "check a PEM certificate chain");
    cert->add_option("pem", o.pem)->required()->check(CLI::ExistingFile);
    cert->add_option("--hostname", o.hostname);
    cert->add_option("--now", o.now, "evaluate validity at this UTC time");

    auto* cat = app.add_subcommand("catalogue", "print the rule catalogue as markdown");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try
    {
        app.parse(rev);
    }
    catch (const CLI::CallForHelp&)
    {
        auto subs = app.get_subcommands();
        out << (subs.empty() ? app.help() : subs.front()->help());
        return kExitOk;
    }
    catch (const CLI::CallForVersion&)
    {
        out << report::kToolVersion << "\n";
        return kExitOk;
    }
    catch (const CLI::ParseError& e)
    {
        err << "error: " << e.what() << "\n\n";
        auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << sub->help();
        return kExitError;
    }

    try
    {
        if (*scan)
            return cmd_scan(o, out, err);
        if (*expand)
            return cmd_expand(o, out);
        if (*diff)
            return cmd_diff(o, out);
        if (*reg)
            return cmd_registry(o, out, err);
        if (*mock)
            return cmd_mock(o, out);
        if (*cert)
            return cmd_cert(o, out);
        if (*cat)
            return cmd_catalogue(out);
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}

} // namespace tlsaudit::cli
