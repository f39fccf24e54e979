#pragma once

#include "tlsaudit/probe.hpp"
#include "tlsaudit/registry.hpp"
#include "tlsaudit/rules.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tlsaudit::report
{

inline constexpr std::string_view kSchemaVersion = "1";
inline constexpr std::string_view kToolVersion = "0.3.0";

struct EndpointEcho
{
    std::string host;
    std::uint16_t port = 0;
    probe::StartTls starttls = probe::StartTls::NONE;
    std::optional<std::string> sni_name;

    bool operator==(const EndpointEcho&) const = default;
};

struct Report
{
    std::string schema_version{kSchemaVersion};
    std::string tool_version{kToolVersion};
    std::string registry_version;
    std::string timestamp; // UTC, 2014-04-07T12:00:00Z
    EndpointEcho endpoint;
    probe::EndpointProfile profile;
    std::vector<Finding> findings;
    rules::Grade grade;
    std::vector<std::string> recommendations;
    /// Chains are collected, not validated against a trust store.
    std::string chain_validation = "NOT_EVALUATED";

    bool operator==(const Report&) const = default;
};

class ReportError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Grades and recommendations are derived from `findings`.
Report make_report(const probe::Endpoint& e, probe::EndpointProfile profile, std::vector<Finding> findings,
                   const registry::Registry& reg, std::chrono::system_clock::time_point now);

std::string to_json(const Report& r, const registry::Registry& reg = registry::default_registry());
/// Throws ReportError on anything that would not round-trip.
Report from_json(std::string_view text);

std::string to_text(const Report& r, const registry::Registry& reg = registry::default_registry());

} // namespace tlsaudit::report
