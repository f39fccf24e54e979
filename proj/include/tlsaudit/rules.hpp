#pragma once

#include "tlsaudit/probe.hpp"
#include "tlsaudit/registry.hpp"
#include "tlsaudit/types.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace tlsaudit::rules
{

/// Bumped whenever a trigger, severity or grading cap changes.
inline constexpr std::string_view kCatalogueVersion = "1";

struct RuleInfo
{
    std::string_view rule_id;
    std::string_view trigger;
    /// Highest severity on evidence; missing evidence is WARN/UNKNOWN.
    Severity worst = Severity::OK;
    /// Public identifier of the weakness (CVE or RFC).
    std::string_view reference;
    std::string_view remediation;
};

/// Every rule id the tool can emit, profile rules first in evaluation order.
const std::vector<RuleInfo>& catalogue();
const RuleInfo* find_rule(std::string_view rule_id);

inline constexpr std::string_view kRecommendedSuites =
    "SSLCipherSuite ECDH@STRENGTH:DH@STRENGTH:HIGH:!RC4:!MD5:!DES:!aNULL:!eNULL";

/// One finding per profile rule, in catalogue order, followed by `cert` and
/// `app` unchanged.
std::vector<Finding> evaluate(const probe::EndpointProfile& p, const std::vector<Finding>& cert,
                              const std::vector<Finding>& app,
                              const registry::Registry& reg = registry::default_registry());

struct Grade
{
    char letter = 'A';
    std::vector<std::string> caps_applied;

    bool operator==(const Grade&) const = default;
};

/// A, capped at B by any WARN, C by BEAST AFFECTED, F by any FAIL.
Grade grade(const std::vector<Finding>& findings);

/// Remediation lines for every finding above OK, first occurrence wins.
std::vector<std::string> recommend(const std::vector<Finding>& findings);

Severity max_severity(const std::vector<Finding>& findings);

/// Finding used when a STARTTLS dialogue refuses the upgrade.
Finding starttls_refused(const std::string& why);

} // namespace tlsaudit::rules
