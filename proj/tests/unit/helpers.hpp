#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace testutil
{

inline std::filesystem::path fixture(const std::string& rel)
{
    return std::filesystem::path(TLSAUDIT_FIXTURES) / rel;
}

inline std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
    {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        out.push_back(line);
    }
    return out;
}

struct OracleCase
{
    std::string spec;
    std::vector<std::string> names;
};

// "spec\t<spec>" then names, one per line, then "end".
inline std::vector<OracleCase> load_oracle(const std::filesystem::path& p)
{
    std::vector<OracleCase> cases;
    OracleCase cur;
    bool open = false;
    for (auto& line : lines(slurp(p)))
    {
        if (line.rfind("spec\t", 0) == 0)
        {
            cur = {line.substr(5), {}};
            open = true;
        }
        else if (line == "end" && open)
        {
            cases.push_back(std::move(cur));
            open = false;
        }
        else if (open && !line.empty())
        {
            cur.names.push_back(line);
        }
    }
    return cases;
}

} // namespace testutil
