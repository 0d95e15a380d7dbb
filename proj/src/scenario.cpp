#include "qtraj/scenario.hpp"

#include <cctype>
#include <sstream>

namespace qtraj {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool valid_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.') return false;
    return true;
}

} // namespace

Scenario parse_scenario(const std::string& text) {
    Scenario s;
    std::istringstream is(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string raw = line;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ScenarioError("unterminated section header", lineno,
                                    static_cast<int>(raw.find('[')) + 1);
            section = trim(line.substr(1, line.size() - 2));
            if (!valid_key(section))
                throw ScenarioError("invalid section name '" + section + "'", lineno, 1);
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ScenarioError("expected key = value", lineno, 1);
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (!valid_key(key))
            throw ScenarioError("invalid key '" + key + "'", lineno, 1);
        if (value.empty())
            throw ScenarioError("empty value for key '" + key + "'", lineno,
                                static_cast<int>(eq) + 2);
        std::string full = section.empty() ? key : section + "." + key;
        if (s.values.count(full))
            throw ScenarioError("duplicate key '" + full + "'", lineno, 1);
        if (full == "kind") {
            s.kind = value;
        } else if (full == "seed") {
            try {
                s.seed = std::stoull(value);
            } catch (...) {
                throw ScenarioError("seed must be a nonnegative integer", lineno,
                                    static_cast<int>(eq) + 2);
            }
            s.values[full] = value;
        } else if (full == "threads") {
            try {
                s.n_threads = std::stoi(value);
            } catch (...) {
                throw ScenarioError("threads must be an integer", lineno,
                                    static_cast<int>(eq) + 2);
            }
            s.values[full] = value;
        } else {
            s.values[full] = value;
        }
    }
    if (s.kind.empty()) throw ScenarioError("missing 'kind'", lineno, 1);
    return s;
}

double Scenario::get_num(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw ConfigError("scenario: missing key '" + key + "'");
    try {
        size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError("scenario: key '" + key + "' is not a number: " + it->second);
    }
}

double Scenario::get_num(const std::string& key, double fallback) const {
    return has(key) ? get_num(key) : fallback;
}

long Scenario::get_int(const std::string& key, long fallback) const {
    if (!has(key)) return fallback;
    const double v = get_num(key);
    const long l = static_cast<long>(v);
    if (static_cast<double>(l) != v)
        throw ConfigError("scenario: key '" + key + "' must be an integer");
    return l;
}

std::string Scenario::get_str(const std::string& key, const std::string& fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
}

std::string serialize_scenario(const Scenario& s) {
    std::ostringstream os;
    os << "kind = " << s.kind << "\n";
    for (const auto& [k, v] : s.values) os << k << " = " << v << "\n";
    return os.str();
}

} // namespace qtraj
