#include "quadpost/flat_config.hpp"

#include <fstream>
#include <sstream>

#include "quadpost/errors.hpp"

namespace quadpost {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

FlatConfig FlatConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    FlatConfig cfg = from_string(ss.str());
    cfg.source_ = path;
    return cfg;
}

FlatConfig FlatConfig::from_string(const std::string& text) {
    FlatConfig cfg;
    cfg.source_ = "<string>";
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw InvalidConfig("config line " + std::to_string(lineno) +
                                ": expected key = value");
        }
        cfg.kv_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
}

bool FlatConfig::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string FlatConfig::get(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) {
        throw InvalidConfig(source_ + ": missing required key '" + key + "'");
    }
    return it->second;
}

std::string FlatConfig::get_or(const std::string& key, const std::string& dflt) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
}

bool FlatConfig::get_bool(const std::string& key, bool dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw InvalidConfig("key '" + key + "': expected a boolean, got '" + v + "'");
}

int FlatConfig::get_int(const std::string& key, int dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        throw InvalidConfig("key '" + key + "': expected an integer, got '" +
                            it->second + "'");
    }
}

double FlatConfig::get_double(const std::string& key, double dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw InvalidConfig("key '" + key + "': expected a number, got '" +
                            it->second + "'");
    }
}

std::vector<std::string> FlatConfig::get_list(const std::string& key) const {
    std::vector<std::string> out;
    auto it = kv_.find(key);
    if (it == kv_.end() || it->second.empty()) return out;
    std::size_t start = 0;
    const std::string& v = it->second;
    while (true) {
        std::size_t pos = v.find(',', start);
        std::string item =
            trim(pos == std::string::npos ? v.substr(start) : v.substr(start, pos - start));
        if (!item.empty()) out.push_back(item);
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace quadpost
