#pragma once

#include <map>
#include <string>
#include <vector>

namespace quadpost {

/// Flat key = value configuration file: one pair per line, '#' comments,
/// whitespace-trimmed keys and values.
class FlatConfig {
  public:
    static FlatConfig from_file(const std::string& path);
    static FlatConfig from_string(const std::string& text);

    bool has(const std::string& key) const;
    std::string get(const std::string& key) const;  // throws if missing
    std::string get_or(const std::string& key, const std::string& dflt) const;
    bool get_bool(const std::string& key, bool dflt) const;
    int get_int(const std::string& key, int dflt) const;
    double get_double(const std::string& key, double dflt) const;
    std::vector<std::string> get_list(const std::string& key) const;  // empty ok

    const std::map<std::string, std::string>& entries() const { return kv_; }

  private:
    std::map<std::string, std::string> kv_;
    std::string source_;
};

}  // namespace quadpost
