#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace idol::util {

// Flat configuration store for "key = value" files with dotted key names.
// Lines starting with '#' and blank lines are skipped. Later assignments win,
// and command line overrides are applied through set(). Readers record which
// keys they touched so that leftover keys can be rejected as typos.
class KeyVal {
public:
    KeyVal() = default;

    static KeyVal parse_file(const std::string& path);
    static KeyVal parse_text(const std::string& text, const std::string& origin = "<string>");

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::string require_string(const std::string& key) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    // Throws ConfigError naming every key that was never read.
    void reject_unknown() const;

    // Canonical sorted "key = value" dump; its checksum identifies a run
    // configuration in checkpoints and metric files.
    std::string canonical_text() const;
    std::string config_hash() const;

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> consumed_;
    std::string origin_ = "<empty>";
};

} // namespace idol::util
