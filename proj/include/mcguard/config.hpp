#pragma once

// TOML documents used by run configs and scenario specs, flattened into
// plain tables. Dates and times are not supported.
//
// Unknown keys are the caller's business: use ConfigTable::check_keys to
// reject typos.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mcguard {

struct ConfigValue {
    using Array = std::vector<ConfigValue>;
    std::variant<bool, int64_t, double, std::string, Array> v;

    bool operator==(const ConfigValue&) const = default;
};

class ConfigTable {
public:
    bool has(const std::string& key) const;

    // Typed getters throw ConfigError on a type mismatch, naming the key path.
    std::optional<std::string> get_string(const std::string& key) const;
    std::optional<int64_t> get_int(const std::string& key) const;
    std::optional<double> get_double(const std::string& key) const;  // ints widen
    std::optional<bool> get_bool(const std::string& key) const;
    std::optional<std::vector<std::string>> get_string_list(const std::string& key) const;

    const ConfigTable* table(const std::string& name) const;
    const std::vector<ConfigTable>& array(const std::string& name) const;

    // Throws ConfigError naming the first key not in `allowed` (values,
    // tables and arrays of tables alike).
    void check_keys(std::initializer_list<std::string_view> allowed) const;

    std::map<std::string, ConfigValue> values;
    std::map<std::string, ConfigTable> tables;
    std::map<std::string, std::vector<ConfigTable>> arrays;
    std::string path;  // dotted location, for error messages

private:
    const ConfigValue* find(const std::string& key) const;
    std::string where(const std::string& key) const;
};

// Throws ConfigError with the line number.
ConfigTable parse_config(std::string_view text);
ConfigTable load_config(const std::filesystem::path& file);

}  // namespace mcguard
