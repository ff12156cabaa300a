#include "mcguard/config.hpp"

#include <fstream>
#include <sstream>

#include "mcguard/error.hpp"

#include <toml.hpp>

namespace mcguard {

const ConfigValue* ConfigTable::find(const std::string& key) const {
    auto it = values.find(key);
    return it == values.end() ? nullptr : &it->second;
}

std::string ConfigTable::where(const std::string& key) const { return path.empty() ? key : path + "." + key; }

bool ConfigTable::has(const std::string& key) const {
    return values.count(key) || tables.count(key) || arrays.count(key);
}

std::optional<std::string> ConfigTable::get_string(const std::string& key) const {
    const auto* v = find(key);
    if (!v) return std::nullopt;
    if (const auto* s = std::get_if<std::string>(&v->v)) return *s;
    throw ConfigError("'" + where(key) + "' must be a string");
}

std::optional<int64_t> ConfigTable::get_int(const std::string& key) const {
    const auto* v = find(key);
    if (!v) return std::nullopt;
    if (const auto* i = std::get_if<int64_t>(&v->v)) return *i;
    throw ConfigError("'" + where(key) + "' must be an integer");
}

std::optional<double> ConfigTable::get_double(const std::string& key) const {
    const auto* v = find(key);
    if (!v) return std::nullopt;
    if (const auto* d = std::get_if<double>(&v->v)) return *d;
    if (const auto* i = std::get_if<int64_t>(&v->v)) return static_cast<double>(*i);
    throw ConfigError("'" + where(key) + "' must be a number");
}

std::optional<bool> ConfigTable::get_bool(const std::string& key) const {
    const auto* v = find(key);
    if (!v) return std::nullopt;
    if (const auto* b = std::get_if<bool>(&v->v)) return *b;
    throw ConfigError("'" + where(key) + "' must be true or false");
}

std::optional<std::vector<std::string>> ConfigTable::get_string_list(const std::string& key) const {
    const auto* v = find(key);
    if (!v) return std::nullopt;
    const auto* a = std::get_if<ConfigValue::Array>(&v->v);
    if (!a) throw ConfigError("'" + where(key) + "' must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : *a) {
        const auto* s = std::get_if<std::string>(&e.v);
        if (!s) throw ConfigError("'" + where(key) + "' must be an array of strings");
        out.push_back(*s);
    }
    return out;
}

const ConfigTable* ConfigTable::table(const std::string& name) const {
    auto it = tables.find(name);
    return it == tables.end() ? nullptr : &it->second;
}

const std::vector<ConfigTable>& ConfigTable::array(const std::string& name) const {
    static const std::vector<ConfigTable> empty;
    auto it = arrays.find(name);
    return it == arrays.end() ? empty : it->second;
}

void ConfigTable::check_keys(std::initializer_list<std::string_view> allowed) const {
    auto ok = [&](const std::string& k) {
        for (auto a : allowed)
            if (a == k) return true;
        return false;
    };
    for (const auto& [k, _] : values)
        if (!ok(k)) throw ConfigError("unknown key '" + where(k) + "'");
    for (const auto& [k, _] : tables)
        if (!ok(k)) throw ConfigError("unknown table '" + where(k) + "'");
    for (const auto& [k, _] : arrays)
        if (!ok(k)) throw ConfigError("unknown table array '" + where(k) + "'");
}

// ---------------------------------------------------------------------------

namespace {

ConfigValue convert_value(const toml::node& n, const std::string& where);

ConfigTable convert_table(const toml::table& t, const std::string& path) {
    ConfigTable out;
    out.path = path;
    for (const auto& [k, v] : t) {
        const std::string key(k.str());
        const std::string where = path.empty() ? key : path + "." + key;
        if (const auto* sub = v.as_table()) {
            out.tables.emplace(key, convert_table(*sub, where));
        } else if (const auto* arr = v.as_array(); arr && arr->is_array_of_tables() && !arr->empty()) {
            auto& dst = out.arrays[key];
            for (const auto& e : *arr) dst.push_back(convert_table(*e.as_table(), where));
        } else {
            out.values.emplace(key, convert_value(v, where));
        }
    }
    return out;
}

ConfigValue convert_value(const toml::node& n, const std::string& where) {
    if (auto v = n.value_exact<bool>()) return {*v};
    if (auto v = n.value_exact<int64_t>()) return {*v};
    if (auto v = n.value_exact<double>()) return {*v};
    if (auto v = n.value_exact<std::string>()) return {*v};
    if (const auto* a = n.as_array()) {
        ConfigValue::Array out;
        for (const auto& e : *a) out.push_back(convert_value(e, where));
        return {out};
    }
    throw ConfigError("'" + where + "': unsupported value type");
}

}  // namespace

ConfigTable parse_config(std::string_view text) {
    try {
        return convert_table(toml::parse(text), "");
    } catch (const toml::parse_error& e) {
        throw ConfigError("line " + std::to_string(e.source().begin.line) + ": " + std::string(e.description()));
    }
}

ConfigTable load_config(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
}

}  // namespace mcguard
