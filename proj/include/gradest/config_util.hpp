#pragma once

#include <algorithm>
#include <initializer_list>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "gradest/types.hpp"

namespace gradest {

/// Fail closed: any key outside `allowed` is a ConfigError.
inline void check_keys(const nlohmann::ordered_json& block, std::initializer_list<std::string_view> allowed,
                       const std::string& where) {
    if (!block.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& item : block.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
            throw ConfigError(where + ": unknown key '" + item.key() + "'");
    }
}

template <class T>
T require(const nlohmann::ordered_json& block, const char* key, const std::string& where) {
    if (!block.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
    try {
        return block.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

template <class T>
T optional(const nlohmann::ordered_json& block, const char* key, T fallback, const std::string& where) {
    if (!block.contains(key)) return fallback;
    return require<T>(block, key, where);
}

}  // namespace gradest
