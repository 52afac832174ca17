#pragma once

#include "mobiload/error.hpp"
#include "mobiload/timeutil.hpp"

#include <json.hpp>

#include <initializer_list>
#include <string>
#include <string_view>

namespace mobiload::jsonutil {

using nlohmann::json;

// Unknown keys are configuration errors, so typos never pass silently.
void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view where);

const json& at(const json& obj, std::string_view key, std::string_view where);

template <typename T>
T get(const json& obj, std::string_view key, std::string_view where) {
    const json& v = at(obj, key, where);
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        fail(ErrorKind::InvalidConfig, std::string(where) + "." + std::string(key) + ": wrong type");
    }
}

template <typename T>
T get_or(const json& obj, std::string_view key, T fallback, std::string_view where) {
    if (!obj.contains(key)) return fallback;
    return get<T>(obj, key, where);
}

// {"start": "YYYY-MM-DD", "end": "YYYY-MM-DD"}
DateRange date_range(const json& obj, std::string_view where);
json to_json(const DateRange& r);

json parse_file(const std::string& path);

}  // namespace mobiload::jsonutil
