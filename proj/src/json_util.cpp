#include "mobiload/json_util.hpp"

#include <fstream>

namespace mobiload::jsonutil {

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
    if (!obj.is_object()) fail(ErrorKind::InvalidConfig, std::string(where) + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (auto k : allowed) known = known || it.key() == k;
        if (!known) fail(ErrorKind::InvalidConfig, std::string(where) + ": unknown key \"" + it.key() + "\"");
    }
}

const json& at(const json& obj, std::string_view key, std::string_view where) {
    auto it = obj.find(key);
    if (it == obj.end()) fail(ErrorKind::InvalidConfig, std::string(where) + ": missing key \"" + std::string(key) + "\"");
    return *it;
}

DateRange date_range(const json& obj, std::string_view where) {
    check_keys(obj, {"start", "end"}, where);
    try {
        return parse_date_range(get<std::string>(obj, "start", where), get<std::string>(obj, "end", where));
    } catch (const Error& e) {
        fail(ErrorKind::InvalidConfig, std::string(where) + ": " + e.what());
    }
}

json to_json(const DateRange& r) { return json{{"start", format_date(r.first)}, {"end", format_date(r.last)}}; }

json parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::MissingFile, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::InvalidConfig, path + ": " + e.what());
    }
}

}  // namespace mobiload::jsonutil
