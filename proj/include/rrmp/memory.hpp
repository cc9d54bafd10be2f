#pragma once
// Append-only per-path store through which the reactive and reflection agents
// exchange sub-tasks, preliminary answers and reflections. One store is owned
// by exactly one path execution at a time; no internal synchronization.

#include <map>
#include <string>
#include <vector>

#include "rrmp/core.hpp"

namespace rrmp {

// Reserved keys written by the path engine.
inline constexpr const char* kKeySubtasks = "subtasks";
inline constexpr const char* kKeyPreliminary = "preliminary";
inline constexpr const char* kKeyReflections = "reflections";
inline constexpr const char* kKeyFinal = "final";

struct MemoryEntry {
    std::string value;
    Speaker author = Speaker::Reactive;
    int round = 0;
    bool operator==(const MemoryEntry&) const = default;
};

class MemoryStore {
public:
    // Appends value at the end of key's list; all other keys unchanged.
    void append(const std::string& key, const std::string& value, Speaker author, int round) {
        if (key.empty()) throw Error("EmptyKey", "memory key must be non-empty");
        if (value.empty()) throw Error("EmptyValue", "memory value must be non-empty");
        entries_[key].push_back(MemoryEntry{value, author, round});
    }

    // Full list for key, empty list for an absent key; never errors on absence.
    const std::vector<MemoryEntry>& retrieve(const std::string& key) const {
        auto it = entries_.find(key);
        return it == entries_.end() ? kEmpty : it->second;
    }

    // Sorted key list; duplicate-key appends list the key once.
    std::vector<std::string> keys() const {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto& [k, v] : entries_) out.push_back(k);
        return out;  // std::map iterates in sorted order
    }

    json to_json_value() const {
        json j = json::object();
        for (const auto& [key, list] : entries_) {
            json arr = json::array();
            for (const auto& e : list) {
                arr.push_back(json{{"value", e.value},
                                   {"author", to_string(e.author)},
                                   {"round", e.round}});
            }
            j[key] = std::move(arr);
        }
        return j;
    }

    bool operator==(const MemoryStore&) const = default;

private:
    inline static const std::vector<MemoryEntry> kEmpty{};
    std::map<std::string, std::vector<MemoryEntry>> entries_;
};

}  // namespace rrmp
