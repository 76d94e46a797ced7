#include "cpm/task.hpp"

#include "cpm/errors.hpp"

namespace cpm {

const char* to_string(Relation r) {
    switch (r) {
        case Relation::Align: return "align";
        case Relation::Tilt: return "tilt";
        case Relation::FacingUp: return "facing-up";
        case Relation::Contain: return "contain";
        case Relation::Touch: return "touch";
        case Relation::Place: return "place";
    }
    return "?";
}

Relation relation_from_string(const std::string& name) {
    for (Relation r : all_relations())
        if (name == to_string(r)) return r;
    std::string valid;
    for (Relation r : all_relations()) valid += std::string(" ") + to_string(r);
    throw ArgumentError("unknown relation '" + name + "'; valid:" + valid);
}

std::vector<Relation> all_relations() {
    return {Relation::Align, Relation::Tilt,  Relation::FacingUp,
            Relation::Contain, Relation::Touch, Relation::Place};
}

const TaskDefinition& pour_task() {
    static const TaskDefinition def{
        "pour",
        {{Relation::Align, "rim", "rim"},
         {Relation::Tilt, "body", "body"},
         {Relation::FacingUp, "body", "handle"}}};
    return def;
}

const TaskDefinition& place_task() {
    static const TaskDefinition def{
        "place",
        {{Relation::Contain, "body", "head"},
         {Relation::Touch, "bottom", "tip"},
         {Relation::Place, "body", "body"}}};
    return def;
}

const TaskDefinition& task_by_name(const std::string& name) {
    if (name == "pour") return pour_task();
    if (name == "place") return place_task();
    throw ArgumentError("unknown task '" + name + "'; valid: pour place");
}

const std::vector<std::string>& task_vocabulary(const std::string& task_name) {
    static const std::vector<std::string> pour_vocab{"rim", "body", "handle"};
    static const std::vector<std::string> place_vocab{"tip", "head", "body", "bottom", "opening"};
    if (task_name == "pour") return pour_vocab;
    if (task_name == "place") return place_vocab;
    throw ArgumentError("unknown task '" + task_name + "'; valid: pour place");
}

}  // namespace cpm
